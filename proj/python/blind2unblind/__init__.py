"""Blind-spot self-supervised image denoiser (C++ core)."""

from ._core import (
    Checkpoint,
    ConfigError,
    Error,
    FormatError,
    IoError,
    ShapeError,
    ValueError,
    casewise_expansion,
    corrupt,
    default_config,
    denoise,
    evaluate,
    interpolate_neighbors,
    lambda_at,
    lr_at_epoch,
    make_texture,
    map_blind_spots,
    masked_volume,
    psnr,
    read_image,
    revisible_loss,
    ssim,
    train,
    weighted_combination,
    write_image,
)

__all__ = [name for name in dir() if not name.startswith("_")]
