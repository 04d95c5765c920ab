#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace b2u {

/// (batch, channels, height, width).
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const noexcept {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }

    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense row-major 4-D float32 array.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(shape); }
    static Tensor scalar(float value) { return Tensor({1, 1, 1, 1}, value); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    float* ptr() noexcept { return data_.data(); }
    const float* ptr() const noexcept { return data_.data(); }

    std::size_t offset(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    float& at(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
    float at(int n, int c, int h, int w) const noexcept { return data_[offset(n, c, h, w)]; }

    float item() const;

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool value) noexcept { requires_grad_ = value; }

    /// Copy of images [first, first + count) along the batch axis.
    Tensor batch_slice(int first, int count) const;
    /// Copy of channels [first, first + count).
    Tensor channel_slice(int first, int count) const;

    /// Same data, reinterpreted with a new shape of equal element count.
    Tensor reshaped(Shape shape) const;

    bool bitwise_equal(const Tensor& other) const;

private:
    Shape shape_{};
    std::vector<float> data_;
    bool requires_grad_ = false;
};

/// Stack equally shaped tensors along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

/// Throws ShapeError naming the first mismatching axis.
void require_same_shape(const Shape& a, const Shape& b, const std::string& what);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace b2u
