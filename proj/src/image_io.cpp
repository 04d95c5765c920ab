#include "b2u/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "b2u/error.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageFile decode_netpbm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2) throw FormatError("truncated header", bytes.size());
    if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("unsupported magic; expected P5 or P6", 0);
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    auto skip = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) -> long {
        skip();
        const std::size_t begin = pos;
        long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1'000'000'000L) throw FormatError(std::string(what) + " too large", begin);
            ++pos;
        }
        if (pos == begin) {
            if (pos >= bytes.size()) throw FormatError("truncated header reading " + std::string(what), pos);
            throw FormatError("expected " + std::string(what), pos);
        }
        return value;
    };
    if (bytes.size() > 2 && !std::isspace(bytes[2])) throw FormatError("expected whitespace after magic", 2);
    const long width = number("width");
    const long height = number("height");
    skip();
    const std::size_t maxval_at = pos;
    const long maxval = number("maxval");
    if (width <= 0 || height <= 0) throw FormatError("image dimensions must be positive", maxval_at);
    if (maxval != 255 && maxval != 65535) {
        throw FormatError("unsupported maxval " + std::to_string(maxval) + " (need 255 or 65535)", maxval_at);
    }
    if (pos >= bytes.size()) throw FormatError("truncated header", pos);
    if (!std::isspace(bytes[pos])) throw FormatError("expected whitespace after maxval", pos);
    ++pos;

    const int bytes_per = maxval == 255 ? 1 : 2;
    const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
    const std::size_t need = samples * bytes_per;
    if (bytes.size() - pos < need) {
        throw FormatError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - pos),
                          bytes.size());
    }
    ImageFile img{Tensor({1, channels, static_cast<int>(height), static_cast<int>(width)}),
                  bytes_per == 1 ? 8 : 16};
    const double scale = 1.0 / static_cast<double>(maxval);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                const std::size_t idx = (static_cast<std::size_t>(y) * width + x) * channels + c;
                unsigned v = bytes_per == 1 ? bytes[pos + idx]
                                            : (static_cast<unsigned>(bytes[pos + 2 * idx]) << 8) |
                                                  bytes[pos + 2 * idx + 1];
                img.pixels.at(0, c, y, x) = static_cast<float>(v * scale);
            }
    return img;
}

ImageFile read_image(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode_netpbm(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

std::vector<std::uint8_t> encode_netpbm(const ImageFile& image) {
    const Shape s = image.pixels.shape();
    if (s.n != 1) throw ShapeError("n", "write_image expects a single image, got " + s.str());
    if (s.c != 1 && s.c != 3) throw ShapeError("c", "write_image supports 1 or 3 channels, got " + s.str());
    if (image.bit_depth != 8 && image.bit_depth != 16) {
        throw ValueError("bit depth must be 8 or 16, got " + std::to_string(image.bit_depth));
    }
    const unsigned maxval = image.bit_depth == 8 ? 255u : 65535u;
    std::ostringstream header;
    header << (s.c == 1 ? "P5" : "P6") << '\n' << s.w << ' ' << s.h << '\n' << maxval << '\n';
    const std::string h = header.str();
    std::vector<std::uint8_t> out(h.begin(), h.end());
    out.reserve(out.size() + s.numel() * (image.bit_depth / 8));
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < s.c; ++c) {
                const double v = std::clamp(static_cast<double>(image.pixels.at(0, c, y, x)), 0.0, 1.0);
                const auto q = static_cast<unsigned>(std::lround(v * maxval));
                if (image.bit_depth == 8) {
                    out.push_back(static_cast<std::uint8_t>(q));
                } else {
                    out.push_back(static_cast<std::uint8_t>(q >> 8));
                    out.push_back(static_cast<std::uint8_t>(q & 0xff));
                }
            }
    return out;
}

void write_image(const std::filesystem::path& path, const ImageFile& image) {
    const auto bytes = encode_netpbm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

Tensor crop_patch(const Tensor& image, int size, std::uint64_t seed) {
    const Shape s = image.shape();
    if (size < 1) throw ValueError("patch size must be >= 1");
    if (s.h < size) throw ShapeError("h", "image " + s.str() + " smaller than patch " + std::to_string(size));
    if (s.w < size) throw ShapeError("w", "image " + s.str() + " smaller than patch " + std::to_string(size));
    Rng rng(seed);
    const auto oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.h - size + 1)));
    const auto ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.w - size + 1)));
    Tensor out({s.n, s.c, size, size});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < size; ++y)
                std::copy_n(image.ptr() + image.offset(n, c, oy + y, ox), size,
                            out.ptr() + out.offset(n, c, y, 0));
    return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open manifest");
    DatasetManifest m;
    m.root = path.parent_path();
    std::string line;
    std::vector<std::string> missing;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        std::string entry = line.substr(first, last - first + 1);
        if (entry.front() == '#') continue;
        if (!std::filesystem::is_regular_file(m.root / entry)) missing.push_back(entry);
        m.entries.push_back(std::move(entry));
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& p : missing) list += (list.empty() ? "" : ", ") + p;
        throw IoError(path.string(), "manifest lists missing files [" + list + "]");
    }
    return m;
}

}  // namespace b2u
