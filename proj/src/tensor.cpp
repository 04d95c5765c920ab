#include "b2u/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "b2u/error.hpp"

namespace b2u {

std::string Shape::str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw ShapeError("shape", "negative extent in " + shape.str());
    }
    data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.numel()) {
        throw ShapeError("numel", "data length " + std::to_string(data_.size()) +
                                      " does not match shape " + shape.str());
    }
}

float Tensor::item() const {
    if (data_.size() != 1) {
        throw ShapeError("numel", "item() needs a single-element tensor, got " + shape_.str());
    }
    return data_[0];
}

Tensor Tensor::batch_slice(int first, int count) const {
    if (first < 0 || count < 0 || first + count > shape_.n) {
        throw ShapeError("n", "batch slice [" + std::to_string(first) + ", " +
                                  std::to_string(first + count) + ") out of range for " + shape_.str());
    }
    Shape s = shape_;
    s.n = count;
    const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
    std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                           data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
    return Tensor(s, std::move(out));
}

Tensor Tensor::channel_slice(int first, int count) const {
    if (first < 0 || count < 0 || first + count > shape_.c) {
        throw ShapeError("c", "channel slice out of range for " + shape_.str());
    }
    Shape s = shape_;
    s.c = count;
    Tensor out(s);
    const std::size_t plane = shape_.plane();
    for (int n = 0; n < shape_.n; ++n) {
        std::memcpy(out.ptr() + out.offset(n, 0, 0, 0), ptr() + offset(n, first, 0, 0),
                    count * plane * sizeof(float));
    }
    return out;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape.numel() != numel()) {
        throw ShapeError("numel", "cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return Tensor(shape, data_);
}

bool Tensor::bitwise_equal(const Tensor& other) const {
    return shape_ == other.shape_ &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

Tensor concat_batch(std::span<const Tensor> parts) {
    if (parts.empty()) return {};
    Shape s = parts.front().shape();
    int total = 0;
    for (const auto& p : parts) {
        Shape ps = p.shape();
        ps.n = s.n;
        require_same_shape(s, ps, "concat_batch");
        total += p.shape().n;
    }
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(total) * s.c * s.plane());
    for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    s.n = total;
    return Tensor(s, std::move(data));
}

void require_same_shape(const Shape& a, const Shape& b, const std::string& what) {
    const char* names[] = {"n", "c", "h", "w"};
    const int av[] = {a.n, a.c, a.h, a.w};
    const int bv[] = {b.n, b.c, b.h, b.w};
    for (int i = 0; i < 4; ++i) {
        if (av[i] != bv[i]) {
            throw ShapeError(names[i], what + ": " + a.str() + " vs " + b.str());
        }
    }
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace b2u
