#include "b2u/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "b2u/error.hpp"

namespace b2u {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void accumulate(Tensor* dst, const Tensor& src) {
    if (dst == nullptr) return;
    auto d = dst->data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

struct ConvGeometry {
    int c_in, h, w, k, stride, padding, oh, ow;

    std::size_t rows() const { return static_cast<std::size_t>(c_in) * k * k; }
    std::size_t cols() const { return static_cast<std::size_t>(oh) * ow; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& wt, int stride, int padding) {
    if (wt.c != in.c) {
        throw ShapeError("c", "conv2d input has " + std::to_string(in.c) +
                                  " channels but weight expects " + std::to_string(wt.c));
    }
    if (wt.h != wt.w) throw ShapeError("k", "conv2d kernel must be square, got " + wt.str());
    if (wt.h % 2 == 0) throw ShapeError("k", "conv2d kernel size must be odd, got " + wt.str());
    if (stride < 1) throw ValueError("conv2d stride must be >= 1");
    if (padding < 0) throw ValueError("conv2d padding must be >= 0");
    const int k = wt.h;
    const int oh_num = in.h + 2 * padding - k;
    const int ow_num = in.w + 2 * padding - k;
    if (oh_num < 0) throw ShapeError("h", "conv2d input height too small for kernel");
    if (ow_num < 0) throw ShapeError("w", "conv2d input width too small for kernel");
    return {in.c, in.h, in.w, k, stride, padding, oh_num / stride + 1, ow_num / stride + 1};
}

// Unfold one image (c, h, w) into a (c*k*k, oh*ow) matrix.
void im2col(const float* image, const ConvGeometry& g, float* cols) {
    const std::size_t ncols = g.cols();
    for (int c = 0; c < g.c_in; ++c) {
        const float* plane = image + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                float* row = cols + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * ncols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    float* out = row + static_cast<std::size_t>(oy) * g.ow;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(out, out + g.ow, 0.0f);
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        out[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float* cols, const ConvGeometry& g, float* image) {
    const std::size_t ncols = g.cols();
    for (int c = 0; c < g.c_in; ++c) {
        float* plane = image + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const float* row =
                    cols + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * ncols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.stride - g.padding + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    const float* in = row + static_cast<std::size_t>(oy) * g.ow;
                    float* dst = plane + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.stride - g.padding + kx;
                        if (ix >= 0 && ix < g.w) dst[ix] += in[ox];
                    }
                }
            }
        }
    }
}

void check_bias(const Shape& bias, int c_out) {
    if (bias.numel() != static_cast<std::size_t>(c_out) || bias.c != c_out) {
        throw ShapeError("c", "conv2d bias " + bias.str() + " does not match " +
                                  std::to_string(c_out) + " output channels");
    }
}

}  // namespace

// ----------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::variable(Tensor value) {
    Node n;
    n.op = "variable";
    n.value = std::move(value);
    n.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(const std::string& name, Tensor value) {
    for (const auto& n : nodes_) {
        if (!n.param_name.empty() && n.param_name == name) {
            throw ValueError("parameter '" + name + "' registered twice");
        }
    }
    Node n;
    n.op = "parameter";
    n.value = std::move(value);
    n.requires_grad = grad_enabled_;
    n.param_name = name;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn fn) {
    Node n;
    n.op = std::string(op);
    bool any = false;
    for (Var v : inputs) {
        const Node& in = node(v);
        any = any || in.requires_grad;
        n.inputs.push_back(v.id);
    }
    n.value = std::move(value);
    n.requires_grad = grad_enabled_ && any && static_cast<bool>(fn);
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

const Graph::Node& Graph::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ValueError("invalid graph handle " + std::to_string(v.id));
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

double Graph::scalar(Var v) const {
    const Node& n = node(v);
    if (n.value.numel() != 1) {
        throw ShapeError("numel", "scalar() needs a one-element node, got " + n.value.shape().str());
    }
    return n.has_wide ? n.wide : static_cast<double>(n.value.data()[0]);
}

void Graph::set_wide(Var v, double value) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    n.wide = value;
    n.has_wide = true;
}
std::string_view Graph::op(Var v) const { return node(v).op; }

Tensor Graph::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty() && n.value.numel() != 0) return Tensor::zeros(n.value.shape());
    return n.grad;
}

Tensor Graph::detached_value(const Tensor& live) {
    if (piece_source_ != nullptr) {
        if (detach_cursor_ >= piece_source_->detached.size()) {
            throw ValueError("detach replay exhausted: graph differs from the recorded one");
        }
        const Tensor& frozen = piece_source_->detached[detach_cursor_++];
        require_same_shape(frozen.shape(), live.shape(), "detach replay");
        return frozen;
    }
    if (piece_sink_ != nullptr) piece_sink_->detached.push_back(live);
    return live;
}

std::vector<std::uint8_t> Graph::branch_pattern(const Tensor& pre) {
    if (piece_source_ != nullptr) {
        if (branch_cursor_ >= piece_source_->branches.size()) {
            throw ValueError("branch replay exhausted: graph differs from the recorded one");
        }
        const auto& frozen = piece_source_->branches[branch_cursor_++];
        if (frozen.size() != pre.numel()) throw ShapeError("numel", "branch replay size mismatch");
        return frozen;
    }
    std::vector<std::uint8_t> pattern(pre.numel());
    for (std::size_t i = 0; i < pre.numel(); ++i) pattern[i] = pre.data()[i] >= 0.0f;
    if (piece_sink_ != nullptr) piece_sink_->branches.push_back(pattern);
    return pattern;
}

GradientMap Graph::backward(Var loss) {
    const Node& root = node(loss);
    if (root.value.numel() != 1) {
        throw ShapeError("numel", "backward needs a scalar loss, got " + root.value.shape().str());
    }
    for (auto& n : nodes_) n.grad = Tensor();

    auto ensure_grad = [](Node& n) {
        if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    };

    Node& top = nodes_[static_cast<std::size_t>(loss.id)];
    if (top.requires_grad) {
        ensure_grad(top);
        top.grad.data()[0] = 1.0f;
    }

    std::vector<Tensor*> input_grads;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        input_grads.clear();
        for (int in : n.inputs) {
            Node& src = nodes_[static_cast<std::size_t>(in)];
            if (src.requires_grad) {
                ensure_grad(src);
                input_grads.push_back(&src.grad);
            } else {
                input_grads.push_back(nullptr);
            }
        }
        n.backward(BackwardContext{*this, n.grad, input_grads});
    }

    GradientMap out;
    for (auto& n : nodes_) {
        if (n.param_name.empty() || !n.requires_grad) continue;
        out[n.param_name] = n.grad.empty() ? Tensor::zeros(n.value.shape()) : n.grad;
    }
    return out;
}

// ----------------------------------------------------------------------------
// Operations

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                      int padding) {
    const Shape& in = input.shape();
    const Shape& wt = weight.shape();
    const ConvGeometry g = conv_geometry(in, wt, stride, padding);
    check_bias(bias.shape(), wt.n);
    Tensor out({in.n, wt.n, g.oh, g.ow});
    std::vector<float> cols(g.rows() * g.cols());
    ConstMatrixMap wmat(weight.ptr(), wt.n, static_cast<Eigen::Index>(g.rows()));
    for (int b = 0; b < in.n; ++b) {
        im2col(input.ptr() + input.offset(b, 0, 0, 0), g, cols.data());
        ConstMatrixMap cmat(cols.data(), static_cast<Eigen::Index>(g.rows()),
                            static_cast<Eigen::Index>(g.cols()));
        MatrixMap omat(out.ptr() + out.offset(b, 0, 0, 0), wt.n,
                       static_cast<Eigen::Index>(g.cols()));
        omat.noalias() = wmat * cmat;
        for (int co = 0; co < wt.n; ++co) omat.row(co).array() += bias.data()[co];
    }
    return out;
}

namespace ops {

namespace {

// Carries the 64-bit value through one-element arithmetic.
Var keep_wide(Graph& g, Var out, double value) {
    if (g.value(out).numel() == 1) g.set_wide(out, value);
    return out;
}

}  // namespace

Var conv2d(Graph& g, Var input, Var weight, Var bias, int stride, int padding) {
    Tensor out = conv2d_forward(g.value(input), g.value(weight), g.value(bias), stride, padding);
    return g.record("conv2d", {input, weight, bias}, std::move(out),
                    [input, weight, stride, padding](const BackwardContext& ctx) {
                        const Tensor& x = ctx.graph.value(input);
                        const Tensor& wt = ctx.graph.value(weight);
                        const ConvGeometry geo =
                            conv_geometry(x.shape(), wt.shape(), stride, padding);
                        const int c_out = wt.shape().n;
                        const auto rows = static_cast<Eigen::Index>(geo.rows());
                        const auto ncols = static_cast<Eigen::Index>(geo.cols());
                        Tensor* dx = ctx.input_grads[0];
                        Tensor* dw = ctx.input_grads[1];
                        Tensor* db = ctx.input_grads[2];
                        std::vector<float> cols(geo.rows() * geo.cols());
                        ConstMatrixMap wmat(wt.ptr(), c_out, rows);
                        for (int b = 0; b < x.shape().n; ++b) {
                            ConstMatrixMap gout(ctx.grad_out.ptr() + ctx.grad_out.offset(b, 0, 0, 0),
                                                c_out, ncols);
                            if (db != nullptr) {
                                for (int co = 0; co < c_out; ++co) {
                                    double acc = 0.0;
                                    for (Eigen::Index i = 0; i < ncols; ++i) acc += gout(co, i);
                                    db->data()[co] += static_cast<float>(acc);
                                }
                            }
                            if (dw != nullptr) {
                                im2col(x.ptr() + x.offset(b, 0, 0, 0), geo, cols.data());
                                ConstMatrixMap cmat(cols.data(), rows, ncols);
                                MatrixMap dwmat(dw->ptr(), c_out, rows);
                                dwmat.noalias() += gout * cmat.transpose();
                            }
                            if (dx != nullptr) {
                                MatrixMap dcols(cols.data(), rows, ncols);
                                dcols.noalias() = wmat.transpose() * gout;
                                col2im(cols.data(), geo, dx->ptr() + dx->offset(b, 0, 0, 0));
                            }
                        }
                    });
}

Var leaky_relu(Graph& g, Var x, float slope) {
    if (!(slope >= 0.0f && slope < 1.0f)) throw ValueError("leaky_relu slope must be in [0, 1)");
    const Tensor& in = g.value(x);
    auto pattern = std::make_shared<const std::vector<std::uint8_t>>(g.branch_pattern(in));
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.numel(); ++i) {
        const float v = in.data()[i];
        out.data()[i] = (*pattern)[i] ? v : slope * v;
    }
    return g.record("leaky_relu", {x}, std::move(out), [pattern, slope](const BackwardContext& ctx) {
        auto dx = ctx.input_grads[0]->data();
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] += ctx.grad_out.data()[i] * ((*pattern)[i] ? 1.0f : slope);
        }
    });
}

Var avg_pool2d(Graph& g, Var x, int k) {
    const Tensor& in = g.value(x);
    const Shape s = in.shape();
    if (k < 1) throw ValueError("avg_pool2d kernel must be >= 1");
    if (s.h % k != 0) throw ShapeError("h", "avg_pool2d: height " + std::to_string(s.h) +
                                                " not divisible by " + std::to_string(k));
    if (s.w % k != 0) throw ShapeError("w", "avg_pool2d: width " + std::to_string(s.w) +
                                                " not divisible by " + std::to_string(k));
    Tensor out({s.n, s.c, s.h / k, s.w / k});
    const float inv = 1.0f / static_cast<float>(k * k);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h / k; ++y)
                for (int xo = 0; xo < s.w / k; ++xo) {
                    float acc = 0.0f;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx) acc += in.at(n, c, y * k + dy, xo * k + dx);
                    out.at(n, c, y, xo) = acc * inv;
                }
    return g.record("avg_pool2d", {x}, std::move(out), [k, s](const BackwardContext& ctx) {
        Tensor& dx = *ctx.input_grads[0];
        const float inv = 1.0f / static_cast<float>(k * k);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < s.h; ++y)
                    for (int xi = 0; xi < s.w; ++xi)
                        dx.at(n, c, y, xi) += ctx.grad_out.at(n, c, y / k, xi / k) * inv;
    });
}

Var nearest_upsample(Graph& g, Var x, int factor) {
    if (factor < 1) throw ValueError("nearest_upsample factor must be >= 1");
    const Tensor& in = g.value(x);
    const Shape s = in.shape();
    Tensor out({s.n, s.c, s.h * factor, s.w * factor});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h * factor; ++y)
                for (int xo = 0; xo < s.w * factor; ++xo)
                    out.at(n, c, y, xo) = in.at(n, c, y / factor, xo / factor);
    return g.record("nearest_upsample", {x}, std::move(out), [factor, s](const BackwardContext& ctx) {
        Tensor& dx = *ctx.input_grads[0];
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < s.h * factor; ++y)
                    for (int xo = 0; xo < s.w * factor; ++xo)
                        dx.at(n, c, y / factor, xo / factor) += ctx.grad_out.at(n, c, y, xo);
    });
}

Var concat_channels(Graph& g, Var a, Var b) {
    const Shape sa = g.value(a).shape();
    const Shape sb = g.value(b).shape();
    if (sa.n != sb.n) throw ShapeError("n", "concat_channels: " + sa.str() + " vs " + sb.str());
    if (sa.h != sb.h) throw ShapeError("h", "concat_channels: " + sa.str() + " vs " + sb.str());
    if (sa.w != sb.w) throw ShapeError("w", "concat_channels: " + sa.str() + " vs " + sb.str());
    Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t plane = sa.plane();
    for (int n = 0; n < sa.n; ++n) {
        std::memcpy(out.ptr() + out.offset(n, 0, 0, 0), g.value(a).ptr() + g.value(a).offset(n, 0, 0, 0),
                    sa.c * plane * sizeof(float));
        std::memcpy(out.ptr() + out.offset(n, sa.c, 0, 0),
                    g.value(b).ptr() + g.value(b).offset(n, 0, 0, 0), sb.c * plane * sizeof(float));
    }
    return g.record("concat_channels", {a, b}, std::move(out), [sa, sb](const BackwardContext& ctx) {
        const std::size_t plane = sa.plane();
        for (int n = 0; n < sa.n; ++n) {
            const float* ga = ctx.grad_out.ptr() + ctx.grad_out.offset(n, 0, 0, 0);
            const float* gb = ctx.grad_out.ptr() + ctx.grad_out.offset(n, sa.c, 0, 0);
            if (Tensor* da = ctx.input_grads[0]) {
                float* d = da->ptr() + da->offset(n, 0, 0, 0);
                for (std::size_t i = 0; i < sa.c * plane; ++i) d[i] += ga[i];
            }
            if (Tensor* db = ctx.input_grads[1]) {
                float* d = db->ptr() + db->offset(n, 0, 0, 0);
                for (std::size_t i = 0; i < sb.c * plane; ++i) d[i] += gb[i];
            }
        }
    });
}

Var detach(Graph& g, Var x) {
    Tensor value = g.detached_value(g.value(x));
    return g.record("detach", {}, std::move(value), {});
}

Var add(Graph& g, Var a, Var b) {
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    require_same_shape(ta.shape(), tb.shape(), "add");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = ta.data()[i] + tb.data()[i];
    Var result = g.record("add", {a, b}, std::move(out), [](const BackwardContext& ctx) {
        accumulate(ctx.input_grads[0], ctx.grad_out);
        accumulate(ctx.input_grads[1], ctx.grad_out);
    });
    return keep_wide(g, result, g.value(result).numel() == 1 ? g.scalar(a) + g.scalar(b) : 0.0);
}

Var sub(Graph& g, Var a, Var b) {
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    require_same_shape(ta.shape(), tb.shape(), "sub");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = ta.data()[i] - tb.data()[i];
    Var result = g.record("sub", {a, b}, std::move(out), [](const BackwardContext& ctx) {
        accumulate(ctx.input_grads[0], ctx.grad_out);
        if (Tensor* db = ctx.input_grads[1]) {
            for (std::size_t i = 0; i < db->numel(); ++i) db->data()[i] -= ctx.grad_out.data()[i];
        }
    });
    return keep_wide(g, result, g.value(result).numel() == 1 ? g.scalar(a) - g.scalar(b) : 0.0);
}

Var mul(Graph& g, Var a, Var b) {
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    require_same_shape(ta.shape(), tb.shape(), "mul");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = ta.data()[i] * tb.data()[i];
    return g.record("mul", {a, b}, std::move(out), [a, b](const BackwardContext& ctx) {
        const Tensor& ta = ctx.graph.value(a);
        const Tensor& tb = ctx.graph.value(b);
        if (Tensor* da = ctx.input_grads[0]) {
            for (std::size_t i = 0; i < da->numel(); ++i)
                da->data()[i] += ctx.grad_out.data()[i] * tb.data()[i];
        }
        if (Tensor* db = ctx.input_grads[1]) {
            for (std::size_t i = 0; i < db->numel(); ++i)
                db->data()[i] += ctx.grad_out.data()[i] * ta.data()[i];
        }
    });
}

Var scale(Graph& g, Var x, float factor) {
    const Tensor& in = g.value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = in.data()[i] * factor;
    Var result = g.record("scale", {x}, std::move(out), [factor](const BackwardContext& ctx) {
        Tensor& dx = *ctx.input_grads[0];
        for (std::size_t i = 0; i < dx.numel(); ++i) dx.data()[i] += ctx.grad_out.data()[i] * factor;
    });
    return keep_wide(g, result, g.value(result).numel() == 1 ? g.scalar(x) * factor : 0.0);
}

Var square(Graph& g, Var x) {
    const Tensor& in = g.value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = in.data()[i] * in.data()[i];
    return g.record("square", {x}, std::move(out), [x](const BackwardContext& ctx) {
        const Tensor& in = ctx.graph.value(x);
        Tensor& dx = *ctx.input_grads[0];
        for (std::size_t i = 0; i < dx.numel(); ++i)
            dx.data()[i] += 2.0f * in.data()[i] * ctx.grad_out.data()[i];
    });
}

Var sum(Graph& g, Var x) {
    const Tensor& in = g.value(x);
    double acc = 0.0;
    for (float v : in.data()) acc += v;
    Var result = g.record("sum", {x}, Tensor::scalar(static_cast<float>(acc)),
                          [](const BackwardContext& ctx) {
                              Tensor& dx = *ctx.input_grads[0];
                              const float go = ctx.grad_out.data()[0];
                              for (float& v : dx.data()) v += go;
                          });
    return keep_wide(g, result, acc);
}

Var mean(Graph& g, Var x) {
    const Tensor& in = g.value(x);
    if (in.numel() == 0) throw ShapeError("numel", "mean of an empty tensor");
    double acc = 0.0;
    for (float v : in.data()) acc += v;
    const double count = static_cast<double>(in.numel());
    Var result = g.record("mean", {x}, Tensor::scalar(static_cast<float>(acc / count)),
                          [count](const BackwardContext& ctx) {
                              Tensor& dx = *ctx.input_grads[0];
                              const float go = static_cast<float>(ctx.grad_out.data()[0] / count);
                              for (float& v : dx.data()) v += go;
                          });
    return keep_wide(g, result, acc / count);
}

Var weighted_sum(Graph& g, Var a, float wa, Var b, float wb) {
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    require_same_shape(ta.shape(), tb.shape(), "weighted_sum");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data()[i] = wa * ta.data()[i] + wb * tb.data()[i];
    Var result = g.record("weighted_sum", {a, b}, std::move(out), [wa, wb](const BackwardContext& ctx) {
        if (Tensor* da = ctx.input_grads[0]) {
            for (std::size_t i = 0; i < da->numel(); ++i) da->data()[i] += wa * ctx.grad_out.data()[i];
        }
        if (Tensor* db = ctx.input_grads[1]) {
            for (std::size_t i = 0; i < db->numel(); ++i) db->data()[i] += wb * ctx.grad_out.data()[i];
        }
    });
    return keep_wide(g, result, g.value(result).numel() == 1 ? wa * g.scalar(a) + wb * g.scalar(b) : 0.0);
}

}  // namespace ops

// ----------------------------------------------------------------------------
// gradcheck

GradcheckReport gradcheck(const GraphBuilder& fn, const std::map<std::string, Tensor>& params,
                          double step, double tol, std::size_t max_per_param) {
    if (!(step > 0.0)) throw ValueError("gradcheck step must be > 0");

    Graph::FrozenPieces frozen;
    GradientMap analytic;
    {
        Graph g;
        g.record_pieces(&frozen);
        std::map<std::string, Var> handles;
        for (const auto& [name, t] : params) handles[name] = g.parameter(name, t);
        analytic = g.backward(fn(g, handles));
    }

    auto evaluate = [&](const std::map<std::string, Tensor>& p) {
        Graph g(false);
        g.replay_pieces(&frozen);
        std::map<std::string, Var> handles;
        for (const auto& [name, t] : p) handles[name] = g.parameter(name, t);
        return g.scalar(fn(g, handles));
    };

    GradcheckReport report;
    report.passed = true;
    std::map<std::string, Tensor> probe = params;
    for (const auto& [name, t] : params) {
        GradcheckEntry entry;
        entry.name = name;
        const std::size_t count = t.numel();
        const std::size_t stride =
            (max_per_param == 0 || count <= max_per_param) ? 1 : (count + max_per_param - 1) / max_per_param;
        double max_a = 0.0, max_n = 0.0, max_err = 0.0;
        Tensor& work = probe[name];
        for (std::size_t i = 0; i < count; i += stride) {
            const float original = work.data()[i];
            // The perturbation actually applied after float rounding.
            const float plus = static_cast<float>(original + step);
            const float minus = static_cast<float>(original - step);
            work.data()[i] = plus;
            const double lp = evaluate(probe);
            work.data()[i] = minus;
            const double lm = evaluate(probe);
            work.data()[i] = original;
            const double numeric = (lp - lm) / (static_cast<double>(plus) - minus);
            const double a = analytic.at(name).data()[i];
            max_a = std::max(max_a, std::abs(a));
            max_n = std::max(max_n, std::abs(numeric));
            max_err = std::max(max_err, std::abs(a - numeric));
            ++entry.checked;
        }
        const double denom = std::max(max_a, max_n);
        entry.max_abs_error = max_err;
        entry.relative_error = denom > 0.0 ? max_err / denom : 0.0;
        report.max_relative_error = std::max(report.max_relative_error, entry.relative_error);
        if (!(entry.relative_error <= tol)) report.passed = false;
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace b2u
