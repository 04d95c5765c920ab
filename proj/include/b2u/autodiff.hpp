#pragma once

// Define-by-run reverse-mode differentiation over 4-D tensors.
//
// A Graph records one forward pass as a list of nodes in creation order, which
// is a topological order by construction. backward() walks that list once in
// reverse. Nodes that cannot reach a parameter are never visited.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "b2u/tensor.hpp"

namespace b2u {

class Graph;

/// Handle to a node inside a Graph.
struct Var {
    int id = -1;
    bool valid() const noexcept { return id >= 0; }
};

using GradientMap = std::map<std::string, Tensor>;

/// Passed to each node's backward function. `input_grads[i]` is null when
/// input i does not participate in differentiation.
struct BackwardContext {
    const Graph& graph;
    const Tensor& grad_out;
    std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Graph {
public:
    /// With `grad_enabled` false every node is recorded as a constant.
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    /// Constant input (never differentiated).
    Var constant(Tensor value);
    /// Differentiable leaf that is not reported in the gradient map.
    Var variable(Tensor value);
    /// Named differentiable leaf; its gradient appears in backward()'s result.
    Var parameter(const std::string& name, Tensor value);

    /// Append an operation node. `fn` may be empty when no input needs a gradient.
    Var record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn fn);

    const Tensor& value(Var v) const;
    /// Value of a one-element node. Reductions and scalar arithmetic keep a
    /// 64-bit copy of their result; other nodes report their stored float.
    double scalar(Var v) const;
    /// Used by ops to attach the 64-bit result of a one-element node.
    void set_wide(Var v, double value);
    bool requires_grad(Var v) const;
    std::string_view op(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    /// Reverse sweep from a scalar. Returns the gradient of every named
    /// parameter that requires one (zeros for parameters the loss ignores).
    GradientMap backward(Var loss);

    /// Gradient accumulated for `v` by the last backward() call; zeros when
    /// nothing reached it.
    Tensor grad(Var v) const;

    /// Piecewise choices made by a forward pass, so a later pass can be pinned
    /// to the same piece: detach outputs, and the branch taken by every
    /// element of each leaky_relu.
    struct FrozenPieces {
        std::vector<Tensor> detached;
        std::vector<std::vector<std::uint8_t>> branches;
    };
    /// Choices made by this graph are appended to `sink`.
    void record_pieces(FrozenPieces* sink) noexcept { piece_sink_ = sink; }
    /// Choices are taken from `source`, in order, instead of being recomputed.
    void replay_pieces(const FrozenPieces* source) noexcept {
        piece_source_ = source;
        detach_cursor_ = 0;
        branch_cursor_ = 0;
    }
    /// Used by ops::detach.
    Tensor detached_value(const Tensor& live);
    /// Used by ops::leaky_relu: 1 where the identity branch applies.
    std::vector<std::uint8_t> branch_pattern(const Tensor& pre);

private:
    struct Node {
        std::string op;
        std::vector<int> inputs;
        Tensor value;
        Tensor grad;
        double wide = 0.0;
        bool has_wide = false;
        bool requires_grad = false;
        std::string param_name;
        BackwardFn backward;
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
    FrozenPieces* piece_sink_ = nullptr;
    const FrozenPieces* piece_source_ = nullptr;
    std::size_t detach_cursor_ = 0;
    std::size_t branch_cursor_ = 0;
};

namespace ops {

/// Cross-correlation with zero padding. weight (c_out, c_in, k, k), bias (1, c_out, 1, 1).
Var conv2d(Graph& g, Var input, Var weight, Var bias, int stride, int padding);
Var leaky_relu(Graph& g, Var x, float slope);
Var avg_pool2d(Graph& g, Var x, int k);
Var nearest_upsample(Graph& g, Var x, int factor);
Var concat_channels(Graph& g, Var a, Var b);
/// Value-identical constant copy severed from the graph.
Var detach(Graph& g, Var x);

Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, float factor);
Var square(Graph& g, Var x);
/// Sum of all elements; accumulates in double.
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);
/// Scalar a + b, both scalars, with weights: wa * a + wb * b.
Var weighted_sum(Graph& g, Var a, float wa, Var b, float wb);

}  // namespace ops

/// Forward-only helper used by tests and the naive oracles.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                      int padding);

// ----------------------------------------------------------------------------
// Finite-difference gradient check.

struct GradcheckEntry {
    std::string name;
    double max_abs_error = 0.0;
    /// max |analytic - numeric| / max(max |analytic|, max |numeric|)
    double relative_error = 0.0;
    std::size_t checked = 0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double max_relative_error = 0.0;
    bool passed = false;
};

/// Builds a scalar loss from the named parameters registered on `g`.
using GraphBuilder = std::function<Var(Graph& g, const std::map<std::string, Var>& params)>;

/// Compare analytic gradients with central differences. Parameters are
/// registered as graph parameters by name; `fn` must reach them only through
/// the handles it is given. Only graph-connected paths are compared: every
/// ops::detach output is frozen at its unperturbed value while the numeric
/// side perturbs parameters, matching the analytic side's view of detached
/// values as constants. Likewise every leaky_relu keeps the branch it took at
/// the unperturbed point, so a step never straddles a kink and the numeric
/// side differentiates the same linear piece the analytic side does. `max_per_param` limits the elements probed per tensor
/// (0 = all), chosen by a fixed stride.
GradcheckReport gradcheck(const GraphBuilder& fn, const std::map<std::string, Tensor>& params,
                          double step, double tol, std::size_t max_per_param = 0);

}  // namespace b2u
