#include "b2u/objective.hpp"

#include <algorithm>
#include <cmath>

#include "b2u/error.hpp"

namespace b2u {

void LossConfig::validate() const {
    if (!(eta >= 0.0)) throw ValueError("eta must be >= 0");
    if (!(lambda_s > 0.0)) throw ValueError("lambda_s must be > 0");
    if (!(lambda_f >= lambda_s)) throw ValueError("lambda_f must be >= lambda_s");
    if (total_epochs < 1) throw ValueError("total_epochs must be >= 1");
}

double lambda_at(const LossConfig& config, int epoch) {
    config.validate();
    if (epoch < 0 || epoch >= config.total_epochs) {
        throw ValueError("epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(config.total_epochs) + ")");
    }
    return lambda_at_step(config, epoch, config.total_epochs);
}

double lambda_at_step(const LossConfig& config, long step, long total_steps) {
    if (step < 0 || step >= total_steps) {
        throw ValueError("step " + std::to_string(step) + " outside [0, " +
                         std::to_string(total_steps) + ")");
    }
    if (total_steps == 1 || step == 0) return config.lambda_s;
    if (step == total_steps - 1) return config.lambda_f;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return config.lambda_s + (config.lambda_f - config.lambda_s) * t;
}

namespace {

void check_shapes(const Graph& g, Var blind, Var visible, Var target) {
    require_same_shape(g.value(blind).shape(), g.value(visible).shape(), "blind vs visible");
    require_same_shape(g.value(blind).shape(), g.value(target).shape(), "blind vs target");
}

}  // namespace

Var loss_case_a(Graph& g, Var blind, Var visible, Var target, double lambda) {
    check_shapes(g, blind, visible, target);
    // blind + lambda*visible - (lambda+1)*target
    Var mixed = ops::weighted_sum(g, visible, static_cast<float>(lambda), target,
                                  static_cast<float>(-(lambda + 1.0)));
    return ops::mean(g, ops::square(g, ops::add(g, blind, mixed)));
}

Var loss_case_b(Graph& g, Var blind, Var visible, Var target, double lambda) {
    check_shapes(g, blind, visible, target);
    // lambda*visible - (lambda-1)*target - blind
    Var anchor = ops::weighted_sum(g, visible, static_cast<float>(lambda), target,
                                   static_cast<float>(-(lambda - 1.0)));
    return ops::mean(g, ops::square(g, ops::sub(g, anchor, blind)));
}

LossBreakdown revisible_loss(Graph& g, Var blind, Var visible, Var target, double lambda,
                             double eta) {
    check_shapes(g, blind, visible, target);
    if (g.requires_grad(visible)) {
        throw ValueError("revisible_loss: visible term has a live gradient path; detach it first");
    }
    LossBreakdown out;
    out.lambda_used = lambda;
    out.rev = loss_case_a(g, blind, visible, target, lambda);
    out.reg = ops::mean(g, ops::square(g, ops::sub(g, blind, target)));
    out.total = ops::weighted_sum(g, out.rev, 1.0f, out.reg, static_cast<float>(eta));
    out.rev_value = g.value(out.rev).item();
    out.reg_value = g.value(out.reg).item();
    out.total_value = g.value(out.total).item();
    return out;
}

double loss_case_a(const Tensor& blind, const Tensor& visible, const Tensor& target, double lambda) {
    Graph g(false);
    return g.value(loss_case_a(g, g.constant(blind), g.constant(visible), g.constant(target), lambda))
        .item();
}

double loss_case_b(const Tensor& blind, const Tensor& visible, const Tensor& target, double lambda) {
    Graph g(false);
    return g.value(loss_case_b(g, g.constant(blind), g.constant(visible), g.constant(target), lambda))
        .item();
}

LossBreakdown revisible_loss_value(const Tensor& blind, const Tensor& visible, const Tensor& target,
                                   double lambda, double eta) {
    Graph g(false);
    return revisible_loss(g, g.constant(blind), g.constant(visible), g.constant(target), lambda, eta);
}

double casewise_expansion(const Tensor& blind, const Tensor& visible, const Tensor& target,
                          double lambda) {
    require_same_shape(blind.shape(), visible.shape(), "blind vs visible");
    require_same_shape(blind.shape(), target.shape(), "blind vs target");
    if (blind.numel() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < blind.numel(); ++i) {
        const double d1 = static_cast<double>(blind.data()[i]) - target.data()[i];
        const double d2 = static_cast<double>(visible.data()[i]) - target.data()[i];
        const double term = std::abs(d1) + lambda * std::abs(d2);
        acc += term * term;
    }
    return acc / static_cast<double>(blind.numel());
}

Tensor weighted_combination(const Tensor& blind, const Tensor& visible, double lambda) {
    if (!(lambda > 0.0)) throw ValueError("weighted_combination needs lambda > 0");
    require_same_shape(blind.shape(), visible.shape(), "weighted_combination");
    Tensor out(blind.shape());
    const double wb = 1.0 / (lambda + 1.0);
    const double wv = lambda / (lambda + 1.0);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double b = blind.data()[i];
        const double v = visible.data()[i];
        double x = wb * b + wv * v;
        // Rounding can step just outside [min, max]; a convex combination cannot.
        x = std::clamp(x, std::min(b, v), std::max(b, v));
        out.data()[i] = static_cast<float>(x);
    }
    return out;
}

}  // namespace b2u
