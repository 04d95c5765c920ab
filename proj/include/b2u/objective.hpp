#pragma once

#include "b2u/autodiff.hpp"
#include "b2u/tensor.hpp"

namespace b2u {

struct LossConfig {
    double eta = 1.0;
    double lambda_s = 2.0;
    double lambda_f = 20.0;
    int total_epochs = 100;

    void validate() const;
};

/// Visible-term weight for `epoch`: linear ramp from lambda_s at epoch 0 to
/// lambda_f at the last epoch.
double lambda_at(const LossConfig& config, int epoch);

/// Same ramp over a step index in [0, total_steps).
double lambda_at_step(const LossConfig& config, long step, long total_steps);

struct LossBreakdown {
    Var total;
    Var rev;
    Var reg;
    double total_value = 0.0;
    double rev_value = 0.0;
    double reg_value = 0.0;
    double lambda_used = 0.0;
};

/// rev = mean |blind + lambda*visible - (lambda+1)*target|^2,
/// reg = mean |blind - target|^2, total = rev + eta*reg.
/// `visible` must not carry a gradient path (ValueError otherwise).
LossBreakdown revisible_loss(Graph& g, Var blind, Var visible, Var target, double lambda,
                             double eta);

/// mean |blind + lambda*visible - (lambda+1)*target|^2
Var loss_case_a(Graph& g, Var blind, Var visible, Var target, double lambda);
/// mean |visible - blind + (lambda-1)*(visible - target)|^2
Var loss_case_b(Graph& g, Var blind, Var visible, Var target, double lambda);

/// Value-only versions of the above.
double loss_case_a(const Tensor& blind, const Tensor& visible, const Tensor& target, double lambda);
double loss_case_b(const Tensor& blind, const Tensor& visible, const Tensor& target, double lambda);
LossBreakdown revisible_loss_value(const Tensor& blind, const Tensor& visible, const Tensor& target,
                                   double lambda, double eta);

/// mean over pixels of (|d1| + lambda*|d2|)^2 with d1 = blind - target and
/// d2 = visible - target. Accumulates in double.
double casewise_expansion(const Tensor& blind, const Tensor& visible, const Tensor& target,
                          double lambda);

/// (blind + lambda*visible) / (lambda + 1), elementwise. lambda must be > 0.
Tensor weighted_combination(const Tensor& blind, const Tensor& visible, double lambda);

}  // namespace b2u
