#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "b2u/autodiff.hpp"
#include "b2u/unet.hpp"

namespace b2u {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;

    bool operator==(const AdamState& other) const;
};

/// Adam with decoupled weight decay. Per element, in double:
///   p <- p * (1 - lr * weight_decay)
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Parameters without an entry in `grads` are left untouched.
void adam_step(NetworkParams& params, const GradientMap& grads, AdamState& state, double lr,
               double weight_decay);

/// Learning rate halved every 20 epochs.
double lr_at_epoch(double lr0, int epoch);

}  // namespace b2u
