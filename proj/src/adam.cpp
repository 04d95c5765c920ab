#include "b2u/adam.hpp"

#include <cmath>

#include "b2u/error.hpp"

namespace b2u {

bool AdamState::operator==(const AdamState& other) const {
    auto same = [](const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b) {
        if (a.size() != b.size()) return false;
        for (const auto& [k, v] : a) {
            auto it = b.find(k);
            if (it == b.end() || !v.bitwise_equal(it->second)) return false;
        }
        return true;
    };
    return beta1 == other.beta1 && beta2 == other.beta2 && eps == other.eps && step == other.step &&
           same(first_moment, other.first_moment) && same(second_moment, other.second_moment);
}

void adam_step(NetworkParams& params, const GradientMap& grads, AdamState& state, double lr,
               double weight_decay) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const double decay = 1.0 - lr * weight_decay;
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        require_same_shape(p.shape(), g.shape(), "adam_step gradient for " + name);
        auto [mit, m_new] = state.first_moment.try_emplace(name, Tensor(p.shape()));
        auto [vit, v_new] = state.second_moment.try_emplace(name, Tensor(p.shape()));
        require_same_shape(p.shape(), mit->second.shape(), "adam_step moment for " + name);
        auto pd = p.data();
        auto gd = g.data();
        auto md = mit->second.data();
        auto vd = vit->second.data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            const double gi = gd[i];
            const double m = state.beta1 * md[i] + (1.0 - state.beta1) * gi;
            const double v = state.beta2 * vd[i] + (1.0 - state.beta2) * gi * gi;
            md[i] = static_cast<float>(m);
            vd[i] = static_cast<float>(v);
            const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
            pd[i] = static_cast<float>(pd[i] * decay - update);
        }
    }
}

double lr_at_epoch(double lr0, int epoch) {
    if (epoch < 0) throw ValueError("epoch must be >= 0");
    return lr0 * std::ldexp(1.0, -(epoch / 20));
}

}  // namespace b2u
