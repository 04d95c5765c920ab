#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "b2u/error.hpp"
#include "b2u/objective.hpp"
#include "helpers.hpp"

using namespace b2u;
using b2u::test::random_tensor;

namespace {

double loop_total(const Tensor& b, const Tensor& v, const Tensor& t, double lambda, double eta) {
    double rev = 0.0, reg = 0.0;
    for (std::size_t i = 0; i < b.numel(); ++i) {
        const double r = b.data()[i] + lambda * v.data()[i] - (lambda + 1.0) * t.data()[i];
        const double d = static_cast<double>(b.data()[i]) - t.data()[i];
        rev += r * r;
        reg += d * d;
    }
    return (rev + eta * reg) / static_cast<double>(b.numel());
}

// Per-pixel sign dispatch between the two case forms.
double sign_dispatch(const Tensor& b, const Tensor& v, const Tensor& t, double lambda) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.numel(); ++i) {
        const double d1 = static_cast<double>(b.data()[i]) - t.data()[i];
        const double d2 = static_cast<double>(v.data()[i]) - t.data()[i];
        const double term = d1 * d2 >= 0.0 ? d1 + lambda * d2 : lambda * d2 - d1;
        acc += term * term;
    }
    return acc / static_cast<double>(b.numel());
}

}  // namespace

TEST_CASE("lambda schedule") {
    LossConfig cfg;
    CHECK(cfg.eta == 1.0);
    CHECK(cfg.lambda_s == 2.0);
    CHECK(cfg.lambda_f == 20.0);
    CHECK(lambda_at(cfg, 0) == 2.0);
    CHECK(lambda_at(cfg, cfg.total_epochs - 1) == 20.0);
    for (int e : {49, 50}) {
        CHECK(lambda_at(cfg, e) > 2.0);
        CHECK(lambda_at(cfg, e) < 20.0);
    }
    double prev = 0.0;
    for (int e = 0; e < cfg.total_epochs; ++e) {
        CHECK(lambda_at(cfg, e) >= prev);
        prev = lambda_at(cfg, e);
    }
    CHECK_THROWS_AS(lambda_at(cfg, -1), ValueError);
    CHECK_THROWS_AS(lambda_at(cfg, cfg.total_epochs), ValueError);
    CHECK(lambda_at_step(cfg, 0, 500) == 2.0);
    CHECK(lambda_at_step(cfg, 499, 500) == 20.0);

    LossConfig one = cfg;
    one.total_epochs = 1;
    CHECK(lambda_at(one, 0) == 2.0);
}

TEST_CASE("revisible loss algebra") {
    const Tensor b = random_tensor({1, 1, 4, 4}, 1);
    const Tensor t = random_tensor({1, 1, 4, 4}, 2);

    SUBCASE("visible = target collapses to (1 + eta) * reg") {
        const auto out = revisible_loss_value(b, t, t, 2.0, 1.0);
        CHECK(out.rev_value == doctest::Approx(out.reg_value).epsilon(1e-5));
        CHECK(out.total_value == doctest::Approx(2.0 * out.reg_value).epsilon(1e-5));
    }
    SUBCASE("exact fit gives zero") {
        const auto out = revisible_loss_value(t, t, t, 7.0, 1.0);
        CHECK(out.total_value == 0.0);
        CHECK(loss_case_a(t, t, t, 3.0) == 0.0);
        CHECK(loss_case_b(t, t, t, 3.0) == 0.0);
    }
    SUBCASE("random tensors against the elementwise loop") {
        const Tensor v = random_tensor({1, 1, 4, 4}, 3);
        const auto out = revisible_loss_value(b, v, t, 2.0, 1.0);
        CHECK(out.total_value == doctest::Approx(loop_total(b, v, t, 2.0, 1.0)).epsilon(1e-5));
        CHECK(std::abs(out.total_value - (out.rev_value + out.reg_value)) <= 1e-6);
        CHECK(out.lambda_used == 2.0);
    }
}

TEST_CASE("revisible loss contracts") {
    Graph g;
    Var b = g.parameter("b", random_tensor({1, 1, 4, 4}, 1));
    Var live = g.parameter("v", random_tensor({1, 1, 4, 4}, 2));
    Var t = g.constant(random_tensor({1, 1, 4, 4}, 3));
    CHECK_THROWS_AS(revisible_loss(g, b, live, t, 2.0, 1.0), ValueError);
    Var small = g.constant(Tensor({1, 1, 4, 3}));
    CHECK_THROWS_AS(revisible_loss(g, b, ops::detach(g, live), small, 2.0, 1.0), ShapeError);
}

TEST_CASE("gradient flows through blind only") {
    const Tensor b0 = random_tensor({1, 2, 4, 4}, 4);
    const Tensor v0 = random_tensor({1, 2, 4, 4}, 5);
    const Tensor t0 = random_tensor({1, 2, 4, 4}, 6);
    Graph g;
    Var b = g.parameter("b", b0);
    Var v = g.parameter("v", v0);
    const auto loss = revisible_loss(g, b, ops::detach(g, v), g.constant(t0), 5.0, 1.0);
    const auto grads = g.backward(loss.total);
    for (float x : grads.at("v").data()) CHECK(x == 0.0f);

    const auto report = gradcheck([&](Graph& gg, const std::map<std::string, Var>& p) {
        return revisible_loss(gg, p.at("b"), gg.constant(v0), gg.constant(t0), 5.0, 1.0).total;
    }, {{"b", b0}}, 1e-3, 1e-3);
    CHECK(report.passed);
}

TEST_CASE("casewise expansion") {
    auto pixel = [](float b, float v, float t) {
        return std::array<Tensor, 3>{Tensor::scalar(b), Tensor::scalar(v), Tensor::scalar(t)};
    };
    {
        auto [b, v, t] = pixel(1.0f, 1.0f, 0.0f);  // d1 = 1, d2 = 1
        CHECK(casewise_expansion(b, v, t, 2.0) == 9.0);
        CHECK(loss_case_a(b, v, t, 2.0) == doctest::Approx(9.0));
    }
    {
        auto [b, v, t] = pixel(1.0f, -1.0f, 0.0f);  // d1 = 1, d2 = -1
        CHECK(casewise_expansion(b, v, t, 2.0) == 9.0);
        CHECK(loss_case_b(b, v, t, 2.0) == doctest::Approx(9.0));
    }

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor t = random_tensor({1, 2, 4, 4}, 100 + trial);
        const Tensor d1 = random_tensor({1, 2, 4, 4}, 200 + trial, 0.05, 1.0);
        const Tensor d2 = random_tensor({1, 2, 4, 4}, 300 + trial, 0.05, 1.0);
        const double lambda = rng.uniform(1.0, 20.0);
        Tensor b(t.shape()), same(t.shape()), opposite(t.shape());
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const float sign = rng.uniform() < 0.5 ? -1.0f : 1.0f;
            b.data()[i] = t.data()[i] + sign * d1.data()[i];
            same.data()[i] = t.data()[i] + sign * d2.data()[i];
            opposite.data()[i] = t.data()[i] - sign * d2.data()[i];
        }
        CHECK(casewise_expansion(b, same, t, lambda) == doctest::Approx(loss_case_a(b, same, t, lambda)).epsilon(1e-5));
        CHECK(casewise_expansion(b, opposite, t, lambda) == doctest::Approx(loss_case_b(b, opposite, t, lambda)).epsilon(1e-5));

        const Tensor v = random_tensor({1, 2, 4, 4}, 400 + trial);
        CHECK(casewise_expansion(b, v, t, lambda) == doctest::Approx(sign_dispatch(b, v, t, lambda)).epsilon(1e-5));
    }
}

TEST_CASE("weighted combination") {
    const Tensor b = random_tensor({1, 3, 8, 8}, 1);
    const Tensor v = random_tensor({1, 3, 8, 8}, 2);
    CHECK(max_abs_diff(weighted_combination(b, v, 1e6), v) <= 1e-4f);
    const Tensor mid = weighted_combination(b, v, 1.0);
    for (std::size_t i = 0; i < b.numel(); ++i)
        CHECK(mid.data()[i] == doctest::Approx(0.5 * (b.data()[i] + v.data()[i])).epsilon(1e-6));
    for (double lambda : {1e-3, 0.5, 2.0, 20.0, 1e6}) {
        const Tensor out = weighted_combination(b, v, lambda);
        for (std::size_t i = 0; i < b.numel(); ++i) {
            CHECK(out.data()[i] >= std::min(b.data()[i], v.data()[i]));
            CHECK(out.data()[i] <= std::max(b.data()[i], v.data()[i]));
        }
    }
    const Tensor c({1, 1, 4, 4}, 0.4f);
    CHECK(weighted_combination(c, c, 20.0).bitwise_equal(c));
    CHECK_THROWS_AS(weighted_combination(b, v, 0.0), ValueError);
    CHECK_THROWS_AS(weighted_combination(b, v, -1.0), ValueError);
    CHECK_THROWS_AS(weighted_combination(b, Tensor({1, 3, 8, 7}), 1.0), ShapeError);
}
