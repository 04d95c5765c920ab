#include <doctest.h>

#include <cmath>

#include "b2u/autodiff.hpp"
#include "b2u/error.hpp"
#include "helpers.hpp"

using namespace b2u;
using b2u::test::random_tensor;

namespace {

// Direct nested-loop cross-correlation with zero padding.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    const int k = ws.h;
    const int oh = (xs.h + 2 * pad - k) / stride + 1;
    const int ow = (xs.w + 2 * pad - k) / stride + 1;
    Tensor out({xs.n, ws.n, oh, ow});
    for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < ws.n; ++co)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double acc = b.at(0, co, 0, 0);
                    for (int ci = 0; ci < ws.c; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = y * stride + ky - pad;
                                const int ix = xx * stride + kx - pad;
                                if (iy < 0 || ix < 0 || iy >= xs.h || ix >= xs.w) continue;
                                acc += static_cast<double>(x.at(n, ci, iy, ix)) * w.at(co, ci, ky, kx);
                            }
                    out.at(n, co, y, xx) = static_cast<float>(acc);
                }
    return out;
}

GradcheckReport check(const GraphBuilder& fn, std::map<std::string, Tensor> params) {
    return gradcheck(fn, params, 1e-3, 1e-3);
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.shape().numel() == 120);
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t.data()[119] == 7.0f);
    CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);

    const Tensor s = t.batch_slice(1, 1);
    CHECK(s.shape() == Shape{1, 3, 4, 5});
    CHECK(s.at(0, 2, 3, 4) == 7.0f);
    const Tensor c = t.channel_slice(2, 1);
    CHECK(c.shape() == Shape{2, 1, 4, 5});
    CHECK(c.at(1, 0, 3, 4) == 7.0f);

    const Tensor parts[] = {random_tensor({1, 2, 3, 3}, 1), random_tensor({2, 2, 3, 3}, 2)};
    const Tensor cat = concat_batch(parts);
    CHECK(cat.shape() == Shape{3, 2, 3, 3});
    CHECK(cat.batch_slice(1, 2).bitwise_equal(parts[1]));
}

TEST_CASE("require_same_shape names the offending dimension") {
    try {
        require_same_shape({1, 2, 3, 4}, {1, 2, 5, 4}, "x");
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.dimension() == "h");
    }
}

TEST_CASE("conv2d box sum") {
    Graph g;
    Var x = g.constant(Tensor({1, 1, 3, 3}, 1.0f));
    Var w = g.constant(Tensor({1, 1, 3, 3}, 1.0f));
    Var b = g.constant(Tensor({1, 1, 1, 1}));
    const Tensor& out = g.value(ops::conv2d(g, x, w, b, 1, 1));
    CHECK(out.at(0, 0, 1, 1) == 9.0f);
    CHECK(out.at(0, 0, 0, 0) == 4.0f);
    CHECK(out.at(0, 0, 0, 2) == 4.0f);
    CHECK(out.at(0, 0, 2, 0) == 4.0f);
    CHECK(out.at(0, 0, 2, 2) == 4.0f);
    CHECK(out.at(0, 0, 0, 1) == 6.0f);
}

TEST_CASE("conv2d identity kernel") {
    for (int k : {1, 3, 5}) {
        const Tensor x = random_tensor({2, 3, 7, 6}, 11);
        Tensor w({3, 3, k, k});
        for (int c = 0; c < 3; ++c) w.at(c, c, k / 2, k / 2) = 1.0f;
        const Tensor out = conv2d_forward(x, w, Tensor({1, 3, 1, 1}), 1, (k - 1) / 2);
        CHECK(out.bitwise_equal(x));
    }
}

TEST_CASE("conv2d agrees with a nested-loop reference") {
    struct Case { Shape x; int c_out, k, stride, pad; };
    for (const Case& cs : {Case{{2, 3, 8, 8}, 4, 3, 1, 1}, Case{{2, 4, 16, 16}, 3, 3, 1, 1},
                           Case{{1, 2, 9, 7}, 2, 3, 2, 1}, Case{{2, 4, 16, 16}, 2, 5, 1, 2},
                           Case{{1, 3, 6, 6}, 5, 1, 1, 0}, Case{{1, 2, 8, 8}, 3, 3, 1, 0}}) {
        const Tensor x = random_tensor(cs.x, 3);
        const Tensor w = random_tensor({cs.c_out, cs.x.c, cs.k, cs.k}, 4);
        const Tensor b = random_tensor({1, cs.c_out, 1, 1}, 5);
        const Tensor ref = naive_conv(x, w, b, cs.stride, cs.pad);
        const Tensor got = conv2d_forward(x, w, b, cs.stride, cs.pad);
        REQUIRE(got.shape() == ref.shape());
        CHECK(max_abs_diff(got, ref) <= 1e-5f);
    }
}

TEST_CASE("conv2d output size and shape errors") {
    const Tensor out = conv2d_forward(random_tensor({1, 1, 9, 9}, 1), random_tensor({1, 1, 3, 3}, 2),
                                      Tensor({1, 1, 1, 1}), 2, 1);
    CHECK(out.shape() == Shape{1, 1, 5, 5});
    try {
        conv2d_forward(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1, 1, 1, 1}), 1, 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.dimension() == "c");
    }
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 1, 4, 4}), Tensor({1, 1, 2, 2}), Tensor({1, 1, 1, 1}), 1, 0),
                    ShapeError);
}

TEST_CASE("leaky_relu values and gradient") {
    Graph g;
    Tensor x({1, 1, 1, 3}, std::vector<float>{-1.0f, 0.0f, 2.0f});
    const Tensor& y = g.value(ops::leaky_relu(g, g.constant(x), 0.1f));
    CHECK(y.data()[0] == doctest::Approx(-0.1f));
    CHECK(y.data()[1] == 0.0f);
    CHECK(y.data()[2] == 2.0f);
    const Tensor& r = g.value(ops::leaky_relu(g, g.constant(x), 0.0f));
    CHECK(r.data()[0] == 0.0f);
    CHECK(r.data()[2] == 2.0f);

    auto report = check([](Graph& gg, const std::map<std::string, Var>& p) {
        return ops::sum(gg, ops::leaky_relu(gg, p.at("x"), 0.1f));
    }, {{"x", Tensor::scalar(-1.0f)}});
    CHECK(report.passed);

    Graph g2;
    Var px = g2.parameter("x", Tensor::scalar(-1.0f));
    const auto grads = g2.backward(ops::sum(g2, ops::leaky_relu(g2, px, 0.1f)));
    CHECK(grads.at("x").item() == doctest::Approx(0.1f));
}

TEST_CASE("pool and upsample") {
    Graph g;
    Tensor x({1, 1, 2, 2}, std::vector<float>{1, 3, 5, 7});
    Var p = ops::avg_pool2d(g, g.constant(x), 2);
    CHECK(g.value(p).shape() == Shape{1, 1, 1, 1});
    CHECK(g.value(p).item() == 4.0f);
    Var u = ops::nearest_upsample(g, p, 2);
    CHECK(g.value(u).shape() == Shape{1, 1, 2, 2});
    for (float v : g.value(u).data()) CHECK(v == 4.0f);

    const Tensor c({1, 2, 8, 8}, 0.375f);
    Var round = ops::nearest_upsample(g, ops::avg_pool2d(g, g.constant(c), 2), 2);
    CHECK(g.value(round).bitwise_equal(c));
    CHECK_THROWS_AS(ops::avg_pool2d(g, g.constant(Tensor({1, 1, 3, 4})), 2), ShapeError);
    CHECK_THROWS_AS(ops::nearest_upsample(g, g.constant(c), 0), ValueError);
}

TEST_CASE("concat_channels") {
    Graph g;
    const Tensor a = random_tensor({1, 2, 4, 4}, 1);
    const Tensor b = random_tensor({1, 3, 4, 4}, 2);
    const Tensor& out = g.value(ops::concat_channels(g, g.constant(a), g.constant(b)));
    CHECK(out.shape() == Shape{1, 5, 4, 4});
    CHECK(out.channel_slice(0, 2).bitwise_equal(a));
    CHECK(out.channel_slice(2, 3).bitwise_equal(b));
    CHECK_THROWS_AS(ops::concat_channels(g, g.constant(a), g.constant(Tensor({1, 3, 4, 5}))), ShapeError);

    auto report = check([](Graph& gg, const std::map<std::string, Var>& p) {
        Var cat = ops::concat_channels(gg, p.at("a"), p.at("b"));
        return ops::sum(gg, ops::square(gg, cat));
    }, {{"a", a}, {"b", b}});
    CHECK(report.passed);
    CHECK(report.entries.size() == 2);
}

TEST_CASE("detach is value preserving and gradient annihilating") {
    const Tensor x0 = random_tensor({1, 1, 3, 3}, 7);
    {
        Graph g;
        Var x = g.parameter("x", x0);
        Var d = ops::detach(g, x);
        CHECK(g.value(d).bitwise_equal(x0));
        CHECK_FALSE(g.requires_grad(d));
        const auto grads = g.backward(ops::sum(g, d));
        for (float v : grads.at("x").data()) CHECK(v == 0.0f);
    }
    {
        // sum(detach(x) * x): gradient is detach(x), not 2x.
        Graph g;
        Var x = g.parameter("x", x0);
        const auto grads = g.backward(ops::sum(g, ops::mul(g, ops::detach(g, x), x)));
        CHECK(grads.at("x").bitwise_equal(x0));
    }
    // The finite-difference side freezes the detached factor too.
    auto report = check([](Graph& g, const std::map<std::string, Var>& p) {
        return ops::sum(g, ops::mul(g, ops::detach(g, p.at("x")), p.at("x")));
    }, {{"x", x0}});
    CHECK(report.passed);
}

TEST_CASE("backward basics") {
    Graph g;
    const Tensor x0 = random_tensor({1, 2, 3, 3}, 8);
    Var w = g.parameter("w", random_tensor({1, 2, 3, 3}, 9));
    const auto grads = g.backward(ops::sum(g, ops::mul(g, w, g.constant(x0))));
    CHECK(grads.at("w").bitwise_equal(x0));

    CHECK_THROWS_AS(g.backward(w), ShapeError);
    CHECK_THROWS_AS(g.parameter("w", Tensor::scalar(1.0f)), ValueError);

    // Two backward calls on one graph agree bitwise.
    Graph h;
    Var a = h.parameter("a", random_tensor({1, 1, 4, 4}, 10));
    Var loss = ops::mean(h, ops::square(h, ops::leaky_relu(h, a, 0.1f)));
    const auto g1 = h.backward(loss);
    const auto g2 = h.backward(loss);
    CHECK(g1.at("a").bitwise_equal(g2.at("a")));
}

TEST_CASE("gradcheck trivial quadratic") {
    Graph g;
    Var x = g.parameter("x", Tensor::scalar(3.0f));
    CHECK(g.backward(ops::sum(g, ops::square(g, x))).at("x").item() == 6.0f);
    auto report = check([](Graph& gg, const std::map<std::string, Var>& p) {
        return ops::sum(gg, ops::square(gg, p.at("x")));
    }, {{"x", Tensor::scalar(3.0f)}});
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-3);
}

TEST_CASE("every differentiable op passes gradcheck") {
    const std::map<std::string, Tensor> p2 = {{"a", random_tensor({2, 2, 4, 4}, 21)},
                                              {"b", random_tensor({2, 2, 4, 4}, 22)}};
    auto quad = [](Graph& g, Var v) { return ops::sum(g, ops::square(g, v)); };

    SUBCASE("conv2d") {
        const auto report = check([](Graph& g, const std::map<std::string, Var>& p) {
            Var y = ops::conv2d(g, p.at("x"), p.at("w"), p.at("b"), 1, 1);
            return ops::mean(g, ops::square(g, y));
        }, {{"x", random_tensor({2, 3, 6, 6}, 31)},
            {"w", random_tensor({4, 3, 3, 3}, 32)},
            {"b", random_tensor({1, 4, 1, 1}, 33)}});
        CHECK(report.passed);
        CHECK(report.entries.size() == 3);
    }
    SUBCASE("conv2d stride 2") {
        const auto report = check([](Graph& g, const std::map<std::string, Var>& p) {
            return ops::sum(g, ops::square(g, ops::conv2d(g, p.at("x"), p.at("w"), p.at("b"), 2, 1)));
        }, {{"x", random_tensor({1, 2, 7, 7}, 34)},
            {"w", random_tensor({2, 2, 3, 3}, 35)},
            {"b", random_tensor({1, 2, 1, 1}, 36)}});
        CHECK(report.passed);
    }
    SUBCASE("pointwise and reductions") {
        for (int which = 0; which < 5; ++which) {
            const auto report = check([&](Graph& g, const std::map<std::string, Var>& p) {
                Var a = p.at("a");
                Var b = p.at("b");
                switch (which) {
                    case 0: return quad(g, ops::add(g, a, b));
                    case 1: return quad(g, ops::sub(g, a, b));
                    case 2: return quad(g, ops::mul(g, a, b));
                    case 3: return ops::mean(g, ops::square(g, ops::scale(g, a, -2.5f)));
                    default:
                        return ops::weighted_sum(g, quad(g, a), 0.5f, ops::mean(g, b), 3.0f);
                }
            }, p2);
            CHECK_MESSAGE(report.passed, "case " << which);
        }
    }
    SUBCASE("pool and upsample") {
        const auto report = check([&](Graph& g, const std::map<std::string, Var>& p) {
            Var up = ops::nearest_upsample(g, ops::avg_pool2d(g, p.at("a"), 2), 2);
            return quad(g, ops::mul(g, up, p.at("b")));
        }, p2);
        CHECK(report.passed);
    }
}

TEST_CASE("forward and backward are deterministic") {
    auto run = [] {
        Graph g;
        Var x = g.constant(random_tensor({2, 3, 8, 8}, 41));
        Var w = g.parameter("w", random_tensor({4, 3, 3, 3}, 42));
        Var b = g.parameter("b", random_tensor({1, 4, 1, 1}, 43));
        Var y = ops::leaky_relu(g, ops::conv2d(g, x, w, b, 1, 1), 0.1f);
        return g.backward(ops::mean(g, ops::square(g, y)));
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.at("w").bitwise_equal(b.at("w")));
    CHECK(a.at("b").bitwise_equal(b.at("b")));
}

TEST_CASE("forward values stay finite") {
    Graph g;
    Var x = g.constant(random_tensor({1, 2, 8, 8}, 51, -100.0, 100.0));
    Var w = g.constant(random_tensor({2, 2, 3, 3}, 52));
    Var y = ops::conv2d(g, x, w, g.constant(Tensor({1, 2, 1, 1})), 1, 1);
    y = ops::nearest_upsample(g, ops::avg_pool2d(g, ops::leaky_relu(g, y, 0.1f), 2), 2);
    for (float v : g.value(ops::square(g, y)).data()) CHECK(std::isfinite(v));
}

TEST_CASE("gradcheck pins leaky_relu branches at the unperturbed point") {
    // 1e-4 sits inside the 1e-3 step: an unpinned central difference would
    // average the two slopes to about 0.595 instead of 1.
    const Tensor x = Tensor::scalar(1e-4f);
    auto fn = [](Graph& g, const std::map<std::string, Var>& p) { return ops::sum(g, ops::leaky_relu(g, p.at("x"), 0.1f)); };
    const auto report = gradcheck(fn, {{"x", x}}, 1e-3, 1e-3);
    CHECK(report.passed);

    Graph::FrozenPieces pieces;
    Graph rec;
    rec.record_pieces(&pieces);
    ops::leaky_relu(rec, rec.constant(Tensor::scalar(-1.0f)), 0.1f);
    REQUIRE(pieces.branches.size() == 1);
    CHECK(pieces.branches[0][0] == 0);
    Graph rep(false);
    rep.replay_pieces(&pieces);
    CHECK(rep.value(ops::leaky_relu(rep, rep.constant(Tensor::scalar(2.0f)), 0.1f)).item() == doctest::Approx(0.2f));
    CHECK_THROWS_AS(ops::leaky_relu(rep, rep.constant(Tensor::scalar(2.0f)), 0.1f), ValueError);
}

TEST_CASE("scalar reductions keep a 64-bit value") {
    Graph g;
    Tensor t({1, 1, 1, 3});
    t.data()[0] = 1.0f;
    t.data()[1] = 1e-8f;
    t.data()[2] = 1e-8f;
    Var s = ops::sum(g, g.constant(t));
    CHECK(g.value(s).item() == 1.0f);
    CHECK(g.scalar(s) == doctest::Approx(1.0 + 2e-8).epsilon(1e-15));
    Var w = ops::weighted_sum(g, s, 2.0f, ops::mean(g, g.constant(t)), -1.0f);
    CHECK(g.scalar(w) == doctest::Approx(2.0 * (1.0 + 2e-8) - (1.0 + 2e-8) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(g.scalar(g.constant(t)), ShapeError);
}
