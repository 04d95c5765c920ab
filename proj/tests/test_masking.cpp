#include <doctest.h>

#include <cmath>
#include <set>

#include "b2u/error.hpp"
#include "b2u/masking.hpp"
#include "helpers.hpp"

using namespace b2u;
using b2u::test::random_tensor;

namespace {

// Per-pixel loop: mean over in-bounds 3x3 neighbours, centre excluded.
Tensor interpolate_oracle(const Tensor& x) {
    const Shape s = x.shape();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int r = 0; r < s.h; ++r)
                for (int q = 0; q < s.w; ++q) {
                    double sum = 0.0;
                    int count = 0;
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dq = -1; dq <= 1; ++dq) {
                            if (dr == 0 && dq == 0) continue;
                            const int rr = r + dr, qq = q + dq;
                            if (rr < 0 || qq < 0 || rr >= s.h || qq >= s.w) continue;
                            sum += x.at(n, c, rr, qq);
                            ++count;
                        }
                    out.at(n, c, r, q) = static_cast<float>(sum / count);
                }
    return out;
}

}  // namespace

TEST_CASE("interpolate_neighbors") {
    SUBCASE("constant image is preserved, borders included") {
        const Tensor c({1, 2, 5, 7}, 0.3f);
        CHECK(max_abs_diff(interpolate_neighbors(c), c) <= 1e-7f);
    }
    SUBCASE("single centre impulse") {
        Tensor x({1, 1, 3, 3});
        x.at(0, 0, 1, 1) = 1.0f;
        const Tensor y = interpolate_neighbors(x);
        CHECK(y.at(0, 0, 1, 1) == 0.0f);
        for (auto [r, c] : {std::pair{0, 1}, {1, 0}, {1, 2}, {2, 1}}) CHECK(y.at(0, 0, r, c) == doctest::Approx(1.0 / 5));
        for (auto [r, c] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) CHECK(y.at(0, 0, r, c) == doctest::Approx(1.0 / 3));
    }
    SUBCASE("random 8x8 against the loop oracle") {
        const Tensor x = random_tensor({1, 3, 8, 8}, 5);
        CHECK(max_abs_diff(interpolate_neighbors(x), interpolate_oracle(x)) <= 1e-6f);
    }
    SUBCASE("never reads the centre pixel") {
        const Tensor x = random_tensor({1, 1, 6, 6}, 6);
        const Tensor base = interpolate_neighbors(x);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) {
                Tensor y = x;
                y.at(0, 0, r, c) += 5.0f;
                CHECK(interpolate_neighbors(y).at(0, 0, r, c) == base.at(0, 0, r, c));
            }
    }
    SUBCASE("too small") {
        CHECK_THROWS_AS(interpolate_neighbors(Tensor({1, 1, 1, 4})), ShapeError);
    }
}

TEST_CASE("global masked volume on 4x4 with s=2") {
    const Tensor x = random_tensor({1, 1, 4, 4}, 1);
    const MaskedVolume vol = make_global_masked_volume(x, MaskGridSpec{2});
    REQUIRE(vol.layers.size() == 4);
    std::set<std::pair<int, int>> seen;
    for (int l = 0; l < 4; ++l) {
        int blind = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (vol.is_blind(l, r, c)) {
                    ++blind;
                    CHECK(seen.insert({r, c}).second);
                }
        CHECK(blind == 4);
    }
    CHECK(seen.size() == 16);
    CHECK(vol.stacked().shape() == Shape{4, 1, 4, 4});
}

TEST_CASE("global masked volume on a constant image equals the input") {
    const Tensor c({1, 3, 6, 5}, 0.625f);
    for (const auto& layer : make_global_masked_volume(c, MaskGridSpec{2}).layers) CHECK(layer.bitwise_equal(c));
}

TEST_CASE("s=3 layers match the two source tensors positionwise") {
    const Tensor x = random_tensor({1, 2, 6, 6}, 3);
    const Tensor interp = interpolate_neighbors(x);
    const MaskGridSpec spec{3};
    const MaskedVolume vol = make_global_masked_volume(x, spec);
    REQUIRE(vol.layers.size() == 9);
    for (int l = 0; l < 9; ++l)
        for (int ch = 0; ch < 2; ++ch)
            for (int r = 0; r < 6; ++r)
                for (int c = 0; c < 6; ++c) {
                    const bool blind = (r % 3) * 3 + (c % 3) == l;
                    CHECK(vol.is_blind(l, r, c) == blind);
                    const float want = blind ? interp.at(0, ch, r, c) : x.at(0, ch, r, c);
                    CHECK(vol.layers[static_cast<std::size_t>(l)].at(0, ch, r, c) == want);
                }
}

TEST_CASE("partition property over random sizes") {
    Rng rng(99);
    for (int s : {2, 3, 4}) {
        const MaskGridSpec spec{s};
        for (int trial = 0; trial < 30; ++trial) {
            const int h = s + static_cast<int>(rng.below(12));
            const int w = s + static_cast<int>(rng.below(12));
            const MaskedVolume vol = make_global_masked_volume(Tensor({1, 1, h, w}), spec);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    int owners = 0;
                    for (int l = 0; l < spec.layers(); ++l) owners += vol.is_blind(l, r, c);
                    CHECK(owners == 1);
                }
        }
    }
}

TEST_CASE("mask spec validation") {
    CHECK_THROWS_AS(make_global_masked_volume(Tensor({1, 1, 4, 4}), MaskGridSpec{1}), ValueError);
    CHECK_THROWS_AS(make_global_masked_volume(Tensor({1, 1, 2, 4}), MaskGridSpec{3}), ValueError);
    CHECK_THROWS_AS(make_global_masked_volume(Tensor({2, 1, 4, 4}), MaskGridSpec{2}), ShapeError);
}

TEST_CASE("volume batch is image-major") {
    const Tensor batch = random_tensor({3, 2, 6, 6}, 4);
    const MaskGridSpec spec{2};
    const Tensor stacked = make_volume_batch(batch, spec);
    REQUIRE(stacked.shape() == Shape{12, 2, 6, 6});
    for (int b = 0; b < 3; ++b) {
        const auto vol = make_global_masked_volume(batch.batch_slice(b, 1), spec);
        for (int l = 0; l < 4; ++l) CHECK(stacked.batch_slice(b * 4 + l, 1).bitwise_equal(vol.layers[static_cast<std::size_t>(l)]));
    }
}

TEST_CASE("random masked image") {
    const Tensor x = random_tensor({1, 2, 4, 4}, 8);
    const MaskGridSpec spec{2};
    const auto a = make_random_masked_image(x, spec, 17);
    REQUIRE(a.blind.size() == 4);
    std::set<std::pair<int, int>> cells;
    for (const auto& p : a.blind) cells.insert({p.row / 2, p.col / 2});
    CHECK(cells.size() == 4);

    const Tensor interp = interpolate_neighbors(x);
    double mask_sum = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const bool blind = a.mask.at(0, 0, r, c) == 1.0f;
            mask_sum += a.mask.at(0, 0, r, c);
            for (int ch = 0; ch < 2; ++ch)
                CHECK(a.image.at(0, ch, r, c) == (blind ? interp.at(0, ch, r, c) : x.at(0, ch, r, c)));
        }
    CHECK(mask_sum == 4.0);

    const auto b = make_random_masked_image(x, spec, 17);
    CHECK(a.blind == b.blind);
    CHECK(a.image.bitwise_equal(b.image));

    CHECK_THROWS_AS(make_random_masked_image(Tensor({1, 1, 5, 4}), spec, 1), ShapeError);
}

TEST_CASE("random mask picks each cell position uniformly") {
    const Tensor x = random_tensor({1, 1, 2, 2}, 9);
    int counts[4] = {0, 0, 0, 0};
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        const auto m = make_random_masked_image(x, MaskGridSpec{2}, derive_seed({123, static_cast<std::uint64_t>(i)}));
        REQUIRE(m.blind.size() == 1);
        ++counts[m.blind[0].row * 2 + m.blind[0].col];
    }
    for (int c : counts) CHECK(std::abs(static_cast<double>(c) / kDraws - 0.25) <= 0.02);
}
