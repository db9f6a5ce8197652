#include <doctest.h>

#include <cmath>

#include "melc/core.hpp"
#include "melc/rng.hpp"
#include "support/test_utils.hpp"

using melc::KdeParams;
using melc::LabeledDataset;
using melc::PointMatrix;
using melc::Vec;

namespace {

PointMatrix points2(std::initializer_list<std::initializer_list<double>> rows) {
    PointMatrix m(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& row : rows) {
        std::size_t j = 0;
        for (double x : row) m.at(i, j++) = x;
        ++i;
    }
    return m;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("project: axis projection") {
    const auto pts = points2({{1, 0}, {0, 1}});
    const Vec out = melc::project(pts, Vec{1, 0});
    CHECK(out == Vec{1, 0});
}

TEST_CASE("project: zero operator") {
    const auto pts = points2({{2, 3}});
    CHECK(melc::project(pts, Vec{0, 0}) == Vec{0});
}

TEST_CASE("project: hand inner products") {
    const auto pts = points2({{1, 2}, {3, 4}});
    const Vec out = melc::project(pts, Vec{0.5, -0.5});
    CHECK(out[0] == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("project: dimension mismatch") {
    const auto pts = points2({{1, 2}});
    CHECK_THROWS_AS(melc::project(pts, Vec{1, 0, 0}), melc::DimensionMismatch);
}

TEST_CASE("project is linear") {
    melc::rng::Sampler s(42);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 2 + s.below(6);
        PointMatrix pts(5, d);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t k = 0; k < d; ++k) pts.at(i, k) = s.gaussian();
        Vec u(d), w(d);
        for (std::size_t k = 0; k < d; ++k) {
            u[k] = s.gaussian();
            w[k] = s.gaussian();
        }
        const double a = s.uniform(-2.0, 2.0), b = s.uniform(-2.0, 2.0);
        Vec combo(d);
        for (std::size_t k = 0; k < d; ++k) combo[k] = a * u[k] + b * w[k];
        const Vec lhs = melc::project(pts, combo);
        const Vec pu = melc::project(pts, u);
        const Vec pw = melc::project(pts, w);
        for (std::size_t i = 0; i < 5; ++i) {
            const double rhs = a * pu[i] + b * pw[i];
            CHECK(testutil::close_with_floor(lhs[i], rhs, 1e-12, 1e-13));
        }
    }
}

TEST_CASE("variance_profile: hand Silverman evaluation") {
    // Class projections {0, 2} at n=2: sample variance 2, sigma = sqrt(2),
    // h = (2/3)^(1/5) * sqrt(2), v_self = 2 h^2.
    const auto neg = points2({{0}, {2}});
    const auto pos = points2({{0}, {2}});
    const LabeledDataset ds(neg, pos);
    const auto profile = melc::variance_profile(ds, Vec{1}, KdeParams{1.0});
    const double expected_h = std::pow(2.0 / 3.0, 0.2) * std::sqrt(2.0);
    CHECK(profile.h_neg == doctest::Approx(expected_h).epsilon(1e-12));
    CHECK(profile.h_neg == doctest::Approx(1.3040).epsilon(1e-4));
    CHECK(profile.v_self_neg ==
          doctest::Approx(2.0 * expected_h * expected_h).epsilon(1e-12));
    CHECK(profile.v_self_neg == doctest::Approx(3.401).epsilon(1e-3));
}

TEST_CASE("variance_profile: identical classes give symmetric profile") {
    const auto ds = testutil::make_blobs(7, 12, 12, 3, 0.0);
    PointMatrix pos_copy = ds.points_neg();
    const LabeledDataset same(ds.points_neg(), pos_copy);
    const auto profile = melc::variance_profile(same, Vec{0.3, -1.0, 0.5},
                                                KdeParams{1.3});
    CHECK(profile.h_neg == profile.h_pos);
    CHECK(profile.v_cross == profile.v_self_neg);
    CHECK(profile.v_cross == profile.v_self_pos);
}

TEST_CASE("variance_profile: degenerate projection") {
    const auto neg = points2({{5, 0}, {5, 0}});
    const auto pos = points2({{0, 1}, {1, 0}});
    const LabeledDataset ds(neg, pos);
    CHECK_THROWS_AS(melc::variance_profile(ds, Vec{1, 0}, KdeParams{1.0}),
                    melc::DegenerateProjection);
}

TEST_CASE("variance_profile: scaling homogeneity") {
    const auto ds = testutil::make_blobs(11, 9, 14, 4, 2.0);
    melc::rng::Sampler s(5);
    const Vec v = s.unit_vector(4);
    const auto base = melc::variance_profile(ds, v, KdeParams{0.7});
    for (double c : {0.5, 2.0, 10.0}) {
        Vec cv(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) cv[k] = c * v[k];
        const auto scaled = melc::variance_profile(ds, cv, KdeParams{0.7});
        CHECK(testutil::close_with_floor(scaled.h_neg, c * base.h_neg, 1e-12, 0));
        CHECK(testutil::close_with_floor(scaled.h_pos, c * base.h_pos, 1e-12, 0));
        CHECK(testutil::close_with_floor(scaled.v_cross, c * c * base.v_cross,
                                         1e-12, 0));
        CHECK(testutil::close_with_floor(scaled.v_self_neg,
                                         c * c * base.v_self_neg, 1e-12, 0));
    }
}

TEST_CASE("variance_profile: internal identities exact") {
    const auto ds = testutil::make_blobs(3, 8, 10, 5, 1.0);
    melc::rng::Sampler s(9);
    const Vec v = s.unit_vector(5);
    const auto p = melc::variance_profile(ds, v, KdeParams{1.9});
    CHECK(p.v_cross == p.h_neg * p.h_neg + p.h_pos * p.h_pos);
    CHECK(p.v_self_neg == 2.0 * p.h_neg * p.h_neg);
    CHECK(p.v_self_pos == 2.0 * p.h_pos * p.h_pos);
}

TEST_CASE("dataset: rejects classes with fewer than 2 points") {
    CHECK_THROWS_AS(LabeledDataset(points2({{1, 2}}), points2({{0, 1}, {2, 2}})),
                    melc::TooSmallClass);
}

}  // TEST_SUITE
