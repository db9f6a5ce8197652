#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "melc/harness.hpp"
#include "melc/rng.hpp"
#include "melc/types.hpp"

namespace testutil {

using melc::LabeledDataset;
using melc::PointMatrix;
using melc::Vec;

/// Two seeded gaussian blobs, class centers +-separation/2 along a random
/// unit direction.
inline LabeledDataset make_blobs(std::uint64_t seed, std::size_t n_neg,
                                 std::size_t n_pos, std::size_t d,
                                 double separation, double spread = 1.0) {
    melc::rng::Sampler s(seed);
    const Vec dir = s.unit_vector(d);
    PointMatrix neg(n_neg, d), pos(n_pos, d);
    for (std::size_t i = 0; i < n_neg; ++i)
        for (std::size_t k = 0; k < d; ++k)
            neg.at(i, k) = -0.5 * separation * dir[k] + spread * s.gaussian();
    for (std::size_t i = 0; i < n_pos; ++i)
        for (std::size_t k = 0; k < d; ++k)
            pos.at(i, k) = 0.5 * separation * dir[k] + spread * s.gaussian();
    return LabeledDataset(std::move(neg), std::move(pos));
}

// ---------------------------------------------------------------------------
// Independent direct-summation oracle. This re-derives the divergence from
// the formulas with plain loops and stays decoupled from the library's
// evaluation path on purpose: tests compare the two routes.
// ---------------------------------------------------------------------------

inline double oracle_sigma(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double oracle_ip(std::span<const double> a, std::span<const double> b,
                        double V) {
    double sum = 0.0;
    for (double x : a)
        for (double y : b) sum += std::exp(-(x - y) * (x - y) / (2.0 * V));
    return sum / (std::sqrt(2.0 * std::numbers::pi * V) *
                  static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

inline Vec oracle_project(const PointMatrix& points, const Vec& v) {
    Vec out(points.rows(), 0.0);
    for (std::size_t i = 0; i < points.rows(); ++i)
        for (std::size_t k = 0; k < points.cols(); ++k)
            out[i] += points.at(i, k) * v[k];
    return out;
}

inline double oracle_dcs(const LabeledDataset& ds, const Vec& v, double gamma) {
    const Vec pn = oracle_project(ds.points_neg(), v);
    const Vec pp = oracle_project(ds.points_pos(), v);
    const double sn = oracle_sigma(pn);
    const double sp = oracle_sigma(pp);
    const double hn =
        gamma * std::pow(4.0 / (3.0 * static_cast<double>(pn.size())), 0.2) * sn;
    const double hp =
        gamma * std::pow(4.0 / (3.0 * static_cast<double>(pp.size())), 0.2) * sp;
    const double v_cross = hn * hn + hp * hp;
    return -2.0 * std::log(oracle_ip(pn, pp, v_cross)) +
           std::log(oracle_ip(pn, pn, 2.0 * hn * hn)) +
           std::log(oracle_ip(pp, pp, 2.0 * hp * hp));
}

// ---------------------------------------------------------------------------

template <typename F>
Vec fd_gradient(F&& f, const Vec& v, double step) {
    Vec g(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        Vec hi = v, lo = v;
        hi[k] += step;
        lo[k] -= step;
        g[k] = (f(hi) - f(lo)) / (2.0 * step);
    }
    return g;
}

inline bool close_with_floor(double got, double want, double rel, double abs_floor) {
    const double diff = std::fabs(got - want);
    return diff <= abs_floor || diff <= rel * std::max(std::fabs(got), std::fabs(want));
}

}  // namespace testutil
