#include "melc/core.hpp"

#include <cmath>
#include <string>

namespace melc {

LabeledDataset::LabeledDataset(PointMatrix neg, PointMatrix pos)
    : neg_(std::move(neg)), pos_(std::move(pos)) {
    if (neg_.rows() < 2 || pos_.rows() < 2) {
        throw TooSmallClass("each class needs at least 2 points, got " +
                            std::to_string(neg_.rows()) + " / " +
                            std::to_string(pos_.rows()));
    }
    if (neg_.cols() != pos_.cols()) {
        throw DimensionMismatch("class dimensions differ: " +
                                std::to_string(neg_.cols()) + " vs " +
                                std::to_string(pos_.cols()));
    }
    dim_ = neg_.cols();
    if (dim_ == 0) throw DimensionMismatch("zero-dimensional points");
    for (const auto* m : {&neg_, &pos_}) {
        for (double x : m->storage()) {
            if (!std::isfinite(x)) throw Error("non-finite coordinate in dataset");
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(Vec& y, double alpha, std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec project(const PointMatrix& points, std::span<const double> v) {
    if (points.cols() != v.size()) {
        throw DimensionMismatch("point dimension " + std::to_string(points.cols()) +
                                " does not match projection dimension " +
                                std::to_string(v.size()));
    }
    Vec out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) out[i] = dot(points.row(i), v);
    return out;
}

namespace {

double sample_variance(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        const double c = x - mean;
        ss += c * c;
    }
    return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

VarianceProfile variance_profile_from_projections(std::span<const double> proj_neg,
                                                  std::span<const double> proj_pos,
                                                  const KdeParams& params) {
    if (proj_neg.size() < 2 || proj_pos.size() < 2) {
        throw TooSmallClass("variance profile needs >= 2 projections per class");
    }
    if (!(params.gamma > 0.0)) throw Error("gamma must be positive");

    VarianceProfile p;
    const double var_neg = sample_variance(proj_neg);
    const double var_pos = sample_variance(proj_pos);
    if (var_neg < 1e-300 || var_pos < 1e-300) {
        throw DegenerateProjection("projected class variance collapsed");
    }
    const double n_neg = static_cast<double>(proj_neg.size());
    const double n_pos = static_cast<double>(proj_pos.size());
    p.kappa_neg = params.gamma * params.gamma * std::pow(4.0 / (3.0 * n_neg), 0.4);
    p.kappa_pos = params.gamma * params.gamma * std::pow(4.0 / (3.0 * n_pos), 0.4);
    p.h_neg = params.gamma * std::pow(4.0 / (3.0 * n_neg), 0.2) * std::sqrt(var_neg);
    p.h_pos = params.gamma * std::pow(4.0 / (3.0 * n_pos), 0.2) * std::sqrt(var_pos);
    p.v_cross = p.h_neg * p.h_neg + p.h_pos * p.h_pos;
    p.v_self_neg = 2.0 * p.h_neg * p.h_neg;
    p.v_self_pos = 2.0 * p.h_pos * p.h_pos;
    return p;
}

VarianceProfile variance_profile(const LabeledDataset& dataset,
                                 std::span<const double> v,
                                 const KdeParams& params) {
    const Vec pn = project(dataset.points_neg(), v);
    const Vec pp = project(dataset.points_pos(), v);
    return variance_profile_from_projections(pn, pp, params);
}

Vec scatter_times_v(const PointMatrix& points, std::span<const double> projections) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    Vec mean_point(d, 0.0);
    double mean_proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        axpy(mean_point, 1.0, points.row(i));
        mean_proj += projections[i];
    }
    for (double& m : mean_point) m /= static_cast<double>(n);
    mean_proj /= static_cast<double>(n);

    Vec out(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = projections[i] - mean_proj;
        auto row = points.row(i);
        for (std::size_t j = 0; j < d; ++j) out[j] += c * (row[j] - mean_point[j]);
    }
    for (double& x : out) x /= static_cast<double>(n - 1);
    return out;
}

}  // namespace melc
