#pragma once

#include <span>

#include "melc/types.hpp"

namespace melc {

/// Projects every point onto v: out[i] = <v, points[i]>.
/// Throws DimensionMismatch if the widths disagree.
Vec project(const PointMatrix& points, std::span<const double> v);

/// Silverman-rule bandwidths and the three V values at projection v.
/// h_c = gamma * (4/(3 n_c))^(1/5) * sigma_c(v), sample standard deviation
/// (n-1 denominator). Throws DegenerateProjection when a class's projected
/// variance collapses below 1e-300.
VarianceProfile variance_profile(const LabeledDataset& dataset,
                                 std::span<const double> v,
                                 const KdeParams& params);

/// Same computation when the projections are already available.
VarianceProfile variance_profile_from_projections(std::span<const double> proj_neg,
                                                  std::span<const double> proj_pos,
                                                  const KdeParams& params);

/// Sample covariance times v for one class: S v = (1/(n-1)) sum_i
/// (x_i - xbar) * (a_i - abar), with a = projections of the class at v.
/// This is the building block of dV/dv; no d x d matrix is ever formed.
Vec scatter_times_v(const PointMatrix& points, std::span<const double> projections);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(Vec& y, double alpha, std::span<const double> x);

}  // namespace melc
