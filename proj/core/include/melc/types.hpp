#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "melc/error.hpp"

namespace melc {

using Vec = std::vector<double>;

/// Dense row-major matrix of points, one point per row.
class PointMatrix {
public:
    PointMatrix() = default;
    PointMatrix(std::size_t rows, std::size_t cols)
        : data_(rows * cols, 0.0), rows_(rows), cols_(cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& storage() const { return data_; }

private:
    std::vector<double> data_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

/// Two-class dataset, immutable after construction. Each class needs at
/// least two points so the per-class sample standard deviation exists.
class LabeledDataset {
public:
    LabeledDataset(PointMatrix neg, PointMatrix pos);

    const PointMatrix& points_neg() const { return neg_; }
    const PointMatrix& points_pos() const { return pos_; }
    std::size_t dim() const { return dim_; }
    std::size_t size_neg() const { return neg_.rows(); }
    std::size_t size_pos() const { return pos_.rows(); }
    std::size_t size() const { return neg_.rows() + pos_.rows(); }

private:
    PointMatrix neg_;
    PointMatrix pos_;
    std::size_t dim_ = 0;
};

/// Bandwidth scaling hyperparameter of the divergence.
struct KdeParams {
    double gamma = 1.0;
};

/// Per-class Silverman bandwidths at a fixed projection, plus the variance
/// V of each of the three information-potential terms.
///
/// kappa_c = gamma^2 * (4/(3 n_c))^(2/5), so h_c^2 = kappa_c * sigma_c^2.
struct VarianceProfile {
    double h_neg = 0.0;
    double h_pos = 0.0;
    double kappa_neg = 0.0;
    double kappa_pos = 0.0;
    double v_cross = 0.0;     // h_neg^2 + h_pos^2
    double v_self_neg = 0.0;  // 2 h_neg^2
    double v_self_pos = 0.0;  // 2 h_pos^2
};

}  // namespace melc
