#pragma once

#include <string>

#include "melc/optimize.hpp"
#include "melc/types.hpp"

namespace melc {

/// A trained model: the unit-normalized projection plus the per-class
/// projected training samples and their Silverman bandwidths at that
/// projection. Prediction compares the two class-conditional projected
/// KDE densities.
struct MelcModel {
    Vec v;  // unit norm
    Vec train_proj_neg;
    Vec train_proj_pos;
    double h_neg = 0.0;
    double h_pos = 0.0;
    double gamma = 1.0;

    // Training provenance.
    OptimizationResult training_meta;  // winning restart
    long long total_exp_calls = 0;     // all restarts, all evaluations
    long long total_naive_pairs = 0;
    long long total_evaluations = 0;
    std::string mode;
    double epsilon = 0.0;
    std::string optimizer;
    std::uint64_t seed = 0;
};

struct EvalMetrics {
    double bac = 0.0;
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    bool degenerate_truth = false;  // a class absent; its recall counted as 0
};

/// Trains the projection by multi-restart maximization of the penalized
/// divergence in the requested evaluator mode, then normalizes the winner
/// to unit norm and stores projections/bandwidths at the normalized v.
MelcModel fit(const LabeledDataset& dataset, const KdeParams& params,
              const ApproxConfig& approx, const OptimizerConfig& opt,
              int n_starts);

/// Density-comparison rule: project x, evaluate both class KDEs at the
/// projection, return +1/-1 for the larger (ties go to +1).
int predict(const MelcModel& model, std::span<const double> x);

std::vector<int> predict(const MelcModel& model, const PointMatrix& points);

/// Balanced accuracy 0.5 * (TP/(TP+FN) + TN/(TN+FP)) with the exhaustive
/// confusion counts. Labels are -1/+1.
EvalMetrics balanced_accuracy(std::span<const int> predictions,
                              std::span<const int> truth);

/// Model file round-trip; reals are stored as hexadecimal float strings so
/// the reload is bit-exact.
void save_model(const MelcModel& model, const std::string& path);
MelcModel load_model(const std::string& path);

}  // namespace melc
