#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "melc/potential.hpp"
#include "melc/types.hpp"

namespace melc {

enum class OptMethod { cg, lbfgs };

std::string to_string(OptMethod m);
OptMethod opt_method_from_string(const std::string& s);

struct Evaluation {
    double value = 0.0;
    Vec gradient;  // empty when the value is non-finite
    PotentialStats stats;
};

/// Evaluation contract handed to the optimizers: f and its gradient at v,
/// plus per-run accumulation of evaluation and kernel-call counts. Copies
/// share state, so a penalty wrapper and its base report the same totals.
class ObjectiveHandle {
public:
    using Fn = std::function<Evaluation(std::span<const double>)>;

    ObjectiveHandle(std::size_t dim, Fn fn)
        : state_(std::make_shared<State>(State{std::move(fn), dim, 0, {}})) {}

    Evaluation evaluate(std::span<const double> v) const {
        Evaluation e = state_->fn(v);
        ++state_->evaluations;
        state_->totals += e.stats;
        return e;
    }

    std::size_t dim() const { return state_->dim; }
    long long evaluation_count() const { return state_->evaluations; }
    PotentialStats totals() const { return state_->totals; }
    void reset_counters() {
        state_->evaluations = 0;
        state_->totals = {};
    }

private:
    struct State {
        Fn fn;
        std::size_t dim;
        long long evaluations;
        PotentialStats totals;
    };
    std::shared_ptr<State> state_;
};

/// Objective over the divergence in the chosen evaluator mode. The handle
/// references the dataset (which must outlive it) and owns the run's sort
/// cache; do not share one handle across concurrent runs.
ObjectiveHandle make_dcs_objective(const LabeledDataset& dataset,
                                   const KdeParams& params,
                                   const ApproxConfig& config);

/// Out-of-sphere reformulation: value - (|v|^2 - 1)^2 with gradient
/// grad - 4 v (<v,v> - 1). Restricting to the unit sphere, the wrapped and
/// base problems share their maximizers.
ObjectiveHandle penalized_objective(const ObjectiveHandle& base);

struct OptimizerConfig {
    OptMethod method = OptMethod::lbfgs;
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;  // infinity norm
    int lbfgs_memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;  // 0.4 is the conventional CG choice; see for_method
    int max_line_search_steps = 40;
    std::uint64_t seed = 0;

    static OptimizerConfig for_method(OptMethod m) {
        OptimizerConfig cfg;
        cfg.method = m;
        if (m == OptMethod::cg) cfg.wolfe_c2 = 0.4;
        return cfg;
    }

    void validate() const;
};

struct OptimizationResult {
    Vec v_final;
    double value_final = 0.0;
    int iterations = 0;
    long long function_evaluations = 0;
    long long exp_calls_total = 0;
    long long naive_pairs_total = 0;
    bool converged = false;
    double final_norm = 0.0;
};

/// Called after each accepted step with (iteration, objective value).
using IterationObserver = std::function<void(int, double)>;

/// Maximizes obj from v0 with nonlinear CG (Polak-Ribiere+, automatic
/// restart on negative beta) or L-BFGS (two-loop recursion), both through a
/// strong-Wolfe line search on the negated objective. One iteration is one
/// accepted search-direction step. -inf trial values are backtracked
/// through; a NaN value throws NonFiniteObjective.
OptimizationResult optimize(const ObjectiveHandle& obj, const Vec& v0,
                            const OptimizerConfig& cfg,
                            const IterationObserver& on_accept = {});

/// The seeded unit-norm starting vectors used by multi_restart; exposed so
/// callers can verify that runs share starts.
std::vector<Vec> draw_starts(std::uint64_t seed, std::size_t dim, int n_starts);

/// Runs `train` from n_starts seeded unit-norm starts and keeps the best
/// finite result (ties by first index). Throws AllRunsFailed when every run
/// ends non-finite.
OptimizationResult multi_restart(
    const std::function<OptimizationResult(const Vec&)>& train, std::size_t dim,
    int n_starts, std::uint64_t seed);

}  // namespace melc
