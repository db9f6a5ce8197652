#pragma once

#include <optional>
#include <span>

#include "melc/approx_config.hpp"
#include "melc/core.hpp"
#include "melc/types.hpp"

namespace melc {

struct PotentialStats {
    long long exp_calls = 0;
    long long naive_pairs = 0;

    PotentialStats& operator+=(const PotentialStats& o) {
        exp_calls += o.exp_calls;
        naive_pairs += o.naive_pairs;
        return *this;
    }
};

/// One information-potential evaluation: the normalized kernel sum, the
/// optional analytic gradient in v, and the kernel-call accounting behind
/// the exp-call ratios.
struct PotentialValue {
    double value = 0.0;
    std::optional<Vec> gradient;
    long long exp_calls = 0;
    long long naive_pairs = 0;

    PotentialStats stats() const { return {exp_calls, naive_pairs}; }
};

/// Everything the per-pair gradient terms need besides the projections:
/// the original points of both sides and dV/dv of this term's variance.
struct GradContext {
    const PointMatrix* points_a = nullptr;
    const PointMatrix* points_b = nullptr;
    std::span<const double> dV_dv;
};

/// Exact information potential
///   ip(A, B; V) = 1/(sqrt(2 pi V) |A| |B|) * sum_{a,b} exp(-(a-b)^2 / (2V)),
/// the quadratic-cost baseline every approximation is measured against.
/// With a GradContext it also returns the full analytic d ip / dv, including
/// the chain through V(v).
PotentialValue ip_exact(std::span<const double> proj_a,
                        std::span<const double> proj_b, double V,
                        const GradContext* grad = nullptr);

struct DcsValue {
    double value = 0.0;
    std::optional<Vec> gradient;
    PotentialStats stats;
    bool degenerate = false;  // projection collapsed a class; value is -inf
    bool underflow = false;   // some ip term underflowed to zero
};

struct SortCache;  // see approx.hpp

/// Cauchy-Schwarz divergence of the projected class KDEs:
///   D_CS = -2 log ip(neg, pos; Vx) + log ip(neg, neg; Vnn) + log ip(pos, pos; Vpp),
/// each term evaluated by the evaluator named in `config` (exact, discard
/// or bin). A degenerate projection yields value -inf with no gradient.
/// `cache` feeds the discard evaluator's incremental sort and may be null.
DcsValue dcs_evaluate(const LabeledDataset& dataset, std::span<const double> v,
                      const KdeParams& params, const ApproxConfig& config,
                      SortCache* cache = nullptr, bool want_gradient = true);

}  // namespace melc
