#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "melc/approx_config.hpp"
#include "melc/potential.hpp"
#include "melc/types.hpp"

namespace melc {

/// Distance threshold T of the sort-and-discard evaluator:
///   T = sqrt(max{0, -V ln(2 (eps/p)^2 pi V)}).
/// eps = 0 forbids discarding (returns +inf); very large eps clamps to 0.
double discard_threshold(double V, double epsilon, double p);

/// Bin width B of the binning evaluator:
///   B = sqrt(-2V ln(max{0, 1 - eps sqrt(2 pi V)})).
/// Returns +inf when 1 - eps sqrt(2 pi V) <= 0 (one bin already satisfies
/// the bound); eps = 0 gives 0, which callers read as "no merging".
double bin_width(double V, double epsilon);

/// Sorted view of one class's projections: perm applied to the values
/// yields a non-decreasing sequence (ties broken by index, so the order is
/// independent of update history).
struct ClassOrder {
    std::vector<std::uint32_t> perm;
    std::vector<double> last_projections;
    std::vector<double> sorted;  // sorted[i] = last_projections[perm[i]]

    bool empty() const { return perm.empty(); }
};

/// Incremental sort state for one optimization run. Projections move little
/// between optimizer steps, so re-sorting with insertion sort seeded by the
/// previous permutation is near linear.
struct SortCache {
    ClassOrder neg;
    ClassOrder pos;
};

/// First call sorts from scratch; later calls insertion-sort the previous
/// permutation against the new values.
void sort_cache_update(ClassOrder& order, std::span<const double> projections);
void sort_cache_update(SortCache& cache, std::span<const double> proj_neg,
                       std::span<const double> proj_pos);

ClassOrder make_order(std::span<const double> projections);

struct DiscardStats {
    double threshold = 0.0;
    long long pairs_retained = 0;
    long long pairs_discarded = 0;
};

struct DiscardEval {
    PotentialValue potential;
    DiscardStats stats;
    // Retained (a, b) original-index pairs; filled only on request, for the
    // frozen-structure finite-difference checks.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> retained_pairs;
};

/// Sort-and-discard ip: kernel terms only for pairs with |a - b| <= T,
/// found by a two-pointer window sweep over the sorted projections.
/// exp_calls counts retained pairs; value and gradient use the identical
/// retained set.
DiscardEval ip_discard(const ClassOrder& a, const ClassOrder& b, double V,
                       double epsilon, double p, const GradContext* grad = nullptr,
                       bool collect_pairs = false, bool refine_p = false);

/// One class's side of a bin partition.
struct BinnedClass {
    std::vector<double> rep_projection;  // mean of member projections
    PointMatrix rep_points;              // mean of member original points
    std::vector<long long> counts;
    std::size_t source_size = 0;
};

/// Shared-grid partition: half-open intervals [anchor + i*width,
/// anchor + (i+1)*width) anchored at the global projected minimum.
/// width = +inf collapses each class to one bin; width = 0 means one bin
/// per distinct projected value.
struct BinPartition {
    double width = 0.0;
    double anchor = 0.0;
    BinnedClass a;
    BinnedClass b;
};

struct BinEval {
    PotentialValue potential;
    BinPartition partition;
};

/// Binning ip: each bin is replaced by its class-wise empirical mean and
/// the kernel sum runs over bin pairs weighted by counts. The prefactor
/// keeps the original |A| |B| normalization, so the value approximates the
/// exact ip directly. The gradient treats the partition as frozen and
/// differentiates the weighted representative sum (plus the V chain).
BinEval ip_bin(std::span<const double> proj_a, std::span<const double> proj_b,
               const PointMatrix& points_a, const PointMatrix& points_b, double V,
               double epsilon, const GradContext* grad = nullptr);

/// Value of the discard sum with an explicitly frozen retained-pair set.
/// Used by finite-difference checks: projections and V move, the pair set
/// does not.
double ip_discard_frozen_value(
    std::span<const double> proj_a, std::span<const double> proj_b,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs, double V);

/// Value of the binned sum with frozen membership: representatives are the
/// stored mean points re-projected at v.
double ip_bin_frozen_value(const BinPartition& partition, std::span<const double> v,
                           double V);

}  // namespace melc
