#include "melc/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

namespace melc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double prefactor(double V, std::size_t na, std::size_t nb) {
    return 1.0 / (std::sqrt(2.0 * std::numbers::pi * V) *
                  static_cast<double>(na) * static_cast<double>(nb));
}

}  // namespace

double discard_threshold(double V, double epsilon, double p) {
    if (!(V > 0.0)) throw NonPositiveVariance("discard_threshold: V must be positive");
    if (epsilon < 0.0) throw Error("discard_threshold: epsilon must be >= 0");
    if (!(p > 0.0 && p <= 1.0)) throw Error("discard_threshold: p must be in (0, 1]");
    if (epsilon == 0.0) return kInf;
    const double r = epsilon / p;
    const double arg = 2.0 * r * r * std::numbers::pi * V;
    const double t2 = -V * std::log(arg);
    if (!(t2 > 0.0)) return 0.0;  // any threshold already satisfies the bound
    return std::sqrt(t2);
}

double bin_width(double V, double epsilon) {
    if (!(V > 0.0)) throw NonPositiveVariance("bin_width: V must be positive");
    if (epsilon < 0.0) throw Error("bin_width: epsilon must be >= 0");
    const double arg = 1.0 - epsilon * std::sqrt(2.0 * std::numbers::pi * V);
    if (arg <= 0.0) return kInf;  // a single bin satisfies the bound
    const double b2 = -2.0 * V * std::log(arg);
    return b2 > 0.0 ? std::sqrt(b2) : 0.0;
}

void sort_cache_update(ClassOrder& order, std::span<const double> projections) {
    const std::size_t n = projections.size();
    order.last_projections.assign(projections.begin(), projections.end());
    const double* vals = order.last_projections.data();
    // Compare (value, index) so the sorted order never depends on history.
    auto before = [vals](std::uint32_t lhs, std::uint32_t rhs) {
        return vals[lhs] < vals[rhs] || (vals[lhs] == vals[rhs] && lhs < rhs);
    };
    if (order.perm.size() != n) {
        order.perm.resize(n);
        std::iota(order.perm.begin(), order.perm.end(), 0u);
        std::sort(order.perm.begin(), order.perm.end(), before);
    } else {
        // Insertion sort seeded with the previous permutation: linear when
        // the ordering barely moved between optimizer steps.
        for (std::size_t i = 1; i < n; ++i) {
            const std::uint32_t key = order.perm[i];
            std::size_t j = i;
            while (j > 0 && before(key, order.perm[j - 1])) {
                order.perm[j] = order.perm[j - 1];
                --j;
            }
            order.perm[j] = key;
        }
    }
    order.sorted.resize(n);
    for (std::size_t i = 0; i < n; ++i) order.sorted[i] = vals[order.perm[i]];
}

void sort_cache_update(SortCache& cache, std::span<const double> proj_neg,
                       std::span<const double> proj_pos) {
    sort_cache_update(cache.neg, proj_neg);
    sort_cache_update(cache.pos, proj_pos);
}

ClassOrder make_order(std::span<const double> projections) {
    ClassOrder order;
    sort_cache_update(order, projections);
    return order;
}

namespace {

struct SweepResult {
    double sum_e = 0.0;
    double sum_ed2 = 0.0;
    long long retained = 0;
    Vec wa, wb;  // per-point gradient weights, original index order
};

// Two-pointer window sweep over sorted projections. Pairs with
// |a - b| <= T are retained, strictly farther ones discarded.
SweepResult sweep(const ClassOrder& a, const ClassOrder& b, double T, double V,
                  bool want_gradient, bool collect_pairs,
                  std::vector<std::pair<std::uint32_t, std::uint32_t>>* pairs) {
    SweepResult r;
    const std::size_t na = a.sorted.size();
    const std::size_t nb = b.sorted.size();
    if (want_gradient) {
        r.wa.assign(na, 0.0);
        r.wb.assign(nb, 0.0);
    }
    const double inv2v = 1.0 / (2.0 * V);
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < na; ++i) {
        const double ai = a.sorted[i];
        while (lo < nb && b.sorted[lo] < ai - T) ++lo;
        if (hi < lo) hi = lo;
        while (hi < nb && b.sorted[hi] <= ai + T) ++hi;
        const std::uint32_t ia = a.perm[i];
        for (std::size_t j = lo; j < hi; ++j) {
            const double d = ai - b.sorted[j];
            const double e = std::exp(-d * d * inv2v);
            r.sum_e += e;
            if (want_gradient) {
                const double ed = e * d;
                r.sum_ed2 += ed * d;
                r.wa[ia] += ed;
                r.wb[b.perm[j]] += ed;
            }
            if (collect_pairs) pairs->emplace_back(ia, b.perm[j]);
        }
        r.retained += static_cast<long long>(hi - lo);
    }
    return r;
}

// Window sizes only; used by the optional two-pass p refinement.
long long count_retained(const ClassOrder& a, const ClassOrder& b, double T) {
    const std::size_t na = a.sorted.size();
    const std::size_t nb = b.sorted.size();
    long long retained = 0;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < na; ++i) {
        const double ai = a.sorted[i];
        while (lo < nb && b.sorted[lo] < ai - T) ++lo;
        if (hi < lo) hi = lo;
        while (hi < nb && b.sorted[hi] <= ai + T) ++hi;
        retained += static_cast<long long>(hi - lo);
    }
    return retained;
}

}  // namespace

DiscardEval ip_discard(const ClassOrder& a, const ClassOrder& b, double V,
                       double epsilon, double p, const GradContext* grad,
                       bool collect_pairs, bool refine_p) {
    if (a.empty() || b.empty()) throw EmptyInput("ip_discard: empty side");
    if (!(V > 0.0)) throw NonPositiveVariance("ip_discard: V must be positive");

    const std::size_t na = a.sorted.size();
    const std::size_t nb = b.sorted.size();
    const long long naive = static_cast<long long>(na) * static_cast<long long>(nb);

    double T = discard_threshold(V, epsilon, p);
    if (refine_p && epsilon > 0.0 && std::isfinite(T)) {
        const long long retained1 = count_retained(a, b, T);
        const double p_hat =
            static_cast<double>(naive - retained1) / static_cast<double>(naive);
        if (p_hat > 0.0) T = discard_threshold(V, epsilon, p_hat);
    }

    DiscardEval out;
    SweepResult r = sweep(a, b, T, V, grad != nullptr, collect_pairs,
                          collect_pairs ? &out.retained_pairs : nullptr);

    const double pref = prefactor(V, na, nb);
    out.potential.value = pref * r.sum_e;
    out.potential.exp_calls = r.retained;
    out.potential.naive_pairs = naive;
    out.stats.threshold = T;
    out.stats.pairs_retained = r.retained;
    out.stats.pairs_discarded = naive - r.retained;

    if (grad) {
        const std::size_t d = grad->points_a->cols();
        Vec g(d, 0.0);
        const double scale = pref / V;
        for (std::size_t i = 0; i < na; ++i)
            if (r.wa[i] != 0.0) axpy(g, -scale * r.wa[i], grad->points_a->row(i));
        for (std::size_t j = 0; j < nb; ++j)
            if (r.wb[j] != 0.0) axpy(g, scale * r.wb[j], grad->points_b->row(j));
        const double v_coef =
            pref * r.sum_ed2 / (2.0 * V * V) - out.potential.value / (2.0 * V);
        axpy(g, v_coef, grad->dV_dv);
        out.potential.gradient = std::move(g);
    }
    return out;
}

namespace {

// Groups one class's points into grid cells. width == +inf puts everything
// into one bin; width == 0 (or a width below the grid's index resolution)
// bins by distinct projected value.
BinnedClass bin_class(std::span<const double> proj, const PointMatrix& points,
                      double anchor, double width) {
    const std::size_t n = proj.size();
    const std::size_t d = points.cols();

    // Bin key per point. Distinct-value binning keys by the value's bit
    // pattern instead of a grid index.
    std::map<long long, std::vector<std::uint32_t>> by_index;
    std::map<double, std::vector<std::uint32_t>> by_value;
    const bool by_distinct = (width == 0.0);
    if (by_distinct) {
        for (std::size_t i = 0; i < n; ++i)
            by_value[proj[i]].push_back(static_cast<std::uint32_t>(i));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double q = (proj[i] - anchor) / width;  // +inf width -> 0
            const long long idx = static_cast<long long>(std::floor(q));
            by_index[idx].push_back(static_cast<std::uint32_t>(i));
        }
    }

    const std::size_t nbins = by_distinct ? by_value.size() : by_index.size();
    BinnedClass out;
    out.source_size = n;
    out.rep_projection.reserve(nbins);
    out.counts.reserve(nbins);
    out.rep_points = PointMatrix(nbins, d);

    std::size_t bin = 0;
    auto emit = [&](const std::vector<std::uint32_t>& members) {
        double proj_sum = 0.0;
        auto rep = out.rep_points.row(bin);
        for (std::uint32_t m : members) {
            proj_sum += proj[m];
            auto row = points.row(m);
            for (std::size_t k = 0; k < d; ++k) rep[k] += row[k];
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t k = 0; k < d; ++k) rep[k] *= inv;
        out.rep_projection.push_back(proj_sum * inv);
        out.counts.push_back(static_cast<long long>(members.size()));
        ++bin;
    };
    if (by_distinct) {
        for (const auto& [value, members] : by_value) emit(members);
    } else {
        for (const auto& [idx, members] : by_index) emit(members);
    }
    return out;
}

}  // namespace

BinEval ip_bin(std::span<const double> proj_a, std::span<const double> proj_b,
               const PointMatrix& points_a, const PointMatrix& points_b, double V,
               double epsilon, const GradContext* grad) {
    if (proj_a.empty() || proj_b.empty()) throw EmptyInput("ip_bin: empty side");
    if (!(V > 0.0)) throw NonPositiveVariance("ip_bin: V must be positive");

    double width = bin_width(V, epsilon);
    double anchor = std::min(*std::min_element(proj_a.begin(), proj_a.end()),
                             *std::min_element(proj_b.begin(), proj_b.end()));
    if (width > 0.0 && std::isfinite(width)) {
        const double hi = std::max(*std::max_element(proj_a.begin(), proj_a.end()),
                                   *std::max_element(proj_b.begin(), proj_b.end()));
        // Grid finer than the index range can represent: binning is lossless
        // there anyway, fall back to distinct-value bins.
        if ((hi - anchor) / width > 9.0e18) width = 0.0;
    }

    BinEval out;
    out.partition.width = width;
    out.partition.anchor = anchor;
    out.partition.a = bin_class(proj_a, points_a, anchor, width);
    out.partition.b = bin_class(proj_b, points_b, anchor, width);

    const BinnedClass& A = out.partition.a;
    const BinnedClass& B = out.partition.b;
    const std::size_t ka = A.counts.size();
    const std::size_t kb = B.counts.size();
    const double pref = prefactor(V, proj_a.size(), proj_b.size());
    const double inv2v = 1.0 / (2.0 * V);

    double sum_e = 0.0;
    double sum_ed2 = 0.0;
    Vec wa, wb;
    if (grad) {
        wa.assign(ka, 0.0);
        wb.assign(kb, 0.0);
    }
    for (std::size_t i = 0; i < ka; ++i) {
        const double ri = A.rep_projection[i];
        const double ci = static_cast<double>(A.counts[i]);
        for (std::size_t j = 0; j < kb; ++j) {
            const double d = ri - B.rep_projection[j];
            const double w = ci * static_cast<double>(B.counts[j]);
            const double e = std::exp(-d * d * inv2v);
            sum_e += w * e;
            if (grad) {
                const double wed = w * e * d;
                sum_ed2 += wed * d;
                wa[i] += wed;
                wb[j] += wed;
            }
        }
    }

    out.potential.value = pref * sum_e;
    out.potential.exp_calls = static_cast<long long>(ka) * static_cast<long long>(kb);
    out.potential.naive_pairs =
        static_cast<long long>(proj_a.size()) * static_cast<long long>(proj_b.size());

    if (grad) {
        const std::size_t d = points_a.cols();
        Vec g(d, 0.0);
        const double scale = pref / V;
        for (std::size_t i = 0; i < ka; ++i)
            if (wa[i] != 0.0) axpy(g, -scale * wa[i], A.rep_points.row(i));
        for (std::size_t j = 0; j < kb; ++j)
            if (wb[j] != 0.0) axpy(g, scale * wb[j], B.rep_points.row(j));
        const double v_coef =
            pref * sum_ed2 / (2.0 * V * V) - out.potential.value / (2.0 * V);
        axpy(g, v_coef, grad->dV_dv);
        out.potential.gradient = std::move(g);
    }
    return out;
}

double ip_discard_frozen_value(
    std::span<const double> proj_a, std::span<const double> proj_b,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs, double V) {
    if (!(V > 0.0)) throw NonPositiveVariance("frozen discard: V must be positive");
    const double pref = prefactor(V, proj_a.size(), proj_b.size());
    const double inv2v = 1.0 / (2.0 * V);
    double sum_e = 0.0;
    for (const auto& [i, j] : pairs) {
        const double d = proj_a[i] - proj_b[j];
        sum_e += std::exp(-d * d * inv2v);
    }
    return pref * sum_e;
}

double ip_bin_frozen_value(const BinPartition& partition, std::span<const double> v,
                           double V) {
    if (!(V > 0.0)) throw NonPositiveVariance("frozen bin: V must be positive");
    const BinnedClass& A = partition.a;
    const BinnedClass& B = partition.b;
    Vec ra(A.counts.size()), rb(B.counts.size());
    for (std::size_t i = 0; i < ra.size(); ++i)
        ra[i] = dot(A.rep_points.row(i), v);
    for (std::size_t j = 0; j < rb.size(); ++j)
        rb[j] = dot(B.rep_points.row(j), v);
    const double pref = prefactor(V, A.source_size, B.source_size);
    const double inv2v = 1.0 / (2.0 * V);
    double sum_e = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double ci = static_cast<double>(A.counts[i]);
        for (std::size_t j = 0; j < rb.size(); ++j) {
            const double d = ra[i] - rb[j];
            sum_e += ci * static_cast<double>(B.counts[j]) * std::exp(-d * d * inv2v);
        }
    }
    return pref * sum_e;
}

std::string to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::exact: return "exact";
        case EvalMode::discard: return "discard";
        case EvalMode::bin: return "bin";
    }
    return "?";
}

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "exact") return EvalMode::exact;
    if (s == "discard" || s == "dist") return EvalMode::discard;
    if (s == "bin") return EvalMode::bin;
    throw Error("unknown evaluator mode: " + s);
}

}  // namespace melc
