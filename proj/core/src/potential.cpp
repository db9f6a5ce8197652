#include "melc/potential.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "melc/approx.hpp"

namespace melc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double prefactor(double V, std::size_t na, std::size_t nb) {
    return 1.0 / (std::sqrt(2.0 * std::numbers::pi * V) *
                  static_cast<double>(na) * static_cast<double>(nb));
}

}  // namespace

PotentialValue ip_exact(std::span<const double> proj_a,
                        std::span<const double> proj_b, double V,
                        const GradContext* grad) {
    if (proj_a.empty() || proj_b.empty()) throw EmptyInput("ip_exact: empty side");
    if (!(V > 0.0)) throw NonPositiveVariance("ip_exact: V must be positive");

    const std::size_t na = proj_a.size();
    const std::size_t nb = proj_b.size();
    const double pref = prefactor(V, na, nb);
    const double inv2v = 1.0 / (2.0 * V);

    double sum_e = 0.0;
    double sum_ed2 = 0.0;
    Vec wa, wb;
    if (grad) {
        wa.assign(na, 0.0);
        wb.assign(nb, 0.0);
    }
    for (std::size_t i = 0; i < na; ++i) {
        const double ai = proj_a[i];
        double row_e = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            const double d = ai - proj_b[j];
            const double e = std::exp(-d * d * inv2v);
            row_e += e;
            if (grad) {
                const double ed = e * d;
                sum_ed2 += ed * d;
                wa[i] += ed;
                wb[j] += ed;
            }
        }
        sum_e += row_e;
    }

    PotentialValue out;
    out.value = pref * sum_e;
    out.exp_calls = static_cast<long long>(na) * static_cast<long long>(nb);
    out.naive_pairs = out.exp_calls;

    if (grad) {
        const std::size_t d = grad->points_a->cols();
        Vec g(d, 0.0);
        const double scale = pref / V;
        for (std::size_t i = 0; i < na; ++i)
            if (wa[i] != 0.0) axpy(g, -scale * wa[i], grad->points_a->row(i));
        for (std::size_t j = 0; j < nb; ++j)
            if (wb[j] != 0.0) axpy(g, scale * wb[j], grad->points_b->row(j));
        const double v_coef = pref * sum_ed2 / (2.0 * V * V) - out.value / (2.0 * V);
        axpy(g, v_coef, grad->dV_dv);
        out.gradient = std::move(g);
    }
    return out;
}

namespace {

struct TermInputs {
    std::span<const double> proj_a;
    std::span<const double> proj_b;
    const ClassOrder* order_a = nullptr;
    const ClassOrder* order_b = nullptr;
    const PointMatrix* points_a = nullptr;
    const PointMatrix* points_b = nullptr;
    double V = 0.0;
    Vec dV_dv;
};

PotentialValue evaluate_term(const TermInputs& t, const ApproxConfig& cfg,
                             bool want_gradient) {
    GradContext ctx{t.points_a, t.points_b, t.dV_dv};
    const GradContext* grad = want_gradient ? &ctx : nullptr;
    switch (cfg.mode) {
        case EvalMode::exact:
            return ip_exact(t.proj_a, t.proj_b, t.V, grad);
        case EvalMode::discard:
            return ip_discard(*t.order_a, *t.order_b, t.V, cfg.epsilon,
                              cfg.p_fraction, grad, false, cfg.refine_p)
                .potential;
        case EvalMode::bin:
            return ip_bin(t.proj_a, t.proj_b, *t.points_a, *t.points_b, t.V,
                          cfg.epsilon, grad)
                .potential;
    }
    throw Error("unknown evaluator mode");
}

}  // namespace

DcsValue dcs_evaluate(const LabeledDataset& dataset, std::span<const double> v,
                      const KdeParams& params, const ApproxConfig& config,
                      SortCache* cache, bool want_gradient) {
    config.validate();
    if (v.size() != dataset.dim())
        throw DimensionMismatch("dcs_evaluate: projection dimension mismatch");
    double vnorm2 = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw Error("dcs_evaluate: non-finite projection");
        vnorm2 += x * x;
    }
    if (!(vnorm2 > 0.0)) throw Error("dcs_evaluate: zero projection vector");

    const Vec proj_neg = project(dataset.points_neg(), v);
    const Vec proj_pos = project(dataset.points_pos(), v);

    DcsValue out;
    VarianceProfile profile;
    try {
        profile = variance_profile_from_projections(proj_neg, proj_pos, params);
    } catch (const DegenerateProjection&) {
        out.value = -kInf;
        out.degenerate = true;
        return out;
    }

    // dV/dv building blocks: g_c = 2 kappa_c S_c v.
    Vec g_neg, g_pos;
    if (want_gradient) {
        g_neg = scatter_times_v(dataset.points_neg(), proj_neg);
        g_pos = scatter_times_v(dataset.points_pos(), proj_pos);
        for (double& x : g_neg) x *= 2.0 * profile.kappa_neg;
        for (double& x : g_pos) x *= 2.0 * profile.kappa_pos;
    }

    SortCache local_cache;
    SortCache* sc = nullptr;
    if (config.mode == EvalMode::discard) {
        sc = cache ? cache : &local_cache;
        sort_cache_update(*sc, proj_neg, proj_pos);
    }

    TermInputs cross{proj_neg, proj_pos, sc ? &sc->neg : nullptr,
                     sc ? &sc->pos : nullptr, &dataset.points_neg(),
                     &dataset.points_pos(), profile.v_cross, {}};
    TermInputs self_neg{proj_neg, proj_neg, sc ? &sc->neg : nullptr,
                        sc ? &sc->neg : nullptr, &dataset.points_neg(),
                        &dataset.points_neg(), profile.v_self_neg, {}};
    TermInputs self_pos{proj_pos, proj_pos, sc ? &sc->pos : nullptr,
                        sc ? &sc->pos : nullptr, &dataset.points_pos(),
                        &dataset.points_pos(), profile.v_self_pos, {}};
    if (want_gradient) {
        cross.dV_dv = g_neg;
        axpy(cross.dV_dv, 1.0, g_pos);
        self_neg.dV_dv = g_neg;
        for (double& x : self_neg.dV_dv) x *= 2.0;
        self_pos.dV_dv = g_pos;
        for (double& x : self_pos.dV_dv) x *= 2.0;
    }

    const PotentialValue ip_cross = evaluate_term(cross, config, want_gradient);
    const PotentialValue ip_nn = evaluate_term(self_neg, config, want_gradient);
    const PotentialValue ip_pp = evaluate_term(self_pos, config, want_gradient);

    out.stats += ip_cross.stats();
    out.stats += ip_nn.stats();
    out.stats += ip_pp.stats();

    if (ip_cross.value <= 0.0 || ip_nn.value <= 0.0 || ip_pp.value <= 0.0) {
        out.underflow = true;
        out.value = -2.0 * std::log(ip_cross.value) + std::log(ip_nn.value) +
                    std::log(ip_pp.value);
        return out;
    }

    out.value = -2.0 * std::log(ip_cross.value) + std::log(ip_nn.value) +
                std::log(ip_pp.value);
    if (want_gradient) {
        Vec g(v.size(), 0.0);
        axpy(g, -2.0 / ip_cross.value, *ip_cross.gradient);
        axpy(g, 1.0 / ip_nn.value, *ip_nn.gradient);
        axpy(g, 1.0 / ip_pp.value, *ip_pp.gradient);
        out.gradient = std::move(g);
    }
    return out;
}

}  // namespace melc
