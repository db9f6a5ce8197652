#include "melc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "melc/approx.hpp"
#include "melc/rng.hpp"

namespace melc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

std::string to_string(OptMethod m) {
    return m == OptMethod::cg ? "cg" : "lbfgs";
}

OptMethod opt_method_from_string(const std::string& s) {
    if (s == "cg") return OptMethod::cg;
    if (s == "lbfgs" || s == "l-bfgs") return OptMethod::lbfgs;
    throw Error("unknown optimizer: " + s);
}

void OptimizerConfig::validate() const {
    if (max_iterations < 1) throw Error("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw Error("gradient_tolerance must be > 0");
    if (lbfgs_memory < 1) throw Error("lbfgs_memory must be >= 1");
    if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
        throw Error("need 0 < c1 < c2 < 1");
    if (max_line_search_steps < 1) throw Error("max_line_search_steps must be >= 1");
}

ObjectiveHandle make_dcs_objective(const LabeledDataset& dataset,
                                   const KdeParams& params,
                                   const ApproxConfig& config) {
    config.validate();
    auto cache = std::make_shared<SortCache>();
    return ObjectiveHandle(
        dataset.dim(), [&dataset, params, config, cache](std::span<const double> v) {
            DcsValue d = dcs_evaluate(dataset, v, params, config, cache.get(), true);
            Evaluation e;
            e.value = d.value;
            if (d.gradient) e.gradient = std::move(*d.gradient);
            e.stats = d.stats;
            return e;
        });
}

ObjectiveHandle penalized_objective(const ObjectiveHandle& base) {
    ObjectiveHandle inner = base;
    return ObjectiveHandle(base.dim(), [inner](std::span<const double> v) {
        Evaluation e = inner.evaluate(v);
        double vv = 0.0;
        for (double x : v) vv += x * x;
        const double excess = vv - 1.0;
        e.value -= excess * excess;
        if (!e.gradient.empty()) {
            for (std::size_t i = 0; i < v.size(); ++i)
                e.gradient[i] -= 4.0 * v[i] * excess;
        }
        return e;  // stats pass through; the penalty adds no kernel calls
    });
}

namespace {

// Minimization view: phi(alpha) = -f(x + alpha * d).
struct LinePoint {
    double alpha = 0.0;
    double phi = 0.0;
    double dphi = 0.0;
    Evaluation eval;
    bool finite = false;
};

class LineSearch {
public:
    LineSearch(const ObjectiveHandle& obj, const Vec& x, const Vec& dir,
               double phi0, std::span<const double> grad0, double c1, double c2,
               int max_steps)
        : obj_(obj), x_(x), dir_(dir), phi0_(phi0), c1_(c1), c2_(c2),
          max_steps_(max_steps) {
        dphi0_ = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) dphi0_ -= grad0[i] * dir[i];
    }

    double dphi0() const { return dphi0_; }

    // Strong Wolfe search (bracket + zoom). Returns a point satisfying both
    // conditions, or finite=false when the evaluation budget runs out.
    LinePoint run(double alpha_init) {
        LinePoint prev;
        prev.alpha = 0.0;
        prev.phi = phi0_;
        prev.dphi = dphi0_;
        prev.finite = true;

        double alpha = alpha_init;
        while (budget_spent_ < max_steps_) {
            LinePoint cur = probe(alpha);
            if (!cur.finite || cur.phi > phi0_ + c1_ * alpha * dphi0_ ||
                (evals_ > 1 && cur.phi >= prev.phi)) {
                return zoom(prev, cur);
            }
            if (std::fabs(cur.dphi) <= -c2_ * dphi0_) return cur;  // strong Wolfe
            if (cur.dphi >= 0.0) return zoom(cur, prev);
            prev = cur;
            alpha = std::min(2.0 * alpha, 1e20);
            if (alpha >= 1e20) break;
        }
        return fail();
    }

private:
    bool satisfied(const LinePoint& p) const {
        return p.finite && p.phi <= phi0_ + c1_ * p.alpha * dphi0_ &&
               std::fabs(p.dphi) <= -c2_ * dphi0_;
    }

    LinePoint probe(double alpha) {
        Vec trial(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i)
            trial[i] = x_[i] + alpha * dir_[i];
        LinePoint p;
        p.alpha = alpha;
        p.eval = obj_.evaluate(trial);
        ++evals_;
        ++budget_spent_;
        if (std::isnan(p.eval.value))
            throw NonFiniteObjective("objective returned NaN");
        p.finite = std::isfinite(p.eval.value) && !p.eval.gradient.empty();
        if (p.finite) {
            p.phi = -p.eval.value;
            p.dphi = 0.0;
            for (std::size_t i = 0; i < dir_.size(); ++i)
                p.dphi -= p.eval.gradient[i] * dir_[i];
        } else {
            p.phi = kInf;  // -inf objective: rejected trial, backtrack
            p.dphi = kInf;
        }
        return p;
    }

    // lo: lowest phi found so far and satisfies sufficient decrease;
    // hi: the other bracket end (possibly non-finite).
    LinePoint zoom(LinePoint lo, LinePoint hi) {
        while (budget_spent_ < max_steps_) {
            double alpha;
            if (!hi.finite) {
                alpha = 0.5 * (lo.alpha + hi.alpha);
            } else {
                alpha = interpolate(lo, hi);
            }
            LinePoint cur = probe(alpha);
            if (!cur.finite || cur.phi > phi0_ + c1_ * alpha * dphi0_ ||
                cur.phi >= lo.phi) {
                hi = cur;
            } else {
                if (std::fabs(cur.dphi) <= -c2_ * dphi0_) return cur;
                if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
            if (std::fabs(hi.alpha - lo.alpha) <=
                1e-16 * std::max(1.0, std::fabs(lo.alpha)))
                break;
        }
        return satisfied(lo) ? lo : fail();
    }

    // Safeguarded quadratic interpolation between the bracket ends.
    double interpolate(const LinePoint& lo, const LinePoint& hi) const {
        const double a = lo.alpha, b = hi.alpha;
        const double delta = b - a;
        double cand =
            a - 0.5 * lo.dphi * delta * delta /
                    ((hi.phi - lo.phi) - lo.dphi * delta);
        const double left = std::min(a, b), right = std::max(a, b);
        const double margin = 0.1 * (right - left);
        if (!std::isfinite(cand) || cand < left + margin || cand > right - margin)
            cand = 0.5 * (a + b);
        return cand;
    }

    static LinePoint fail() {
        LinePoint p;
        p.finite = false;
        return p;
    }

    const ObjectiveHandle& obj_;
    const Vec& x_;
    const Vec& dir_;
    double phi0_;
    double dphi0_ = 0.0;
    double c1_;
    double c2_;
    int max_steps_;
    int evals_ = 0;
    int budget_spent_ = 0;
};

struct Correction {
    Vec s;
    Vec y;
    double rho;
};

// Two-loop recursion; gradients here are of the minimized (negated)
// objective.
Vec lbfgs_direction(const Vec& grad, const std::deque<Correction>& mem) {
    Vec q = grad;
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
        alpha[k] = mem[k].rho * dot(mem[k].s, q);
        axpy(q, -alpha[k], mem[k].y);
    }
    if (!mem.empty()) {
        const Correction& last = mem.back();
        const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (double& x : q) x *= gamma;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = mem[k].rho * dot(mem[k].y, q);
        axpy(q, alpha[k] - beta, mem[k].s);
    }
    for (double& x : q) x = -x;
    return q;
}

}  // namespace

OptimizationResult optimize(const ObjectiveHandle& obj, const Vec& v0,
                            const OptimizerConfig& cfg,
                            const IterationObserver& on_accept) {
    cfg.validate();
    if (v0.size() != obj.dim()) throw DimensionMismatch("optimize: bad v0 dimension");
    for (double x : v0)
        if (!std::isfinite(x)) throw Error("optimize: non-finite v0");

    const long long evals0 = obj.evaluation_count();
    const PotentialStats totals0 = obj.totals();
    auto finish = [&](OptimizationResult r) {
        r.function_evaluations = obj.evaluation_count() - evals0;
        const PotentialStats t = obj.totals();
        r.exp_calls_total = t.exp_calls - totals0.exp_calls;
        r.naive_pairs_total = t.naive_pairs - totals0.naive_pairs;
        r.final_norm = norm2(r.v_final);
        return r;
    };

    Vec x = v0;
    Evaluation cur = obj.evaluate(x);
    if (std::isnan(cur.value)) throw NonFiniteObjective("objective NaN at start");

    OptimizationResult res;
    res.v_final = x;
    res.value_final = cur.value;
    if (!std::isfinite(cur.value) || cur.gradient.empty()) {
        return finish(res);  // cannot even start; caller sees converged=false
    }

    // Minimization view: F = -f, G = -grad f.
    Vec grad = cur.gradient;
    for (double& g : grad) g = -g;

    if (norm_inf(grad) <= cfg.gradient_tolerance) {
        res.converged = true;
        return finish(res);
    }

    std::deque<Correction> memory;
    Vec dir;
    Vec prev_grad;
    double prev_dphi0 = 0.0;
    double prev_alpha = 0.0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        // Search direction.
        if (cfg.method == OptMethod::lbfgs) {
            dir = lbfgs_direction(grad, memory);
        } else {
            if (prev_grad.empty()) {
                dir = grad;
                for (double& d : dir) d = -d;
            } else {
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    num += grad[i] * (grad[i] - prev_grad[i]);
                    den += prev_grad[i] * prev_grad[i];
                }
                const double beta = std::max(0.0, num / den);  // PR+ restart
                for (std::size_t i = 0; i < grad.size(); ++i)
                    dir[i] = -grad[i] + beta * dir[i];
            }
        }
        double dphi0 = dot(grad, dir);
        if (!(dphi0 < 0.0)) {  // not a descent direction: steepest restart
            dir = grad;
            for (double& d : dir) d = -d;
            dphi0 = -dot(grad, grad);
            if (cfg.method == OptMethod::lbfgs) memory.clear();
        }

        // Initial trial step.
        double alpha0 = 1.0;
        const double gnorm = norm2(grad);
        if (cfg.method == OptMethod::cg) {
            if (prev_alpha > 0.0 && dphi0 != 0.0) {
                alpha0 = prev_alpha * prev_dphi0 / dphi0;
                alpha0 = std::clamp(alpha0, 1e-12, 1e12);
            } else {
                alpha0 = 1.0 / std::max(1.0, gnorm);
            }
        } else if (memory.empty()) {
            alpha0 = 1.0 / std::max(1.0, gnorm);
        }

        Vec neg_cur_grad = cur.gradient;  // maximization gradient at x
        LineSearch search(obj, x, dir, -cur.value, neg_cur_grad, cfg.wolfe_c1,
                          cfg.wolfe_c2, cfg.max_line_search_steps);
        LinePoint accepted = search.run(alpha0);
        if (!accepted.finite) {
            return finish(res);  // line search failed; best accepted iterate stands
        }

        Vec x_new(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x_new[i] = x[i] + accepted.alpha * dir[i];
        Vec grad_new = accepted.eval.gradient;
        for (double& g : grad_new) g = -g;

        if (cfg.method == OptMethod::lbfgs) {
            Correction c;
            c.s.resize(x.size());
            c.y.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                c.s[i] = x_new[i] - x[i];
                c.y[i] = grad_new[i] - grad[i];
            }
            const double sy = dot(c.s, c.y);
            if (sy > 1e-10 * norm2(c.s) * norm2(c.y)) {
                c.rho = 1.0 / sy;
                memory.push_back(std::move(c));
                if (static_cast<int>(memory.size()) > cfg.lbfgs_memory)
                    memory.pop_front();
            }
        } else {
            prev_grad = grad;
            prev_dphi0 = dphi0;
            prev_alpha = accepted.alpha;
        }

        x = std::move(x_new);
        grad = std::move(grad_new);
        cur = std::move(accepted.eval);
        ++res.iterations;
        res.v_final = x;
        res.value_final = cur.value;
        if (on_accept) on_accept(res.iterations, cur.value);

        if (norm_inf(grad) <= cfg.gradient_tolerance) {
            res.converged = true;
            break;
        }
    }
    return finish(res);
}

std::vector<Vec> draw_starts(std::uint64_t seed, std::size_t dim, int n_starts) {
    rng::Sampler sampler(rng::mix(seed, 0x6d656c63ULL));
    std::vector<Vec> starts;
    starts.reserve(static_cast<std::size_t>(n_starts));
    for (int i = 0; i < n_starts; ++i) starts.push_back(sampler.unit_vector(dim));
    return starts;
}

OptimizationResult multi_restart(
    const std::function<OptimizationResult(const Vec&)>& train, std::size_t dim,
    int n_starts, std::uint64_t seed) {
    if (n_starts < 1) throw Error("multi_restart: n_starts must be >= 1");
    const std::vector<Vec> starts = draw_starts(seed, dim, n_starts);
    OptimizationResult best;
    bool have_best = false;
    for (const Vec& s : starts) {
        OptimizationResult r = train(s);
        if (!std::isfinite(r.value_final)) continue;
        if (!have_best || r.value_final > best.value_final) {
            best = std::move(r);
            have_best = true;
        }
    }
    if (!have_best) throw AllRunsFailed("every restart ended non-finite");
    return best;
}

}  // namespace melc
