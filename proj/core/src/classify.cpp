#include "melc/classify.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "melc/approx.hpp"

namespace melc {

MelcModel fit(const LabeledDataset& dataset, const KdeParams& params,
              const ApproxConfig& approx, const OptimizerConfig& opt,
              int n_starts) {
    ObjectiveHandle base = make_dcs_objective(dataset, params, approx);
    ObjectiveHandle wrapped = penalized_objective(base);

    OptimizationResult best = multi_restart(
        [&](const Vec& v0) { return optimize(wrapped, v0, opt); }, dataset.dim(),
        n_starts, opt.seed);

    MelcModel model;
    model.v = best.v_final;
    const double norm = norm2(model.v);
    if (!(norm > 0.0)) throw AllRunsFailed("winning projection has zero norm");
    for (double& x : model.v) x /= norm;

    model.train_proj_neg = project(dataset.points_neg(), model.v);
    model.train_proj_pos = project(dataset.points_pos(), model.v);
    const VarianceProfile profile = variance_profile_from_projections(
        model.train_proj_neg, model.train_proj_pos, params);
    model.h_neg = profile.h_neg;
    model.h_pos = profile.h_pos;
    model.gamma = params.gamma;
    model.training_meta = best;
    model.total_exp_calls = wrapped.totals().exp_calls;
    model.total_naive_pairs = wrapped.totals().naive_pairs;
    model.total_evaluations = wrapped.evaluation_count();
    model.mode = to_string(approx.mode);
    model.epsilon = approx.mode == EvalMode::exact ? 0.0 : approx.epsilon;
    model.optimizer = to_string(opt.method);
    model.seed = opt.seed;
    return model;
}

namespace {

double kde_density(double t, std::span<const double> train_proj, double h) {
    const double inv2h2 = 1.0 / (2.0 * h * h);
    double sum = 0.0;
    for (double p : train_proj) {
        const double d = t - p;
        sum += std::exp(-d * d * inv2h2);
    }
    return sum / (static_cast<double>(train_proj.size()) * h *
                  std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

int predict(const MelcModel& model, std::span<const double> x) {
    if (x.size() != model.v.size())
        throw DimensionMismatch("predict: point dimension mismatch");
    const double t = dot(model.v, x);
    const double g_neg = kde_density(t, model.train_proj_neg, model.h_neg);
    const double g_pos = kde_density(t, model.train_proj_pos, model.h_pos);
    return g_pos >= g_neg ? +1 : -1;
}

std::vector<int> predict(const MelcModel& model, const PointMatrix& points) {
    std::vector<int> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i)
        out[i] = predict(model, points.row(i));
    return out;
}

EvalMetrics balanced_accuracy(std::span<const int> predictions,
                              std::span<const int> truth) {
    if (predictions.size() != truth.size())
        throw LengthMismatch("balanced_accuracy: length mismatch");
    if (predictions.empty()) throw LengthMismatch("balanced_accuracy: empty input");
    EvalMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual_pos = truth[i] > 0;
        const bool predicted_pos = predictions[i] > 0;
        if (actual_pos && predicted_pos) ++m.tp;
        else if (actual_pos && !predicted_pos) ++m.fn;
        else if (!actual_pos && predicted_pos) ++m.fp;
        else ++m.tn;
    }
    double recall_pos = 0.0, recall_neg = 0.0;
    if (m.tp + m.fn > 0) {
        recall_pos = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    } else {
        m.degenerate_truth = true;
    }
    if (m.tn + m.fp > 0) {
        recall_neg = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
    } else {
        m.degenerate_truth = true;
    }
    m.bac = 0.5 * (recall_pos + recall_neg);
    return m;
}

namespace {

std::string hex(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

double unhex(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

nlohmann::json hex_array(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(hex(x));
    return a;
}

Vec unhex_array(const nlohmann::json& a) {
    Vec v;
    v.reserve(a.size());
    for (const auto& s : a) v.push_back(unhex(s.get<std::string>()));
    return v;
}

}  // namespace

void save_model(const MelcModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "melc-model";
    j["version"] = 1;
    j["dim"] = model.v.size();
    j["gamma"] = hex(model.gamma);
    j["v"] = hex_array(model.v);
    j["h_neg"] = hex(model.h_neg);
    j["h_pos"] = hex(model.h_pos);
    j["train_proj_neg"] = hex_array(model.train_proj_neg);
    j["train_proj_pos"] = hex_array(model.train_proj_pos);
    j["training"] = {
        {"value", hex(model.training_meta.value_final)},
        {"iterations", model.training_meta.iterations},
        {"function_evaluations", model.training_meta.function_evaluations},
        {"converged", model.training_meta.converged},
        {"final_norm", hex(model.training_meta.final_norm)},
        {"total_exp_calls", model.total_exp_calls},
        {"total_naive_pairs", model.total_naive_pairs},
        {"total_evaluations", model.total_evaluations},
        {"mode", model.mode},
        {"epsilon", hex(model.epsilon)},
        {"optimizer", model.optimizer},
        {"seed", model.seed},
    };
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write model file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoFailure("write failed: " + path);
}

MelcModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    if (j.value("format", "") != "melc-model")
        throw ParseError(path, 0, "not a melc model file");

    MelcModel m;
    m.v = unhex_array(j.at("v"));
    m.gamma = unhex(j.at("gamma").get<std::string>());
    m.h_neg = unhex(j.at("h_neg").get<std::string>());
    m.h_pos = unhex(j.at("h_pos").get<std::string>());
    m.train_proj_neg = unhex_array(j.at("train_proj_neg"));
    m.train_proj_pos = unhex_array(j.at("train_proj_pos"));
    const auto& t = j.at("training");
    m.training_meta.value_final = unhex(t.at("value").get<std::string>());
    m.training_meta.iterations = t.at("iterations").get<int>();
    m.training_meta.function_evaluations =
        t.at("function_evaluations").get<long long>();
    m.training_meta.converged = t.at("converged").get<bool>();
    m.training_meta.final_norm = unhex(t.at("final_norm").get<std::string>());
    m.training_meta.v_final = m.v;
    m.total_exp_calls = t.at("total_exp_calls").get<long long>();
    m.total_naive_pairs = t.at("total_naive_pairs").get<long long>();
    m.total_evaluations = t.at("total_evaluations").get<long long>();
    m.mode = t.at("mode").get<std::string>();
    m.epsilon = unhex(t.at("epsilon").get<std::string>());
    m.optimizer = t.at("optimizer").get<std::string>();
    m.seed = t.at("seed").get<std::uint64_t>();
    return m;
}

}  // namespace melc
