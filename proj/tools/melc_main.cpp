// melc: train, evaluate and benchmark the multithreshold entropy linear
// classifier with exact or epsilon-bounded approximate objective evaluators.

#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "melc/approx.hpp"
#include "melc/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

melc::LabeledDataset load_dataset(const std::string& path,
                                  const std::string& format,
                                  const std::string& label_column) {
    std::string resolved = format;
    if (resolved == "auto") {
        resolved = std::filesystem::path(path).extension() == ".csv" ? "csv"
                                                                     : "libsvm";
    }
    if (resolved == "csv") return melc::load_csv(path, label_column);
    if (resolved == "libsvm") return melc::load_libsvm(path);
    throw melc::Error("unknown format: " + resolved);
}

bool is_data_error(const std::exception& e) {
    return dynamic_cast<const melc::ParseError*>(&e) ||
           dynamic_cast<const melc::NotBinary*>(&e) ||
           dynamic_cast<const melc::TooSmallClass*>(&e) ||
           dynamic_cast<const melc::RaggedRows*>(&e) ||
           dynamic_cast<const melc::TooFewPointsPerClass*>(&e) ||
           dynamic_cast<const melc::DimensionMismatch*>(&e) ||
           dynamic_cast<const melc::IoFailure*>(&e);
}

struct DataOptions {
    std::string path;
    std::string format = "auto";
    std::string label_column = "0";
};

void add_data_options(CLI::App* cmd, DataOptions& opts, const char* name) {
    cmd->add_option(name, opts.path, "dataset file")->required();
    cmd->add_option("--format", opts.format, "libsvm | csv | auto")
        ->check(CLI::IsMember({"libsvm", "csv", "auto"}));
    cmd->add_option("--label-column", opts.label_column,
                    "csv label column (header name or 0-based index)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multithreshold entropy linear classifier trainer/benchmark"};
    app.require_subcommand(1);

    // train
    DataOptions train_data;
    double gamma = 1.0;
    std::string method = "exact";
    double epsilon = 0.05;
    double p_fraction = 1.0;
    bool refine_p = false;
    std::string optimizer = "lbfgs";
    std::uint64_t seed = 0;
    int restarts = 3;
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;
    std::string model_out = "model.json";
    auto* train = app.add_subcommand("train", "fit a model on a dataset");
    add_data_options(train, train_data, "data");
    train->add_option("--gamma", gamma, "bandwidth scale");
    train->add_option("--method", method, "exact | discard | bin")
        ->check(CLI::IsMember({"exact", "discard", "bin"}));
    train->add_option("--epsilon", epsilon, "acceptable ip error");
    train->add_option("--p-fraction", p_fraction, "discard bound parameter p");
    train->add_flag("--refine-p", refine_p, "two-pass threshold refinement");
    train->add_option("--optimizer", optimizer, "cg | lbfgs")
        ->check(CLI::IsMember({"cg", "lbfgs"}));
    train->add_option("--seed", seed, "restart seed");
    train->add_option("--restarts", restarts, "number of starting points");
    train->add_option("--max-iterations", max_iterations, "iteration cap");
    train->add_option("--gradient-tolerance", gradient_tolerance,
                      "stop when the gradient infinity norm drops below");
    train->add_option("--out", model_out, "model file to write");

    // eval
    std::string model_path;
    DataOptions eval_data;
    auto* eval = app.add_subcommand("eval", "score a model on a dataset");
    eval->add_option("model", model_path, "model file")->required();
    add_data_options(eval, eval_data, "data");

    // grid
    std::string manifest_path;
    std::string grid_out = "reports";
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    auto* grid = app.add_subcommand("grid", "run an experiment grid");
    grid->add_option("manifest", manifest_path, "manifest json")->required();
    grid->add_option("--out", grid_out, "output directory")->required();
    grid->add_option("--threads", threads, "concurrent grid cells");

    // bounds
    std::vector<double> v_values = {0.5, 1.0, 2.0};
    double eps_min = 0.001, eps_max = 0.5;
    int steps = 100;
    std::string bounds_out = "bounds.csv";
    auto* bounds =
        app.add_subcommand("bounds", "tabulate threshold/bin-width curves");
    bounds->add_option("--v-values", v_values, "variance values")
        ->delimiter(',');
    bounds->add_option("--eps-min", eps_min, "smallest epsilon");
    bounds->add_option("--eps-max", eps_max, "largest epsilon");
    bounds->add_option("--steps", steps, "samples per variance value");
    bounds->add_option("--out", bounds_out, "csv to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) {
            const auto ds = load_dataset(train_data.path, train_data.format,
                                         train_data.label_column);
            melc::ApproxConfig approx;
            approx.mode = melc::eval_mode_from_string(method);
            approx.epsilon = epsilon;
            approx.p_fraction = p_fraction;
            approx.refine_p = refine_p;
            melc::OptimizerConfig opt = melc::OptimizerConfig::for_method(
                melc::opt_method_from_string(optimizer));
            opt.seed = seed;
            opt.max_iterations = max_iterations;
            opt.gradient_tolerance = gradient_tolerance;

            const melc::MelcModel model =
                fit(ds, melc::KdeParams{gamma}, approx, opt, restarts);
            save_model(model, model_out);

            const double ratio =
                model.total_naive_pairs > 0
                    ? static_cast<double>(model.total_exp_calls) /
                          static_cast<double>(model.total_naive_pairs)
                    : 0.0;
            std::printf("model=%s\n", model_out.c_str());
            std::printf("value=%.17g\n", model.training_meta.value_final);
            std::printf("iterations=%d\n", model.training_meta.iterations);
            std::printf("converged=%d\n", model.training_meta.converged ? 1 : 0);
            std::printf("final_norm=%.17g\n", model.training_meta.final_norm);
            std::printf("exp_call_ratio=%.17g\n", ratio);
        } else if (eval->parsed()) {
            const melc::MelcModel model = melc::load_model(model_path);
            const auto ds = load_dataset(eval_data.path, eval_data.format,
                                         eval_data.label_column);
            std::vector<int> pred = predict(model, ds.points_neg());
            const auto pos_pred = predict(model, ds.points_pos());
            pred.insert(pred.end(), pos_pred.begin(), pos_pred.end());
            std::vector<int> truth(ds.size_neg(), -1);
            truth.insert(truth.end(), ds.size_pos(), +1);
            const melc::EvalMetrics m = melc::balanced_accuracy(pred, truth);
            std::printf("bac=%.17g\n", m.bac);
            std::printf("tp=%lld\ntn=%lld\nfp=%lld\nfn=%lld\n", m.tp, m.tn, m.fp,
                        m.fn);
        } else if (grid->parsed()) {
            const melc::Manifest manifest = melc::load_manifest(manifest_path);
            std::filesystem::create_directories(grid_out);
            const auto records_path =
                (std::filesystem::path(grid_out) / "records.csv").string();
            const auto records =
                run_grid(manifest.datasets, manifest.spec, records_path,
                         std::max(1, threads));
            emit_reports(records, grid_out);
            long long failed = 0;
            for (const auto& r : records)
                if (!r.ok()) ++failed;
            std::printf("records=%zu\nfailed=%lld\nout=%s\n", records.size(),
                        failed, grid_out.c_str());
        } else if (bounds->parsed()) {
            melc::write_bounds_csv(bounds_out, v_values, eps_min, eps_max, steps);
            std::printf("out=%s\n", bounds_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return is_data_error(e) ? kExitData : kExitRuntime;
    }
    return kExitOk;
}
