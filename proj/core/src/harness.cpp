#include "melc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "melc/approx.hpp"
#include "melc/rng.hpp"

namespace melc {

void GridSpec::validate() const {
    // An empty method list is allowed: the grid is vacuous, not invalid.
    if (gammas.empty() || optimizers.empty())
        throw Error("grid: empty gamma/optimizer list");
    const bool needs_eps =
        std::any_of(methods.begin(), methods.end(),
                    [](EvalMode m) { return m != EvalMode::exact; });
    if (needs_eps && epsilons.empty())
        throw Error("grid: approximate methods need a non-empty epsilon list");
    if (folds < 2) throw Error("grid: folds must be >= 2");
    if (restarts < 1) throw Error("grid: restarts must be >= 1");
    if (max_iterations < 1) throw Error("grid: max_iterations must be >= 1");
}

std::vector<FoldSplit> stratified_kfold(const LabeledDataset& dataset, int k,
                                        std::uint64_t seed) {
    if (k < 2) throw Error("stratified_kfold: k must be >= 2");
    const std::size_t n_neg = dataset.size_neg();
    const std::size_t n_pos = dataset.size_pos();
    if (n_neg < static_cast<std::size_t>(k) || n_pos < static_cast<std::size_t>(k))
        throw TooFewPointsPerClass("stratified_kfold: a class has fewer than k points");

    auto assign = [&](std::size_t n, std::uint64_t class_salt) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        rng::Sampler sampler(rng::mix(seed, class_salt));
        sampler.shuffle(std::span<std::size_t>(idx));
        std::vector<int> fold_of(n);
        for (std::size_t i = 0; i < n; ++i)
            fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        return fold_of;
    };
    const std::vector<int> fold_neg = assign(n_neg, 0x6e6567ULL);
    const std::vector<int> fold_pos = assign(n_pos, 0x706f73ULL);

    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n_neg; ++i) {
        for (int f = 0; f < k; ++f) {
            auto& split = folds[static_cast<std::size_t>(f)];
            (fold_neg[i] == f ? split.test_neg : split.train_neg).push_back(i);
        }
    }
    for (std::size_t i = 0; i < n_pos; ++i) {
        for (int f = 0; f < k; ++f) {
            auto& split = folds[static_cast<std::size_t>(f)];
            (fold_pos[i] == f ? split.test_pos : split.train_pos).push_back(i);
        }
    }
    return folds;
}

LabeledDataset subset(const LabeledDataset& dataset,
                      std::span<const std::size_t> neg_idx,
                      std::span<const std::size_t> pos_idx) {
    PointMatrix neg(neg_idx.size(), dataset.dim());
    PointMatrix pos(pos_idx.size(), dataset.dim());
    for (std::size_t i = 0; i < neg_idx.size(); ++i) {
        auto src = dataset.points_neg().row(neg_idx[i]);
        std::copy(src.begin(), src.end(), neg.row(i).begin());
    }
    for (std::size_t i = 0; i < pos_idx.size(); ++i) {
        auto src = dataset.points_pos().row(pos_idx[i]);
        std::copy(src.begin(), src.end(), pos.row(i).begin());
    }
    return LabeledDataset(std::move(neg), std::move(pos));
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& dataset,
                        int fold, double gamma, OptMethod optimizer) {
    std::uint64_t h = rng::mix(master_seed, rng::hash_string(dataset));
    h = rng::mix(h, static_cast<std::uint64_t>(fold));
    h = rng::mix(h, rng::hash_double(gamma));
    h = rng::mix(h, optimizer == OptMethod::cg ? 0x6367ULL : 0x6c62ULL);
    return h;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

const char* kRecordsHeader =
    "dataset,method,optimizer,gamma,epsilon,fold,restart_seed,bac,"
    "exp_calls_actual,exp_calls_naive,iterations,function_evaluations,"
    "final_norm,wall_time_ms,status";

std::string record_line(const RunRecord& r) {
    std::ostringstream os;
    os << r.dataset_name << ',' << r.method << ',' << r.optimizer << ','
       << fmt(r.gamma) << ',' << fmt(r.epsilon) << ',' << r.fold_index << ','
       << r.restart_seed << ',' << fmt(r.bac) << ',' << r.exp_calls_actual << ','
       << r.exp_calls_naive << ',' << r.iterations << ','
       << r.function_evaluations << ',' << fmt(r.final_norm) << ','
       << r.wall_time_ms << ',' << csv_safe(r.status);
    return os.str();
}

struct Cell {
    std::size_t dataset_index;
    int fold;
    double gamma;
    EvalMode mode;
    double epsilon;  // 0 for exact
    OptMethod optimizer;
};

RunRecord run_cell(const NamedDataset& named, const FoldSplit& split,
                   const Cell& cell, const GridSpec& spec) {
    RunRecord rec;
    rec.dataset_name = named.name;
    rec.method = to_string(cell.mode);
    rec.optimizer = to_string(cell.optimizer);
    rec.gamma = cell.gamma;
    rec.epsilon = cell.epsilon;
    rec.fold_index = cell.fold;
    rec.restart_seed =
        cell_seed(spec.master_seed, named.name, cell.fold, cell.gamma,
                  cell.optimizer);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const LabeledDataset train =
            subset(named.data, split.train_neg, split.train_pos);
        const LabeledDataset test =
            subset(named.data, split.test_neg, split.test_pos);

        ApproxConfig approx;
        approx.mode = cell.mode;
        approx.epsilon = cell.epsilon;
        OptimizerConfig opt = OptimizerConfig::for_method(cell.optimizer);
        opt.max_iterations = spec.max_iterations;
        opt.seed = rec.restart_seed;

        const MelcModel model =
            fit(train, KdeParams{cell.gamma}, approx, opt, spec.restarts);

        std::vector<int> predictions = predict(model, test.points_neg());
        const std::vector<int> pos_pred = predict(model, test.points_pos());
        predictions.insert(predictions.end(), pos_pred.begin(), pos_pred.end());
        std::vector<int> truth(test.size_neg(), -1);
        truth.insert(truth.end(), test.size_pos(), +1);

        const EvalMetrics metrics = balanced_accuracy(predictions, truth);
        rec.bac = metrics.bac;
        if (metrics.degenerate_truth) rec.status = "failed: degenerate truth";
        rec.exp_calls_actual = model.total_exp_calls;
        rec.exp_calls_naive = model.total_naive_pairs;
        rec.iterations = model.training_meta.iterations;
        rec.function_evaluations = model.training_meta.function_evaluations;
        rec.final_norm = model.training_meta.final_norm;
    } catch (const std::exception& e) {
        rec.status = std::string("failed: ") + e.what();
        rec.bac = std::numeric_limits<double>::quiet_NaN();
    }
    rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    return rec;
}

}  // namespace

std::vector<RunRecord> run_grid(const std::vector<NamedDataset>& datasets,
                                const GridSpec& spec,
                                const std::string& records_csv_path,
                                int threads) {
    spec.validate();

    // Deterministic cell enumeration; record order never depends on
    // scheduling.
    std::vector<Cell> cells;
    std::vector<std::vector<FoldSplit>> fold_table;
    fold_table.reserve(datasets.size());
    for (std::size_t di = 0; di < datasets.size(); ++di) {
        fold_table.push_back(stratified_kfold(
            datasets[di].data, spec.folds,
            rng::mix(spec.master_seed, rng::hash_string(datasets[di].name))));
        for (int fold = 0; fold < spec.folds; ++fold) {
            for (double gamma : spec.gammas) {
                for (OptMethod optimizer : spec.optimizers) {
                    for (EvalMode mode : spec.methods) {
                        if (mode == EvalMode::exact) {
                            cells.push_back(
                                {di, fold, gamma, mode, 0.0, optimizer});
                        } else {
                            for (double eps : spec.epsilons)
                                cells.push_back(
                                    {di, fold, gamma, mode, eps, optimizer});
                        }
                    }
                }
            }
        }
    }

    std::ofstream out;
    if (!records_csv_path.empty()) {
        out.open(records_csv_path);
        if (!out) throw IoFailure("cannot write " + records_csv_path);
        out << kRecordsHeader << "\n" << std::flush;
    }

    std::vector<std::optional<RunRecord>> slots(cells.size());
    std::vector<RunRecord> records;
    records.reserve(cells.size());
    std::mutex flush_mutex;
    std::size_t flushed = 0;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            RunRecord rec =
                run_cell(datasets[cell.dataset_index],
                         fold_table[cell.dataset_index]
                                   [static_cast<std::size_t>(cell.fold)],
                         cell, spec);
            std::lock_guard<std::mutex> lock(flush_mutex);
            slots[i] = std::move(rec);
            while (flushed < slots.size() && slots[flushed].has_value()) {
                if (out.is_open())
                    out << record_line(*slots[flushed]) << "\n" << std::flush;
                records.push_back(std::move(*slots[flushed]));
                slots[flushed].reset();
                ++flushed;
            }
        }
    };

    const int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

void write_records_csv(const std::vector<RunRecord>& records,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write " + path);
    out << kRecordsHeader << "\n";
    for (const RunRecord& r : records) out << record_line(r) << "\n";
    if (!out) throw IoFailure("write failed: " + path);
}

std::vector<RunRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 0, "empty records file");
    std::vector<RunRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        f.push_back(cur);
        if (f.size() != 15) throw ParseError(path, line_no, "bad record width");
        RunRecord r;
        r.dataset_name = f[0];
        r.method = f[1];
        r.optimizer = f[2];
        r.gamma = std::stod(f[3]);
        r.epsilon = std::stod(f[4]);
        r.fold_index = std::stoi(f[5]);
        r.restart_seed = std::stoull(f[6]);
        r.bac = std::stod(f[7]);
        r.exp_calls_actual = std::stoll(f[8]);
        r.exp_calls_naive = std::stoll(f[9]);
        r.iterations = std::stoll(f[10]);
        r.function_evaluations = std::stoll(f[11]);
        r.final_norm = std::stod(f[12]);
        r.wall_time_ms = std::stoll(f[13]);
        r.status = f[14];
        records.push_back(std::move(r));
    }
    return records;
}

void write_bounds_csv(const std::string& path, const std::vector<double>& v_values,
                      double eps_min, double eps_max, int steps) {
    if (v_values.empty() || steps < 1 || !(eps_min >= 0.0) || !(eps_max >= eps_min))
        throw Error("bounds: bad sampling parameters");
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write " + path);
    out << "V,epsilon,discard_threshold,bin_width\n";
    for (double V : v_values) {
        for (int i = 0; i < steps; ++i) {
            const double eps =
                steps == 1 ? eps_min
                           : eps_min + (eps_max - eps_min) *
                                           static_cast<double>(i) /
                                           static_cast<double>(steps - 1);
            out << fmt(V) << ',' << fmt(eps) << ','
                << fmt(discard_threshold(V, eps, 1.0)) << ','
                << fmt(bin_width(V, eps)) << "\n";
        }
    }
    if (!out) throw IoFailure("write failed: " + path);
}

namespace {

struct GroupStats {
    double sum_actual = 0.0;
    double sum_naive = 0.0;
    double sum_iterations = 0.0;
    long long count = 0;
};

}  // namespace

void emit_reports(const std::vector<RunRecord>& records,
                  const std::string& out_dir) {
    if (records.empty()) throw EmptyRecords("emit_reports: no records");
    std::filesystem::create_directories(out_dir);
    const auto file = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };

    // (dataset, optimizer, method) aggregates.
    std::map<std::tuple<std::string, std::string, std::string>, GroupStats> groups;
    for (const RunRecord& r : records) {
        if (!r.ok()) continue;
        GroupStats& g = groups[{r.dataset_name, r.optimizer, r.method}];
        g.sum_actual += static_cast<double>(r.exp_calls_actual);
        g.sum_naive += static_cast<double>(r.exp_calls_naive);
        g.sum_iterations += static_cast<double>(r.iterations);
        ++g.count;
    }

    {
        std::ofstream out(file("ratios.csv"));
        if (!out) throw IoFailure("cannot write ratios.csv");
        out << "dataset,optimizer,method,exp_call_ratio\n";
        for (const auto& [key, g] : groups) {
            const double ratio = g.sum_naive > 0.0 ? g.sum_actual / g.sum_naive : 0.0;
            out << std::get<0>(key) << ',' << std::get<1>(key) << ','
                << std::get<2>(key) << ',' << fmt(ratio) << "\n";
        }
    }
    {
        std::ofstream out(file("iterations.csv"));
        if (!out) throw IoFailure("cannot write iterations.csv");
        out << "dataset,optimizer,method,mean_iterations\n";
        for (const auto& [key, g] : groups) {
            out << std::get<0>(key) << ',' << std::get<1>(key) << ','
                << std::get<2>(key) << ','
                << fmt(g.sum_iterations / static_cast<double>(g.count)) << "\n";
        }
    }

    // BAC deltas: approx cells paired with the exact cell sharing
    // (dataset, fold, gamma, optimizer), then averaged per
    // (dataset, method, gamma, epsilon).
    std::map<std::tuple<std::string, int, double, std::string>, double> exact_bac;
    for (const RunRecord& r : records) {
        if (!r.ok() || r.method != "exact") continue;
        exact_bac[{r.dataset_name, r.fold_index, r.gamma, r.optimizer}] = r.bac;
    }
    std::map<std::tuple<std::string, std::string, double, double>,
             std::pair<double, long long>>
        deltas;
    for (const RunRecord& r : records) {
        if (!r.ok() || r.method == "exact") continue;
        const auto it =
            exact_bac.find({r.dataset_name, r.fold_index, r.gamma, r.optimizer});
        if (it == exact_bac.end()) continue;
        auto& [sum, count] =
            deltas[{r.dataset_name, r.method, r.gamma, r.epsilon}];
        sum += it->second - r.bac;
        ++count;
    }
    {
        std::ofstream out(file("bac_delta.csv"));
        if (!out) throw IoFailure("cannot write bac_delta.csv");
        out << "dataset,method,gamma,epsilon,mean_bac_delta\n";
        for (const auto& [key, agg] : deltas) {
            out << std::get<0>(key) << ',' << std::get<1>(key) << ','
                << fmt(std::get<2>(key)) << ',' << fmt(std::get<3>(key)) << ','
                << fmt(agg.first / static_cast<double>(agg.second)) << "\n";
        }
    }

    write_bounds_csv(file("bounds.csv"), {0.5, 1.0, 2.0}, 0.001, 0.5, 100);
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }

    Manifest m;
    const auto base_dir = std::filesystem::path(path).parent_path();
    if (!j.contains("datasets") || !j["datasets"].is_array() ||
        j["datasets"].empty())
        throw ParseError(path, 0, "manifest needs a non-empty 'datasets' array");
    for (const auto& d : j["datasets"]) {
        const std::string raw_path = d.at("path").get<std::string>();
        std::filesystem::path p(raw_path);
        if (p.is_relative()) p = base_dir / p;
        std::string format = d.value("format", "auto");
        if (format == "auto")
            format = p.extension() == ".csv" ? "csv" : "libsvm";
        const std::string name = d.value("name", p.stem().string());
        if (format == "csv") {
            m.datasets.push_back(
                {name, load_csv(p.string(), d.value("label_column", "0"))});
        } else if (format == "libsvm") {
            m.datasets.push_back({name, load_libsvm(p.string())});
        } else {
            throw ParseError(path, 0, "unknown dataset format: " + format);
        }
    }

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        if (g.contains("gammas")) m.spec.gammas = g["gammas"].get<std::vector<double>>();
        if (g.contains("epsilons"))
            m.spec.epsilons = g["epsilons"].get<std::vector<double>>();
        if (g.contains("methods")) {
            m.spec.methods.clear();
            for (const auto& s : g["methods"])
                m.spec.methods.push_back(eval_mode_from_string(s.get<std::string>()));
        }
        if (g.contains("optimizers")) {
            m.spec.optimizers.clear();
            for (const auto& s : g["optimizers"])
                m.spec.optimizers.push_back(
                    opt_method_from_string(s.get<std::string>()));
        }
        if (g.contains("folds")) m.spec.folds = g["folds"].get<int>();
        if (g.contains("restarts")) m.spec.restarts = g["restarts"].get<int>();
        if (g.contains("master_seed"))
            m.spec.master_seed = g["master_seed"].get<std::uint64_t>();
        if (g.contains("max_iterations"))
            m.spec.max_iterations = g["max_iterations"].get<int>();
    }
    m.spec.validate();
    return m;
}

}  // namespace melc
