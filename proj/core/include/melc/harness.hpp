#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "melc/classify.hpp"
#include "melc/types.hpp"

namespace melc {

/// libSVM sparse text format: "label idx:val idx:val ... # comment",
/// 1-based indices, missing entries zero, dimension = largest index seen.
/// The two distinct label values map to -1/+1 in numeric order.
LabeledDataset load_libsvm(const std::string& path);

/// Numeric CSV with an optional header row (detected by a non-numeric
/// first row). label_column is a header name or a 0-based column index;
/// the remaining columns become features in file order.
LabeledDataset load_csv(const std::string& path, const std::string& label_column);

/// Per-class index split of one fold.
struct FoldSplit {
    std::vector<std::size_t> train_neg, train_pos;
    std::vector<std::size_t> test_neg, test_pos;
};

/// Seeded class-wise round-robin assignment: per-fold class counts differ
/// by at most one and the test splits partition each class.
std::vector<FoldSplit> stratified_kfold(const LabeledDataset& dataset, int k,
                                        std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& dataset,
                      std::span<const std::size_t> neg_idx,
                      std::span<const std::size_t> pos_idx);

/// One grid cell's outcome.
struct RunRecord {
    std::string dataset_name;
    std::string method;     // exact | discard | bin
    std::string optimizer;  // cg | lbfgs
    double gamma = 0.0;
    double epsilon = 0.0;  // 0 for exact
    int fold_index = 0;
    std::uint64_t restart_seed = 0;
    double bac = 0.0;
    long long exp_calls_actual = 0;
    long long exp_calls_naive = 0;
    long long iterations = 0;
    long long function_evaluations = 0;
    double final_norm = 0.0;
    long long wall_time_ms = 0;
    std::string status = "ok";  // or "failed: <reason>"

    bool ok() const { return status == "ok"; }
};

struct GridSpec {
    std::vector<double> gammas = {0.1, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> epsilons = {0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5};
    std::vector<EvalMode> methods = {EvalMode::exact, EvalMode::discard,
                                     EvalMode::bin};
    std::vector<OptMethod> optimizers = {OptMethod::cg, OptMethod::lbfgs};
    int folds = 5;
    int restarts = 3;
    std::uint64_t master_seed = 20140901;
    int max_iterations = 500;

    void validate() const;
};

struct NamedDataset {
    std::string name;
    LabeledDataset data;
};

/// Runs every (dataset x fold x gamma x method x relevant epsilon x
/// optimizer) cell: fit on the train split, BAC on the test split. Exact
/// mode ignores the epsilon list (one cell). Restart seeds derive from
/// (master_seed, dataset, fold, gamma, optimizer) only, so methods and
/// epsilons share starting vectors. Cell failures become flagged records,
/// never aborts. records_csv_path, when non-empty, is written incrementally
/// in deterministic cell order; threads > 1 evaluates cells concurrently.
std::vector<RunRecord> run_grid(const std::vector<NamedDataset>& datasets,
                                const GridSpec& spec,
                                const std::string& records_csv_path = "",
                                int threads = 1);

/// The per-cell seed derivation used by run_grid (method/epsilon excluded).
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& dataset,
                        int fold, double gamma, OptMethod optimizer);

void write_records_csv(const std::vector<RunRecord>& records,
                       const std::string& path);
std::vector<RunRecord> read_records_csv(const std::string& path);

/// Aggregated report files:
///   ratios.csv      dataset x optimizer x method exp-call ratio
///                   (sum actual / sum naive over the method's cells)
///   iterations.csv  dataset x optimizer x method mean iterations
///   bac_delta.csv   dataset x method x gamma x epsilon mean
///                   (BAC_exact - BAC_approx), folds and optimizers paired
///   bounds.csv      discard threshold T and bin width B over an epsilon
///                   sweep at fixed V values
void emit_reports(const std::vector<RunRecord>& records,
                  const std::string& out_dir);

void write_bounds_csv(const std::string& path, const std::vector<double>& v_values,
                      double eps_min, double eps_max, int steps);

/// Manifest: JSON document naming datasets (path, format, label column)
/// and GridSpec overrides.
struct Manifest {
    std::vector<NamedDataset> datasets;
    GridSpec spec;
};

Manifest load_manifest(const std::string& path);

}  // namespace melc
