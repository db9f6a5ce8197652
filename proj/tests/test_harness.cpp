#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <map>
#include <set>
#include <sstream>

#include "melc/harness.hpp"
#include "melc/rng.hpp"
#include "support/test_utils.hpp"

using melc::EvalMode;
using melc::GridSpec;
using melc::LabeledDataset;
using melc::NamedDataset;
using melc::OptMethod;
using melc::RunRecord;
using melc::Vec;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("melc_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        const auto p = (path / name).string();
        std::ofstream out(p);
        out << content;
        return p;
    }
};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool records_equal_modulo_time(const RunRecord& a, const RunRecord& b) {
    return a.dataset_name == b.dataset_name && a.method == b.method &&
           a.optimizer == b.optimizer && a.gamma == b.gamma &&
           a.epsilon == b.epsilon && a.fold_index == b.fold_index &&
           a.restart_seed == b.restart_seed &&
           ((std::isnan(a.bac) && std::isnan(b.bac)) || a.bac == b.bac) &&
           a.exp_calls_actual == b.exp_calls_actual &&
           a.exp_calls_naive == b.exp_calls_naive &&
           a.iterations == b.iterations &&
           a.function_evaluations == b.function_evaluations &&
           a.final_norm == b.final_norm && a.status == b.status;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("libsvm: dense assembly with implicit zeros") {
    TempDir tmp;
    const auto path = tmp.file("tiny.libsvm",
                               "+1 1:0.5 3:-2\n"
                               "+1 2:1\n"
                               "-1 1:1 2:2 3:3  # trailing comment\n"
                               "-1 3:4\n");
    const LabeledDataset ds = melc::load_libsvm(path);
    CHECK(ds.dim() == 3);
    CHECK(ds.size_neg() == 2);
    CHECK(ds.size_pos() == 2);
    // +1 rows keep file order.
    CHECK(ds.points_pos().at(0, 0) == 0.5);
    CHECK(ds.points_pos().at(0, 1) == 0.0);
    CHECK(ds.points_pos().at(0, 2) == -2.0);
    CHECK(ds.points_neg().at(0, 1) == 2.0);
    CHECK(ds.points_neg().at(1, 2) == 4.0);
}

TEST_CASE("libsvm: numeric label order maps to -1/+1") {
    TempDir tmp;
    const auto path = tmp.file("zeroone.libsvm",
                               "0 1:1\n1 1:2\n0 1:3\n1 1:4\n");
    const LabeledDataset ds = melc::load_libsvm(path);
    // label 0 -> negative class, label 1 -> positive.
    CHECK(ds.points_neg().at(0, 0) == 1.0);
    CHECK(ds.points_neg().at(1, 0) == 3.0);
    CHECK(ds.points_pos().at(0, 0) == 2.0);
}

TEST_CASE("libsvm: three labels rejected") {
    TempDir tmp;
    const auto path =
        tmp.file("three.libsvm", "0 1:1\n1 1:2\n2 1:3\n0 1:4\n1 1:5\n2 1:6\n");
    CHECK_THROWS_AS(melc::load_libsvm(path), melc::NotBinary);
}

TEST_CASE("libsvm: parse errors carry line numbers") {
    TempDir tmp;
    const auto bad_feature = tmp.file("bad1.libsvm", "+1 1:1\n-1 nonsense\n");
    try {
        melc::load_libsvm(bad_feature);
        FAIL("expected ParseError");
    } catch (const melc::ParseError& e) {
        CHECK(e.line_number == 2);
    }
    const auto bad_index = tmp.file("bad2.libsvm", "+1 0:1\n");
    CHECK_THROWS_AS(melc::load_libsvm(bad_index), melc::ParseError);
    CHECK_THROWS_AS(melc::load_libsvm((tmp.path / "missing.libsvm").string()),
                    melc::IoFailure);
}

TEST_CASE("libsvm: too-small classes rejected") {
    TempDir tmp;
    const auto path = tmp.file("small.libsvm", "+1 1:1\n-1 1:2\n-1 1:3\n");
    CHECK_THROWS_AS(melc::load_libsvm(path), melc::TooSmallClass);
}

TEST_CASE("csv: header with named label column") {
    TempDir tmp;
    const auto path = tmp.file("named.csv",
                               "y,a,b\n1,0.5,2\n0,1.5,3\n1,2.5,4\n0,3.5,5\n");
    const LabeledDataset ds = melc::load_csv(path, "y");
    CHECK(ds.dim() == 2);
    CHECK(ds.points_pos().at(0, 0) == 0.5);
    CHECK(ds.points_pos().at(0, 1) == 2.0);
    CHECK(ds.points_neg().at(0, 0) == 1.5);
}

TEST_CASE("csv: headerless positional label column") {
    TempDir tmp;
    const auto path =
        tmp.file("plain.csv", "1,0.5,2\n0,1.5,3\n1,2.5,4\n0,3.5,5\n");
    const LabeledDataset ds = melc::load_csv(path, "0");
    CHECK(ds.dim() == 2);
    CHECK(ds.points_neg().at(0, 0) == 1.5);
}

TEST_CASE("csv: ragged rows rejected") {
    TempDir tmp;
    const auto path = tmp.file("ragged.csv", "y,a,b\n1,0.5,2\n0,1.5\n");
    CHECK_THROWS_AS(melc::load_csv(path, "y"), melc::RaggedRows);
}

TEST_CASE("csv: numeric index selects a column even with a header") {
    TempDir tmp;
    const auto path = tmp.file("mixed.csv",
                               "a,b,y\n0.5,2,1\n1.5,3,0\n2.5,4,1\n3.5,5,0\n");
    const LabeledDataset ds = melc::load_csv(path, "2");
    CHECK(ds.dim() == 2);
    CHECK(ds.points_pos().at(0, 0) == 0.5);
    CHECK(ds.points_neg().at(0, 1) == 3.0);
    CHECK_THROWS_AS(melc::load_csv(path, "nope"), melc::ParseError);
}

TEST_CASE("stratified kfold: balanced fold sizes") {
    const auto ds = testutil::make_blobs(700, 10, 10, 2, 1.0);
    const auto folds = melc::stratified_kfold(ds, 5, 9);
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) {
        CHECK(f.test_neg.size() == 2);
        CHECK(f.test_pos.size() == 2);
        CHECK(f.train_neg.size() == 8);
        CHECK(f.train_pos.size() == 8);
    }
}

TEST_CASE("stratified kfold: test splits partition each class") {
    const auto ds = testutil::make_blobs(701, 23, 17, 2, 1.0);
    const auto folds = melc::stratified_kfold(ds, 4, 11);
    std::set<std::size_t> neg_seen, pos_seen;
    std::size_t neg_total = 0, pos_total = 0;
    for (const auto& f : folds) {
        for (auto i : f.test_neg) neg_seen.insert(i);
        for (auto i : f.test_pos) pos_seen.insert(i);
        neg_total += f.test_neg.size();
        pos_total += f.test_pos.size();
        // Per-fold class counts differ by at most one from the ideal.
        CHECK(f.test_neg.size() >= 23 / 4);
        CHECK(f.test_neg.size() <= 23 / 4 + 1);
    }
    CHECK(neg_seen.size() == 23);
    CHECK(pos_seen.size() == 17);
    CHECK(neg_total == 23);
    CHECK(pos_total == 17);
}

TEST_CASE("stratified kfold: seed replay") {
    const auto ds = testutil::make_blobs(702, 12, 12, 2, 1.0);
    const auto a = melc::stratified_kfold(ds, 3, 77);
    const auto b = melc::stratified_kfold(ds, 3, 77);
    const auto c = melc::stratified_kfold(ds, 3, 78);
    bool same = true, different = false;
    for (std::size_t f = 0; f < a.size(); ++f) {
        same = same && a[f].test_neg == b[f].test_neg &&
               a[f].test_pos == b[f].test_pos;
        different = different || a[f].test_neg != c[f].test_neg;
    }
    CHECK(same);
    CHECK(different);
    CHECK_THROWS_AS(melc::stratified_kfold(ds, 13, 1),
                    melc::TooFewPointsPerClass);
}

TEST_CASE("run_grid: cell count matches the protocol") {
    const auto ds = testutil::make_blobs(703, 8, 8, 2, 3.0);
    GridSpec spec;  // 5 gammas, 7 epsilons, 3 methods
    spec.optimizers = {OptMethod::cg};
    spec.restarts = 1;
    spec.max_iterations = 2;
    const auto records = melc::run_grid({{"blob", ds}}, spec);
    CHECK(records.size() == 5 * 5 * (7 * 2 + 1));  // 375
}

TEST_CASE("run_grid: starts shared across methods and epsilons") {
    const auto ds = testutil::make_blobs(704, 10, 10, 2, 2.0);
    GridSpec spec;
    spec.gammas = {0.5, 1.0};
    spec.epsilons = {0.05, 0.1};
    spec.folds = 2;
    spec.restarts = 1;
    spec.max_iterations = 3;
    const auto records = melc::run_grid({{"blob", ds}}, spec);
    std::map<std::tuple<int, double, std::string>, std::set<std::uint64_t>> seeds;
    for (const auto& r : records)
        seeds[{r.fold_index, r.gamma, r.optimizer}].insert(r.restart_seed);
    for (const auto& [key, set] : seeds) CHECK(set.size() == 1);
    // Different folds and gammas draw different seeds.
    std::set<std::uint64_t> all;
    for (const auto& [key, set] : seeds) all.insert(*set.begin());
    CHECK(all.size() == seeds.size());
}

TEST_CASE("run_grid: deterministic records regardless of threading") {
    const auto ds = testutil::make_blobs(705, 9, 9, 2, 2.0);
    GridSpec spec;
    spec.gammas = {1.0};
    spec.epsilons = {0.05};
    spec.folds = 3;
    spec.restarts = 1;
    spec.max_iterations = 4;
    const auto one = melc::run_grid({{"blob", ds}}, spec, "", 1);
    const auto two = melc::run_grid({{"blob", ds}}, spec, "", 2);
    REQUIRE(one.size() == two.size());
    for (std::size_t i = 0; i < one.size(); ++i)
        CHECK(records_equal_modulo_time(one[i], two[i]));
}

TEST_CASE("run_grid: incremental csv matches the returned records") {
    TempDir tmp;
    const auto ds = testutil::make_blobs(706, 8, 8, 2, 2.0);
    GridSpec spec;
    spec.gammas = {1.0};
    spec.epsilons = {0.1};
    spec.folds = 2;
    spec.restarts = 1;
    spec.max_iterations = 2;
    const auto csv_path = (tmp.path / "records.csv").string();
    const auto records = melc::run_grid({{"blob", ds}}, spec, csv_path, 2);
    const auto reread = melc::read_records_csv(csv_path);
    REQUIRE(reread.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(reread[i].method == records[i].method);
        CHECK((reread[i].bac == records[i].bac ||
               (std::isnan(reread[i].bac) && std::isnan(records[i].bac))));
        CHECK(reread[i].exp_calls_actual == records[i].exp_calls_actual);
        CHECK(reread[i].wall_time_ms == records[i].wall_time_ms);
    }
}

TEST_CASE("reports: ratio aggregation identity and sanity") {
    TempDir tmp;
    const auto ds = testutil::make_blobs(707, 30, 30, 2, 1.0);
    GridSpec spec;
    spec.gammas = {1.0};
    spec.epsilons = {0.05};
    spec.folds = 2;
    spec.restarts = 1;
    spec.max_iterations = 10;
    const auto records = melc::run_grid({{"dense", ds}}, spec);
    melc::emit_reports(records, tmp.path.string());

    // Re-derive the ratio aggregation from raw records.
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> agg;
    for (const auto& r : records) {
        if (!r.ok()) continue;
        auto& [actual, naive] = agg[{r.optimizer, r.method}];
        actual += static_cast<double>(r.exp_calls_actual);
        naive += static_cast<double>(r.exp_calls_naive);
    }
    const auto lines = read_lines((tmp.path / "ratios.csv").string());
    REQUIRE(!lines.empty());
    CHECK(lines[0] == "dataset,optimizer,method,exp_call_ratio");
    std::map<std::pair<std::string, std::string>, double> from_file;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream ls(lines[i]);
        std::string dataset, optimizer, method, ratio;
        std::getline(ls, dataset, ',');
        std::getline(ls, optimizer, ',');
        std::getline(ls, method, ',');
        std::getline(ls, ratio, ',');
        from_file[{optimizer, method}] = std::stod(ratio);
    }
    for (const auto& [key, sums] : agg) {
        REQUIRE(from_file.count(key) == 1);
        CHECK(from_file[key] ==
              doctest::Approx(sums.first / sums.second).epsilon(1e-12));
    }
    // Aggregated ratios: bin < dist < 1 on dense data.
    for (const auto& opt : {"cg", "lbfgs"}) {
        CHECK(from_file[{opt, "bin"}] < from_file[{opt, "discard"}]);
        CHECK(from_file[{opt, "discard"}] < 1.0);
        CHECK(from_file[{opt, "exact"}] == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(fs::exists(tmp.path / "iterations.csv"));
    CHECK(fs::exists(tmp.path / "bac_delta.csv"));
    CHECK(fs::exists(tmp.path / "bounds.csv"));
    CHECK_THROWS_AS(melc::emit_reports({}, tmp.path.string()),
                    melc::EmptyRecords);
}

TEST_CASE("bounds csv: closed forms at V=1, eps=0.1") {
    TempDir tmp;
    const auto path = (tmp.path / "bounds.csv").string();
    melc::write_bounds_csv(path, {1.0}, 0.1, 0.5, 5);
    const auto lines = read_lines(path);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "V,epsilon,discard_threshold,bin_width");
    std::istringstream first(lines[1]);
    std::string v, eps, t, b;
    std::getline(first, v, ',');
    std::getline(first, eps, ',');
    std::getline(first, t, ',');
    std::getline(first, b, ',');
    CHECK(std::stod(v) == 1.0);
    CHECK(std::stod(eps) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(std::stod(t) == doctest::Approx(1.6635).epsilon(1e-4));
    CHECK(std::stod(b) == doctest::Approx(0.7598).epsilon(1e-4));
}

TEST_CASE("manifest: datasets and grid overrides") {
    TempDir tmp;
    tmp.file("demo.libsvm",
             "+1 1:1 2:1\n+1 1:2 2:1\n+1 1:3 2:0\n"
             "-1 1:-1 2:0\n-1 1:-2 2:1\n-1 1:-3 2:1\n");
    const auto manifest_path = tmp.file("manifest.json", R"({
      "datasets": [
        {"name": "demo", "path": "demo.libsvm", "format": "libsvm"}
      ],
      "grid": {
        "gammas": [1.0],
        "epsilons": [0.05, 0.1],
        "methods": ["exact", "bin"],
        "optimizers": ["cg"],
        "folds": 3,
        "restarts": 2,
        "master_seed": 99,
        "max_iterations": 7
      }
    })");
    const melc::Manifest m = melc::load_manifest(manifest_path);
    REQUIRE(m.datasets.size() == 1);
    CHECK(m.datasets[0].name == "demo");
    CHECK(m.datasets[0].data.dim() == 2);
    CHECK(m.spec.gammas == std::vector<double>{1.0});
    CHECK(m.spec.epsilons == std::vector<double>{0.05, 0.1});
    CHECK(m.spec.methods ==
          std::vector<EvalMode>{EvalMode::exact, EvalMode::bin});
    CHECK(m.spec.folds == 3);
    CHECK(m.spec.restarts == 2);
    CHECK(m.spec.master_seed == 99);
    CHECK(m.spec.max_iterations == 7);
}

TEST_CASE("empty method list yields a vacuous grid") {
    TempDir tmp;
    const auto ds = testutil::make_blobs(708, 6, 6, 2, 1.0);
    GridSpec spec;
    spec.methods.clear();
    spec.folds = 2;
    const auto csv_path = (tmp.path / "records.csv").string();
    const auto records = melc::run_grid({{"blob", ds}}, spec, csv_path);
    CHECK(records.empty());
    const auto lines = read_lines(csv_path);
    REQUIRE(lines.size() == 1);  // header only
    CHECK(lines[0].rfind("dataset,", 0) == 0);

    GridSpec bad;
    bad.gammas.clear();
    CHECK_THROWS_AS(bad.validate(), melc::Error);
}

}  // TEST_SUITE
