#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgme/baselines.hpp"
#include "dgme/checkpoint.hpp"
#include "dgme/harness.hpp"
#include "dgme/predictive.hpp"

using namespace dgme;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(ModelKind kind, std::uint64_t seed = 3) {
    ExperimentConfig cfg;
    cfg.model = kind;
    cfg.seed = seed;
    cfg.toy = ToySpec::defaults(ToyCase::gaussian);
    cfg.toy.n = 80;
    cfg.train.n_components = 2;
    cfg.train.epochs = 2;
    cfg.train.hidden_units = 6;
    cfg.mcd_variance_grid = {0.5, 1.0, 2.0};
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<double> read_sample_values(const fs::path& file) {
    std::ifstream in(file);
    REQUIRE(bool(in));
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("value", 0) == 0);
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line.substr(0, line.find(','))));
    }
    return values;
}

} // namespace

TEST_CASE("experiment ids derive from source and model") {
    ExperimentConfig cfg = small_config(ModelKind::dgme);
    CHECK(cfg.id() == "toy-gaussian-dgme");
    cfg.model = ModelKind::mcd;
    CHECK(cfg.id() == "toy-gaussian-mcd");
    cfg.experiment_id = "custom";
    CHECK(cfg.id() == "custom");

    ExperimentConfig csv = small_config(ModelKind::de);
    csv.source = "csv";
    csv.csv_path = "/data/housing.csv";
    CHECK(csv.id() == "csv-housing-de");

    for (ModelKind k : {ModelKind::dgme, ModelKind::de, ModelKind::mdn, ModelKind::mcd})
        CHECK(model_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(model_kind_from_string("svm"), std::invalid_argument);
}

TEST_CASE("config hash ignores output location but tracks semantics") {
    ExperimentConfig a = small_config(ModelKind::dgme);
    ExperimentConfig b = a;
    b.out_dir = "/somewhere/else";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(a.to_map().count("out_dir") == 0);

    b = a;
    b.seed = 999;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.train.epochs = 3;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.model = ModelKind::mdn;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("experiment config validation") {
    ExperimentConfig cfg = small_config(ModelKind::dgme);
    CHECK_NOTHROW(validate(cfg));

    cfg.source = "parquet";
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

    cfg = small_config(ModelKind::dgme);
    cfg.source = "csv";
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument); // no path

    cfg = small_config(ModelKind::dgme);
    cfg.csv_path = "/tmp/extra.csv"; // toy source plus a csv path
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

    cfg = small_config(ModelKind::dgme);
    cfg.metrics = {"nll_mixture", "psnr"};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

    cfg = small_config(ModelKind::dgme);
    cfg.experiment_id = "has,comma";
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

    cfg = small_config(ModelKind::mcd);
    cfg.mcd_variance_grid = {1.0, -2.0};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

    cfg = small_config(ModelKind::dgme);
    cfg.n_folds = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("toy folds surround the training range with a test band") {
    ExperimentConfig cfg = small_config(ModelKind::dgme, 11);
    cfg.toy.n = 100;
    const auto [train, test] = make_fold(cfg, 0);
    CHECK(train.size() == 100);
    CHECK(test.size() == 2 * (100 / 4));
    CHECK(train.features.minCoeff() >= -4.0);
    CHECK(train.features.maxCoeff() <= 4.0);
    for (Eigen::Index i = 0; i < test.size(); ++i) {
        const double x = test.features(i, 0);
        const bool in_band = (x >= 4.0 && x <= 5.0) || (x >= -5.0 && x <= -4.0);
        CHECK(in_band);
    }

    const auto [train2, test2] = make_fold(cfg, 0);
    CHECK(train.features == train2.features);
    CHECK(test.targets == test2.targets);

    cfg.n_folds = 3;
    const auto [train3, test3] = make_fold(cfg, 1);
    CHECK(train3.features != train.features);

    CHECK_THROWS_AS(make_fold(cfg, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_fold(cfg, -1), std::invalid_argument);
}

TEST_CASE("csv folds split by index") {
    TempDir dir("dgme_harness_csv");
    const fs::path file = dir.path / "data.csv";
    {
        std::ofstream out(file);
        out << "x,y\n";
        for (int i = 0; i < 10; ++i) out << i << "," << 2 * i << "\n";
    }
    ExperimentConfig cfg = small_config(ModelKind::dgme, 5);
    cfg.source = "csv";
    cfg.csv_path = file.string();
    cfg.n_folds = 2;
    cfg.train_fraction = 0.9;

    const auto [train, test] = make_fold(cfg, 0);
    CHECK(train.size() == 9);
    CHECK(test.size() == 1);
    const auto [train1, test1] = make_fold(cfg, 1);
    CHECK(test1.targets != test.targets);
}

TEST_CASE("run_experiment emits one record per metric, split, and fold") {
    ExperimentConfig cfg = small_config(ModelKind::dgme, 7);
    cfg.n_folds = 2;
    const ExperimentResult result = run_experiment(cfg);

    const int k = static_cast<int>(cfg.train.n_components);
    CHECK(result.records.size() ==
          static_cast<std::size_t>(2 * (2 * 3 + k))); // folds * (splits*metrics + pi)
    CHECK(result.folds.size() == 2);

    const std::uint64_t hash = config_hash(cfg);
    int pi_records = 0;
    for (const ResultRecord& r : result.records) {
        CHECK(r.experiment_id == "toy-gaussian-dgme");
        CHECK(r.model == "dgme");
        CHECK(r.config_hash == hash);
        CHECK(r.seed == cfg.seed);
        CHECK(std::isfinite(r.value));
        if (r.metric.rfind("pi.", 0) == 0) ++pi_records;
    }
    CHECK(pi_records == 2 * k);

    for (const FoldOutput& fold : result.folds) {
        CHECK(fold.checkpoint.kind == "dgme");
        CHECK_FALSE(fold.diagnostics.empty());
    }
}

TEST_CASE("rerunning an experiment reproduces every record exactly") {
    for (ModelKind kind : {ModelKind::dgme, ModelKind::de, ModelKind::mdn, ModelKind::mcd}) {
        ExperimentConfig cfg = small_config(kind, 13);
        const ExperimentResult a = run_experiment(cfg);
        const ExperimentResult b = run_experiment(cfg);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].metric == b.records[i].metric);
            CHECK(a.records[i].value == b.records[i].value);
            CHECK(a.records[i].fold == b.records[i].fold);
        }
        CHECK(a.folds[0].checkpoint.kind == to_string(kind));
    }
}

TEST_CASE("records agree with evaluate_metric on the stored checkpoint") {
    ExperimentConfig cfg = small_config(ModelKind::de, 17);
    const ExperimentResult result = run_experiment(cfg);
    const Checkpoint& ck = result.folds[0].checkpoint;

    const auto [train_raw, test_raw] = make_fold(cfg, 0);
    const auto [train_std, scaler] = standardize(train_raw);
    for (const ResultRecord& r : result.records) {
        if (r.metric.rfind("train.", 0) != 0) continue;
        const std::string metric = r.metric.substr(6);
        CHECK(r.value == evaluate_metric(ck, metric, train_std, scaler));
    }
    CHECK_THROWS_AS(evaluate_metric(ck, "psnr", train_std, scaler), std::invalid_argument);
}

TEST_CASE("failures carry the fold index") {
    ExperimentConfig cfg = small_config(ModelKind::dgme);
    cfg.source = "csv";
    cfg.csv_path = "/nonexistent/missing.csv";
    cfg.toy = ToySpec::defaults(ToyCase::gaussian); // unused for csv
    try {
        run_experiment(cfg);
        FAIL("expected a failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
    }
}

TEST_CASE("summarize computes fold means and standard errors") {
    std::vector<ResultRecord> records = {
        {"exp", "dgme", 0, "test.rmse", 1.0, 1, 0},
        {"exp", "dgme", 1, "test.rmse", 3.0, 1, 0},
        {"exp", "dgme", 2, "test.rmse", 5.0, 1, 0},
        {"exp", "dgme", 0, "train.nll_mixture", 2.5, 1, 0},
    };
    const std::vector<SummaryRow> rows = summarize(records);
    REQUIRE(rows.size() == 2);
    const SummaryRow* rmse_row = nullptr;
    const SummaryRow* nll_row = nullptr;
    for (const SummaryRow& r : rows)
        (r.metric == "test.rmse" ? rmse_row : nll_row) = &r;
    REQUIRE(rmse_row != nullptr);
    REQUIRE(nll_row != nullptr);

    CHECK(rmse_row->mean == doctest::Approx(3.0).epsilon(1e-15));
    // sample std = 2, n = 3
    CHECK(rmse_row->stderr_mean == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(rmse_row->count == 3);
    CHECK(nll_row->stderr_mean == 0.0);
    CHECK(nll_row->count == 1);
}

TEST_CASE("records survive a csv round trip bit for bit") {
    TempDir dir("dgme_harness_records");
    ExperimentConfig cfg = small_config(ModelKind::mdn, 19);
    const ExperimentResult result = run_experiment(cfg);

    const std::string path = (dir.path / "records.csv").string();
    write_records_csv(path, result.records);
    const std::vector<ResultRecord> back = read_records_csv(path);
    REQUIRE(back.size() == result.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].experiment_id == result.records[i].experiment_id);
        CHECK(back[i].model == result.records[i].model);
        CHECK(back[i].fold == result.records[i].fold);
        CHECK(back[i].metric == result.records[i].metric);
        CHECK(back[i].value == result.records[i].value);
        CHECK(back[i].config_hash == result.records[i].config_hash);
        CHECK(back[i].seed == result.records[i].seed);
    }

    const std::string bad = (dir.path / "bad.csv").string();
    {
        std::ofstream out(bad);
        out << "experiment_id,model,fold,metric,value,config_hash,seed\n";
        out << "a,b,0,m,1.0,2\n"; // missing a field
    }
    CHECK_THROWS_AS(read_records_csv(bad), std::runtime_error);
}

TEST_CASE("summaries survive a json round trip") {
    TempDir dir("dgme_harness_summary");
    ExperimentConfig cfg = small_config(ModelKind::de, 23);
    cfg.n_folds = 2;
    const ExperimentResult result = run_experiment(cfg);
    const std::vector<SummaryRow> rows = summarize(result.records);

    const std::string path = (dir.path / "summary.json").string();
    write_summary_json(path, rows);
    const std::vector<SummaryRow> back = read_summary_json(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].experiment_id == rows[i].experiment_id);
        CHECK(back[i].metric == rows[i].metric);
        CHECK(back[i].mean == rows[i].mean);
        CHECK(back[i].stderr_mean == rows[i].stderr_mean);
        CHECK(back[i].count == rows[i].count);
    }
}

TEST_CASE("checkpoints round trip every model kind bit for bit") {
    TempDir dir("dgme_harness_ck");
    for (ModelKind kind : {ModelKind::dgme, ModelKind::de, ModelKind::mdn, ModelKind::mcd}) {
        ExperimentConfig cfg = small_config(kind, 29);
        const ExperimentResult result = run_experiment(cfg);
        const Checkpoint& ck = result.folds[0].checkpoint;

        const std::string path = (dir.path / (to_string(kind) + ".json")).string();
        save_checkpoint(path, ck);
        const Checkpoint back = load_checkpoint(path);
        CHECK(back.kind == ck.kind);
        CHECK(back.scaler.target_std == ck.scaler.target_std);
        CHECK(back.scaler.feature_means == ck.scaler.feature_means);
        CHECK(back.config_echo == ck.config_echo);

        if (kind == ModelKind::mdn) {
            CHECK(mdn_flatten(std::get<MdnModel>(back.model).params) ==
                  mdn_flatten(std::get<MdnModel>(ck.model).params));
        } else if (kind == ModelKind::mcd) {
            CHECK(flatten(std::get<McdModel>(back.model).net) ==
                  flatten(std::get<McdModel>(ck.model).net));
            CHECK(std::get<McdModel>(back.model).hom_variance ==
                  std::get<McdModel>(ck.model).hom_variance);
        } else {
            const MixtureModel& a = std::get<MixtureModel>(back.model);
            const MixtureModel& b = std::get<MixtureModel>(ck.model);
            CHECK(a.weights == b.weights);
            for (std::size_t k = 0; k < b.members.size(); ++k)
                CHECK(flatten(a.members[k]) == flatten(b.members[k]));
        }

        // Metrics computed from the reloaded checkpoint match exactly.
        const auto [train_raw, test_raw] = make_fold(cfg, 0);
        const auto [train_std, scaler] = standardize(train_raw);
        CHECK(evaluate_metric(back, "nll_mixture", train_std, scaler) ==
              evaluate_metric(ck, "nll_mixture", train_std, scaler));
    }
}

TEST_CASE("checkpoint loading rejects damaged files") {
    TempDir dir("dgme_harness_badck");
    const std::string path = (dir.path / "bad.json").string();
    {
        std::ofstream out(path);
        out << "{\"format\": \"something-else\"}";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    {
        std::ofstream out(path);
        out << "not json at all";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint((dir.path / "missing.json").string()),
                    std::runtime_error);
}

TEST_CASE("em budget ablation covers exact factorizations") {
    ExperimentConfig cfg = small_config(ModelKind::dgme, 31);
    cfg.toy.n = 40;
    cfg.train.hidden_units = 4;

    const std::vector<ResultRecord> records = run_em_budget_ablation(cfg, 6);
    // budget 6 factors as (1,6), (2,3), (3,2), (6,1)
    std::set<std::string> ids;
    for (const ResultRecord& r : records) ids.insert(r.experiment_id);
    CHECK(ids == std::set<std::string>{"toy-gaussian-dgme-e1-j6", "toy-gaussian-dgme-e2-j3",
                                       "toy-gaussian-dgme-e3-j2", "toy-gaussian-dgme-e6-j1"});

    const std::vector<ResultRecord> subset =
        run_em_budget_ablation(cfg, 6, {{2, 3}, {6, 1}});
    std::set<std::string> sub_ids;
    for (const ResultRecord& r : subset) sub_ids.insert(r.experiment_id);
    CHECK(sub_ids ==
          std::set<std::string>{"toy-gaussian-dgme-e2-j3", "toy-gaussian-dgme-e6-j1"});

    CHECK_THROWS_AS(run_em_budget_ablation(cfg, 6, {{4, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(run_em_budget_ablation(cfg, 0), std::invalid_argument);
}

TEST_CASE("dropout ablation sweeps the grid") {
    ExperimentConfig cfg = small_config(ModelKind::dgme, 37);
    cfg.toy.n = 40;
    cfg.train.hidden_units = 4;

    const std::vector<ResultRecord> records = run_dropout_ablation(cfg, {0.0, 0.1});
    std::set<std::string> ids;
    for (const ResultRecord& r : records) ids.insert(r.experiment_id);
    REQUIRE(ids.size() == 2);
    for (const std::string& id : ids) CHECK(id.find("-pd0") != std::string::npos);

    CHECK_THROWS_AS(run_dropout_ablation(cfg, {}), std::invalid_argument);
    CHECK_THROWS_AS(run_dropout_ablation(cfg, {0.5, 1.0}), std::invalid_argument);
}

TEST_CASE("histogram emission writes one file per point plus a summary") {
    TempDir dir("dgme_harness_hist");
    ExperimentConfig cfg = small_config(ModelKind::dgme, 41);
    const ExperimentResult result = run_experiment(cfg);
    const Checkpoint& ck = result.folds[0].checkpoint;

    std::vector<Eigen::VectorXd> points;
    points.push_back((Eigen::VectorXd(1) << 0.5).finished());
    points.push_back((Eigen::VectorXd(1) << 2.0).finished());

    const std::string out = (dir.path / "hist").string();
    emit_histogram_data(ck, points, 500, 0.1, 43, out);

    for (int i = 0; i < 2; ++i) {
        const std::vector<double> values =
            read_sample_values(fs::path(out) / ("samples_point" + std::to_string(i) + ".csv"));
        CHECK(values.size() == 500);
    }

    std::ifstream summary(fs::path(out) / "histogram_summary.csv");
    REQUIRE(bool(summary));
    std::string header;
    std::getline(summary, header);
    CHECK(header == "point,x1,n_draws,excess_kurtosis");
    for (int i = 0; i < 2; ++i) {
        std::string line;
        REQUIRE(std::getline(summary, line));
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 4);
        CHECK(std::stoll(cells[2]) == 500);

        const std::vector<double> values =
            read_sample_values(fs::path(out) / ("samples_point" + std::to_string(i) + ".csv"));
        const double recomputed = excess_kurtosis(
            Eigen::Map<const Eigen::VectorXd>(values.data(),
                                              static_cast<Eigen::Index>(values.size())));
        CHECK(std::stod(cells[3]) == doctest::Approx(recomputed).epsilon(1e-9));
    }

    CHECK_THROWS_AS(emit_histogram_data(ck, points, 0, 0.1, 1, out), std::invalid_argument);
    CHECK_THROWS_AS(emit_histogram_data(ck, {}, 10, 0.1, 1, out), std::invalid_argument);
}

TEST_CASE("sample_checkpoint dispatches on the stored model kind") {
    Eigen::VectorXd x(1);
    x << 0.0;
    for (ModelKind kind : {ModelKind::dgme, ModelKind::de, ModelKind::mdn, ModelKind::mcd}) {
        ExperimentConfig cfg = small_config(kind, 47);
        cfg.toy.n = 50;
        const ExperimentResult result = run_experiment(cfg);
        const PredictiveSamples s =
            sample_checkpoint(result.folds[0].checkpoint, x, 50, 0.0, 51);
        CHECK(s.values.size() == 50);
        CHECK(s.values.allFinite());
    }
}

TEST_CASE("config echo is a flat key=value file") {
    TempDir dir("dgme_harness_echo");
    ExperimentConfig cfg = small_config(ModelKind::dgme, 53);
    const std::string path = (dir.path / "effective_config.ini").string();
    write_config_echo(path, cfg);

    std::ifstream in(path);
    REQUIRE(bool(in));
    std::string line;
    std::set<std::string> keys;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        REQUIRE(eq != std::string::npos);
        keys.insert(line.substr(0, eq));
    }
    CHECK(keys.count("seed") == 1);
    CHECK(keys.count("train.epochs") == 1);
    CHECK(keys.count("data.toy_case") == 1);
    CHECK(keys.count("folds.count") == 1);
    CHECK(keys.count("out_dir") == 0);
}

TEST_CASE("diagnostics csv lists one row per round") {
    TempDir dir("dgme_harness_diag");
    ExperimentConfig cfg = small_config(ModelKind::dgme, 59);
    cfg.train.em_rounds = 3;
    const ExperimentResult result = run_experiment(cfg);
    const std::string path = (dir.path / "diag.csv").string();
    write_diagnostics_csv(path, result.folds[0].diagnostics);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "round,q_value,joint_log_lik,mean_nll,pi1,pi2");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}
