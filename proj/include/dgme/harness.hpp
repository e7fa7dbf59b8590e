#pragma once

// Experiment orchestration: declarative configuration, fold protocols for toy
// and CSV sources, ablation sweeps, and machine-readable result emission.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dgme/checkpoint.hpp"
#include "dgme/data.hpp"
#include "dgme/mixture.hpp"

namespace dgme {

enum class ModelKind { dgme, de, mdn, mcd };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

struct ExperimentConfig {
    std::string experiment_id; // derived from source and model when empty

    // Exactly one data source: synthetic toy generator or a CSV file.
    std::string source = "toy"; // "toy" | "csv"
    ToySpec toy = ToySpec::defaults(ToyCase::gaussian);
    std::string csv_path;
    std::string target_column; // empty selects the last column

    ModelKind model = ModelKind::dgme;
    TrainConfig train;

    int n_folds = 1;
    double train_fraction = 0.9;

    std::vector<std::string> metrics = {"nll_mixture", "nll_gaussian_summary", "rmse"};

    std::vector<double> mcd_variance_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    int mcd_mc_passes = 50;

    std::string out_dir; // empty = no files written by the CLI
    std::uint64_t seed = 0;

    std::string id() const;
    // Flat sorted key=value view; the hashing and echo substrate.
    std::map<std::string, std::string> to_map() const;
};

void validate(const ExperimentConfig& cfg);

// FNV-1a over the sorted key=value lines; stable under field reordering.
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct ResultRecord {
    std::string experiment_id;
    std::string model;
    int fold = 0;
    std::string metric; // split-qualified, e.g. "train.nll_mixture"
    double value = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

struct FoldOutput {
    int fold = 0;
    Checkpoint checkpoint;
    std::vector<RoundDiagnostics> diagnostics; // dgme only
};

struct ExperimentResult {
    std::vector<ResultRecord> records;
    std::vector<FoldOutput> folds;
};

// Per fold: build train/test data, standardize on train only, fit the
// configured model, evaluate every requested metric on both splits.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// One train/test pair for fold index f, in original units. Toy sources draw an
// independent training replicate plus an out-of-range test band; CSV sources
// use seeded shuffle splits.
std::pair<Dataset, Dataset> make_fold(const ExperimentConfig& cfg, int fold);

// Sweep (epochs, em_rounds) over all factorizations of the fixed budget.
// An explicit pair list restricts the sweep; pairs must multiply to budget.
std::vector<ResultRecord> run_em_budget_ablation(
    const ExperimentConfig& cfg, int budget,
    const std::vector<std::pair<int, int>>& pairs = {});

std::vector<ResultRecord> run_dropout_ablation(const ExperimentConfig& cfg,
                                               const std::vector<double>& p_grid);

// One CSV of predictive samples per query point (original units) plus a
// summary CSV with the excess kurtosis at each point.
void emit_histogram_data(const Checkpoint& checkpoint,
                         const std::vector<Eigen::VectorXd>& x_points, Eigen::Index n_draws,
                         double drop_prob, std::uint64_t seed, const std::string& out_dir);

// Metric evaluation for a loaded checkpoint on standardized data.
double evaluate_metric(const Checkpoint& checkpoint, const std::string& metric,
                       const Dataset& standardized, const Scaler& scaler);

PredictiveSamples sample_checkpoint(const Checkpoint& checkpoint,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_standardized,
                                    Eigen::Index n_draws, double drop_prob, std::uint64_t seed);

struct SummaryRow {
    std::string experiment_id;
    std::string model;
    std::string metric;
    double mean = 0.0;
    double stderr_mean = 0.0; // sample std over folds / sqrt(n)
    int count = 0;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);

void write_records_csv(const std::string& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_records_csv(const std::string& path);
void write_summary_json(const std::string& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_json(const std::string& path);
void write_config_echo(const std::string& path, const ExperimentConfig& cfg);
void write_diagnostics_csv(const std::string& path,
                           const std::vector<RoundDiagnostics>& diagnostics);

} // namespace dgme
