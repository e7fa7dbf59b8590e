// Command-line front end: toy data generation, training, evaluation,
// predictive sampling, and the two ablation sweeps.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dgme/baselines.hpp"
#include "dgme/checkpoint.hpp"
#include "dgme/data.hpp"
#include "dgme/harness.hpp"
#include "dgme/predictive.hpp"

namespace {

struct CliState {
    dgme::ExperimentConfig cfg;
    std::string model_name = "dgme";
    std::string toy_case_name = "gaussian";
    std::string init_name = "default_uniform";
    dgme::ToySpec toy_overrides = dgme::ToySpec::defaults(dgme::ToyCase::gaussian);
};

// Shared options live on the root app; subcommands fall through to them, so
// both `dgme --seed 7 train` and `dgme train --seed 7` work. The config file
// is flat key=value with the same dotted names as the flags.
void add_common_options(CLI::App& app, CliState& state) {
    app.set_config("--config", "", "Declarative config file; flags override file values");
    // Keep dotted keys intact instead of treating them as subcommand paths.
    app.get_config_formatter_base()->parentSeparator('\x1f');

    app.add_option("--seed", state.cfg.seed, "Master seed deriving all sub-seeds");
    app.add_option("--out", state.cfg.out_dir, "Output directory");
    app.add_option("--model", state.model_name, "Model kind")
        ->check(CLI::IsMember({"dgme", "de", "mdn", "mcd"}));
    app.add_option("--id", state.cfg.experiment_id, "Experiment id (derived when omitted)");
    app.add_option("--source", state.cfg.source, "Data source")
        ->check(CLI::IsMember({"toy", "csv"}));
    app.add_option("--metrics", state.cfg.metrics, "Metrics to evaluate")->delimiter(',');

    app.add_option("--data.toy_case", state.toy_case_name, "Toy noise case")
        ->check(CLI::IsMember({"gaussian", "heavy_tailed", "bimodal"}));
    app.add_option("--data.n", state.toy_overrides.n, "Toy training points");
    app.add_option("--data.flip_prob", state.toy_overrides.flip_prob,
                   "Probability of flipping the cubic's sign");
    app.add_option("--data.noise_variance", state.toy_overrides.noise_variance,
                   "Noise variance");
    app.add_option("--data.dof", state.toy_overrides.dof,
                   "Degrees of freedom for heavy-tailed noise");
    app.add_option("--data.x_lo", state.toy_overrides.x_lo, "Lower input bound");
    app.add_option("--data.x_hi", state.toy_overrides.x_hi, "Upper input bound");
    app.add_option("--data.csv_path", state.cfg.csv_path, "CSV input path");
    app.add_option("--data.target_column", state.cfg.target_column,
                   "Target column name (default: last column)");

    app.add_option("--train.n_components", state.cfg.train.n_components,
                   "Mixture components / ensemble size");
    app.add_option("--train.em_rounds", state.cfg.train.em_rounds, "EM rounds");
    app.add_option("--train.epochs", state.cfg.train.epochs, "Epochs per round");
    app.add_option("--train.learning_rate", state.cfg.train.learning_rate, "Adam step size");
    app.add_option("--train.batch_size", state.cfg.train.batch_size, "Mini-batch size");
    app.add_option("--train.hidden_units", state.cfg.train.hidden_units, "Hidden layer width");
    app.add_option("--train.init", state.init_name, "Weight init scheme")
        ->check(CLI::IsMember({"default_uniform", "uniform_small", "normal_tiny",
                               "xavier_uniform", "xavier_normal", "zeros_fixed_bias"}));
    app.add_option("--train.dropout_rate", state.cfg.train.dropout_rate,
                   "Hidden-unit drop probability");
    app.add_option("--train.weight_floor", state.cfg.train.weight_floor,
                   "Mixture weight floor");
    app.add_option("--train.variance_floor", state.cfg.train.variance_floor,
                   "Predictive variance floor");

    app.add_option("--folds.count", state.cfg.n_folds, "Number of folds / replicates");
    app.add_option("--folds.train_fraction", state.cfg.train_fraction,
                   "Training fraction per fold");

    app.add_option("--mcd.variance_grid", state.cfg.mcd_variance_grid,
                   "Homoscedastic variance grid")
        ->delimiter(',');
    app.add_option("--mcd.mc_passes", state.cfg.mcd_mc_passes,
                   "Stochastic forward passes per prediction");
}

// Toy defaults depend on the noise case; apply them first, then anything the
// user set explicitly (by flag or config file) on top.
void finalize(CLI::App& app, CliState& state) {
    state.cfg.model = dgme::model_kind_from_string(state.model_name);
    state.cfg.train.init = dgme::init_scheme_from_string(state.init_name);

    dgme::ToySpec spec = dgme::ToySpec::defaults(dgme::toy_case_from_string(state.toy_case_name));
    if (app.count("--data.n")) spec.n = state.toy_overrides.n;
    if (app.count("--data.flip_prob")) spec.flip_prob = state.toy_overrides.flip_prob;
    if (app.count("--data.noise_variance"))
        spec.noise_variance = state.toy_overrides.noise_variance;
    if (app.count("--data.dof")) spec.dof = state.toy_overrides.dof;
    if (app.count("--data.x_lo")) spec.x_lo = state.toy_overrides.x_lo;
    if (app.count("--data.x_hi")) spec.x_hi = state.toy_overrides.x_hi;
    state.cfg.toy = spec;
}

void write_standard_outputs(const dgme::ExperimentConfig& cfg,
                            const std::vector<dgme::ResultRecord>& records) {
    if (cfg.out_dir.empty()) return;
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path out(cfg.out_dir);
    dgme::write_records_csv((out / "records.csv").string(), records);
    dgme::write_summary_json((out / "summary.json").string(), dgme::summarize(records));
    dgme::write_config_echo((out / "effective_config.ini").string(), cfg);
}

void print_summary(const std::vector<dgme::ResultRecord>& records) {
    for (const dgme::SummaryRow& row : dgme::summarize(records))
        std::cout << row.experiment_id << " " << row.model << " " << row.metric << " = "
                  << row.mean << " +/- " << row.stderr_mean << " (n=" << row.count << ")\n";
}

std::vector<Eigen::VectorXd> parse_points(const std::vector<std::string>& raw) {
    std::vector<Eigen::VectorXd> points;
    points.reserve(raw.size());
    for (const std::string& spec : raw) {
        std::vector<double> coords;
        std::string cell;
        std::istringstream in(spec);
        while (std::getline(in, cell, ','))
            coords.push_back(std::stod(cell));
        if (coords.empty()) throw std::invalid_argument("empty query point '" + spec + "'");
        points.push_back(Eigen::Map<const Eigen::VectorXd>(
            coords.data(), static_cast<Eigen::Index>(coords.size())));
    }
    return points;
}

int run(int argc, char** argv) {
    CLI::App app{"Gaussian mixture ensembles for conditional density estimation"};
    app.require_subcommand(1);

    CliState state;
    add_common_options(app, state);

    CLI::App* gen = app.add_subcommand("generate-toy", "Write a toy dataset to CSV");
    CLI::App* train = app.add_subcommand("train", "Fit a model and write checkpoints");
    CLI::App* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    std::string eval_checkpoint;
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint path")->required();

    CLI::App* sample = app.add_subcommand("sample", "Draw predictive samples at query points");
    std::string sample_checkpoint_path;
    std::vector<std::string> sample_points;
    long long sample_draws = 1000;
    double sample_dropout = 0.0;
    sample->add_option("--checkpoint", sample_checkpoint_path, "Checkpoint path")->required();
    sample->add_option("--x", sample_points,
                       "Query point, comma-separated coordinates; repeatable")
        ->required();
    sample->add_option("--draws", sample_draws, "Samples per point");
    CLI::Option* dropout_opt =
        sample->add_option("--dropout", sample_dropout, "Drop probability while sampling");

    CLI::App* budget = app.add_subcommand(
        "ablate-em-budget", "Sweep (epochs, em_rounds) factorizations of a fixed budget");
    int budget_total = 50;
    budget->add_option("--budget", budget_total, "Total epoch budget epochs*em_rounds");

    CLI::App* dropout = app.add_subcommand("ablate-dropout", "Sweep dropout rates");
    std::vector<double> dropout_grid = {0.0, 0.05, 0.1, 0.15, 0.2};
    dropout->add_option("--grid", dropout_grid, "Drop probabilities to sweep")->delimiter(',');

    CLI::App* folds = app.add_subcommand("folds", "Run the multi-fold protocol");

    for (CLI::App* cmd : {gen, train, eval, sample, budget, dropout, folds})
        cmd->fallthrough();

    CLI11_PARSE(app, argc, argv);
    finalize(app, state);

    if (gen->parsed()) {
        dgme::ToySpec spec = state.cfg.toy;
        spec.seed = state.cfg.seed;
        const dgme::Dataset data = dgme::generate_toy(spec);
        const std::string path = state.cfg.out_dir.empty() ? "toy.csv" : state.cfg.out_dir;
        dgme::save_csv(data, path);
        std::cout << "wrote " << data.size() << " rows to " << path << "\n";
        return 0;
    }

    if (train->parsed()) {
        const dgme::ExperimentResult result = dgme::run_experiment(state.cfg);
        write_standard_outputs(state.cfg, result.records);
        if (!state.cfg.out_dir.empty()) {
            const std::filesystem::path out(state.cfg.out_dir);
            for (const dgme::FoldOutput& fold : result.folds) {
                dgme::save_checkpoint(
                    (out / ("checkpoint_fold" + std::to_string(fold.fold) + ".json")).string(),
                    fold.checkpoint);
                if (!fold.diagnostics.empty())
                    dgme::write_diagnostics_csv(
                        (out / ("diagnostics_fold" + std::to_string(fold.fold) + ".csv"))
                            .string(),
                        fold.diagnostics);
            }
        }
        print_summary(result.records);
        return 0;
    }

    if (eval->parsed()) {
        const dgme::Checkpoint ck = dgme::load_checkpoint(eval_checkpoint);
        dgme::Dataset raw;
        if (state.cfg.source == "toy") {
            dgme::ToySpec spec = state.cfg.toy;
            spec.seed = state.cfg.seed;
            raw = dgme::generate_toy(spec);
        } else {
            raw = dgme::load_csv(state.cfg.csv_path, state.cfg.target_column);
        }
        const dgme::Dataset standardized = dgme::apply_scaler(raw, ck.scaler);
        std::vector<dgme::ResultRecord> records;
        const std::uint64_t hash = dgme::config_hash(state.cfg);
        for (const std::string& metric : state.cfg.metrics) {
            const double value = dgme::evaluate_metric(ck, metric, standardized, ck.scaler);
            records.push_back(
                {state.cfg.id(), ck.kind, 0, "eval." + metric, value, hash, state.cfg.seed});
            std::cout << "eval." << metric << " = " << value << "\n";
        }
        write_standard_outputs(state.cfg, records);
        return 0;
    }

    if (sample->parsed()) {
        const dgme::Checkpoint ck = dgme::load_checkpoint(sample_checkpoint_path);
        double p_d = sample_dropout;
        if (dropout_opt->count() == 0) {
            if (ck.kind == "dgme" || ck.kind == "de")
                p_d = std::get<dgme::MixtureModel>(ck.model).dropout_rate;
            else if (ck.kind == "mdn")
                p_d = std::get<dgme::MdnModel>(ck.model).dropout_rate;
        }
        const std::string out_dir = state.cfg.out_dir.empty() ? "samples" : state.cfg.out_dir;
        dgme::emit_histogram_data(ck, parse_points(sample_points), sample_draws, p_d,
                                  state.cfg.seed, out_dir);
        std::cout << "wrote " << sample_points.size() << " sample files to " << out_dir << "\n";
        return 0;
    }

    if (budget->parsed()) {
        const std::vector<dgme::ResultRecord> records =
            dgme::run_em_budget_ablation(state.cfg, budget_total);
        write_standard_outputs(state.cfg, records);
        print_summary(records);
        return 0;
    }

    if (dropout->parsed()) {
        const std::vector<dgme::ResultRecord> records =
            dgme::run_dropout_ablation(state.cfg, dropout_grid);
        write_standard_outputs(state.cfg, records);
        print_summary(records);
        return 0;
    }

    const dgme::ExperimentResult result = dgme::run_experiment(state.cfg);
    write_standard_outputs(state.cfg, result.records);
    print_summary(result.records);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
