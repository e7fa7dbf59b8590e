// Python bindings for the core library: data generation, training,
// prediction, sampling, metrics, checkpoints, and the experiment harness.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dgme/baselines.hpp"
#include "dgme/checkpoint.hpp"
#include "dgme/data.hpp"
#include "dgme/harness.hpp"
#include "dgme/mixture.hpp"
#include "dgme/network.hpp"
#include "dgme/predictive.hpp"
#include "dgme/rng.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gaussian mixture ensembles for conditional density estimation";

    m.def("split_seed", &dgme::split_seed, py::arg("master"), py::arg("label"),
          py::arg("index") = 0);

    // data
    py::class_<dgme::Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("features", &dgme::Dataset::features)
        .def_readwrite("targets", &dgme::Dataset::targets)
        .def_readwrite("name", &dgme::Dataset::name)
        .def("size", &dgme::Dataset::size)
        .def("dim", &dgme::Dataset::dim);

    py::class_<dgme::Scaler>(m, "Scaler")
        .def(py::init<>())
        .def_readwrite("feature_means", &dgme::Scaler::feature_means)
        .def_readwrite("feature_stds", &dgme::Scaler::feature_stds)
        .def_readwrite("target_mean", &dgme::Scaler::target_mean)
        .def_readwrite("target_std", &dgme::Scaler::target_std);

    py::enum_<dgme::ToyCase>(m, "ToyCase")
        .value("gaussian", dgme::ToyCase::gaussian)
        .value("heavy_tailed", dgme::ToyCase::heavy_tailed)
        .value("bimodal", dgme::ToyCase::bimodal);

    py::class_<dgme::ToySpec>(m, "ToySpec")
        .def(py::init<>())
        .def_static("defaults", &dgme::ToySpec::defaults, py::arg("noise_case"))
        .def_readwrite("noise_case", &dgme::ToySpec::noise_case)
        .def_readwrite("n", &dgme::ToySpec::n)
        .def_readwrite("flip_prob", &dgme::ToySpec::flip_prob)
        .def_readwrite("noise_variance", &dgme::ToySpec::noise_variance)
        .def_readwrite("dof", &dgme::ToySpec::dof)
        .def_readwrite("x_lo", &dgme::ToySpec::x_lo)
        .def_readwrite("x_hi", &dgme::ToySpec::x_hi)
        .def_readwrite("seed", &dgme::ToySpec::seed);

    py::class_<dgme::FoldIndices>(m, "FoldIndices")
        .def(py::init<>())
        .def_readwrite("train", &dgme::FoldIndices::train)
        .def_readwrite("test", &dgme::FoldIndices::test);

    m.def("generate_toy", &dgme::generate_toy, py::arg("spec"));
    m.def("load_csv", &dgme::load_csv, py::arg("path"), py::arg("target_column") = "");
    m.def("save_csv", &dgme::save_csv, py::arg("data"), py::arg("path"));
    m.def("standardize", &dgme::standardize, py::arg("train"));
    m.def("apply_scaler", &dgme::apply_scaler, py::arg("data"), py::arg("scaler"));
    m.def("invert_scaler", &dgme::invert_scaler, py::arg("data"), py::arg("scaler"));
    m.def("split_folds", &dgme::split_folds, py::arg("data"), py::arg("n_folds"),
          py::arg("train_fraction"), py::arg("seed"));
    m.def("take_rows", &dgme::take_rows, py::arg("data"), py::arg("rows"));
    m.def("concat", &dgme::concat, py::arg("a"), py::arg("b"));

    // network
    py::enum_<dgme::InitScheme>(m, "InitScheme")
        .value("default_uniform", dgme::InitScheme::default_uniform)
        .value("uniform_small", dgme::InitScheme::uniform_small)
        .value("normal_tiny", dgme::InitScheme::normal_tiny)
        .value("xavier_uniform", dgme::InitScheme::xavier_uniform)
        .value("xavier_normal", dgme::InitScheme::xavier_normal)
        .value("zeros_fixed_bias", dgme::InitScheme::zeros_fixed_bias);

    py::class_<dgme::MlpParams>(m, "MlpParams")
        .def(py::init<>())
        .def_readwrite("hidden_w", &dgme::MlpParams::hidden_w)
        .def_readwrite("hidden_b", &dgme::MlpParams::hidden_b)
        .def_readwrite("mean_w", &dgme::MlpParams::mean_w)
        .def_readwrite("mean_b", &dgme::MlpParams::mean_b)
        .def_readwrite("var_w", &dgme::MlpParams::var_w)
        .def_readwrite("var_b", &dgme::MlpParams::var_b)
        .def_readwrite("variance_floor", &dgme::MlpParams::variance_floor)
        .def("hidden_units", &dgme::MlpParams::hidden_units)
        .def("input_dim", &dgme::MlpParams::input_dim)
        .def("parameter_count", &dgme::MlpParams::parameter_count);

    py::class_<dgme::DropoutMask>(m, "DropoutMask")
        .def(py::init<>())
        .def_readwrite("keep", &dgme::DropoutMask::keep)
        .def_readwrite("keep_prob", &dgme::DropoutMask::keep_prob);

    py::class_<dgme::Prediction>(m, "Prediction")
        .def(py::init<>())
        .def_readwrite("mean", &dgme::Prediction::mean)
        .def_readwrite("variance", &dgme::Prediction::variance);

    m.def("init_mlp", &dgme::init_mlp, py::arg("input_dim"), py::arg("hidden_units"),
          py::arg("scheme"), py::arg("seed"), py::arg("variance_floor") = 1e-6);
    m.def("sample_dropout_mask", &dgme::sample_dropout_mask, py::arg("hidden_units"),
          py::arg("drop_prob"), py::arg("seed"));
    m.def("forward", &dgme::forward, py::arg("params"), py::arg("x"),
          py::arg("mask") = std::nullopt);
    m.def("member_nll", &dgme::member_nll, py::arg("params"), py::arg("x"), py::arg("y"));
    m.def("gaussian_nll", &dgme::gaussian_nll, py::arg("y"), py::arg("mean"),
          py::arg("variance"));
    m.def("softplus", &dgme::softplus, py::arg("x"));
    m.def("softplus_inverse", &dgme::softplus_inverse, py::arg("y"));
    m.def("flatten", &dgme::flatten, py::arg("params"));
    m.def("unflatten", &dgme::unflatten, py::arg("theta"), py::arg("like"));

    // mixture
    py::class_<dgme::MixtureModel>(m, "MixtureModel")
        .def(py::init<>())
        .def_readwrite("weights", &dgme::MixtureModel::weights)
        .def_readwrite("members", &dgme::MixtureModel::members)
        .def_readwrite("dropout_rate", &dgme::MixtureModel::dropout_rate)
        .def("n_components", &dgme::MixtureModel::n_components);

    py::class_<dgme::Responsibilities>(m, "Responsibilities")
        .def(py::init<>())
        .def_static("uniform", &dgme::Responsibilities::uniform, py::arg("n"), py::arg("k"))
        .def_readwrite("log_resp", &dgme::Responsibilities::log_resp);

    py::class_<dgme::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("n_components", &dgme::TrainConfig::n_components)
        .def_readwrite("em_rounds", &dgme::TrainConfig::em_rounds)
        .def_readwrite("epochs", &dgme::TrainConfig::epochs)
        .def_readwrite("learning_rate", &dgme::TrainConfig::learning_rate)
        .def_readwrite("batch_size", &dgme::TrainConfig::batch_size)
        .def_readwrite("hidden_units", &dgme::TrainConfig::hidden_units)
        .def_readwrite("seed", &dgme::TrainConfig::seed)
        .def_readwrite("init", &dgme::TrainConfig::init)
        .def_readwrite("dropout_rate", &dgme::TrainConfig::dropout_rate)
        .def_readwrite("weight_floor", &dgme::TrainConfig::weight_floor)
        .def_readwrite("variance_floor", &dgme::TrainConfig::variance_floor);

    py::class_<dgme::RoundDiagnostics>(m, "RoundDiagnostics")
        .def(py::init<>())
        .def_readwrite("round", &dgme::RoundDiagnostics::round)
        .def_readwrite("q_value", &dgme::RoundDiagnostics::q_value)
        .def_readwrite("joint_log_lik", &dgme::RoundDiagnostics::joint_log_lik)
        .def_readwrite("mean_nll", &dgme::RoundDiagnostics::mean_nll)
        .def_readwrite("weights", &dgme::RoundDiagnostics::weights);

    py::class_<dgme::FitResult>(m, "FitResult")
        .def(py::init<>())
        .def_readwrite("model", &dgme::FitResult::model)
        .def_readwrite("diagnostics", &dgme::FitResult::diagnostics);

    m.def("member_log_density", &dgme::member_log_density, py::arg("model"), py::arg("data"));
    m.def("e_step", &dgme::e_step, py::arg("model"), py::arg("data"));
    m.def("m_step_weights", &dgme::m_step_weights, py::arg("resp"), py::arg("weight_floor"));
    m.def("m_step_members", &dgme::m_step_members, py::arg("model"), py::arg("data"),
          py::arg("resp"), py::arg("config"), py::arg("round_index"));
    m.def("fit_em", &dgme::fit_em, py::arg("data"), py::arg("config"));
    m.def("joint_log_likelihood", &dgme::joint_log_likelihood, py::arg("model"),
          py::arg("data"));
    m.def("expected_joint_ll", &dgme::expected_joint_ll, py::arg("model"), py::arg("data"),
          py::arg("resp"));

    // predictive
    py::class_<dgme::MixturePrediction>(m, "MixturePrediction")
        .def(py::init<>())
        .def_readwrite("weights", &dgme::MixturePrediction::weights)
        .def_readwrite("means", &dgme::MixturePrediction::means)
        .def_readwrite("variances", &dgme::MixturePrediction::variances)
        .def("n_components", &dgme::MixturePrediction::n_components);

    py::class_<dgme::Moments>(m, "Moments")
        .def(py::init<>())
        .def_readwrite("mean", &dgme::Moments::mean)
        .def_readwrite("variance", &dgme::Moments::variance);

    py::class_<dgme::PredictiveSamples>(m, "PredictiveSamples")
        .def(py::init<>())
        .def_readwrite("values", &dgme::PredictiveSamples::values)
        .def_readwrite("components", &dgme::PredictiveSamples::components)
        .def_readwrite("dropout_rate", &dgme::PredictiveSamples::dropout_rate)
        .def_readwrite("seed", &dgme::PredictiveSamples::seed);

    m.def("predict_components", &dgme::predict_components, py::arg("model"), py::arg("x"));
    m.def("predict_moments",
          py::overload_cast<const dgme::MixturePrediction&>(&dgme::predict_moments),
          py::arg("prediction"));
    m.def("predict_moments",
          py::overload_cast<const dgme::MixtureModel&, const Eigen::Ref<const Eigen::VectorXd>&>(
              &dgme::predict_moments),
          py::arg("model"), py::arg("x"));
    m.def("sample_predictive",
          py::overload_cast<const dgme::MixtureModel&, const Eigen::Ref<const Eigen::VectorXd>&,
                            Eigen::Index, double, std::uint64_t>(&dgme::sample_predictive),
          py::arg("model"), py::arg("x"), py::arg("n_draws"), py::arg("drop_prob"),
          py::arg("seed"));
    m.def("excess_kurtosis", &dgme::excess_kurtosis, py::arg("samples"));

    m.def("nll_mixture",
          py::overload_cast<const dgme::MixtureModel&, const dgme::Dataset&,
                            const dgme::Scaler&>(&dgme::nll_mixture),
          py::arg("model"), py::arg("data"), py::arg("scaler"));
    m.def("nll_gaussian_summary",
          py::overload_cast<const dgme::MixtureModel&, const dgme::Dataset&,
                            const dgme::Scaler&>(&dgme::nll_gaussian_summary),
          py::arg("model"), py::arg("data"), py::arg("scaler"));
    m.def("rmse",
          py::overload_cast<const dgme::MixtureModel&, const dgme::Dataset&,
                            const dgme::Scaler&>(&dgme::rmse),
          py::arg("model"), py::arg("data"), py::arg("scaler"));
    m.def("nll_mixture_fn",
          py::overload_cast<const dgme::PredictFn&, const dgme::Dataset&, const dgme::Scaler&>(
              &dgme::nll_mixture),
          py::arg("predict"), py::arg("data"), py::arg("scaler"));
    m.def("nll_gaussian_summary_fn",
          py::overload_cast<const dgme::PredictFn&, const dgme::Dataset&, const dgme::Scaler&>(
              &dgme::nll_gaussian_summary),
          py::arg("predict"), py::arg("data"), py::arg("scaler"));
    m.def("rmse_fn",
          py::overload_cast<const dgme::PredictFn&, const dgme::Dataset&, const dgme::Scaler&>(
              &dgme::rmse),
          py::arg("predict"), py::arg("data"), py::arg("scaler"));

    // baselines
    py::class_<dgme::DeModel>(m, "DeModel")
        .def(py::init<>())
        .def_readwrite("members", &dgme::DeModel::members)
        .def_readwrite("dropout_rate", &dgme::DeModel::dropout_rate)
        .def("n_components", &dgme::DeModel::n_components)
        .def("as_mixture", &dgme::DeModel::as_mixture);

    py::class_<dgme::MdnParams>(m, "MdnParams")
        .def(py::init<>())
        .def_readwrite("hidden_w", &dgme::MdnParams::hidden_w)
        .def_readwrite("hidden_b", &dgme::MdnParams::hidden_b)
        .def_readwrite("gate_w", &dgme::MdnParams::gate_w)
        .def_readwrite("gate_b", &dgme::MdnParams::gate_b)
        .def_readwrite("mean_w", &dgme::MdnParams::mean_w)
        .def_readwrite("mean_b", &dgme::MdnParams::mean_b)
        .def_readwrite("var_w", &dgme::MdnParams::var_w)
        .def_readwrite("var_b", &dgme::MdnParams::var_b)
        .def_readwrite("variance_floor", &dgme::MdnParams::variance_floor)
        .def("hidden_units", &dgme::MdnParams::hidden_units)
        .def("input_dim", &dgme::MdnParams::input_dim)
        .def("n_components", &dgme::MdnParams::n_components)
        .def("parameter_count", &dgme::MdnParams::parameter_count);

    py::class_<dgme::MdnModel>(m, "MdnModel")
        .def(py::init<>())
        .def_readwrite("params", &dgme::MdnModel::params)
        .def_readwrite("dropout_rate", &dgme::MdnModel::dropout_rate);

    py::class_<dgme::McdModel>(m, "McdModel")
        .def(py::init<>())
        .def_readwrite("net", &dgme::McdModel::net)
        .def_readwrite("dropout_rate", &dgme::McdModel::dropout_rate)
        .def_readwrite("hom_variance", &dgme::McdModel::hom_variance)
        .def_readwrite("mc_passes", &dgme::McdModel::mc_passes)
        .def_readwrite("seed", &dgme::McdModel::seed);

    py::class_<dgme::MdnPrediction>(m, "MdnPrediction")
        .def(py::init<>())
        .def_readwrite("gate", &dgme::MdnPrediction::gate)
        .def_readwrite("means", &dgme::MdnPrediction::means)
        .def_readwrite("variances", &dgme::MdnPrediction::variances);

    m.def("init_mdn", &dgme::init_mdn, py::arg("input_dim"), py::arg("hidden_units"),
          py::arg("n_components"), py::arg("scheme"), py::arg("seed"),
          py::arg("variance_floor") = 1e-6);
    m.def("mdn_forward", &dgme::mdn_forward, py::arg("params"), py::arg("x"),
          py::arg("mask") = std::nullopt);
    m.def("fit_de", &dgme::fit_de, py::arg("data"), py::arg("config"));
    m.def("fit_mdn", &dgme::fit_mdn, py::arg("data"), py::arg("config"));
    m.def("fit_mcd", &dgme::fit_mcd, py::arg("data"), py::arg("config"),
          py::arg("variance_grid"), py::arg("mc_passes") = 50);
    m.def("mcd_predictive_mean", &dgme::mcd_predictive_mean, py::arg("model"), py::arg("x"));
    m.def("predict_baseline",
          py::overload_cast<const dgme::DeModel&, const Eigen::Ref<const Eigen::VectorXd>&>(
              &dgme::predict_baseline),
          py::arg("model"), py::arg("x"));
    m.def("predict_baseline",
          py::overload_cast<const dgme::MdnModel&, const Eigen::Ref<const Eigen::VectorXd>&>(
              &dgme::predict_baseline),
          py::arg("model"), py::arg("x"));
    m.def("predict_baseline",
          py::overload_cast<const dgme::McdModel&, const Eigen::Ref<const Eigen::VectorXd>&>(
              &dgme::predict_baseline),
          py::arg("model"), py::arg("x"));
    m.def("sample_predictive",
          py::overload_cast<const dgme::MdnModel&, const Eigen::Ref<const Eigen::VectorXd>&,
                            Eigen::Index, double, std::uint64_t>(&dgme::sample_predictive),
          py::arg("model"), py::arg("x"), py::arg("n_draws"), py::arg("drop_prob"),
          py::arg("seed"));
    m.def("sample_predictive",
          py::overload_cast<const dgme::McdModel&, const Eigen::Ref<const Eigen::VectorXd>&,
                            Eigen::Index, std::uint64_t>(&dgme::sample_predictive),
          py::arg("model"), py::arg("x"), py::arg("n_draws"), py::arg("seed"));

    // checkpoints
    py::class_<dgme::Checkpoint>(m, "Checkpoint")
        .def(py::init<>())
        .def_readwrite("kind", &dgme::Checkpoint::kind)
        .def_readwrite("model", &dgme::Checkpoint::model)
        .def_readwrite("scaler", &dgme::Checkpoint::scaler)
        .def_readwrite("config_echo", &dgme::Checkpoint::config_echo);

    m.def("make_checkpoint",
          py::overload_cast<const dgme::MixtureModel&, const dgme::Scaler&,
                            std::map<std::string, std::string>>(&dgme::make_checkpoint),
          py::arg("model"), py::arg("scaler"),
          py::arg("config_echo") = std::map<std::string, std::string>{});
    m.def("make_checkpoint",
          py::overload_cast<const dgme::DeModel&, const dgme::Scaler&,
                            std::map<std::string, std::string>>(&dgme::make_checkpoint),
          py::arg("model"), py::arg("scaler"),
          py::arg("config_echo") = std::map<std::string, std::string>{});
    m.def("make_checkpoint",
          py::overload_cast<const dgme::MdnModel&, const dgme::Scaler&,
                            std::map<std::string, std::string>>(&dgme::make_checkpoint),
          py::arg("model"), py::arg("scaler"),
          py::arg("config_echo") = std::map<std::string, std::string>{});
    m.def("make_checkpoint",
          py::overload_cast<const dgme::McdModel&, const dgme::Scaler&,
                            std::map<std::string, std::string>>(&dgme::make_checkpoint),
          py::arg("model"), py::arg("scaler"),
          py::arg("config_echo") = std::map<std::string, std::string>{});
    m.def("save_checkpoint", &dgme::save_checkpoint, py::arg("path"), py::arg("checkpoint"));
    m.def("load_checkpoint", &dgme::load_checkpoint, py::arg("path"));

    // harness
    py::enum_<dgme::ModelKind>(m, "ModelKind")
        .value("dgme", dgme::ModelKind::dgme)
        .value("de", dgme::ModelKind::de)
        .value("mdn", dgme::ModelKind::mdn)
        .value("mcd", dgme::ModelKind::mcd);

    py::class_<dgme::ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("experiment_id", &dgme::ExperimentConfig::experiment_id)
        .def_readwrite("source", &dgme::ExperimentConfig::source)
        .def_readwrite("toy", &dgme::ExperimentConfig::toy)
        .def_readwrite("csv_path", &dgme::ExperimentConfig::csv_path)
        .def_readwrite("target_column", &dgme::ExperimentConfig::target_column)
        .def_readwrite("model", &dgme::ExperimentConfig::model)
        .def_readwrite("train", &dgme::ExperimentConfig::train)
        .def_readwrite("n_folds", &dgme::ExperimentConfig::n_folds)
        .def_readwrite("train_fraction", &dgme::ExperimentConfig::train_fraction)
        .def_readwrite("metrics", &dgme::ExperimentConfig::metrics)
        .def_readwrite("mcd_variance_grid", &dgme::ExperimentConfig::mcd_variance_grid)
        .def_readwrite("mcd_mc_passes", &dgme::ExperimentConfig::mcd_mc_passes)
        .def_readwrite("out_dir", &dgme::ExperimentConfig::out_dir)
        .def_readwrite("seed", &dgme::ExperimentConfig::seed)
        .def("id", &dgme::ExperimentConfig::id)
        .def("to_map", &dgme::ExperimentConfig::to_map);

    py::class_<dgme::ResultRecord>(m, "ResultRecord")
        .def(py::init<>())
        .def_readwrite("experiment_id", &dgme::ResultRecord::experiment_id)
        .def_readwrite("model", &dgme::ResultRecord::model)
        .def_readwrite("fold", &dgme::ResultRecord::fold)
        .def_readwrite("metric", &dgme::ResultRecord::metric)
        .def_readwrite("value", &dgme::ResultRecord::value)
        .def_readwrite("config_hash", &dgme::ResultRecord::config_hash)
        .def_readwrite("seed", &dgme::ResultRecord::seed);

    py::class_<dgme::FoldOutput>(m, "FoldOutput")
        .def(py::init<>())
        .def_readwrite("fold", &dgme::FoldOutput::fold)
        .def_readwrite("checkpoint", &dgme::FoldOutput::checkpoint)
        .def_readwrite("diagnostics", &dgme::FoldOutput::diagnostics);

    py::class_<dgme::ExperimentResult>(m, "ExperimentResult")
        .def(py::init<>())
        .def_readwrite("records", &dgme::ExperimentResult::records)
        .def_readwrite("folds", &dgme::ExperimentResult::folds);

    py::class_<dgme::SummaryRow>(m, "SummaryRow")
        .def(py::init<>())
        .def_readwrite("experiment_id", &dgme::SummaryRow::experiment_id)
        .def_readwrite("model", &dgme::SummaryRow::model)
        .def_readwrite("metric", &dgme::SummaryRow::metric)
        .def_readwrite("mean", &dgme::SummaryRow::mean)
        .def_readwrite("stderr_mean", &dgme::SummaryRow::stderr_mean)
        .def_readwrite("count", &dgme::SummaryRow::count);

    m.def("config_hash", &dgme::config_hash, py::arg("cfg"));
    m.def("run_experiment", &dgme::run_experiment, py::arg("cfg"));
    m.def("make_fold", &dgme::make_fold, py::arg("cfg"), py::arg("fold"));
    m.def("run_em_budget_ablation", &dgme::run_em_budget_ablation, py::arg("cfg"),
          py::arg("budget"), py::arg("pairs") = std::vector<std::pair<int, int>>{});
    m.def("run_dropout_ablation", &dgme::run_dropout_ablation, py::arg("cfg"),
          py::arg("p_grid"));
    m.def("emit_histogram_data", &dgme::emit_histogram_data, py::arg("checkpoint"),
          py::arg("x_points"), py::arg("n_draws"), py::arg("drop_prob"), py::arg("seed"),
          py::arg("out_dir"));
    m.def("evaluate_metric", &dgme::evaluate_metric, py::arg("checkpoint"), py::arg("metric"),
          py::arg("standardized"), py::arg("scaler"));
    m.def("sample_checkpoint", &dgme::sample_checkpoint, py::arg("checkpoint"), py::arg("x"),
          py::arg("n_draws"), py::arg("drop_prob"), py::arg("seed"));
    m.def("summarize", &dgme::summarize, py::arg("records"));
    m.def("write_records_csv", &dgme::write_records_csv, py::arg("path"), py::arg("records"));
    m.def("read_records_csv", &dgme::read_records_csv, py::arg("path"));
    m.def("write_summary_json", &dgme::write_summary_json, py::arg("path"), py::arg("rows"));
    m.def("read_summary_json", &dgme::read_summary_json, py::arg("path"));
}
