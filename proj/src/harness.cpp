#include "dgme/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dgme/baselines.hpp"
#include "dgme/predictive.hpp"
#include "dgme/rng.hpp"

namespace dgme {

namespace {

std::string fmt_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse " + what + " from '" + s + "'");
    }
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) fields.push_back(cell);
    if (!line.empty() && line.back() == sep) fields.emplace_back();
    return fields;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

const std::vector<std::string> kKnownMetrics = {"nll_mixture", "nll_gaussian_summary", "rmse"};

} // namespace

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "dgme") return ModelKind::dgme;
    if (s == "de") return ModelKind::de;
    if (s == "mdn") return ModelKind::mdn;
    if (s == "mcd") return ModelKind::mcd;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::dgme: return "dgme";
    case ModelKind::de: return "de";
    case ModelKind::mdn: return "mdn";
    case ModelKind::mcd: return "mcd";
    }
    return "?";
}

std::string ExperimentConfig::id() const {
    if (!experiment_id.empty()) return experiment_id;
    if (source == "csv") {
        const std::string stem = std::filesystem::path(csv_path).stem().string();
        return "csv-" + (stem.empty() ? "data" : stem) + "-" + dgme::to_string(model);
    }
    return "toy-" + dgme::to_string(toy.noise_case) + "-" + dgme::to_string(model);
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["id"] = id();
    m["source"] = source;
    m["model"] = dgme::to_string(model);
    m["seed"] = std::to_string(seed);
    m["metrics"] = join(metrics, ',');

    m["data.toy_case"] = dgme::to_string(toy.noise_case);
    m["data.n"] = std::to_string(toy.n);
    m["data.flip_prob"] = fmt_double(toy.flip_prob);
    m["data.noise_variance"] = fmt_double(toy.noise_variance);
    m["data.dof"] = fmt_double(toy.dof);
    m["data.x_lo"] = fmt_double(toy.x_lo);
    m["data.x_hi"] = fmt_double(toy.x_hi);
    m["data.csv_path"] = csv_path;
    m["data.target_column"] = target_column;

    m["train.n_components"] = std::to_string(train.n_components);
    m["train.em_rounds"] = std::to_string(train.em_rounds);
    m["train.epochs"] = std::to_string(train.epochs);
    m["train.learning_rate"] = fmt_double(train.learning_rate);
    m["train.batch_size"] = std::to_string(train.batch_size);
    m["train.hidden_units"] = std::to_string(train.hidden_units);
    m["train.init"] = dgme::to_string(train.init);
    m["train.dropout_rate"] = fmt_double(train.dropout_rate);
    m["train.weight_floor"] = fmt_double(train.weight_floor);
    m["train.variance_floor"] = fmt_double(train.variance_floor);

    m["folds.count"] = std::to_string(n_folds);
    m["folds.train_fraction"] = fmt_double(train_fraction);

    std::vector<std::string> grid;
    grid.reserve(mcd_variance_grid.size());
    for (double v : mcd_variance_grid) grid.push_back(fmt_double(v));
    m["mcd.variance_grid"] = join(grid, ',');
    m["mcd.mc_passes"] = std::to_string(mcd_mc_passes);
    return m;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.source != "toy" && cfg.source != "csv")
        throw std::invalid_argument("source must be 'toy' or 'csv'");
    if (cfg.source == "csv" && cfg.csv_path.empty())
        throw std::invalid_argument("csv source needs a csv_path");
    if (cfg.source == "toy" && !cfg.csv_path.empty())
        throw std::invalid_argument("csv_path set but source is 'toy': pick one data source");
    if (cfg.source == "toy") validate(cfg.toy);
    validate(cfg.train);
    if (cfg.n_folds < 1) throw std::invalid_argument("folds.count must be >= 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw std::invalid_argument("folds.train_fraction must lie in (0, 1)");
    if (cfg.metrics.empty()) throw std::invalid_argument("metric list is empty");
    for (const std::string& m : cfg.metrics)
        if (std::find(kKnownMetrics.begin(), kKnownMetrics.end(), m) == kKnownMetrics.end())
            throw std::invalid_argument("unknown metric '" + m + "'");
    if (cfg.model == ModelKind::mcd) {
        if (cfg.mcd_variance_grid.empty())
            throw std::invalid_argument("mcd.variance_grid is empty");
        for (double v : cfg.mcd_variance_grid)
            if (!(v > 0.0))
                throw std::invalid_argument("mcd.variance_grid entries must be > 0");
        if (cfg.mcd_mc_passes < 1) throw std::invalid_argument("mcd.mc_passes must be >= 1");
    }
    const std::string resolved = cfg.id();
    if (resolved.find(',') != std::string::npos || resolved.find('\n') != std::string::npos)
        throw std::invalid_argument("experiment id must not contain commas or newlines");
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [key, value] : cfg.to_map()) {
        feed(key);
        feed("=");
        feed(value);
        feed("\n");
    }
    return h;
}

std::pair<Dataset, Dataset> make_fold(const ExperimentConfig& cfg, int fold) {
    if (fold < 0 || fold >= cfg.n_folds) throw std::invalid_argument("fold index out of range");
    if (cfg.source == "toy") {
        ToySpec train_spec = cfg.toy;
        train_spec.seed = split_seed(cfg.seed, "toy-train", static_cast<std::uint64_t>(fold));
        Dataset train = generate_toy(train_spec);
        train.name = cfg.id() + "-train-" + std::to_string(fold);

        // Out-of-range band mirrored on both sides of the training interval.
        const double width = (cfg.toy.x_hi - cfg.toy.x_lo) / 8.0;
        ToySpec hi = cfg.toy;
        hi.n = std::max<Eigen::Index>(1, cfg.toy.n / 4);
        hi.x_lo = cfg.toy.x_hi;
        hi.x_hi = cfg.toy.x_hi + width;
        hi.seed = split_seed(cfg.seed, "toy-test", 2 * static_cast<std::uint64_t>(fold));
        ToySpec lo = hi;
        lo.x_lo = cfg.toy.x_lo - width;
        lo.x_hi = cfg.toy.x_lo;
        lo.seed = split_seed(cfg.seed, "toy-test", 2 * static_cast<std::uint64_t>(fold) + 1);
        Dataset test = concat(generate_toy(hi), generate_toy(lo));
        test.name = cfg.id() + "-test-" + std::to_string(fold);
        return {std::move(train), std::move(test)};
    }

    const Dataset all = load_csv(cfg.csv_path, cfg.target_column);
    const std::vector<FoldIndices> folds =
        split_folds(all, cfg.n_folds, cfg.train_fraction, cfg.seed);
    const FoldIndices& idx = folds[static_cast<std::size_t>(fold)];
    Dataset train = take_rows(all, idx.train);
    Dataset test = take_rows(all, idx.test);
    train.name = cfg.id() + "-train-" + std::to_string(fold);
    test.name = cfg.id() + "-test-" + std::to_string(fold);
    return {std::move(train), std::move(test)};
}

namespace {

PredictFn checkpoint_predictor(const Checkpoint& ck) {
    if (ck.kind == "dgme" || ck.kind == "de") {
        const MixtureModel model = std::get<MixtureModel>(ck.model);
        return [model](const Eigen::Ref<const Eigen::VectorXd>& x) {
            return predict_components(model, x);
        };
    }
    if (ck.kind == "mdn") {
        const MdnModel model = std::get<MdnModel>(ck.model);
        return [model](const Eigen::Ref<const Eigen::VectorXd>& x) {
            return predict_baseline(model, x);
        };
    }
    const McdModel model = std::get<McdModel>(ck.model);
    return [model](const Eigen::Ref<const Eigen::VectorXd>& x) {
        return predict_baseline(model, x);
    };
}

} // namespace

double evaluate_metric(const Checkpoint& checkpoint, const std::string& metric,
                       const Dataset& standardized, const Scaler& scaler) {
    const PredictFn predict = checkpoint_predictor(checkpoint);
    if (metric == "nll_mixture") return nll_mixture(predict, standardized, scaler);
    if (metric == "nll_gaussian_summary")
        return nll_gaussian_summary(predict, standardized, scaler);
    if (metric == "rmse") return rmse(predict, standardized, scaler);
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

PredictiveSamples sample_checkpoint(const Checkpoint& checkpoint,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_standardized,
                                    Eigen::Index n_draws, double drop_prob, std::uint64_t seed) {
    if (checkpoint.kind == "dgme" || checkpoint.kind == "de")
        return sample_predictive(std::get<MixtureModel>(checkpoint.model), x_standardized,
                                 n_draws, drop_prob, seed);
    if (checkpoint.kind == "mdn")
        return sample_predictive(std::get<MdnModel>(checkpoint.model), x_standardized, n_draws,
                                 drop_prob, seed);
    // MC dropout always samples with its training-time rate.
    return sample_predictive(std::get<McdModel>(checkpoint.model), x_standardized, n_draws,
                             seed);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::uint64_t hash = config_hash(cfg);
    const std::string id = cfg.id();
    const std::string model_name = to_string(cfg.model);

    ExperimentResult result;
    for (int fold = 0; fold < cfg.n_folds; ++fold) {
        try {
            auto [train_raw, test_raw] = make_fold(cfg, fold);
            auto [train_std, scaler] = standardize(train_raw);
            const Dataset test_std = apply_scaler(test_raw, scaler);

            TrainConfig tc = cfg.train;
            tc.seed = split_seed(cfg.seed, "train", static_cast<std::uint64_t>(fold));

            FoldOutput out;
            out.fold = fold;
            switch (cfg.model) {
            case ModelKind::dgme: {
                FitResult fit = fit_em(train_std, tc);
                out.diagnostics = std::move(fit.diagnostics);
                out.checkpoint = make_checkpoint(fit.model, scaler, cfg.to_map());
                break;
            }
            case ModelKind::de:
                out.checkpoint = make_checkpoint(fit_de(train_std, tc), scaler, cfg.to_map());
                break;
            case ModelKind::mdn:
                out.checkpoint = make_checkpoint(fit_mdn(train_std, tc), scaler, cfg.to_map());
                break;
            case ModelKind::mcd:
                out.checkpoint = make_checkpoint(
                    fit_mcd(train_std, tc, cfg.mcd_variance_grid, cfg.mcd_mc_passes), scaler,
                    cfg.to_map());
                break;
            }

            for (const std::string& metric : cfg.metrics) {
                result.records.push_back({id, model_name, fold, "train." + metric,
                                          evaluate_metric(out.checkpoint, metric, train_std,
                                                          scaler),
                                          hash, cfg.seed});
                result.records.push_back({id, model_name, fold, "test." + metric,
                                          evaluate_metric(out.checkpoint, metric, test_std,
                                                          scaler),
                                          hash, cfg.seed});
            }
            if (cfg.model == ModelKind::dgme) {
                // Learned weights, sorted descending: component labels are
                // permutation-ambiguous so reporting is order-free.
                Eigen::VectorXd pi = std::get<MixtureModel>(out.checkpoint.model).weights;
                std::sort(pi.data(), pi.data() + pi.size(), std::greater<double>());
                for (Eigen::Index k = 0; k < pi.size(); ++k)
                    result.records.push_back({id, model_name, fold,
                                              "pi." + std::to_string(k + 1), pi(k), hash,
                                              cfg.seed});
            }
            result.folds.push_back(std::move(out));
        } catch (const std::exception& err) {
            std::ostringstream msg;
            msg << "fold " << fold << " failed: " << err.what();
            throw std::runtime_error(msg.str());
        }
    }
    return result;
}

std::vector<ResultRecord> run_em_budget_ablation(const ExperimentConfig& cfg, int budget,
                                                 const std::vector<std::pair<int, int>>& pairs) {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    std::vector<std::pair<int, int>> cells = pairs;
    if (cells.empty()) {
        for (int e = 1; e <= budget; ++e)
            if (budget % e == 0) cells.emplace_back(e, budget / e);
    } else {
        for (const auto& [e, j] : cells)
            if (e < 1 || j < 1 || e * j != budget) {
                std::ostringstream msg;
                msg << "(" << e << ", " << j << ") does not factor the budget " << budget;
                throw std::invalid_argument(msg.str());
            }
    }

    std::vector<ResultRecord> records;
    for (const auto& [epochs, rounds] : cells) {
        ExperimentConfig cell = cfg;
        cell.train.epochs = epochs;
        cell.train.em_rounds = rounds;
        cell.experiment_id =
            cfg.id() + "-e" + std::to_string(epochs) + "-j" + std::to_string(rounds);
        const ExperimentResult res = run_experiment(cell);
        records.insert(records.end(), res.records.begin(), res.records.end());
    }
    return records;
}

std::vector<ResultRecord> run_dropout_ablation(const ExperimentConfig& cfg,
                                               const std::vector<double>& p_grid) {
    if (p_grid.empty()) throw std::invalid_argument("dropout grid is empty");
    for (double p : p_grid)
        if (!(p >= 0.0 && p < 1.0))
            throw std::invalid_argument("dropout grid values must lie in [0, 1)");

    std::vector<ResultRecord> records;
    for (double p : p_grid) {
        ExperimentConfig cell = cfg;
        cell.train.dropout_rate = p;
        std::ostringstream suffix;
        suffix << cfg.id() << "-pd" << p;
        cell.experiment_id = suffix.str();
        const ExperimentResult res = run_experiment(cell);
        records.insert(records.end(), res.records.begin(), res.records.end());
    }
    return records;
}

void emit_histogram_data(const Checkpoint& checkpoint,
                         const std::vector<Eigen::VectorXd>& x_points, Eigen::Index n_draws,
                         double drop_prob, std::uint64_t seed, const std::string& out_dir) {
    if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");
    if (x_points.empty()) throw std::invalid_argument("no query points given");
    std::filesystem::create_directories(out_dir);

    const std::string summary_path =
        (std::filesystem::path(out_dir) / "histogram_summary.csv").string();
    std::ofstream summary(summary_path);
    if (!summary) throw std::runtime_error("cannot open '" + summary_path + "' for writing");
    summary << std::setprecision(17);
    summary << "point";
    for (Eigen::Index d = 0; d < x_points.front().size(); ++d) summary << ",x" << (d + 1);
    summary << ",n_draws,excess_kurtosis\n";

    for (std::size_t i = 0; i < x_points.size(); ++i) {
        const Eigen::VectorXd& x = x_points[i];
        if (x.size() != checkpoint.scaler.feature_means.size())
            throw std::invalid_argument("query point has wrong dimension");
        const Eigen::VectorXd x_std =
            (x - checkpoint.scaler.feature_means).cwiseQuotient(checkpoint.scaler.feature_stds);
        const PredictiveSamples samples =
            sample_checkpoint(checkpoint, x_std, n_draws, drop_prob,
                              split_seed(seed, "point", static_cast<std::uint64_t>(i)));
        const Eigen::VectorXd values =
            (samples.values.array() * checkpoint.scaler.target_std +
             checkpoint.scaler.target_mean)
                .matrix();

        const std::string path =
            (std::filesystem::path(out_dir) / ("samples_point" + std::to_string(i) + ".csv"))
                .string();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << std::setprecision(17) << "value,component\n";
        for (Eigen::Index r = 0; r < values.size(); ++r)
            out << values(r) << "," << samples.components[static_cast<std::size_t>(r)] << "\n";
        if (!out) throw std::runtime_error("failed writing '" + path + "'");

        summary << i;
        for (Eigen::Index d = 0; d < x.size(); ++d) summary << "," << x(d);
        summary << "," << n_draws << "," << excess_kurtosis(values) << "\n";
    }
    if (!summary) throw std::runtime_error("failed writing '" + summary_path + "'");
}

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
    for (const ResultRecord& r : records)
        groups[{r.experiment_id, r.model, r.metric}].push_back(r.value);

    std::vector<SummaryRow> rows;
    rows.reserve(groups.size());
    for (const auto& [key, values] : groups) {
        SummaryRow row;
        row.experiment_id = std::get<0>(key);
        row.model = std::get<1>(key);
        row.metric = std::get<2>(key);
        row.count = static_cast<int>(values.size());
        double total = 0.0;
        for (double v : values) total += v;
        row.mean = total / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - row.mean) * (v - row.mean);
            row.stderr_mean = std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                              std::sqrt(static_cast<double>(values.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_records_csv(const std::string& path, const std::vector<ResultRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    out << "experiment_id,model,fold,metric,value,config_hash,seed\n";
    for (const ResultRecord& r : records)
        out << r.experiment_id << "," << r.model << "," << r.fold << "," << r.metric << ","
            << r.value << "," << r.config_hash << "," << r.seed << "\n";
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<ResultRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "experiment_id,model,fold,metric,value,config_hash,seed")
        throw std::runtime_error("'" + path + "' is not a records file");
    std::vector<ResultRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_fields(line, ',');
        if (f.size() != 7)
            throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                                     " has " + std::to_string(f.size()) + " fields, expected 7");
        ResultRecord r;
        r.experiment_id = f[0];
        r.model = f[1];
        r.fold = static_cast<int>(parse_double(f[2], "fold index"));
        r.metric = f[3];
        r.value = parse_double(f[4], "metric value");
        r.config_hash = std::stoull(f[5]);
        r.seed = std::stoull(f[6]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_summary_json(const std::string& path, const std::vector<SummaryRow>& rows) {
    nlohmann::json j;
    j["groups"] = nlohmann::json::array();
    for (const SummaryRow& row : rows) {
        nlohmann::json g;
        g["experiment_id"] = row.experiment_id;
        g["model"] = row.model;
        g["metric"] = row.metric;
        g["mean"] = row.mean;
        g["stderr"] = row.stderr_mean;
        g["count"] = row.count;
        j["groups"].push_back(std::move(g));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<SummaryRow> read_summary_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error("'" + path + "' is not valid JSON: " + err.what());
    }
    std::vector<SummaryRow> rows;
    for (const nlohmann::json& g : j.at("groups")) {
        SummaryRow row;
        row.experiment_id = g.at("experiment_id").get<std::string>();
        row.model = g.at("model").get<std::string>();
        row.metric = g.at("metric").get<std::string>();
        row.mean = g.at("mean").get<double>();
        row.stderr_mean = g.at("stderr").get<double>();
        row.count = g.at("count").get<int>();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_config_echo(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    // Flat dotted keys, exactly the names the command line accepts, so the
    // echo itself is a valid --config file.
    for (const auto& [key, value] : cfg.to_map()) out << key << "=" << value << "\n";
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<RoundDiagnostics>& diagnostics) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    out << "round,q_value,joint_log_lik,mean_nll";
    const Eigen::Index k = diagnostics.empty() ? 0 : diagnostics.front().weights.size();
    for (Eigen::Index i = 0; i < k; ++i) out << ",pi" << (i + 1);
    out << "\n";
    for (const RoundDiagnostics& d : diagnostics) {
        out << d.round << "," << d.q_value << "," << d.joint_log_lik << "," << d.mean_nll;
        for (Eigen::Index i = 0; i < d.weights.size(); ++i) out << "," << d.weights(i);
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

} // namespace dgme
