#include "dgme/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dgme {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "dgme-checkpoint";
constexpr int kVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw std::runtime_error("checkpoint matrix data does not match its shape");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(),
                                             static_cast<Eigen::Index>(data.size()));
}

json mlp_to_json(const MlpParams& p) {
    json j;
    j["hidden_w"] = matrix_to_json(p.hidden_w);
    j["hidden_b"] = vector_to_json(p.hidden_b);
    j["mean_w"] = vector_to_json(p.mean_w);
    j["mean_b"] = p.mean_b;
    j["var_w"] = vector_to_json(p.var_w);
    j["var_b"] = p.var_b;
    j["variance_floor"] = p.variance_floor;
    return j;
}

MlpParams mlp_from_json(const json& j) {
    MlpParams p;
    p.hidden_w = matrix_from_json(j.at("hidden_w"));
    p.hidden_b = vector_from_json(j.at("hidden_b"));
    p.mean_w = vector_from_json(j.at("mean_w"));
    p.mean_b = j.at("mean_b").get<double>();
    p.var_w = vector_from_json(j.at("var_w"));
    p.var_b = j.at("var_b").get<double>();
    p.variance_floor = j.at("variance_floor").get<double>();
    return p;
}

json scaler_to_json(const Scaler& s) {
    json j;
    j["feature_means"] = vector_to_json(s.feature_means);
    j["feature_stds"] = vector_to_json(s.feature_stds);
    j["target_mean"] = s.target_mean;
    j["target_std"] = s.target_std;
    return j;
}

Scaler scaler_from_json(const json& j) {
    Scaler s;
    s.feature_means = vector_from_json(j.at("feature_means"));
    s.feature_stds = vector_from_json(j.at("feature_stds"));
    s.target_mean = j.at("target_mean").get<double>();
    s.target_std = j.at("target_std").get<double>();
    return s;
}

json mixture_to_json(const MixtureModel& m) {
    json j;
    j["weights"] = vector_to_json(m.weights);
    j["dropout_rate"] = m.dropout_rate;
    j["members"] = json::array();
    for (const MlpParams& member : m.members) j["members"].push_back(mlp_to_json(member));
    return j;
}

MixtureModel mixture_from_json(const json& j) {
    MixtureModel m;
    m.weights = vector_from_json(j.at("weights"));
    m.dropout_rate = j.at("dropout_rate").get<double>();
    for (const json& member : j.at("members")) m.members.push_back(mlp_from_json(member));
    return m;
}

} // namespace

Checkpoint make_checkpoint(const MixtureModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo) {
    return {"dgme", model, scaler, std::move(config_echo)};
}

Checkpoint make_checkpoint(const DeModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo) {
    return {"de", model.as_mixture(), scaler, std::move(config_echo)};
}

Checkpoint make_checkpoint(const MdnModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo) {
    return {"mdn", model, scaler, std::move(config_echo)};
}

Checkpoint make_checkpoint(const McdModel& model, const Scaler& scaler,
                           std::map<std::string, std::string> config_echo) {
    return {"mcd", model, scaler, std::move(config_echo)};
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = checkpoint.kind;
    j["scaler"] = scaler_to_json(checkpoint.scaler);
    j["config"] = checkpoint.config_echo;

    if (checkpoint.kind == "dgme" || checkpoint.kind == "de") {
        j["model"] = mixture_to_json(std::get<MixtureModel>(checkpoint.model));
    } else if (checkpoint.kind == "mdn") {
        const MdnModel& m = std::get<MdnModel>(checkpoint.model);
        json mj;
        mj["dropout_rate"] = m.dropout_rate;
        mj["hidden_w"] = matrix_to_json(m.params.hidden_w);
        mj["hidden_b"] = vector_to_json(m.params.hidden_b);
        mj["gate_w"] = matrix_to_json(m.params.gate_w);
        mj["gate_b"] = vector_to_json(m.params.gate_b);
        mj["mean_w"] = matrix_to_json(m.params.mean_w);
        mj["mean_b"] = vector_to_json(m.params.mean_b);
        mj["var_w"] = matrix_to_json(m.params.var_w);
        mj["var_b"] = vector_to_json(m.params.var_b);
        mj["variance_floor"] = m.params.variance_floor;
        j["model"] = mj;
    } else if (checkpoint.kind == "mcd") {
        const McdModel& m = std::get<McdModel>(checkpoint.model);
        json mj;
        mj["net"] = mlp_to_json(m.net);
        mj["dropout_rate"] = m.dropout_rate;
        mj["hom_variance"] = m.hom_variance;
        mj["mc_passes"] = m.mc_passes;
        mj["seed"] = m.seed;
        j["model"] = mj;
    } else {
        throw std::invalid_argument("unknown checkpoint kind '" + checkpoint.kind + "'");
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing checkpoint to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw std::runtime_error("checkpoint '" + path + "' is not valid JSON: " + err.what());
    }

    if (j.value("format", "") != kFormat)
        throw std::runtime_error("'" + path + "' is not a model checkpoint");
    if (j.value("version", 0) != kVersion)
        throw std::runtime_error("unsupported checkpoint version in '" + path + "'");

    Checkpoint ck;
    ck.kind = j.at("kind").get<std::string>();
    ck.scaler = scaler_from_json(j.at("scaler"));
    if (j.contains("config"))
        ck.config_echo = j.at("config").get<std::map<std::string, std::string>>();

    const json& mj = j.at("model");
    if (ck.kind == "dgme" || ck.kind == "de") {
        ck.model = mixture_from_json(mj);
    } else if (ck.kind == "mdn") {
        MdnModel m;
        m.dropout_rate = mj.at("dropout_rate").get<double>();
        m.params.hidden_w = matrix_from_json(mj.at("hidden_w"));
        m.params.hidden_b = vector_from_json(mj.at("hidden_b"));
        m.params.gate_w = matrix_from_json(mj.at("gate_w"));
        m.params.gate_b = vector_from_json(mj.at("gate_b"));
        m.params.mean_w = matrix_from_json(mj.at("mean_w"));
        m.params.mean_b = vector_from_json(mj.at("mean_b"));
        m.params.var_w = matrix_from_json(mj.at("var_w"));
        m.params.var_b = vector_from_json(mj.at("var_b"));
        m.params.variance_floor = mj.at("variance_floor").get<double>();
        ck.model = m;
    } else if (ck.kind == "mcd") {
        McdModel m;
        m.net = mlp_from_json(mj.at("net"));
        m.dropout_rate = mj.at("dropout_rate").get<double>();
        m.hom_variance = mj.at("hom_variance").get<double>();
        m.mc_passes = mj.at("mc_passes").get<int>();
        m.seed = mj.at("seed").get<std::uint64_t>();
        ck.model = m;
    } else {
        throw std::runtime_error("unknown model kind '" + ck.kind + "' in '" + path + "'");
    }
    return ck;
}

} // namespace dgme
