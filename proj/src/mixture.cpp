#include "dgme/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dgme/rng.hpp"

namespace dgme {

namespace {

// Row-wise logsumexp in shifted form. Returning the shifted terms keeps
// log(a_k) - lse exact when all entries of a row coincide.
Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& a, Eigen::MatrixXd* shifted = nullptr) {
    Eigen::VectorXd out(a.rows());
    if (shifted) shifted->resize(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).maxCoeff();
        const Eigen::ArrayXd sh = a.row(i).array() - m;
        if (shifted) shifted->row(i) = sh.matrix();
        out(i) = m + std::log(sh.exp().sum());
    }
    return out;
}

// Scalar std::log per entry. A lazy Eigen log expression mixes vectorized and
// scalar code paths across columns, which can differ in the last ulp and break
// the exact-uniformity guarantee for identical members.
Eigen::VectorXd log_weights(const MixtureModel& model) {
    Eigen::VectorXd lw(model.weights.size());
    for (Eigen::Index k = 0; k < lw.size(); ++k) lw(k) = std::log(model.weights(k));
    return lw;
}

} // namespace

void validate(const MixtureModel& model, double weight_floor) {
    const Eigen::Index k = model.n_components();
    if (k < 1) throw std::invalid_argument("mixture model needs at least one component");
    if (model.weights.size() != k)
        throw std::invalid_argument("mixture weight count does not match member count");
    if (std::abs(model.weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("mixture weights must sum to 1");
    // Renormalization after flooring can shave a floored entry slightly below
    // the floor itself; accept anything within 10% of it.
    if ((model.weights.array() < 0.9 * weight_floor).any())
        throw std::invalid_argument("mixture weight below floor");
    const Eigen::Index d = model.members.front().input_dim();
    for (const MlpParams& m : model.members)
        if (m.input_dim() != d)
            throw std::invalid_argument("mixture members disagree on input dimension");
    if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0))
        throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Responsibilities Responsibilities::uniform(Eigen::Index n, Eigen::Index k) {
    if (n < 1 || k < 1) throw std::invalid_argument("uniform responsibilities need n, k >= 1");
    Responsibilities r;
    r.log_resp = Eigen::MatrixXd::Constant(n, k, -std::log(static_cast<double>(k)));
    return r;
}

void validate(const Responsibilities& resp) {
    if (resp.log_resp.rows() < 1 || resp.log_resp.cols() < 1)
        throw std::invalid_argument("responsibilities are empty");
    if ((resp.log_resp.array() > 0.0).any())
        throw std::invalid_argument("log responsibilities must be <= 0");
    const Eigen::VectorXd lse = row_logsumexp(resp.log_resp);
    for (Eigen::Index i = 0; i < lse.size(); ++i)
        if (std::abs(lse(i)) >= 1e-10) {
            std::ostringstream msg;
            msg << "responsibility row " << i << " does not normalize (logsumexp = " << lse(i)
                << ")";
            throw std::invalid_argument(msg.str());
        }
}

void validate(const TrainConfig& config) {
    if (config.n_components < 1) throw std::invalid_argument("n_components must be >= 1");
    if (config.em_rounds < 1) throw std::invalid_argument("em_rounds must be >= 1");
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (config.hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw std::invalid_argument("dropout_rate must lie in [0, 1)");
    if (!(config.weight_floor > 0.0) ||
        config.weight_floor * static_cast<double>(config.n_components) >= 1.0)
        throw std::invalid_argument("weight_floor must lie in (0, 1/n_components)");
    if (!(config.variance_floor > 0.0))
        throw std::invalid_argument("variance_floor must be > 0");
}

Eigen::MatrixXd member_log_density(const MixtureModel& model, const Dataset& data) {
    validate(data);
    const Eigen::Index n = data.size();
    const Eigen::Index k = model.n_components();
    Eigen::MatrixXd log_density(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const MlpParams& member = model.members[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i) {
            const Prediction p = forward(member, data.features.row(i).transpose());
            log_density(i, j) = -gaussian_nll(data.targets(i), p.mean, p.variance);
        }
    }
    return log_density;
}

Responsibilities e_step(const MixtureModel& model, const Dataset& data) {
    const Eigen::MatrixXd scored =
        member_log_density(model, data).rowwise() + log_weights(model).transpose();
    Responsibilities resp;
    Eigen::MatrixXd shifted;
    row_logsumexp(scored, &shifted);
    resp.log_resp.resize(scored.rows(), scored.cols());
    for (Eigen::Index i = 0; i < scored.rows(); ++i) {
        const double log_norm = std::log(shifted.row(i).array().exp().sum());
        resp.log_resp.row(i) = shifted.row(i).array() - log_norm;
    }
    return resp;
}

Eigen::VectorXd m_step_weights(const Responsibilities& resp, double weight_floor) {
    if (!(weight_floor > 0.0)) throw std::invalid_argument("weight_floor must be > 0");
    Eigen::VectorXd weights =
        resp.log_resp.array().exp().colwise().mean().transpose().matrix();
    weights = weights.cwiseMax(weight_floor);
    return weights / weights.sum();
}

void m_step_members(MixtureModel& model, const Dataset& data, const Responsibilities& resp,
                    const TrainConfig& config, int round_index) {
    validate(data);
    if (resp.log_resp.rows() != data.size() ||
        resp.log_resp.cols() != model.n_components())
        throw std::invalid_argument("responsibility shape does not match data and model");

    const Eigen::Index n = data.size();
    const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);

    for (Eigen::Index k = 0; k < model.n_components(); ++k) {
        MlpParams& member = model.members[static_cast<std::size_t>(k)];
        const Eigen::VectorXd point_weights = resp.log_resp.col(k).array().exp();
        Rng rng(split_seed(split_seed(config.seed, "member", static_cast<std::uint64_t>(k)),
                           "round", static_cast<std::uint64_t>(round_index)));
        AdamState state = AdamState::zeros(member.parameter_count());
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});

        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            try {
                std::shuffle(order.begin(), order.end(), rng);
                for (Eigen::Index start = 0; start < n; start += batch) {
                    const Eigen::Index count = std::min(batch, n - start);
                    Eigen::MatrixXd xb(count, data.dim());
                    Eigen::VectorXd yb(count), wb(count);
                    for (Eigen::Index r = 0; r < count; ++r) {
                        const Eigen::Index row = order[static_cast<std::size_t>(start + r)];
                        xb.row(r) = data.features.row(row);
                        yb(r) = data.targets(row);
                        wb(r) = point_weights(row);
                    }
                    // Responsibilities this small carry no usable signal; the
                    // floor in m_step_weights keeps the component alive anyway.
                    if (!(wb.sum() > 0.0)) continue;
                    std::optional<BatchMasks> masks;
                    if (config.dropout_rate > 0.0)
                        masks = sample_batch_masks(count, member.hidden_units(),
                                                   config.dropout_rate, rng);
                    // Requesting the loss arms the non-finite fault check.
                    double batch_loss = 0.0;
                    const MlpGrads grads =
                        grad_weighted_nll(member, xb, yb, wb, masks, &batch_loss);
                    adam_step(member, grads, state, config.learning_rate);
                }
            } catch (const std::runtime_error& err) {
                std::ostringstream msg;
                msg << "member " << k << " failed in epoch " << epoch << ": " << err.what();
                throw std::runtime_error(msg.str());
            }
        }
    }
}

FitResult fit_em(const Dataset& data, const TrainConfig& config) {
    validate(config);
    validate(data);

    FitResult result;
    MixtureModel& model = result.model;
    model.dropout_rate = config.dropout_rate;
    model.weights = Eigen::VectorXd::Constant(config.n_components,
                                              1.0 / static_cast<double>(config.n_components));
    model.members.reserve(static_cast<std::size_t>(config.n_components));
    for (Eigen::Index k = 0; k < config.n_components; ++k)
        model.members.push_back(init_mlp(data.dim(), config.hidden_units, config.init,
                                         split_seed(config.seed, "init",
                                                    static_cast<std::uint64_t>(k)),
                                         config.variance_floor));

    for (int round = 0; round < config.em_rounds; ++round) {
        const Responsibilities resp = e_step(model, data);
        model.weights = m_step_weights(resp, config.weight_floor);
        m_step_members(model, data, resp, config, round);

        RoundDiagnostics diag;
        diag.round = round + 1;
        diag.q_value = expected_joint_ll(model, data, resp);
        diag.joint_log_lik = joint_log_likelihood(model, data);
        diag.mean_nll = -diag.joint_log_lik / static_cast<double>(data.size());
        diag.weights = model.weights;
        result.diagnostics.push_back(std::move(diag));
    }
    return result;
}

double joint_log_likelihood(const MixtureModel& model, const Dataset& data) {
    const Eigen::MatrixXd scored =
        member_log_density(model, data).rowwise() + log_weights(model).transpose();
    return row_logsumexp(scored).sum();
}

double expected_joint_ll(const MixtureModel& model, const Dataset& data,
                         const Responsibilities& resp) {
    if (resp.log_resp.rows() != data.size() ||
        resp.log_resp.cols() != model.n_components())
        throw std::invalid_argument("responsibility shape does not match data and model");
    const Eigen::MatrixXd scored =
        member_log_density(model, data).rowwise() + log_weights(model).transpose();
    return (resp.log_resp.array().exp() * scored.array()).sum();
}

} // namespace dgme
