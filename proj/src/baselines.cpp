#include "dgme/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dgme/rng.hpp"

namespace dgme {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;
constexpr double kFixedHiddenBias = 0.1;

Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& a) {
    Eigen::VectorXd out(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).maxCoeff();
        out(i) = m + std::log((a.row(i).array() - m).exp().sum());
    }
    return out;
}

} // namespace

MixtureModel DeModel::as_mixture() const {
    if (members.empty()) throw std::invalid_argument("ensemble has no members");
    MixtureModel m;
    m.weights = Eigen::VectorXd::Constant(n_components(),
                                          1.0 / static_cast<double>(n_components()));
    m.members = members;
    m.dropout_rate = dropout_rate;
    return m;
}

void validate(const McdModel& model) {
    if (!(model.hom_variance > 0.0))
        throw std::invalid_argument("homoscedastic variance must be > 0");
    if (model.mc_passes < 1) throw std::invalid_argument("mc_passes must be >= 1");
    if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0))
        throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

MdnParams init_mdn(Eigen::Index input_dim, Eigen::Index hidden_units, Eigen::Index n_components,
                   InitScheme scheme, std::uint64_t seed, double variance_floor) {
    if (input_dim < 1 || hidden_units < 1 || n_components < 1)
        throw std::invalid_argument("init_mdn: dimensions must be >= 1");
    if (!(variance_floor > 0.0))
        throw std::invalid_argument("init_mdn: variance_floor must be > 0");

    MdnParams p;
    p.hidden_w.resize(hidden_units, input_dim);
    p.hidden_b.resize(hidden_units);
    p.gate_w.resize(n_components, hidden_units);
    p.gate_b.resize(n_components);
    p.mean_w.resize(n_components, hidden_units);
    p.mean_b.resize(n_components);
    p.var_w.resize(n_components, hidden_units);
    p.var_b.resize(n_components);
    p.variance_floor = variance_floor;

    Rng rng(seed);
    auto fill_uniform = [&rng](auto& block, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = dist(rng);
    };
    auto fill_normal = [&rng](auto& block, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = dist(rng);
    };

    const double fan_in1 = static_cast<double>(input_dim);
    const double fan_in2 = static_cast<double>(hidden_units);

    switch (scheme) {
    case InitScheme::default_uniform: {
        const double b1 = 1.0 / std::sqrt(fan_in1);
        const double b2 = 1.0 / std::sqrt(fan_in2);
        fill_uniform(p.hidden_w, b1);
        fill_uniform(p.hidden_b, b1);
        fill_uniform(p.gate_w, b2);
        fill_uniform(p.gate_b, b2);
        fill_uniform(p.mean_w, b2);
        fill_uniform(p.mean_b, b2);
        fill_uniform(p.var_w, b2);
        fill_uniform(p.var_b, b2);
        break;
    }
    case InitScheme::uniform_small: {
        const double b = 0.01;
        fill_uniform(p.hidden_w, b);
        fill_uniform(p.hidden_b, b);
        fill_uniform(p.gate_w, b);
        fill_uniform(p.gate_b, b);
        fill_uniform(p.mean_w, b);
        fill_uniform(p.mean_b, b);
        fill_uniform(p.var_w, b);
        fill_uniform(p.var_b, b);
        break;
    }
    case InitScheme::normal_tiny: {
        const double sd = 1e-6;
        fill_normal(p.hidden_w, sd);
        fill_normal(p.hidden_b, sd);
        fill_normal(p.gate_w, sd);
        fill_normal(p.gate_b, sd);
        fill_normal(p.mean_w, sd);
        fill_normal(p.mean_b, sd);
        fill_normal(p.var_w, sd);
        fill_normal(p.var_b, sd);
        break;
    }
    case InitScheme::xavier_uniform: {
        const double b1 = std::sqrt(6.0 / (fan_in1 + fan_in2));
        const double b2 = std::sqrt(6.0 / (fan_in2 + 1.0));
        fill_uniform(p.hidden_w, b1);
        p.hidden_b.setZero();
        fill_uniform(p.gate_w, b2);
        p.gate_b.setZero();
        fill_uniform(p.mean_w, b2);
        p.mean_b.setZero();
        fill_uniform(p.var_w, b2);
        p.var_b.setZero();
        break;
    }
    case InitScheme::xavier_normal: {
        const double s1 = std::sqrt(2.0 / (fan_in1 + fan_in2));
        const double s2 = std::sqrt(2.0 / (fan_in2 + 1.0));
        fill_normal(p.hidden_w, s1);
        p.hidden_b.setZero();
        fill_normal(p.gate_w, s2);
        p.gate_b.setZero();
        fill_normal(p.mean_w, s2);
        p.mean_b.setZero();
        fill_normal(p.var_w, s2);
        p.var_b.setZero();
        break;
    }
    case InitScheme::zeros_fixed_bias: {
        p.hidden_w.setZero();
        p.hidden_b.setConstant(kFixedHiddenBias);
        p.gate_w.setZero();
        p.gate_b.setZero();
        p.mean_w.setZero();
        p.mean_b.setZero();
        p.var_w.setZero();
        p.var_b.setConstant(kUnitVarianceBias);
        break;
    }
    }
    return p;
}

Eigen::VectorXd mdn_flatten(const MdnParams& p) {
    Eigen::VectorXd theta(p.parameter_count());
    Eigen::Index at = 0;
    auto put_matrix = [&](const Eigen::MatrixXd& m) {
        theta.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
    };
    auto put_vector = [&](const Eigen::VectorXd& v) {
        theta.segment(at, v.size()) = v;
        at += v.size();
    };
    put_matrix(p.hidden_w);
    put_vector(p.hidden_b);
    put_matrix(p.gate_w);
    put_vector(p.gate_b);
    put_matrix(p.mean_w);
    put_vector(p.mean_b);
    put_matrix(p.var_w);
    put_vector(p.var_b);
    return theta;
}

MdnParams mdn_unflatten(const Eigen::VectorXd& theta, const MdnParams& like) {
    if (theta.size() != like.parameter_count())
        throw std::invalid_argument("mdn_unflatten: size mismatch");
    MdnParams p = like;
    Eigen::Index at = 0;
    auto get_matrix = [&](Eigen::MatrixXd& m) {
        m = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, m.rows(), m.cols());
        at += m.size();
    };
    auto get_vector = [&](Eigen::VectorXd& v) {
        v = theta.segment(at, v.size());
        at += v.size();
    };
    get_matrix(p.hidden_w);
    get_vector(p.hidden_b);
    get_matrix(p.gate_w);
    get_vector(p.gate_b);
    get_matrix(p.mean_w);
    get_vector(p.mean_b);
    get_matrix(p.var_w);
    get_vector(p.var_b);
    return p;
}

MdnPrediction mdn_forward(const MdnParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                          const std::optional<DropoutMask>& mask) {
    if (x.size() != params.input_dim())
        throw std::invalid_argument("mdn_forward: input has wrong dimension");
    Eigen::VectorXd hidden = ((params.hidden_w * x + params.hidden_b).array().max(0.0)).matrix();
    if (mask) {
        if (mask->keep.size() != hidden.size())
            throw std::invalid_argument("mdn_forward: dropout mask has wrong size");
        hidden = (hidden.array() * mask->keep.array() / mask->keep_prob).matrix();
    }
    MdnPrediction out;
    const Eigen::ArrayXd logits = (params.gate_w * hidden + params.gate_b).array();
    const double m = logits.maxCoeff();
    const Eigen::ArrayXd shifted = (logits - m).exp();
    out.gate = (shifted / shifted.sum()).matrix();
    out.means = params.mean_w * hidden + params.mean_b;
    out.variances = (params.var_w * hidden + params.var_b)
                        .unaryExpr([&](double r) { return softplus(r) + params.variance_floor; });
    if (!out.means.allFinite() || !out.variances.allFinite() || !out.gate.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite output in mdn_forward (|hidden_w| = " << params.hidden_w.norm()
            << ", |gate_w| = " << params.gate_w.norm() << ", |mean_w| = " << params.mean_w.norm()
            << ", |var_w| = " << params.var_w.norm() << ")";
        throw std::runtime_error(msg.str());
    }
    return out;
}

MdnGrads grad_mdn_nll(const MdnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      const Eigen::Ref<const Eigen::VectorXd>& weights,
                      const std::optional<BatchMasks>& masks, double* loss_out) {
    const Eigen::Index n = X.rows();
    if (y.size() != n) throw std::invalid_argument("batch features/targets mismatch");
    if (weights.size() != n)
        throw std::invalid_argument("weight vector length does not match batch size");
    if ((weights.array() < 0.0).any())
        throw std::invalid_argument("weights must be nonnegative");
    const double total_weight = weights.sum();
    if (!(total_weight > 0.0)) throw std::invalid_argument("weight vector sums to zero");
    const Eigen::ArrayXd c = weights.array() / total_weight;

    const Eigen::MatrixXd pre =
        (X * params.hidden_w.transpose()).rowwise() + params.hidden_b.transpose();
    Eigen::MatrixXd hidden = pre.array().max(0.0);
    if (masks) {
        if (masks->keep.rows() != n || masks->keep.cols() != params.hidden_units())
            throw std::invalid_argument("batch dropout masks have wrong shape");
        hidden = (hidden.array() * masks->keep.array() / masks->keep_prob).matrix();
    }

    const Eigen::MatrixXd logits =
        (hidden * params.gate_w.transpose()).rowwise() + params.gate_b.transpose();
    const Eigen::MatrixXd means =
        (hidden * params.mean_w.transpose()).rowwise() + params.mean_b.transpose();
    const Eigen::MatrixXd raw =
        (hidden * params.var_w.transpose()).rowwise() + params.var_b.transpose();
    const Eigen::ArrayXXd var =
        raw.array().unaryExpr([&](double r) { return softplus(r) + params.variance_floor; });

    const Eigen::ArrayXXd log_gate =
        (logits.colwise() - row_logsumexp(logits)).array();
    const Eigen::ArrayXXd resid = (-means).array().colwise() + y.array();
    const Eigen::ArrayXXd log_density =
        -(kHalfLog2Pi + 0.5 * var.log() + resid.square() / (2.0 * var));

    const Eigen::MatrixXd score = (log_gate + log_density).matrix();
    const Eigen::VectorXd score_lse = row_logsumexp(score);
    const Eigen::ArrayXXd posterior = (score.colwise() - score_lse).array().exp();

    if (loss_out) {
        *loss_out = (c * (-score_lse.array())).sum();
        if (!std::isfinite(*loss_out)) {
            std::ostringstream msg;
            msg << "non-finite loss in grad_mdn_nll (|hidden_w| = " << params.hidden_w.norm()
                << ", |var_w| = " << params.var_w.norm() << ")";
            throw std::runtime_error(msg.str());
        }
    }

    const Eigen::ArrayXXd gate = log_gate.exp();
    const Eigen::MatrixXd d_logits = ((gate - posterior).colwise() * c).matrix();
    const Eigen::MatrixXd d_means = ((-posterior * resid / var).colwise() * c).matrix();
    const Eigen::ArrayXXd d_var =
        (posterior * (0.5 / var - resid.square() / (2.0 * var.square()))).colwise() * c;
    const Eigen::MatrixXd d_raw =
        (d_var * raw.array().unaryExpr([](double r) { return sigmoid(r); })).matrix();

    MdnGrads g;
    g.variance_floor = params.variance_floor;
    g.gate_w = d_logits.transpose() * hidden;
    g.gate_b = d_logits.colwise().sum().transpose();
    g.mean_w = d_means.transpose() * hidden;
    g.mean_b = d_means.colwise().sum().transpose();
    g.var_w = d_raw.transpose() * hidden;
    g.var_b = d_raw.colwise().sum().transpose();

    Eigen::MatrixXd d_hidden =
        d_logits * params.gate_w + d_means * params.mean_w + d_raw * params.var_w;
    if (masks) d_hidden = (d_hidden.array() * masks->keep.array() / masks->keep_prob).matrix();
    const Eigen::MatrixXd d_pre =
        (d_hidden.array() * (pre.array() > 0.0).cast<double>()).matrix();
    g.hidden_w = d_pre.transpose() * X;
    g.hidden_b = d_pre.colwise().sum().transpose();
    return g;
}

DeModel fit_de(const Dataset& data, const TrainConfig& config) {
    validate(config);
    validate(data);

    MixtureModel scratch;
    scratch.dropout_rate = config.dropout_rate;
    scratch.weights = Eigen::VectorXd::Constant(
        config.n_components, 1.0 / static_cast<double>(config.n_components));
    scratch.members.reserve(static_cast<std::size_t>(config.n_components));
    for (Eigen::Index k = 0; k < config.n_components; ++k)
        scratch.members.push_back(init_mlp(data.dim(), config.hidden_units, config.init,
                                           split_seed(config.seed, "init",
                                                      static_cast<std::uint64_t>(k)),
                                           config.variance_floor));

    TrainConfig flat = config;
    flat.epochs = config.epochs * config.em_rounds;
    flat.em_rounds = 1;
    const Responsibilities resp =
        Responsibilities::uniform(data.size(), config.n_components);
    m_step_members(scratch, data, resp, flat, 0);

    DeModel model;
    model.members = std::move(scratch.members);
    model.dropout_rate = config.dropout_rate;
    return model;
}

namespace {

// Shared mini-batch schedule for the single-network baselines.
template <typename GradFn>
void run_sgd(Eigen::Index n, Eigen::Index dim, const Dataset& data, const TrainConfig& config,
             int total_epochs, Rng& rng, Eigen::Index hidden_units, const char* label,
             const GradFn& step) {
    const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        try {
            std::shuffle(order.begin(), order.end(), rng);
            for (Eigen::Index start = 0; start < n; start += batch) {
                const Eigen::Index count = std::min(batch, n - start);
                Eigen::MatrixXd xb(count, dim);
                Eigen::VectorXd yb(count);
                for (Eigen::Index r = 0; r < count; ++r) {
                    const Eigen::Index row = order[static_cast<std::size_t>(start + r)];
                    xb.row(r) = data.features.row(row);
                    yb(r) = data.targets(row);
                }
                std::optional<BatchMasks> masks;
                if (config.dropout_rate > 0.0)
                    masks = sample_batch_masks(count, hidden_units, config.dropout_rate, rng);
                step(xb, yb, masks);
            }
        } catch (const std::runtime_error& err) {
            std::ostringstream msg;
            msg << label << " failed in epoch " << epoch << ": " << err.what();
            throw std::runtime_error(msg.str());
        }
    }
}

} // namespace

MdnModel fit_mdn(const Dataset& data, const TrainConfig& config) {
    validate(config);
    validate(data);

    MdnModel model;
    model.dropout_rate = config.dropout_rate;
    model.params = init_mdn(data.dim(), config.hidden_units, config.n_components, config.init,
                            split_seed(config.seed, "init", 0), config.variance_floor);

    AdamState state = AdamState::zeros(model.params.parameter_count());
    Rng rng(split_seed(config.seed, "mdn"));
    run_sgd(data.size(), data.dim(), data, config, config.epochs * config.em_rounds, rng,
            config.hidden_units, "mdn",
            [&](const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb,
                const std::optional<BatchMasks>& masks) {
                const Eigen::VectorXd wb = Eigen::VectorXd::Ones(xb.rows());
                double batch_loss = 0.0;
                const MdnGrads grads =
                    grad_mdn_nll(model.params, xb, yb, wb, masks, &batch_loss);
                Eigen::VectorXd theta = mdn_flatten(model.params);
                adam_step_flat(theta, mdn_flatten(grads), state, config.learning_rate);
                model.params = mdn_unflatten(theta, model.params);
            });
    return model;
}

McdModel fit_mcd(const Dataset& data, const TrainConfig& config,
                 const std::vector<double>& variance_grid, int mc_passes) {
    validate(config);
    validate(data);
    if (variance_grid.empty()) throw std::invalid_argument("variance grid is empty");
    for (double v : variance_grid)
        if (!(v > 0.0)) throw std::invalid_argument("variance grid entries must be > 0");
    if (mc_passes < 1) throw std::invalid_argument("mc_passes must be >= 1");
    if (data.size() < 2)
        throw std::invalid_argument("mc dropout needs at least 2 rows for a holdout");

    // Internal 90/10 holdout for the variance grid search.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng holdout_rng(split_seed(config.seed, "mcd-holdout"));
    std::shuffle(order.begin(), order.end(), holdout_rng);
    Eigen::Index train_n = static_cast<Eigen::Index>(
        std::floor(0.9 * static_cast<double>(data.size())));
    train_n = std::clamp<Eigen::Index>(train_n, 1, data.size() - 1);
    const std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + train_n);
    const std::vector<Eigen::Index> held_rows(order.begin() + train_n, order.end());
    const Dataset train = take_rows(data, train_rows);
    const Dataset held = take_rows(data, held_rows);

    McdModel model;
    model.dropout_rate = config.dropout_rate;
    model.mc_passes = mc_passes;
    model.seed = config.seed;
    model.net = init_mlp(data.dim(), config.hidden_units, config.init,
                         split_seed(config.seed, "init", 0), config.variance_floor);

    AdamState state = AdamState::zeros(model.net.parameter_count());
    Rng rng(split_seed(config.seed, "mcd"));
    run_sgd(train.size(), train.dim(), train, config, config.epochs * config.em_rounds, rng,
            config.hidden_units, "mcd",
            [&](const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb,
                const std::optional<BatchMasks>& masks) {
                const Eigen::VectorXd wb = Eigen::VectorXd::Ones(xb.rows());
                double batch_loss = 0.0;
                const MlpGrads grads =
                    grad_weighted_mse(model.net, xb, yb, wb, masks, &batch_loss);
                adam_step(model.net, grads, state, config.learning_rate);
            });

    Eigen::VectorXd held_means(held.size());
    for (Eigen::Index i = 0; i < held.size(); ++i)
        held_means(i) = mcd_predictive_mean(model, held.features.row(i).transpose());

    double best_ll = -std::numeric_limits<double>::infinity();
    double best_var = variance_grid.front();
    for (double v : variance_grid) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < held.size(); ++i)
            ll -= gaussian_nll(held.targets(i), held_means(i), v);
        if (ll > best_ll) {
            best_ll = ll;
            best_var = v;
        }
    }
    model.hom_variance = best_var;
    return model;
}

double mcd_predictive_mean(const McdModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (model.dropout_rate == 0.0) return forward(model.net, x).mean;
    // One fixed set of masks per model, so repeated queries are consistent.
    Rng rng(split_seed(model.seed, "mcd-predict"));
    std::bernoulli_distribution keep(1.0 - model.dropout_rate);
    double total = 0.0;
    for (int t = 0; t < model.mc_passes; ++t) {
        DropoutMask mask;
        mask.keep_prob = 1.0 - model.dropout_rate;
        mask.keep.resize(model.net.hidden_units());
        for (Eigen::Index h = 0; h < model.net.hidden_units(); ++h)
            mask.keep(h) = keep(rng) ? 1.0 : 0.0;
        total += forward(model.net, x, mask).mean;
    }
    return total / static_cast<double>(model.mc_passes);
}

MixturePrediction predict_baseline(const DeModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
    return predict_components(model.as_mixture(), x);
}

MixturePrediction predict_baseline(const MdnModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
    const MdnPrediction p = mdn_forward(model.params, x);
    MixturePrediction out;
    out.weights = p.gate;
    out.means = p.means;
    out.variances = p.variances;
    return out;
}

MixturePrediction predict_baseline(const McdModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
    validate(model);
    MixturePrediction out;
    out.weights = Eigen::VectorXd::Ones(1);
    out.means = Eigen::VectorXd::Constant(1, mcd_predictive_mean(model, x));
    out.variances = Eigen::VectorXd::Constant(1, model.hom_variance);
    return out;
}

PredictiveSamples sample_predictive(const MdnModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Index n_draws, double drop_prob, std::uint64_t seed) {
    if (n_draws < 1) throw std::invalid_argument("sample_predictive needs n_draws >= 1");
    if (!(drop_prob >= 0.0 && drop_prob < 1.0))
        throw std::invalid_argument("drop probability must lie in [0, 1)");

    PredictiveSamples out;
    out.values.resize(n_draws);
    out.components.resize(static_cast<std::size_t>(n_draws));
    out.dropout_rate = drop_prob;
    out.seed = seed;

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution keep(1.0 - drop_prob);

    for (Eigen::Index i = 0; i < n_draws; ++i) {
        std::optional<DropoutMask> mask;
        if (drop_prob > 0.0) {
            DropoutMask m;
            m.keep_prob = 1.0 - drop_prob;
            m.keep.resize(model.params.hidden_units());
            for (Eigen::Index h = 0; h < model.params.hidden_units(); ++h)
                m.keep(h) = keep(rng) ? 1.0 : 0.0;
            mask = std::move(m);
        }
        const MdnPrediction p = mdn_forward(model.params, x, mask);
        const double u = unit(rng);
        Eigen::Index chosen = model.params.n_components() - 1;
        double cumulative = 0.0;
        for (Eigen::Index j = 0; j < model.params.n_components(); ++j) {
            cumulative += p.gate(j);
            if (u < cumulative) {
                chosen = j;
                break;
            }
        }
        out.values(i) = p.means(chosen) + std::sqrt(p.variances(chosen)) * gauss(rng);
        out.components[static_cast<std::size_t>(i)] = chosen;
    }
    return out;
}

PredictiveSamples sample_predictive(const McdModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Index n_draws, std::uint64_t seed) {
    if (n_draws < 1) throw std::invalid_argument("sample_predictive needs n_draws >= 1");
    validate(model);

    PredictiveSamples out;
    out.values.resize(n_draws);
    out.components.assign(static_cast<std::size_t>(n_draws), 0);
    out.dropout_rate = model.dropout_rate;
    out.seed = seed;

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution keep(1.0 - model.dropout_rate);
    const double noise = std::sqrt(model.hom_variance);

    for (Eigen::Index i = 0; i < n_draws; ++i) {
        std::optional<DropoutMask> mask;
        if (model.dropout_rate > 0.0) {
            DropoutMask m;
            m.keep_prob = 1.0 - model.dropout_rate;
            m.keep.resize(model.net.hidden_units());
            for (Eigen::Index h = 0; h < model.net.hidden_units(); ++h)
                m.keep(h) = keep(rng) ? 1.0 : 0.0;
            mask = std::move(m);
        }
        out.values(i) = forward(model.net, x, mask).mean + noise * gauss(rng);
    }
    return out;
}

} // namespace dgme
