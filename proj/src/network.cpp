#include "dgme/network.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dgme {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727; // 0.5 * log(2*pi)

// zeros_fixed_bias keeps the hidden pre-activations positive so gradients can
// reach the first layer once the heads move off zero.
constexpr double kFixedHiddenBias = 0.1;

} // namespace

InitScheme init_scheme_from_string(const std::string& s) {
    if (s == "default_uniform") return InitScheme::default_uniform;
    if (s == "uniform_small") return InitScheme::uniform_small;
    if (s == "normal_tiny") return InitScheme::normal_tiny;
    if (s == "xavier_uniform") return InitScheme::xavier_uniform;
    if (s == "xavier_normal") return InitScheme::xavier_normal;
    if (s == "zeros_fixed_bias") return InitScheme::zeros_fixed_bias;
    throw std::invalid_argument("unknown init scheme '" + s + "'");
}

std::string to_string(InitScheme s) {
    switch (s) {
    case InitScheme::default_uniform: return "default_uniform";
    case InitScheme::uniform_small: return "uniform_small";
    case InitScheme::normal_tiny: return "normal_tiny";
    case InitScheme::xavier_uniform: return "xavier_uniform";
    case InitScheme::xavier_normal: return "xavier_normal";
    case InitScheme::zeros_fixed_bias: return "zeros_fixed_bias";
    }
    return "?";
}

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double softplus_inverse(double y) {
    if (!(y > 0.0)) throw std::invalid_argument("softplus_inverse needs y > 0");
    // log(exp(y) - 1) = y + log(1 - exp(-y))
    return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::VectorXd flatten(const MlpParams& p) {
    Eigen::VectorXd theta(p.parameter_count());
    Eigen::Index at = 0;
    theta.segment(at, p.hidden_w.size()) =
        Eigen::Map<const Eigen::VectorXd>(p.hidden_w.data(), p.hidden_w.size());
    at += p.hidden_w.size();
    theta.segment(at, p.hidden_b.size()) = p.hidden_b;
    at += p.hidden_b.size();
    theta.segment(at, p.mean_w.size()) = p.mean_w;
    at += p.mean_w.size();
    theta(at++) = p.mean_b;
    theta.segment(at, p.var_w.size()) = p.var_w;
    at += p.var_w.size();
    theta(at++) = p.var_b;
    return theta;
}

MlpParams unflatten(const Eigen::VectorXd& theta, const MlpParams& like) {
    if (theta.size() != like.parameter_count())
        throw std::invalid_argument("unflatten: size mismatch");
    MlpParams p = like;
    Eigen::Index at = 0;
    p.hidden_w = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, like.hidden_w.rows(),
                                                   like.hidden_w.cols());
    at += p.hidden_w.size();
    p.hidden_b = theta.segment(at, like.hidden_b.size());
    at += p.hidden_b.size();
    p.mean_w = theta.segment(at, like.mean_w.size());
    at += p.mean_w.size();
    p.mean_b = theta(at++);
    p.var_w = theta.segment(at, like.var_w.size());
    at += p.var_w.size();
    p.var_b = theta(at++);
    return p;
}

MlpParams init_mlp(Eigen::Index input_dim, Eigen::Index hidden_units, InitScheme scheme,
                   std::uint64_t seed, double variance_floor) {
    if (input_dim < 1 || hidden_units < 1)
        throw std::invalid_argument("init_mlp: input_dim and hidden_units must be >= 1");
    if (!(variance_floor > 0.0))
        throw std::invalid_argument("init_mlp: variance_floor must be > 0");

    MlpParams p;
    p.hidden_w.resize(hidden_units, input_dim);
    p.hidden_b.resize(hidden_units);
    p.mean_w.resize(hidden_units);
    p.var_w.resize(hidden_units);
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
    auto fill_scalar = [&rng](double& s, auto make_dist) { s = make_dist(rng); };

    const double fan_in1 = static_cast<double>(input_dim);
    const double fan_in2 = static_cast<double>(hidden_units);

    switch (scheme) {
    case InitScheme::default_uniform: {
        const double b1 = 1.0 / std::sqrt(fan_in1);
        const double b2 = 1.0 / std::sqrt(fan_in2);
        fill_uniform(p.hidden_w, b1);
        fill_uniform(p.hidden_b, b1);
        fill_uniform(p.mean_w, b2);
        fill_scalar(p.mean_b, [b2](Rng& r) {
            return std::uniform_real_distribution<double>(-b2, b2)(r);
        });
        fill_uniform(p.var_w, b2);
        fill_scalar(p.var_b, [b2](Rng& r) {
            return std::uniform_real_distribution<double>(-b2, b2)(r);
        });
        break;
    }
    case InitScheme::uniform_small: {
        const double b = 0.01;
        fill_uniform(p.hidden_w, b);
        fill_uniform(p.hidden_b, b);
        fill_uniform(p.mean_w, b);
        fill_scalar(p.mean_b,
                    [b](Rng& r) { return std::uniform_real_distribution<double>(-b, b)(r); });
        fill_uniform(p.var_w, b);
        fill_scalar(p.var_b,
                    [b](Rng& r) { return std::uniform_real_distribution<double>(-b, b)(r); });
        break;
    }
    case InitScheme::normal_tiny: {
        const double sd = 1e-6;
        fill_normal(p.hidden_w, sd);
        fill_normal(p.hidden_b, sd);
        fill_normal(p.mean_w, sd);
        fill_scalar(p.mean_b,
                    [sd](Rng& r) { return std::normal_distribution<double>(0.0, sd)(r); });
        fill_normal(p.var_w, sd);
        fill_scalar(p.var_b,
                    [sd](Rng& r) { return std::normal_distribution<double>(0.0, sd)(r); });
        break;
    }
    case InitScheme::xavier_uniform: {
        const double b1 = std::sqrt(6.0 / (fan_in1 + fan_in2));
        const double b2 = std::sqrt(6.0 / (fan_in2 + 1.0));
        fill_uniform(p.hidden_w, b1);
        p.hidden_b.setZero();
        fill_uniform(p.mean_w, b2);
        p.mean_b = 0.0;
        fill_uniform(p.var_w, b2);
        p.var_b = 0.0;
        break;
    }
    case InitScheme::xavier_normal: {
        const double s1 = std::sqrt(2.0 / (fan_in1 + fan_in2));
        const double s2 = std::sqrt(2.0 / (fan_in2 + 1.0));
        fill_normal(p.hidden_w, s1);
        p.hidden_b.setZero();
        fill_normal(p.mean_w, s2);
        p.mean_b = 0.0;
        fill_normal(p.var_w, s2);
        p.var_b = 0.0;
        break;
    }
    case InitScheme::zeros_fixed_bias: {
        p.hidden_w.setZero();
        p.hidden_b.setConstant(kFixedHiddenBias);
        p.mean_w.setZero();
        p.mean_b = 0.0;
        p.var_w.setZero();
        p.var_b = kUnitVarianceBias;
        break;
    }
    }
    return p;
}

DropoutMask sample_dropout_mask(Eigen::Index hidden_units, double drop_prob,
                                std::uint64_t seed) {
    if (!(drop_prob >= 0.0 && drop_prob < 1.0))
        throw std::invalid_argument("drop probability must lie in [0, 1)");
    DropoutMask mask;
    mask.keep_prob = 1.0 - drop_prob;
    mask.keep.resize(hidden_units);
    Rng rng(seed);
    std::bernoulli_distribution keep(mask.keep_prob);
    for (Eigen::Index i = 0; i < hidden_units; ++i) mask.keep(i) = keep(rng) ? 1.0 : 0.0;
    return mask;
}

BatchMasks sample_batch_masks(Eigen::Index n, Eigen::Index hidden_units, double drop_prob,
                              Rng& rng) {
    if (!(drop_prob >= 0.0 && drop_prob < 1.0))
        throw std::invalid_argument("drop probability must lie in [0, 1)");
    BatchMasks masks;
    masks.keep_prob = 1.0 - drop_prob;
    masks.keep.resize(n, hidden_units);
    std::bernoulli_distribution keep(masks.keep_prob);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < hidden_units; ++j)
            masks.keep(i, j) = keep(rng) ? 1.0 : 0.0;
    return masks;
}

namespace {

[[noreturn]] void throw_numeric_fault(const MlpParams& params, const char* where) {
    std::ostringstream msg;
    msg << "non-finite network output in " << where
        << " (|hidden_w| = " << params.hidden_w.norm() << ", |mean_w| = " << params.mean_w.norm()
        << ", |var_w| = " << params.var_w.norm() << ", mean_b = " << params.mean_b
        << ", var_b = " << params.var_b << ")";
    throw std::runtime_error(msg.str());
}

} // namespace

Prediction forward(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const std::optional<DropoutMask>& mask) {
    if (x.size() != params.input_dim())
        throw std::invalid_argument("forward: input has wrong dimension");
    Eigen::VectorXd hidden = ((params.hidden_w * x + params.hidden_b).array().max(0.0)).matrix();
    if (mask) {
        if (mask->keep.size() != hidden.size())
            throw std::invalid_argument("forward: dropout mask has wrong size");
        hidden = (hidden.array() * mask->keep.array() / mask->keep_prob).matrix();
    }
    Prediction out;
    out.mean = params.mean_w.dot(hidden) + params.mean_b;
    out.variance = softplus(params.var_w.dot(hidden) + params.var_b) + params.variance_floor;
    if (!std::isfinite(out.mean) || !std::isfinite(out.variance))
        throw_numeric_fault(params, "forward");
    return out;
}

double gaussian_nll(double y, double mean, double variance) {
    const double r = y - mean;
    return kHalfLog2Pi + 0.5 * std::log(variance) + r * r / (2.0 * variance);
}

double member_nll(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    const Prediction p = forward(params, x);
    return gaussian_nll(y, p.mean, p.variance);
}

namespace {

struct ForwardPass {
    Eigen::MatrixXd pre;    // n x h, pre-activations
    Eigen::MatrixXd hidden; // n x h, after ReLU and dropout rescale
    Eigen::VectorXd mean;   // n
    Eigen::VectorXd raw;    // n, raw variance head
    Eigen::VectorXd var;    // n
};

ForwardPass batch_forward(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                          const std::optional<BatchMasks>& masks) {
    ForwardPass f;
    f.pre = (X * params.hidden_w.transpose()).rowwise() + params.hidden_b.transpose();
    f.hidden = f.pre.array().max(0.0);
    if (masks) {
        if (masks->keep.rows() != X.rows() || masks->keep.cols() != params.hidden_units())
            throw std::invalid_argument("batch dropout masks have wrong shape");
        f.hidden = (f.hidden.array() * masks->keep.array() / masks->keep_prob).matrix();
    }
    f.mean = (f.hidden * params.mean_w).array() + params.mean_b;
    f.raw = (f.hidden * params.var_w).array() + params.var_b;
    f.var = f.raw.unaryExpr([&](double r) { return softplus(r) + params.variance_floor; });
    return f;
}

Eigen::VectorXd normalized_weights(const Eigen::Ref<const Eigen::VectorXd>& weights,
                                   Eigen::Index n) {
    if (weights.size() != n)
        throw std::invalid_argument("weight vector length does not match batch size");
    if ((weights.array() < 0.0).any())
        throw std::invalid_argument("weights must be nonnegative");
    const double total = weights.sum();
    if (!(total > 0.0)) throw std::invalid_argument("weight vector sums to zero");
    return weights / total;
}

MlpGrads backprop_common(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const ForwardPass& f, const Eigen::VectorXd& d_mean,
                         const Eigen::VectorXd& d_raw, const std::optional<BatchMasks>& masks) {
    MlpGrads g;
    g.variance_floor = params.variance_floor;
    g.mean_w = f.hidden.transpose() * d_mean;
    g.mean_b = d_mean.sum();
    g.var_w = f.hidden.transpose() * d_raw;
    g.var_b = d_raw.sum();

    Eigen::MatrixXd d_hidden =
        d_mean * params.mean_w.transpose() + d_raw * params.var_w.transpose();
    if (masks) d_hidden = (d_hidden.array() * masks->keep.array() / masks->keep_prob).matrix();
    const Eigen::MatrixXd d_pre =
        (d_hidden.array() * (f.pre.array() > 0.0).cast<double>()).matrix();

    g.hidden_w = d_pre.transpose() * X;
    g.hidden_b = d_pre.colwise().sum().transpose();
    return g;
}

} // namespace

MlpGrads grad_weighted_nll(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const std::optional<BatchMasks>& masks, double* loss_out) {
    if (X.rows() != y.size()) throw std::invalid_argument("batch features/targets mismatch");
    const Eigen::VectorXd c = normalized_weights(weights, X.rows());
    const ForwardPass f = batch_forward(params, X, masks);

    const Eigen::ArrayXd resid = y.array() - f.mean.array();
    if (loss_out) {
        const Eigen::ArrayXd nll = kHalfLog2Pi + 0.5 * f.var.array().log() +
                                   resid.square() / (2.0 * f.var.array());
        *loss_out = (c.array() * nll).sum();
        if (!std::isfinite(*loss_out)) throw_numeric_fault(params, "grad_weighted_nll");
    }

    // d objective / d mean and d objective / d raw-variance, per sample.
    const Eigen::VectorXd d_mean = (c.array() * (-resid) / f.var.array()).matrix();
    const Eigen::ArrayXd d_var =
        c.array() * (0.5 / f.var.array() - resid.square() / (2.0 * f.var.array().square()));
    const Eigen::VectorXd d_raw =
        (d_var * f.raw.array().unaryExpr([](double r) { return sigmoid(r); })).matrix();

    return backprop_common(params, X, f, d_mean, d_raw, masks);
}

MlpGrads grad_weighted_mse(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const std::optional<BatchMasks>& masks, double* loss_out) {
    if (X.rows() != y.size()) throw std::invalid_argument("batch features/targets mismatch");
    const Eigen::VectorXd c = normalized_weights(weights, X.rows());
    const ForwardPass f = batch_forward(params, X, masks);

    const Eigen::ArrayXd resid = y.array() - f.mean.array();
    if (loss_out) {
        *loss_out = (c.array() * 0.5 * resid.square()).sum();
        if (!std::isfinite(*loss_out)) throw_numeric_fault(params, "grad_weighted_mse");
    }

    const Eigen::VectorXd d_mean = (c.array() * (-resid)).matrix();
    const Eigen::VectorXd d_raw = Eigen::VectorXd::Zero(X.rows());
    return backprop_common(params, X, f, d_mean, d_raw, masks);
}

AdamState AdamState::zeros(Eigen::Index parameter_count) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(parameter_count);
    s.v = Eigen::VectorXd::Zero(parameter_count);
    return s;
}

void adam_step_flat(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state,
                    double learning_rate) {
    if (theta.size() != grad.size() || theta.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const Eigen::ArrayXd m_hat = state.m.array() / bc1;
    const Eigen::ArrayXd v_hat = state.v.array() / bc2;
    theta.array() -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double learning_rate) {
    Eigen::VectorXd theta = flatten(params);
    adam_step_flat(theta, flatten(grads), state, learning_rate);
    params = unflatten(theta, params);
}

} // namespace dgme
