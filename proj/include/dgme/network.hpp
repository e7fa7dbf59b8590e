// Dual-headed MLP kernel: one ReLU hidden layer feeding a mean head and a
// softplus variance head, with hand-derived gradients, unit dropout and Adam.

#pragma once

#include "dgme/rng.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

namespace dgme {

enum class InitScheme {
    default_uniform, // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) on weights and biases
    uniform_small,   // U(-0.01, 0.01)
    normal_tiny,     // N(0, 1e-6 std)
    xavier_uniform,
    xavier_normal,
    zeros_fixed_bias // all weights 0, fixed biases; forward is constant in x
};

InitScheme init_scheme_from_string(const std::string& s);
std::string to_string(InitScheme s);

struct MlpParams {
    Eigen::MatrixXd hidden_w; // h x d_x
    Eigen::VectorXd hidden_b; // h
    Eigen::VectorXd mean_w;   // h
    double mean_b = 0.0;
    Eigen::VectorXd var_w;    // h
    double var_b = 0.0;
    double variance_floor = 1e-6; // added to softplus(raw variance)

    Eigen::Index hidden_units() const { return hidden_w.rows(); }
    Eigen::Index input_dim() const { return hidden_w.cols(); }
    Eigen::Index parameter_count() const {
        return hidden_w.size() + hidden_b.size() + mean_w.size() + var_w.size() + 2;
    }
};

// Gradients share the parameter layout.
using MlpGrads = MlpParams;

Eigen::VectorXd flatten(const MlpParams& p);
MlpParams unflatten(const Eigen::VectorXd& theta, const MlpParams& like);

// Raw-variance bias softplus^-1(1), so a zero-weight net predicts unit variance.
inline constexpr double kUnitVarianceBias = 0.5411;

MlpParams init_mlp(Eigen::Index input_dim, Eigen::Index hidden_units, InitScheme scheme,
                   std::uint64_t seed, double variance_floor = 1e-6);

struct DropoutMask {
    Eigen::VectorXd keep;    // entries in {0, 1}, one per hidden unit
    double keep_prob = 1.0;
};

// drop_prob is the probability a unit is dropped; keep_prob = 1 - drop_prob.
DropoutMask sample_dropout_mask(Eigen::Index hidden_units, double drop_prob,
                                std::uint64_t seed);

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

Prediction forward(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const std::optional<DropoutMask>& mask = std::nullopt);

// Negative Gaussian log-likelihood of y under the net's prediction at x:
// 0.5*log(2*pi) + 0.5*log(var) + (y - mean)^2 / (2*var).
double member_nll(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x, double y);

double gaussian_nll(double y, double mean, double variance);

// Per-sample dropout masks for a batch; entry (i, j) in {0, 1}.
struct BatchMasks {
    Eigen::MatrixXd keep; // n x h
    double keep_prob = 1.0;
};

BatchMasks sample_batch_masks(Eigen::Index n, Eigen::Index hidden_units, double drop_prob,
                              Rng& rng);

// Gradient of the weight-normalized objective
//   (1 / sum w) * sum_i w_i * nll(x_i, y_i)
// by reverse-mode accumulation through both heads and the shared hidden
// layer. Weights must be nonnegative with a positive sum. Returns the
// objective value through loss_out when given.
MlpGrads grad_weighted_nll(const MlpParams& params,
                           const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const std::optional<BatchMasks>& masks = std::nullopt,
                           double* loss_out = nullptr);

// Same machinery for a squared-error objective on the mean head only
// (variance-head gradients are zero); used by the MC-dropout baseline.
MlpGrads grad_weighted_mse(const MlpParams& params,
                           const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const std::optional<BatchMasks>& masks = std::nullopt,
                           double* loss_out = nullptr);

struct AdamState {
    Eigen::VectorXd m; // first-moment accumulator, flat parameter order
    Eigen::VectorXd v; // second-moment accumulator
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros(Eigen::Index parameter_count);
};

// Bias-corrected Adam update over flat parameter vectors.
void adam_step_flat(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state,
                    double learning_rate);

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double learning_rate);

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

} // namespace dgme
