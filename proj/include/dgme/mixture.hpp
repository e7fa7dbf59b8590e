#pragma once

// EM training for a mixture of dual-head networks. The E-step assigns
// responsibilities in log space, the M-step refits mixture weights
// analytically and each member by weighted gradient descent.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dgme/data.hpp"
#include "dgme/network.hpp"

namespace dgme {

struct MixtureModel {
    Eigen::VectorXd weights; // mixture weights, length K, sums to 1
    std::vector<MlpParams> members;
    double dropout_rate = 0.0;

    Eigen::Index n_components() const { return static_cast<Eigen::Index>(members.size()); }
};

void validate(const MixtureModel& model, double weight_floor);

// Per-row log responsibilities; each row normalizes to 1 in probability space.
struct Responsibilities {
    Eigen::MatrixXd log_resp; // N x K

    static Responsibilities uniform(Eigen::Index n, Eigen::Index k);
};

void validate(const Responsibilities& resp);

struct TrainConfig {
    Eigen::Index n_components = 5;
    int em_rounds = 1;
    int epochs = 40;
    double learning_rate = 1e-3;
    Eigen::Index batch_size = 32;
    Eigen::Index hidden_units = 50;
    std::uint64_t seed = 0;
    InitScheme init = InitScheme::default_uniform;
    double dropout_rate = 0.0;
    double weight_floor = 1e-6;
    double variance_floor = 1e-6;
};

void validate(const TrainConfig& config);

// Per-member Gaussian log density at every row: entry (n, k) is
// log N(y_n | mu_k(x_n), sigma2_k(x_n)), evaluated without dropout.
Eigen::MatrixXd member_log_density(const MixtureModel& model, const Dataset& data);

// E-step: log responsibilities from current weights and member densities.
Responsibilities e_step(const MixtureModel& model, const Dataset& data);

// Analytic weight update: mean responsibility per component, floored and
// renormalized so no component is starved entirely.
Eigen::VectorXd m_step_weights(const Responsibilities& resp, double weight_floor);

// Refit every member against its responsibility column for `epochs` passes of
// mini-batched Adam. Optimizer state is fresh per call; member parameters
// warm-start from their current values.
void m_step_members(MixtureModel& model, const Dataset& data, const Responsibilities& resp,
                    const TrainConfig& config, int round_index);

struct RoundDiagnostics {
    int round = 0;
    double q_value = 0.0;       // expected complete-data objective after the round
    double joint_log_lik = 0.0; // observed-data log likelihood after the round
    double mean_nll = 0.0;      // per-point mixture NLL on the training data
    Eigen::VectorXd weights;
};

struct FitResult {
    MixtureModel model;
    std::vector<RoundDiagnostics> diagnostics;
};

FitResult fit_em(const Dataset& data, const TrainConfig& config);

// Observed-data log likelihood under the mixture, summed over rows.
double joint_log_likelihood(const MixtureModel& model, const Dataset& data);

// Expected complete-data log likelihood plus responsibility entropy for the
// given responsibilities; equals the joint log likelihood when the
// responsibilities come from an exact E-step.
double expected_joint_ll(const MixtureModel& model, const Dataset& data,
                         const Responsibilities& resp);

} // namespace dgme
