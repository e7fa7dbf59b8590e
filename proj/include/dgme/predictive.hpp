#pragma once

// Predictive-density evaluation: per-component predictions, moment matching,
// dropout-based sampling, and the scalar metrics reported by the harness.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dgme/data.hpp"
#include "dgme/mixture.hpp"

namespace dgme {

struct MixturePrediction {
    Eigen::VectorXd weights; // simplex over components
    Eigen::VectorXd means;
    Eigen::VectorXd variances;

    Eigen::Index n_components() const { return weights.size(); }
};

void validate(const MixturePrediction& prediction);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Deterministic maskless forward through every member.
MixturePrediction predict_components(const MixtureModel& model,
                                     const Eigen::Ref<const Eigen::VectorXd>& x);

// Moment-matched single Gaussian: mean = sum_k pi_k mu_k,
// variance = sum_k pi_k (sigma2_k + mu_k^2) - mean^2.
Moments predict_moments(const MixturePrediction& prediction);
Moments predict_moments(const MixtureModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct PredictiveSamples {
    Eigen::VectorXd values;
    std::vector<Eigen::Index> components; // component index chosen per draw
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;
};

// Per draw: component ~ Categorical(pi), fresh dropout mask on the chosen
// member's hidden layer, then y ~ N(mu, sigma2).
PredictiveSamples sample_predictive(const MixtureModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Index n_draws, double drop_prob, std::uint64_t seed);

// Metrics are generic over how a model maps x to a mixture prediction so the
// baselines reuse them unchanged. Data arrives standardized; the scaler
// converts reported values back to original target units.
using PredictFn = std::function<MixturePrediction(const Eigen::Ref<const Eigen::VectorXd>&)>;

double nll_mixture(const PredictFn& predict, const Dataset& data, const Scaler& scaler);
double nll_gaussian_summary(const PredictFn& predict, const Dataset& data, const Scaler& scaler);
double rmse(const PredictFn& predict, const Dataset& data, const Scaler& scaler);

double nll_mixture(const MixtureModel& model, const Dataset& data, const Scaler& scaler);
double nll_gaussian_summary(const MixtureModel& model, const Dataset& data, const Scaler& scaler);
double rmse(const MixtureModel& model, const Dataset& data, const Scaler& scaler);

// Biased central-moment estimator m4/m2^2 - 3.
double excess_kurtosis(const Eigen::Ref<const Eigen::VectorXd>& samples);

} // namespace dgme
