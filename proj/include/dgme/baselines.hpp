#pragma once

// Reference competitors sharing the dual-head network kernel: a uniformly
// weighted deep ensemble, a mixture density network with input-dependent
// gates, and MC dropout with a post-hoc homoscedastic variance.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dgme/data.hpp"
#include "dgme/mixture.hpp"
#include "dgme/network.hpp"
#include "dgme/predictive.hpp"

namespace dgme {

struct DeModel {
    std::vector<MlpParams> members;
    double dropout_rate = 0.0;

    Eigen::Index n_components() const { return static_cast<Eigen::Index>(members.size()); }
    MixtureModel as_mixture() const;
};

// One shared hidden layer with per-component gate, mean, and raw-variance
// heads; gates are softmaxed per input.
struct MdnParams {
    Eigen::MatrixXd hidden_w; // h x d_x
    Eigen::VectorXd hidden_b; // h
    Eigen::MatrixXd gate_w;   // K x h
    Eigen::VectorXd gate_b;   // K
    Eigen::MatrixXd mean_w;   // K x h
    Eigen::VectorXd mean_b;   // K
    Eigen::MatrixXd var_w;    // K x h
    Eigen::VectorXd var_b;    // K
    double variance_floor = 1e-6;

    Eigen::Index hidden_units() const { return hidden_w.rows(); }
    Eigen::Index input_dim() const { return hidden_w.cols(); }
    Eigen::Index n_components() const { return gate_b.size(); }
    Eigen::Index parameter_count() const {
        return hidden_w.size() + hidden_b.size() +
               3 * (gate_w.size() + gate_b.size());
    }
};

using MdnGrads = MdnParams;

struct MdnModel {
    MdnParams params;
    double dropout_rate = 0.0;
};

struct McdModel {
    MlpParams net; // mean head trained, variance head left at init
    double dropout_rate = 0.0;
    double hom_variance = 1.0;
    int mc_passes = 50;
    std::uint64_t seed = 0;
};

void validate(const McdModel& model);

MdnParams init_mdn(Eigen::Index input_dim, Eigen::Index hidden_units, Eigen::Index n_components,
                   InitScheme scheme, std::uint64_t seed, double variance_floor = 1e-6);

Eigen::VectorXd mdn_flatten(const MdnParams& p);
MdnParams mdn_unflatten(const Eigen::VectorXd& theta, const MdnParams& like);

struct MdnPrediction {
    Eigen::VectorXd gate; // simplex over components
    Eigen::VectorXd means;
    Eigen::VectorXd variances;
};

MdnPrediction mdn_forward(const MdnParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                          const std::optional<DropoutMask>& mask = std::nullopt);

// Gradient of the weight-normalized per-sample mixture NLL; the load-bearing
// finite-difference target for this model.
MdnGrads grad_mdn_nll(const MdnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      const Eigen::Ref<const Eigen::VectorXd>& weights,
                      const std::optional<BatchMasks>& masks = std::nullopt,
                      double* loss_out = nullptr);

// Each baseline consumes the epoch budget epochs * em_rounds so comparisons
// against an EM run hold total gradient work fixed.
DeModel fit_de(const Dataset& data, const TrainConfig& config);
MdnModel fit_mdn(const Dataset& data, const TrainConfig& config);
McdModel fit_mcd(const Dataset& data, const TrainConfig& config,
                 const std::vector<double>& variance_grid, int mc_passes = 50);

// Stochastic-forward predictive mean. Mask sets are derived from the model
// seed alone, shared across query points, so this is a pure function.
double mcd_predictive_mean(const McdModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

MixturePrediction predict_baseline(const DeModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x);
MixturePrediction predict_baseline(const MdnModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x);
MixturePrediction predict_baseline(const McdModel& model,
                                   const Eigen::Ref<const Eigen::VectorXd>& x);

PredictiveSamples sample_predictive(const MdnModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Index n_draws, double drop_prob, std::uint64_t seed);
PredictiveSamples sample_predictive(const McdModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Index n_draws, std::uint64_t seed);

} // namespace dgme
