#include "dgme/predictive.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dgme/rng.hpp"

namespace dgme {

namespace {

double logsumexp(const Eigen::ArrayXd& a) {
    const double m = a.maxCoeff();
    return m + std::log((a - m).exp().sum());
}

} // namespace

void validate(const MixturePrediction& prediction) {
    const Eigen::Index k = prediction.n_components();
    if (k < 1) throw std::invalid_argument("prediction needs at least one component");
    if (prediction.means.size() != k || prediction.variances.size() != k)
        throw std::invalid_argument("prediction component arrays disagree in length");
    if (std::abs(prediction.weights.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("prediction weights must sum to 1");
    if ((prediction.weights.array() < 0.0).any())
        throw std::invalid_argument("prediction weights must be nonnegative");
    if (!(prediction.variances.array() > 0.0).all())
        throw std::invalid_argument("prediction variances must be positive");
}

MixturePrediction predict_components(const MixtureModel& model,
                                     const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::Index k = model.n_components();
    MixturePrediction out;
    out.weights = model.weights;
    out.means.resize(k);
    out.variances.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const Prediction p = forward(model.members[static_cast<std::size_t>(j)], x);
        out.means(j) = p.mean;
        out.variances(j) = p.variance;
    }
    return out;
}

Moments predict_moments(const MixturePrediction& prediction) {
    Moments m;
    m.mean = prediction.weights.dot(prediction.means);
    const double within = prediction.weights.dot(prediction.variances);
    const double between =
        prediction.weights.dot(prediction.means.cwiseProduct(prediction.means)) -
        m.mean * m.mean;
    // between is nonnegative analytically; rounding can push it a hair under 0.
    m.variance = within + std::max(between, 0.0);
    return m;
}

Moments predict_moments(const MixtureModel& model,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
    return predict_moments(predict_components(model, x));
}

PredictiveSamples sample_predictive(const MixtureModel& model,
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
    const double keep_prob = 1.0 - drop_prob;
    std::bernoulli_distribution keep(keep_prob);

    for (Eigen::Index i = 0; i < n_draws; ++i) {
        const double u = unit(rng);
        Eigen::Index chosen = model.n_components() - 1;
        double cumulative = 0.0;
        for (Eigen::Index j = 0; j < model.n_components(); ++j) {
            cumulative += model.weights(j);
            if (u < cumulative) {
                chosen = j;
                break;
            }
        }
        const MlpParams& member = model.members[static_cast<std::size_t>(chosen)];

        std::optional<DropoutMask> mask;
        if (drop_prob > 0.0) {
            DropoutMask m;
            m.keep_prob = keep_prob;
            m.keep.resize(member.hidden_units());
            for (Eigen::Index h = 0; h < member.hidden_units(); ++h)
                m.keep(h) = keep(rng) ? 1.0 : 0.0;
            mask = std::move(m);
        }
        const Prediction p = forward(member, x, mask);
        out.values(i) = p.mean + std::sqrt(p.variance) * gauss(rng);
        out.components[static_cast<std::size_t>(i)] = chosen;
    }
    return out;
}

double nll_mixture(const PredictFn& predict, const Dataset& data, const Scaler& scaler) {
    validate(data);
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const MixturePrediction p = predict(data.features.row(i).transpose());
        Eigen::ArrayXd scored(p.n_components());
        for (Eigen::Index j = 0; j < p.n_components(); ++j)
            scored(j) = std::log(p.weights(j)) -
                        gaussian_nll(data.targets(i), p.means(j), p.variances(j));
        total -= logsumexp(scored);
    }
    return total / static_cast<double>(data.size()) + std::log(scaler.target_std);
}

double nll_gaussian_summary(const PredictFn& predict, const Dataset& data,
                            const Scaler& scaler) {
    validate(data);
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Moments m = predict_moments(predict(data.features.row(i).transpose()));
        total += gaussian_nll(data.targets(i), m.mean, m.variance);
    }
    return total / static_cast<double>(data.size()) + std::log(scaler.target_std);
}

double rmse(const PredictFn& predict, const Dataset& data, const Scaler& scaler) {
    validate(data);
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Moments m = predict_moments(predict(data.features.row(i).transpose()));
        const double r = data.targets(i) - m.mean;
        total += r * r;
    }
    return std::sqrt(total / static_cast<double>(data.size())) * scaler.target_std;
}

namespace {

PredictFn model_predictor(const MixtureModel& model) {
    return [&model](const Eigen::Ref<const Eigen::VectorXd>& x) {
        return predict_components(model, x);
    };
}

} // namespace

double nll_mixture(const MixtureModel& model, const Dataset& data, const Scaler& scaler) {
    return nll_mixture(model_predictor(model), data, scaler);
}

double nll_gaussian_summary(const MixtureModel& model, const Dataset& data,
                            const Scaler& scaler) {
    return nll_gaussian_summary(model_predictor(model), data, scaler);
}

double rmse(const MixtureModel& model, const Dataset& data, const Scaler& scaler) {
    return rmse(model_predictor(model), data, scaler);
}

double excess_kurtosis(const Eigen::Ref<const Eigen::VectorXd>& samples) {
    if (samples.size() < 4)
        throw std::invalid_argument("excess_kurtosis needs at least 4 samples");
    const double mean = samples.mean();
    const Eigen::ArrayXd centered = samples.array() - mean;
    const double m2 = centered.square().mean();
    if (!(m2 > 0.0)) throw std::invalid_argument("excess_kurtosis of a constant sample");
    const double m4 = centered.square().square().mean();
    return m4 / (m2 * m2) - 3.0;
}

} // namespace dgme
