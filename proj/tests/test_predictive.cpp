#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dgme/data.hpp"
#include "dgme/mixture.hpp"
#include "dgme/predictive.hpp"
#include "dgme/rng.hpp"

using namespace dgme;

namespace {

MlpParams constant_member(double mean, double variance) {
    MlpParams p = init_mlp(1, 4, InitScheme::zeros_fixed_bias, 0);
    p.mean_b = mean;
    p.var_b = softplus_inverse(variance - p.variance_floor);
    return p;
}

MixtureModel constant_mixture(const Eigen::VectorXd& weights,
                              const std::vector<std::pair<double, double>>& mv) {
    MixtureModel model;
    model.weights = weights;
    for (const auto& [m, v] : mv) model.members.push_back(constant_member(m, v));
    return model;
}

Scaler identity_scaler() {
    Scaler s;
    s.feature_means = Eigen::VectorXd::Zero(1);
    s.feature_stds = Eigen::VectorXd::Ones(1);
    s.target_mean = 0.0;
    s.target_std = 1.0;
    return s;
}

// Central moments of a Gaussian mixture, for the sampling checks.
struct MixMoments {
    double mean, var, m4;
};

MixMoments analytic_moments(const Eigen::VectorXd& pi,
                            const std::vector<std::pair<double, double>>& mv) {
    MixMoments out{0.0, 0.0, 0.0};
    for (Eigen::Index k = 0; k < pi.size(); ++k) out.mean += pi(k) * mv[k].first;
    for (Eigen::Index k = 0; k < pi.size(); ++k) {
        const double d = mv[k].first - out.mean, v = mv[k].second;
        out.var += pi(k) * (v + d * d);
        out.m4 += pi(k) * (3.0 * v * v + 6.0 * v * d * d + d * d * d * d);
    }
    return out;
}

} // namespace

TEST_CASE("moment matching on a symmetric two-component mixture") {
    MixturePrediction pred;
    pred.weights = Eigen::VectorXd::Constant(2, 0.5);
    pred.means = (Eigen::VectorXd(2) << -1.0, 1.0).finished();
    pred.variances = Eigen::VectorXd::Ones(2);
    const Moments m = predict_moments(pred);
    CHECK(m.mean == 0.0);
    CHECK(m.variance == 2.0);
}

TEST_CASE("moment matching matches the direct formula on random mixtures") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index k = 2 + t % 4;
        MixturePrediction pred;
        pred.weights.resize(k);
        pred.means.resize(k);
        pred.variances.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            pred.weights(j) = u(rng);
            pred.means(j) = g(rng);
            pred.variances(j) = u(rng);
        }
        pred.weights /= pred.weights.sum();
        const Moments m = predict_moments(pred);
        const double mean = pred.weights.dot(pred.means);
        const double var =
            pred.weights.dot((pred.variances.array() + pred.means.array().square()).matrix()) -
            mean * mean;
        CHECK(m.mean == doctest::Approx(mean).epsilon(1e-13));
        CHECK(m.variance == doctest::Approx(var).epsilon(1e-12));
        // The summary can never be tighter than the average component spread.
        CHECK(m.variance >= pred.weights.dot(pred.variances) - 1e-12);
    }
}

TEST_CASE("single-component moments are the component itself") {
    const MixtureModel model = constant_mixture(Eigen::VectorXd::Ones(1), {{0.7, 1.9}});
    Eigen::VectorXd x(1);
    x << 0.0;
    const MixturePrediction pred = predict_components(model, x);
    CHECK(pred.weights(0) == 1.0);
    CHECK(pred.means(0) == 0.7);
    const Moments m = predict_moments(pred);
    CHECK(m.mean == pred.means(0));
    CHECK(m.variance == pred.variances(0));
}

TEST_CASE("predict_components equals the maskless member forward") {
    MixtureModel model;
    model.weights = Eigen::VectorXd::Constant(2, 0.5);
    model.members = {init_mlp(1, 6, InitScheme::default_uniform, 4),
                     init_mlp(1, 6, InitScheme::default_uniform, 5)};
    Eigen::VectorXd x(1);
    x << 1.3;
    const MixturePrediction pred = predict_components(model, x);
    for (int k = 0; k < 2; ++k) {
        const Prediction f = forward(model.members[k], x);
        CHECK(pred.means(k) == f.mean);
        CHECK(pred.variances(k) == f.variance);
    }
}

TEST_CASE("mixture prediction validation") {
    MixturePrediction p;
    p.weights = (Eigen::VectorXd(2) << 0.5, 0.5).finished();
    p.means = Eigen::VectorXd::Zero(2);
    p.variances = Eigen::VectorXd::Ones(2);
    CHECK_NOTHROW(validate(p));
    p.variances(1) = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p.variances(1) = 1.0;
    p.weights(0) = 0.7;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p.weights = (Eigen::VectorXd(2) << 1.2, -0.2).finished();
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p.weights = (Eigen::VectorXd(3) << 0.3, 0.3, 0.4).finished();
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("sampling without dropout reproduces closed-form moments at M=1e5") {
    const Eigen::VectorXd pi = (Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished();
    const std::vector<std::pair<double, double>> mv = {{-2.0, 1.0}, {1.0, 0.5}, {4.0, 2.0}};
    const MixtureModel model = constant_mixture(pi, mv);
    const MixMoments truth = analytic_moments(pi, mv);

    Eigen::VectorXd x(1);
    x << 0.0;
    const Eigen::Index big_m = 100000;
    const PredictiveSamples s = sample_predictive(model, x, big_m, 0.0, 77);
    REQUIRE(s.values.size() == big_m);

    const double mean = s.values.mean();
    const double var =
        (s.values.array() - mean).square().sum() / double(big_m - 1);

    const double se_mean = std::sqrt(truth.var / double(big_m));
    const double se_var = std::sqrt((truth.m4 - truth.var * truth.var) / double(big_m));
    CHECK(std::abs(mean - truth.mean) < 3.0 * se_mean);
    CHECK(std::abs(var - truth.var) < 3.0 * se_var);

    // Component pick frequencies stay within binomial error of the weights.
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
    for (Eigen::Index idx : s.components) counts(idx) += 1.0;
    for (Eigen::Index k = 0; k < 3; ++k) {
        const double se = std::sqrt(pi(k) * (1 - pi(k)) / double(big_m));
        CHECK(std::abs(counts(k) / double(big_m) - pi(k)) < 3.0 * se);
    }
}

TEST_CASE("sampling is deterministic in the seed") {
    const MixtureModel model = constant_mixture(
        (Eigen::VectorXd(2) << 0.6, 0.4).finished(), {{0.0, 1.0}, {3.0, 0.5}});
    Eigen::VectorXd x(1);
    x << 0.2;
    const PredictiveSamples a = sample_predictive(model, x, 200, 0.1, 9);
    const PredictiveSamples b = sample_predictive(model, x, 200, 0.1, 9);
    CHECK(a.values == b.values);
    CHECK(a.components == b.components);
    const PredictiveSamples c = sample_predictive(model, x, 200, 0.1, 10);
    CHECK(a.values != c.values);
    CHECK(a.dropout_rate == 0.1);

    CHECK_THROWS_AS(sample_predictive(model, x, 0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_predictive(model, x, 10, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dropout jitters the sampled member predictions") {
    MixtureModel model;
    model.weights = Eigen::VectorXd::Ones(1);
    model.members = {init_mlp(1, 20, InitScheme::default_uniform, 3)};
    Eigen::VectorXd x(1);
    x << 1.0;
    const PredictiveSamples off = sample_predictive(model, x, 400, 0.0, 5);
    const PredictiveSamples on = sample_predictive(model, x, 400, 0.3, 5);
    // Identical component Gaussians without dropout, varying ones with it:
    // dropout strictly inflates the spread of the draws.
    const auto spread = [](const Eigen::VectorXd& v) {
        const double m = v.mean();
        return (v.array() - m).square().sum() / double(v.size() - 1);
    };
    CHECK(spread(on.values) > spread(off.values));
}

TEST_CASE("two-point samples have excess kurtosis -2") {
    Eigen::VectorXd v(8);
    v << 1, -1, 1, -1, 1, -1, 1, -1;
    CHECK(excess_kurtosis(v) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("gaussian samples have near-zero excess kurtosis") {
    Rng rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(100000);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    CHECK(std::abs(excess_kurtosis(v)) < 0.1);
}

TEST_CASE("excess kurtosis input validation") {
    Eigen::VectorXd tiny(3);
    tiny << 1, 2, 3;
    CHECK_THROWS_AS(excess_kurtosis(tiny), std::invalid_argument);
    CHECK_THROWS_AS(excess_kurtosis(Eigen::VectorXd::Constant(10, 4.2)),
                    std::invalid_argument);
}

TEST_CASE("metrics agree between the model overloads and a predictor function") {
    ToySpec spec = ToySpec::defaults(ToyCase::gaussian);
    spec.n = 60;
    spec.seed = 21;
    const auto [data, scaler] = standardize(generate_toy(spec));
    const MixtureModel model = constant_mixture(
        (Eigen::VectorXd(2) << 0.5, 0.5).finished(), {{-0.5, 1.0}, {0.5, 1.5}});

    const PredictFn fn = [&](const Eigen::Ref<const Eigen::VectorXd>& x) {
        return predict_components(model, x);
    };
    CHECK(nll_mixture(model, data, scaler) ==
          doctest::Approx(nll_mixture(fn, data, scaler)).epsilon(1e-15));
    CHECK(nll_gaussian_summary(model, data, scaler) ==
          doctest::Approx(nll_gaussian_summary(fn, data, scaler)).epsilon(1e-15));
    CHECK(rmse(model, data, scaler) ==
          doctest::Approx(rmse(fn, data, scaler)).epsilon(1e-15));
}

TEST_CASE("single-component mixture and summary NLL coincide") {
    ToySpec spec = ToySpec::defaults(ToyCase::gaussian);
    spec.n = 50;
    spec.seed = 23;
    const auto [data, scaler] = standardize(generate_toy(spec));
    const MixtureModel model = constant_mixture(Eigen::VectorXd::Ones(1), {{0.1, 1.2}});
    CHECK(nll_mixture(model, data, scaler) ==
          doctest::Approx(nll_gaussian_summary(model, data, scaler)).epsilon(1e-12));
}

TEST_CASE("well-separated components: the summary pays, the mixture does not") {
    const MixtureModel model = constant_mixture(
        (Eigen::VectorXd(2) << 0.5, 0.5).finished(), {{-50.0, 1.0}, {50.0, 1.0}});
    Dataset data;
    data.features = Eigen::MatrixXd::Zero(2, 1);
    data.targets = (Eigen::VectorXd(2) << -50.0, 50.0).finished();
    const Scaler s = identity_scaler();
    CHECK(nll_gaussian_summary(model, data, s) > nll_mixture(model, data, s) + 1.0);
}

TEST_CASE("metric unit corrections follow the target scale") {
    ToySpec spec = ToySpec::defaults(ToyCase::gaussian);
    spec.n = 40;
    spec.seed = 25;
    const Dataset raw = generate_toy(spec);
    const auto [data, scaler] = standardize(raw);
    const MixtureModel model = constant_mixture(Eigen::VectorXd::Ones(1), {{0.0, 1.0}});

    Scaler unit = scaler;
    unit.target_std = 1.0;
    CHECK(nll_mixture(model, data, scaler) ==
          doctest::Approx(nll_mixture(model, data, unit) + std::log(scaler.target_std))
              .epsilon(1e-13));
    CHECK(rmse(model, data, scaler) ==
          doctest::Approx(rmse(model, data, unit) * scaler.target_std).epsilon(1e-13));
}

TEST_CASE("rmse against a hand-computed oracle") {
    Dataset data;
    data.features = Eigen::MatrixXd::Zero(4, 1);
    data.targets = (Eigen::VectorXd(4) << 1.0, -1.0, 2.0, 0.0).finished();
    const MixtureModel zero = constant_mixture(Eigen::VectorXd::Ones(1), {{0.0, 1.0}});
    Scaler s = identity_scaler();
    s.target_std = 3.0;
    // predictive mean is identically 0, so rmse = 3 * sqrt(mean target^2)
    CHECK(rmse(zero, data, s) ==
          doctest::Approx(3.0 * std::sqrt(6.0 / 4.0)).epsilon(1e-13));
}

TEST_CASE("mixture NLL against a naive-density oracle") {
    const Eigen::VectorXd pi = (Eigen::VectorXd(2) << 0.3, 0.7).finished();
    const std::vector<std::pair<double, double>> mv = {{-1.0, 0.5}, {2.0, 2.0}};
    const MixtureModel model = constant_mixture(pi, mv);
    Dataset data;
    data.features = Eigen::MatrixXd::Zero(5, 1);
    data.targets = Eigen::VectorXd::LinSpaced(5, -2.0, 3.0);

    double total = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        double density = 0.0;
        for (std::size_t k = 0; k < mv.size(); ++k)
            density += pi(static_cast<Eigen::Index>(k)) *
                       std::exp(-0.5 * std::pow(data.targets(i) - mv[k].first, 2) /
                                mv[k].second) /
                       std::sqrt(2.0 * M_PI * mv[k].second);
        total -= std::log(density);
    }
    CHECK(nll_mixture(model, data, identity_scaler()) ==
          doctest::Approx(total / 5.0).epsilon(1e-10));
}
