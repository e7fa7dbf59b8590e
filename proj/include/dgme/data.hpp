// Dataset handling: toy-data generation, CSV ingestion, standardization and
// train/test fold splitting.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dgme {

struct Dataset {
    Eigen::MatrixXd features; // N x d_x, one row per sample
    Eigen::VectorXd targets;  // N
    std::string name;

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

// Throws std::invalid_argument when invariants are violated (empty data,
// mismatched row counts, non-finite entries).
void validate(const Dataset& data);

// z-scoring statistics fitted on a training set. Population standard
// deviation; a constant column gets std 1 so the transform is well defined.
struct Scaler {
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_stds;
    double target_mean = 0.0;
    double target_std = 1.0;
};

enum class ToyCase { gaussian, heavy_tailed, bimodal };

ToyCase toy_case_from_string(const std::string& s);
std::string to_string(ToyCase c);

// Cubic toy model y = u * x^3 + eps with sign flips u = -1 at rate flip_prob
// and noise eps scaled to the requested variance (Student-t noise for the
// heavy-tailed case, Gaussian otherwise).
struct ToySpec {
    ToyCase noise_case = ToyCase::gaussian;
    std::size_t n = 800;
    double flip_prob = 0.0;      // P(u = -1); 0.3 for the bimodal case
    double noise_variance = 9.0;
    double dof = 3.0;            // Student-t degrees of freedom, > 2
    double x_lo = -4.0;
    double x_hi = 4.0;
    std::uint64_t seed = 0;

    static ToySpec defaults(ToyCase c);
};

void validate(const ToySpec& spec);

Dataset generate_toy(const ToySpec& spec);

// Comma-delimited, header mandatory, every cell a finite real. Features are
// all non-target columns in file order.
Dataset load_csv(const std::string& path, const std::string& target_column = "");

void save_csv(const Dataset& data, const std::string& path);

std::pair<Dataset, Scaler> standardize(const Dataset& train);
Dataset apply_scaler(const Dataset& data, const Scaler& scaler);
Dataset invert_scaler(const Dataset& data, const Scaler& scaler);

struct FoldIndices {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

// Each fold is an independent seeded shuffle split at
// floor(train_fraction * N). Deterministic given the seed.
std::vector<FoldIndices> split_folds(const Dataset& data, std::size_t n_folds,
                                     double train_fraction, std::uint64_t seed);

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows);

Dataset concat(const Dataset& a, const Dataset& b);

} // namespace dgme
