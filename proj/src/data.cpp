#include "dgme/data.hpp"

#include "dgme/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dgme {

void validate(const Dataset& data) {
    if (data.features.rows() < 1)
        throw std::invalid_argument("dataset '" + data.name + "' is empty");
    if (data.features.cols() < 1)
        throw std::invalid_argument("dataset '" + data.name + "' has no feature columns");
    if (data.targets.size() != data.features.rows())
        throw std::invalid_argument("dataset '" + data.name + "': feature rows (" +
                                    std::to_string(data.features.rows()) + ") != target rows (" +
                                    std::to_string(data.targets.size()) + ")");
    if (!data.features.allFinite() || !data.targets.allFinite())
        throw std::invalid_argument("dataset '" + data.name + "' contains non-finite entries");
}

ToyCase toy_case_from_string(const std::string& s) {
    if (s == "gaussian") return ToyCase::gaussian;
    if (s == "heavy_tailed") return ToyCase::heavy_tailed;
    if (s == "bimodal") return ToyCase::bimodal;
    throw std::invalid_argument("unknown toy case '" + s +
                                "' (expected gaussian, heavy_tailed or bimodal)");
}

std::string to_string(ToyCase c) {
    switch (c) {
    case ToyCase::gaussian: return "gaussian";
    case ToyCase::heavy_tailed: return "heavy_tailed";
    case ToyCase::bimodal: return "bimodal";
    }
    return "?";
}

ToySpec ToySpec::defaults(ToyCase c) {
    ToySpec spec;
    spec.noise_case = c;
    spec.flip_prob = (c == ToyCase::bimodal) ? 0.3 : 0.0;
    return spec;
}

void validate(const ToySpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("toy spec: n must be >= 1");
    if (!(spec.noise_variance > 0.0))
        throw std::invalid_argument("toy spec: noise_variance must be > 0");
    if (spec.flip_prob < 0.0 || spec.flip_prob > 1.0)
        throw std::invalid_argument("toy spec: flip_prob must lie in [0, 1]");
    if (spec.noise_case == ToyCase::heavy_tailed && !(spec.dof > 2.0))
        throw std::invalid_argument("toy spec: Student-t dof must be > 2 so the "
                                    "noise variance is finite");
    if (!(spec.x_lo < spec.x_hi))
        throw std::invalid_argument("toy spec: x range is empty");
    if (!std::isfinite(spec.x_lo) || !std::isfinite(spec.x_hi))
        throw std::invalid_argument("toy spec: x range must be finite");
}

Dataset generate_toy(const ToySpec& spec) {
    validate(spec);
    const auto n = static_cast<Eigen::Index>(spec.n);

    Rng rng(spec.seed);
    std::uniform_real_distribution<double> x_dist(spec.x_lo, spec.x_hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, std::sqrt(spec.noise_variance));
    std::student_t_distribution<double> student(spec.dof);
    // Standard t has variance dof/(dof-2); rescale so Var(eps) matches.
    const double t_scale =
        std::sqrt(spec.noise_variance * (spec.dof - 2.0) / spec.dof);

    Dataset data;
    data.name = "toy-" + to_string(spec.noise_case);
    data.features.resize(n, 1);
    data.targets.resize(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = x_dist(rng);
        const double u = (spec.flip_prob > 0.0 && unit(rng) < spec.flip_prob) ? -1.0 : 1.0;
        const double eps = (spec.noise_case == ToyCase::heavy_tailed)
                               ? t_scale * student(rng)
                               : gauss(rng);
        data.features(i, 0) = x;
        data.targets(i) = u * x * x * x + eps;
    }
    return data;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file '" + path + "'");

    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("CSV file '" + path + "' is empty (header required)");

    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = strip(h);
    if (header.size() < 2)
        throw std::invalid_argument("CSV file '" + path +
                                    "' needs at least one feature column and a target column");

    // Empty target name selects the last column.
    std::ptrdiff_t target_idx = -1;
    if (target_column.empty()) {
        target_idx = static_cast<std::ptrdiff_t>(header.size()) - 1;
    } else {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == target_column) target_idx = static_cast<std::ptrdiff_t>(j);
        if (target_idx < 0)
            throw std::invalid_argument("CSV file '" + path + "' has no column named '" +
                                        target_column + "'");
    }

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("CSV file '" + path + "' row " + std::to_string(line_no) +
                                        ": expected " + std::to_string(header.size()) +
                                        " cells, got " + std::to_string(cells.size()));
        std::vector<double> values(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const std::string cell = strip(cells[j]);
            std::size_t consumed = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &consumed);
            } catch (const std::exception&) {
                consumed = 0;
            }
            if (consumed != cell.size() || cell.empty() || !std::isfinite(v))
                throw std::invalid_argument("CSV file '" + path + "' row " +
                                            std::to_string(line_no) + ", column '" + header[j] +
                                            "': cell '" + cell + "' is not a finite real");
            values[j] = v;
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty())
        throw std::invalid_argument("CSV file '" + path + "' has a header but no data rows");

    Dataset data;
    data.name = path;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    data.features.resize(n, d);
    data.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (static_cast<std::ptrdiff_t>(j) == target_idx)
                data.targets(i) = rows[static_cast<std::size_t>(i)][j];
            else
                data.features(i, col++) = rows[static_cast<std::size_t>(i)][j];
        }
    }
    validate(data);
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    validate(data);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file '" + path + "'");
    out.precision(17);
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << "x" << (j + 1) << ",";
    out << "y\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) out << data.features(i, j) << ",";
        out << data.targets(i) << "\n";
    }
    if (!out) throw std::runtime_error("write failed for CSV file '" + path + "'");
}

namespace {

// Population std; constant columns map to std 1.
double column_std(const Eigen::VectorXd& col, double mean) {
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    return sd > 0.0 ? sd : 1.0;
}

} // namespace

std::pair<Dataset, Scaler> standardize(const Dataset& train) {
    validate(train);
    if (train.size() < 2)
        throw std::invalid_argument("standardize needs at least 2 rows");

    Scaler scaler;
    const Eigen::Index d = train.dim();
    scaler.feature_means.resize(d);
    scaler.feature_stds.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        scaler.feature_means(j) = train.features.col(j).mean();
        scaler.feature_stds(j) = column_std(train.features.col(j), scaler.feature_means(j));
    }
    scaler.target_mean = train.targets.mean();
    scaler.target_std = column_std(train.targets, scaler.target_mean);
    return {apply_scaler(train, scaler), scaler};
}

Dataset apply_scaler(const Dataset& data, const Scaler& scaler) {
    validate(data);
    if (scaler.feature_means.size() != data.dim())
        throw std::invalid_argument("scaler dimension mismatch");
    Dataset out = data;
    out.features = (data.features.rowwise() - scaler.feature_means.transpose()).array().rowwise() /
                   scaler.feature_stds.transpose().array();
    out.targets = (data.targets.array() - scaler.target_mean) / scaler.target_std;
    return out;
}

Dataset invert_scaler(const Dataset& data, const Scaler& scaler) {
    validate(data);
    if (scaler.feature_means.size() != data.dim())
        throw std::invalid_argument("scaler dimension mismatch");
    Dataset out = data;
    out.features = (data.features.array().rowwise() * scaler.feature_stds.transpose().array())
                       .rowwise() +
                   scaler.feature_means.transpose().array();
    out.targets = data.targets.array() * scaler.target_std + scaler.target_mean;
    return out;
}

std::vector<FoldIndices> split_folds(const Dataset& data, std::size_t n_folds,
                                     double train_fraction, std::uint64_t seed) {
    validate(data);
    if (n_folds < 1) throw std::invalid_argument("split_folds: n_folds must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_folds: train_fraction must lie in (0, 1)");

    const Eigen::Index n = data.size();
    const auto n_train =
        static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n)
        throw std::invalid_argument("split_folds: fraction " + std::to_string(train_fraction) +
                                    " leaves an empty train or test side for N = " +
                                    std::to_string(n));

    std::vector<FoldIndices> folds(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        Rng rng(split_seed(seed, "fold", f));
        std::shuffle(idx.begin(), idx.end(), rng);
        folds[f].train.assign(idx.begin(), idx.begin() + n_train);
        folds[f].test.assign(idx.begin() + n_train, idx.end());
    }
    return folds;
}

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.name = data.name;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
        out.targets(static_cast<Eigen::Index>(i)) = data.targets(rows[i]);
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("concat: dimension mismatch");
    Dataset out;
    out.name = a.name;
    out.features.resize(a.size() + b.size(), a.dim());
    out.features << a.features, b.features;
    out.targets.resize(a.size() + b.size());
    out.targets << a.targets, b.targets;
    return out;
}

} // namespace dgme
