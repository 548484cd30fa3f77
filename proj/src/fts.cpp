#include "cpfts/fts.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpfts/error.hpp"

namespace cpfts {

AgeGrid::AgeGrid(std::vector<double> ages) : ages_(std::move(ages)) {
    if (ages_.size() < 2) {
        throw InvalidInput("age grid needs at least two ages");
    }
    for (std::size_t j = 0; j < ages_.size(); ++j) {
        if (!std::isfinite(ages_[j])) {
            throw InvalidInput("age grid contains a non-finite label");
        }
        if (j > 0 && !(ages_[j] > ages_[j - 1])) {
            throw InvalidInput("age grid must be strictly increasing");
        }
    }
}

AgeGrid AgeGrid::integers(int first, int last) {
    std::vector<double> ages;
    for (int a = first; a <= last; ++a) {
        ages.push_back(a);
    }
    return AgeGrid(std::move(ages));
}

Eigen::VectorXd AgeGrid::quadrature_weights() const {
    const auto J = ages_.size();
    Eigen::VectorXd w(J);
    w[0] = 0.5 * (ages_[1] - ages_[0]);
    w[J - 1] = 0.5 * (ages_[J - 1] - ages_[J - 2]);
    for (std::size_t j = 1; j + 1 < J; ++j) {
        w[j] = 0.5 * (ages_[j + 1] - ages_[j - 1]);
    }
    return w;
}

FunctionalSeries::FunctionalSeries(AgeGrid grid, std::vector<int> years, Eigen::MatrixXd values)
    : grid_(std::move(grid)), years_(std::move(years)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != years_.size()) {
        throw InvalidInput("row count differs from the number of years");
    }
    if (static_cast<std::size_t>(values_.cols()) != grid_.size()) {
        throw InvalidInput("column count differs from the number of ages");
    }
    for (std::size_t t = 1; t < years_.size(); ++t) {
        if (years_[t] != years_[t - 1] + 1) {
            throw InvalidInput("years must be consecutive; gap after " + std::to_string(years_[t - 1]));
        }
    }
    if (!values_.allFinite()) {
        throw InvalidInput("functional series contains non-finite values");
    }
}

std::optional<std::size_t> FunctionalSeries::index_of(int year) const {
    if (years_.empty() || year < years_.front() || year > years_.back()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(year - years_.front());
}

Eigen::VectorXd FunctionalSeries::curve(int year) const {
    const auto idx = index_of(year);
    if (!idx) {
        throw AlignmentError("no curve for year " + std::to_string(year));
    }
    return values_.row(static_cast<Eigen::Index>(*idx)).transpose();
}

FunctionalSeries FunctionalSeries::slice_years(int first, int last) const {
    const auto a = index_of(first);
    const auto b = index_of(last);
    if (!a || !b || *b < *a) {
        throw InvalidInput("year range " + std::to_string(first) + ":" + std::to_string(last) +
                           " is outside the series");
    }
    const auto rows = static_cast<Eigen::Index>(*b - *a + 1);
    std::vector<int> years(years_.begin() + static_cast<std::ptrdiff_t>(*a),
                           years_.begin() + static_cast<std::ptrdiff_t>(*b) + 1);
    return FunctionalSeries(grid_, std::move(years),
                            values_.middleRows(static_cast<Eigen::Index>(*a), rows));
}

Eigen::VectorXd mean_curve(const FunctionalSeries& series) {
    if (series.size() == 0) {
        throw InvalidInput("mean curve of an empty series");
    }
    return series.values().colwise().mean().transpose();
}

Eigen::MatrixXd covariance_matrix(const FunctionalSeries& series) {
    if (series.size() < 2) {
        throw InsufficientData("covariance needs at least two curves");
    }
    const Eigen::RowVectorXd mu = series.values().colwise().mean();
    const Eigen::MatrixXd centred = series.values().rowwise() - mu;
    Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(series.size() - 1);
    // symmetrise away rounding in the product
    return 0.5 * (cov + cov.transpose());
}

EvrSelection select_k_evr(std::span<const double> eigenvalues, double tau, int k_max) {
    const auto len = static_cast<int>(eigenvalues.size());
    if (len < 2) {
        throw InvalidInput("eigenvalue-ratio selection needs at least two eigenvalues");
    }
    if (!(tau > 0.0)) {
        throw InvalidInput("eigenvalue threshold tau must be positive");
    }
    if (k_max < 1 || k_max > len - 1) {
        throw InvalidInput("k_max must lie in [1, " + std::to_string(len - 1) + "]");
    }
    for (int i = 0; i < len; ++i) {
        if (!(eigenvalues[i] >= 0.0) || (i > 0 && eigenvalues[i] > eigenvalues[i - 1])) {
            throw InvalidInput("eigenvalues must be nonnegative and nonincreasing");
        }
    }
    if (eigenvalues[0] <= tau) {
        return {1, true};
    }
    int best_k = 1;
    double best = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        const double lam = eigenvalues[k - 1];
        const double value = lam > tau ? eigenvalues[k] / lam : 1.0;
        if (k == 1 || value < best) {
            best = value;
            best_k = k;
        }
    }
    return {best_k, false};
}

FpcaModel fpca(const FunctionalSeries& series, const KRule& rule) {
    const auto n = static_cast<int>(series.size());
    const auto J = static_cast<int>(series.ages());
    if (n < 3) {
        throw InsufficientData("fpca needs at least three curves");
    }
    const int k_cap = std::min(n - 1, J);
    if (rule.kind == KRule::Kind::fixed && (rule.k < 1 || rule.k > k_cap)) {
        throw InvalidK("K=" + std::to_string(rule.k) + " outside [1, " + std::to_string(k_cap) + "]");
    }

    FpcaModel model{series.grid(), mean_curve(series), {}, {}, {}, 0, series.grid().quadrature_weights(), false};
    const Eigen::MatrixXd cov = covariance_matrix(series);
    const Eigen::VectorXd sqrt_w = model.quad_weights.cwiseSqrt();
    const Eigen::MatrixXd op = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op);
    if (solver.info() != Eigen::Success) {
        throw InvalidInput("eigendecomposition of the covariance operator failed");
    }
    // Eigen sorts ascending; reverse to descending and clamp rounding negatives
    model.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd vecs = solver.eigenvectors().rowwise().reverse();

    if (rule.kind == KRule::Kind::fixed) {
        model.k = rule.k;
    } else {
        const int default_max = std::min(n - 1, J - 1);
        const int k_max = rule.k_max > 0 ? std::min(rule.k_max, default_max) : default_max;
        const std::vector<double> lam(model.eigenvalues.begin(), model.eigenvalues.end());
        const auto sel = select_k_evr(lam, rule.tau, k_max);
        model.k = sel.k;
        model.degenerate_spectrum = sel.degenerate;
    }

    const Eigen::VectorXd inv_sqrt_w = sqrt_w.cwiseInverse();
    model.eigenfunctions.resize(model.k, J);
    for (int k = 0; k < model.k; ++k) {
        Eigen::VectorXd phi = inv_sqrt_w.cwiseProduct(vecs.col(k));
        Eigen::Index arg = 0;
        phi.cwiseAbs().maxCoeff(&arg);
        if (phi[arg] < 0.0) {
            phi = -phi;
        }
        model.eigenfunctions.row(k) = phi.transpose();
    }

    const Eigen::MatrixXd centred = series.values().rowwise() - model.mean.transpose();
    model.scores = centred * model.quad_weights.asDiagonal() * model.eigenfunctions.transpose();
    return model;
}

Eigen::VectorXd reconstruct(const FpcaModel& model, const Eigen::VectorXd& scores) {
    if (scores.size() != model.k) {
        throw InvalidInput("expected " + std::to_string(model.k) + " scores, got " +
                           std::to_string(scores.size()));
    }
    return model.mean + model.eigenfunctions.transpose() * scores;
}

Eigen::VectorXd project(const FpcaModel& model, const Eigen::VectorXd& curve) {
    if (curve.size() != model.mean.size()) {
        throw InvalidInput("curve length differs from the model grid");
    }
    return model.eigenfunctions * model.quad_weights.cwiseProduct(curve - model.mean);
}

}  // namespace cpfts
