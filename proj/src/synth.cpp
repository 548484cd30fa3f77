#include "cpfts/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cpfts/error.hpp"

namespace cpfts {

namespace {

double component_ar(const SynthSpec& spec, int k) {
    return k < static_cast<int>(spec.ar.size()) ? spec.ar[static_cast<std::size_t>(k)] : 0.5;
}

double component_sd(const SynthSpec& spec, int k) {
    return k < static_cast<int>(spec.innov_sd.size()) ? spec.innov_sd[static_cast<std::size_t>(k)]
                                                      : 1.0 / (k + 1);
}

}  // namespace

void validate(const SynthSpec& spec) {
    if (spec.n < 1 || spec.ages < 2) {
        throw InvalidInput("synthetic data needs n >= 1 and at least two ages");
    }
    if (spec.k_true < 0 || spec.k_true >= spec.ages) {
        throw InvalidInput("number of components must lie in [0, ages)");
    }
    for (int k = 0; k < spec.k_true; ++k) {
        if (!(std::abs(component_ar(spec, k)) < 1.0)) {
            throw InvalidInput("autoregressive coefficients must satisfy |ar| < 1");
        }
        if (!(component_sd(spec, k) >= 0.0)) {
            throw InvalidInput("innovation sds must be nonnegative");
        }
    }
    if (!(spec.noise_sd >= 0.0)) {
        throw InvalidInput("noise sd must be nonnegative");
    }
}

Eigen::VectorXd synth_mean(const AgeGrid& grid) {
    const double lo = grid[0], hi = grid[grid.size() - 1];
    Eigen::VectorXd mu(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double s = (grid[j] - lo) / (hi - lo);
        // log-mortality-like: infant dip followed by a Gompertz rise
        mu[static_cast<Eigen::Index>(j)] = -8.0 + 7.5 * s + 3.5 * std::exp(-25.0 * s);
    }
    return mu;
}

Eigen::MatrixXd synth_components(const AgeGrid& grid, int k) {
    const auto J = static_cast<Eigen::Index>(grid.size());
    const Eigen::VectorXd w = grid.quadrature_weights();
    const double lo = grid[0], hi = grid[grid.size() - 1];
    Eigen::MatrixXd phi(k, J);
    for (int c = 0; c < k; ++c) {
        for (Eigen::Index j = 0; j < J; ++j) {
            const double s = (grid[static_cast<std::size_t>(j)] - lo) / (hi - lo);
            phi(c, j) = std::sin((c + 1) * std::numbers::pi * s) + (c == 0 ? 0.0 : 0.25 * std::cos(c * std::numbers::pi * s));
        }
        // modified Gram-Schmidt in the weighted inner product
        for (int p = 0; p < c; ++p) {
            const double proj = (phi.row(c).array() * w.transpose().array() * phi.row(p).array()).sum();
            phi.row(c) -= proj * phi.row(p);
        }
        const double norm = std::sqrt((phi.row(c).array().square() * w.transpose().array()).sum());
        phi.row(c) /= norm;
    }
    return phi;
}

FunctionalSeries synth_generate(const SynthSpec& spec) {
    validate(spec);
    const AgeGrid grid = AgeGrid::integers(0, spec.ages - 1);
    const Eigen::VectorXd mu = synth_mean(grid);
    const Eigen::MatrixXd phi = synth_components(grid, spec.k_true);
    const auto J = static_cast<Eigen::Index>(spec.ages);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::VectorXd beta(spec.k_true);
    for (int k = 0; k < spec.k_true; ++k) {
        const double a = component_ar(spec, k);
        beta[k] = component_sd(spec, k) / std::sqrt(1.0 - a * a) * normal(rng);
    }

    std::vector<int> years;
    Eigen::MatrixXd values(spec.n, J);
    for (int t = 0; t < spec.n; ++t) {
        if (t > 0) {
            for (int k = 0; k < spec.k_true; ++k) {
                beta[k] = component_ar(spec, k) * beta[k] + component_sd(spec, k) * normal(rng);
            }
        }
        Eigen::VectorXd x = mu;
        if (spec.k_true > 0) x += phi.transpose() * beta;
        for (Eigen::Index j = 0; j < J; ++j) {
            x[j] += spec.noise_sd * normal(rng);
        }
        values.row(t) = x.transpose();
        years.push_back(spec.first_year + t);
    }
    return FunctionalSeries(grid, std::move(years), std::move(values));
}

}  // namespace cpfts
