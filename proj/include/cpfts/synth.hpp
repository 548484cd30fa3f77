#pragma once

#include <cstdint>
#include <vector>

#include "cpfts/fts.hpp"

namespace cpfts {

/// Low-rank curves with AR(1) scores and white measurement noise.
struct SynthSpec {
    int n = 100;            ///< years
    int ages = 101;         ///< grid points 0..ages-1
    int first_year = 1;
    int k_true = 2;
    std::vector<double> ar;         ///< per component, |ar| < 1; missing entries 0.5
    std::vector<double> innov_sd;   ///< per component, >= 0; missing entries 1/k
    double noise_sd = 0.1;
    std::uint64_t seed = 1;
};

void validate(const SynthSpec& spec);

/// Fixed smooth mean on the grid.
Eigen::VectorXd synth_mean(const AgeGrid& grid);

/// Sinusoids sin(k pi s), s the age rescaled to [0, 1], orthonormalised under
/// the trapezoid inner product. Rows are components.
Eigen::MatrixXd synth_components(const AgeGrid& grid, int k);

/// X_t = mu + sum_k beta_{t,k} phi_k + sigma z_t. Scores start from the
/// stationary distribution; the same seed reproduces the output bit for bit.
FunctionalSeries synth_generate(const SynthSpec& spec);

}  // namespace cpfts
