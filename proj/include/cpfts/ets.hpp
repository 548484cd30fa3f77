#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "cpfts/fts.hpp"

namespace cpfts {

/// Additive-error, non-seasonal exponential smoothing members.
enum class EtsKind { ANN, AAN, AAdN };

std::string to_string(EtsKind kind);

inline constexpr EtsKind kAllEtsKinds[] = {EtsKind::ANN, EtsKind::AAN, EtsKind::AAdN};

/// Number of estimated quantities counted by AICc: smoothing parameters,
/// initial states and the innovation variance.
int ets_parameter_count(EtsKind kind);

struct EtsFit {
    EtsKind kind = EtsKind::ANN;
    double alpha = 0.5;
    double beta = 0.0;  ///< 0 for ANN
    double phi = 1.0;   ///< 1 unless damped
    double level0 = 0.0;
    double trend0 = 0.0;
    double level = 0.0;  ///< final state l_n
    double trend = 0.0;  ///< final state b_n
    double sigma2 = 0.0; ///< mean squared one-step error
    double loglik = 0.0;
    double aicc = 0.0;
    int n = 0;
    /// Every candidate optimisation diverged; alpha fixed at 0.5.
    bool fallback = false;
    /// No member had n > q + 1; aicc holds the uncorrected AIC.
    bool small_sample = false;
};

/// Runs the state recursion with the given parameters and initial states and
/// fills in the final states, variance, log-likelihood and AICc.
EtsFit evaluate_ets(std::span<const double> series, EtsKind kind, double alpha, double beta, double phi,
                    double level0, double trend0);

/// Fits every requested member by Nelder-Mead on the concentrated Gaussian
/// likelihood and returns the one with the smallest AICc (ties resolved in the
/// order ANN, AAN, AAdN). Requires at least four observations.
EtsFit fit_ets(std::span<const double> series, std::span<const EtsKind> family = kAllEtsKinds);

std::vector<double> forecast_ets(const EtsFit& fit, int h);

struct CurveForecast {
    int origin_year = 0;
    Eigen::MatrixXd curves;           ///< H x J, row h-1 is the h-step forecast
    Eigen::MatrixXd score_forecasts;  ///< K x H
    std::vector<EtsFit> fits;         ///< one per component

    int horizons() const { return static_cast<int>(curves.rows()); }
    int target_year(int h) const { return origin_year + h; }
};

/// h-step curve forecasts mean + sum_k beta_{h,k} phi_k with each score series
/// forecast by its own ETS model.
CurveForecast forecast_curves(const FpcaModel& model, int horizons, std::span<const EtsKind> family = kAllEtsKinds,
                              int origin_year = 0);

}  // namespace cpfts
