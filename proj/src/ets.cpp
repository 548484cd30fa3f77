#include "cpfts/ets.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "cpfts/error.hpp"
#include "nelder_mead.hpp"

namespace cpfts {

namespace {

constexpr double kAlphaLo = 1e-4;
constexpr double kAlphaHi = 0.9999;
constexpr double kBetaLo = 1e-4;
constexpr double kPhiLo = 0.8;
constexpr double kPhiHi = 0.98;
constexpr double kDampedStart = 0.9;
// floor on the normalised one-step variance so exact fits keep a finite likelihood
constexpr double kVarianceFloor = 1e-20;

struct StartPoint {
    double alpha;
    double beta;
};
constexpr StartPoint kStarts[] = {{0.1, 0.01}, {0.5, 0.1}, {0.9, 0.3}};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

bool has_trend(EtsKind kind) { return kind != EtsKind::ANN; }

struct Recursion {
    double sse = 0.0;
    double level = 0.0;
    double trend = 0.0;
};

Recursion run(std::span<const double> y, EtsKind kind, double alpha, double beta, double phi, double level,
              double trend) {
    Recursion out;
    const double damp = kind == EtsKind::AAdN ? phi : 1.0;
    for (double obs : y) {
        if (kind == EtsKind::ANN) {
            const double e = obs - level;
            level += alpha * e;
            out.sse += e * e;
        } else {
            const double damped = damp * trend;
            const double e = obs - (level + damped);
            level = level + damped + alpha * e;
            trend = damped + beta * e;
            out.sse += e * e;
        }
    }
    out.level = level;
    out.trend = kind == EtsKind::ANN ? 0.0 : trend;
    return out;
}

struct Decoded {
    double alpha;
    double beta;
    double phi;
    double level0;
    double trend0;
};

Decoded decode(EtsKind kind, const std::vector<double>& theta) {
    Decoded d{};
    d.alpha = kAlphaLo + (kAlphaHi - kAlphaLo) * logistic(theta[0]);
    if (kind == EtsKind::ANN) {
        d.beta = 0.0;
        d.phi = 1.0;
        d.level0 = theta[1];
        d.trend0 = 0.0;
        return d;
    }
    d.beta = kBetaLo + (d.alpha - kBetaLo) * logistic(theta[1]);
    std::size_t next = 2;
    d.phi = 1.0;
    if (kind == EtsKind::AAdN) {
        d.phi = kPhiLo + (kPhiHi - kPhiLo) * logistic(theta[next++]);
    }
    d.level0 = theta[next];
    d.trend0 = theta[next + 1];
    return d;
}

// Gradient of the SSE with respect to theta, by forward sensitivities of the
// state recursion chained through the parameter transforms.
Eigen::VectorXd sse_gradient(std::span<const double> y, EtsKind kind, const std::vector<double>& theta) {
    const Decoded d = decode(kind, theta);
    // natural parameters: alpha, beta, phi, level0, trend0
    std::array<double, 5> dl{0, 0, 0, 1, 0};
    std::array<double, 5> db{0, 0, 0, 0, 1};
    std::array<double, 5> g{};
    double level = d.level0;
    double trend = has_trend(kind) ? d.trend0 : 0.0;
    const double phi = kind == EtsKind::AAdN ? d.phi : 1.0;
    for (double obs : y) {
        if (kind == EtsKind::ANN) {
            const double e = obs - level;
            for (int p = 0; p < 5; ++p) {
                const double de = -dl[p];
                g[p] += 2.0 * e * de;
                dl[p] += d.alpha * de + (p == 0 ? e : 0.0);
            }
            level += d.alpha * e;
        } else {
            const double m = phi * trend;
            const double e = obs - level - m;
            for (int p = 0; p < 5; ++p) {
                const double dm = phi * db[p] + (p == 2 && kind == EtsKind::AAdN ? trend : 0.0);
                const double de = -dl[p] - dm;
                g[p] += 2.0 * e * de;
                dl[p] += dm + d.alpha * de + (p == 0 ? e : 0.0);
                db[p] = dm + d.beta * de + (p == 1 ? e : 0.0);
            }
            level = level + m + d.alpha * e;
            trend = m + d.beta * e;
        }
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(theta.size()));
    const double s0 = logistic(theta[0]);
    const double dalpha = (kAlphaHi - kAlphaLo) * s0 * (1.0 - s0);
    if (kind == EtsKind::ANN) {
        out << g[0] * dalpha, g[3];
        return out;
    }
    const double s1 = logistic(theta[1]);
    out[0] = g[0] * dalpha + g[1] * s1 * dalpha;
    out[1] = g[1] * (d.alpha - kBetaLo) * s1 * (1.0 - s1);
    Eigen::Index next = 2;
    if (kind == EtsKind::AAdN) {
        const double s2 = logistic(theta[2]);
        out[next++] = g[2] * (kPhiHi - kPhiLo) * s2 * (1.0 - s2);
    }
    out[next] = g[3];
    out[next + 1] = g[4];
    return out;
}

// Newton refinement of a Nelder-Mead minimum on the analytic gradient. Simplex
// searches stop near sqrt(machine epsilon) in the parameters; the gradient root
// is located far more precisely. Coordinates pinned at a bound stay fixed.
std::vector<double> newton_polish(std::span<const double> y, EtsKind kind, std::vector<double> theta) {
    const auto dim = static_cast<Eigen::Index>(theta.size());
    const int transformed = kind == EtsKind::ANN ? 1 : (kind == EtsKind::AAN ? 2 : 3);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (i >= transformed || std::abs(theta[static_cast<std::size_t>(i)]) < 12.0) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf == 0) return theta;

    auto reduced = [&](const std::vector<double>& t) {
        const Eigen::VectorXd full = sse_gradient(y, kind, t);
        Eigen::VectorXd r(nf);
        for (Eigen::Index i = 0; i < nf; ++i) r[i] = full[free[static_cast<std::size_t>(i)]];
        return r;
    };

    Eigen::VectorXd g = reduced(theta);
    for (int it = 0; it < 20 && g.norm() > 0.0; ++it) {
        Eigen::MatrixXd H(nf, nf);
        for (Eigen::Index i = 0; i < nf; ++i) {
            const auto k = static_cast<std::size_t>(free[static_cast<std::size_t>(i)]);
            const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
            std::vector<double> up = theta, down = theta;
            up[k] += h;
            down[k] -= h;
            H.col(i) = (reduced(up) - reduced(down)) / (2.0 * h);
        }
        H = 0.5 * (H + H.transpose()).eval();
        const Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() != Eigen::Success) break;
        const Eigen::VectorXd step = llt.solve(-g);
        if (!step.allFinite() || step.norm() > 1.0) break;
        std::vector<double> next = theta;
        for (Eigen::Index i = 0; i < nf; ++i) next[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])] += step[i];
        const Eigen::VectorXd g_next = reduced(next);
        if (!(g_next.norm() < g.norm())) break;
        theta = std::move(next);
        g = g_next;
    }
    return theta;
}

double aicc_from(double loglik, int q, int n, bool& small_sample) {
    const double aic = -2.0 * loglik + 2.0 * q;
    if (n - q - 1 <= 0) {
        small_sample = true;
        return aic;
    }
    small_sample = false;
    return -2.0 * loglik + 2.0 * q * static_cast<double>(n) / static_cast<double>(n - q - 1);
}

double gaussian_loglik(double sigma2, int n) {
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
}

struct MemberFit {
    Decoded params{};
    double objective = std::numeric_limits<double>::infinity();
};

// Fits one member on the normalised series z, returning parameters in z units.
MemberFit fit_member(std::span<const double> z, EtsKind kind) {
    const auto n = static_cast<double>(z.size());
    const double level_start = z[0];
    const double trend_start = (z[3] - z[0]) / 3.0;

    auto objective = [&](const std::vector<double>& theta) {
        const Decoded d = decode(kind, theta);
        const Recursion r = run(z, kind, d.alpha, d.beta, d.phi, d.level0, d.trend0);
        if (!std::isfinite(r.sse)) {
            return std::numeric_limits<double>::infinity();
        }
        return n * std::log(std::max(r.sse / n, kVarianceFloor));
    };

    MemberFit best;
    std::vector<double> best_theta;
    for (const auto& s : kStarts) {
        std::vector<double> theta;
        std::vector<double> steps;
        theta.push_back(logit((s.alpha - kAlphaLo) / (kAlphaHi - kAlphaLo)));
        steps.push_back(0.5);
        if (has_trend(kind)) {
            theta.push_back(logit((s.beta - kBetaLo) / (s.alpha - kBetaLo)));
            steps.push_back(0.5);
        }
        if (kind == EtsKind::AAdN) {
            theta.push_back(logit((kDampedStart - kPhiLo) / (kPhiHi - kPhiLo)));
            steps.push_back(0.5);
        }
        theta.push_back(level_start);
        steps.push_back(0.1);
        if (has_trend(kind)) {
            theta.push_back(trend_start);
            steps.push_back(0.05);
        }
        const auto res = detail::nelder_mead(objective, theta, steps);
        if (res.value < best.objective) {
            best.objective = res.value;
            best_theta = res.x;
        }
    }
    if (best_theta.empty()) {
        return best;
    }
    // restart from the best point with a small simplex and tight tolerances
    const std::vector<double> polish_steps(best_theta.size(), 0.01);
    const auto polished = detail::nelder_mead(objective, best_theta, polish_steps, {4000, 1e-15, 1e-11});
    if (polished.value <= best.objective) {
        best.objective = polished.value;
        best_theta = polished.x;
    }
    const std::vector<double> refined = newton_polish(z, kind, best_theta);
    const double refined_value = objective(refined);
    if (refined_value <= best.objective + 1e-12 * (1.0 + std::abs(best.objective))) {
        best.objective = std::min(best.objective, refined_value);
        best_theta = refined;
    }
    best.params = decode(kind, best_theta);
    return best;
}

}  // namespace

std::string to_string(EtsKind kind) {
    switch (kind) {
        case EtsKind::ANN: return "ANN";
        case EtsKind::AAN: return "AAN";
        case EtsKind::AAdN: return "AAdN";
    }
    return "?";
}

int ets_parameter_count(EtsKind kind) {
    switch (kind) {
        case EtsKind::ANN: return 3;
        case EtsKind::AAN: return 5;
        case EtsKind::AAdN: return 6;
    }
    return 0;
}

EtsFit evaluate_ets(std::span<const double> series, EtsKind kind, double alpha, double beta, double phi,
                    double level0, double trend0) {
    if (series.empty()) {
        throw InsufficientData("ets evaluation of an empty series");
    }
    EtsFit fit;
    fit.kind = kind;
    fit.alpha = alpha;
    fit.beta = kind == EtsKind::ANN ? 0.0 : beta;
    fit.phi = kind == EtsKind::AAdN ? phi : 1.0;
    fit.level0 = level0;
    fit.trend0 = kind == EtsKind::ANN ? 0.0 : trend0;
    fit.n = static_cast<int>(series.size());
    const Recursion r = run(series, kind, fit.alpha, fit.beta, fit.phi, fit.level0, fit.trend0);
    fit.level = r.level;
    fit.trend = r.trend;
    fit.sigma2 = r.sse / fit.n;
    fit.loglik = gaussian_loglik(fit.sigma2, fit.n);
    fit.aicc = aicc_from(fit.loglik, ets_parameter_count(kind), fit.n, fit.small_sample);
    return fit;
}

EtsFit fit_ets(std::span<const double> series, std::span<const EtsKind> family) {
    const auto n = static_cast<int>(series.size());
    if (n < 4) {
        throw InsufficientData("ets needs at least four observations, got " + std::to_string(n));
    }
    if (family.empty()) {
        throw InvalidInput("empty ets family");
    }
    for (double v : series) {
        if (!std::isfinite(v)) {
            throw InvalidInput("ets series contains non-finite values");
        }
    }

    // fit on a centred and scaled copy; selection is invariant to the affine map
    double centre = 0.0;
    for (double v : series) centre += v;
    centre /= n;
    double ss = 0.0;
    for (double v : series) ss += (v - centre) * (v - centre);
    double scale = std::sqrt(ss / (n - 1));
    if (!(scale > 1e-300)) {
        scale = 1.0;
    }
    std::vector<double> z(series.size());
    for (std::size_t t = 0; t < z.size(); ++t) {
        z[t] = (series[t] - centre) / scale;
    }

    EtsFit best;
    bool have_best = false;
    bool any_eligible = false;
    for (EtsKind kind : family) {
        if (n > ets_parameter_count(kind) + 1) {
            any_eligible = true;
        }
    }

    for (EtsKind kind : family) {
        const bool eligible = n > ets_parameter_count(kind) + 1;
        if (any_eligible ? !eligible : kind != EtsKind::ANN) {
            continue;
        }
        const MemberFit m = fit_member(z, kind);
        if (!std::isfinite(m.objective)) {
            continue;
        }
        const Recursion r = run(z, kind, m.params.alpha, m.params.beta, m.params.phi, m.params.level0,
                                m.params.trend0);
        EtsFit fit;
        fit.kind = kind;
        fit.alpha = m.params.alpha;
        fit.beta = m.params.beta;
        fit.phi = m.params.phi;
        fit.level0 = centre + scale * m.params.level0;
        fit.trend0 = scale * m.params.trend0;
        fit.level = centre + scale * r.level;
        fit.trend = scale * r.trend;
        fit.n = n;
        fit.sigma2 = scale * scale * std::max(r.sse / n, kVarianceFloor);
        fit.loglik = gaussian_loglik(fit.sigma2, n);
        fit.aicc = aicc_from(fit.loglik, ets_parameter_count(kind), n, fit.small_sample);
        if (!have_best || fit.aicc < best.aicc) {
            best = fit;
            have_best = true;
        }
    }

    if (!have_best) {
        best = evaluate_ets(series, EtsKind::ANN, 0.5, 0.0, 1.0, series[0], 0.0);
        best.fallback = true;
    }
    return best;
}

std::vector<double> forecast_ets(const EtsFit& fit, int h) {
    if (h < 1) {
        throw InvalidInput("forecast horizon must be at least 1");
    }
    std::vector<double> out(static_cast<std::size_t>(h));
    double damp_sum = 0.0;
    double damp_pow = 1.0;
    for (int i = 1; i <= h; ++i) {
        switch (fit.kind) {
            case EtsKind::ANN:
                out[i - 1] = fit.level;
                break;
            case EtsKind::AAN:
                out[i - 1] = fit.level + i * fit.trend;
                break;
            case EtsKind::AAdN:
                damp_pow *= fit.phi;
                damp_sum += damp_pow;
                out[i - 1] = fit.level + damp_sum * fit.trend;
                break;
        }
    }
    return out;
}

CurveForecast forecast_curves(const FpcaModel& model, int horizons, std::span<const EtsKind> family,
                              int origin_year) {
    if (horizons < 1) {
        throw InvalidInput("forecast horizon must be at least 1");
    }
    if (model.k < 1) {
        throw InvalidInput("model has no retained components");
    }
    CurveForecast out;
    out.origin_year = origin_year;
    out.score_forecasts.resize(model.k, horizons);
    out.fits.reserve(static_cast<std::size_t>(model.k));
    for (int k = 0; k < model.k; ++k) {
        const Eigen::VectorXd col = model.scores.col(k);
        const EtsFit fit = fit_ets(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), family);
        const auto path = forecast_ets(fit, horizons);
        for (int h = 0; h < horizons; ++h) {
            out.score_forecasts(k, h) = path[static_cast<std::size_t>(h)];
        }
        out.fits.push_back(fit);
    }
    out.curves.resize(horizons, model.mean.size());
    for (int h = 0; h < horizons; ++h) {
        out.curves.row(h) = reconstruct(model, out.score_forecasts.col(h)).transpose();
    }
    return out;
}

}  // namespace cpfts
