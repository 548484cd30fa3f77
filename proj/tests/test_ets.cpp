#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpfts/error.hpp"
#include "cpfts/ets.hpp"
#include "oracles.hpp"

using namespace cpfts;

TEST(Ets, ForecastRecursions) {
    EtsFit ann;
    ann.kind = EtsKind::ANN;
    ann.level = 3.0;
    EXPECT_EQ(forecast_ets(ann, 3), (std::vector<double>{3, 3, 3}));

    EtsFit aan;
    aan.kind = EtsKind::AAN;
    aan.level = 10.0;
    aan.trend = 1.0;
    EXPECT_EQ(forecast_ets(aan, 3), (std::vector<double>{11, 12, 13}));

    EtsFit damped;
    damped.kind = EtsKind::AAdN;
    damped.level = 0.0;
    damped.trend = 1.0;
    damped.phi = 0.9;
    const auto f = forecast_ets(damped, 2);
    EXPECT_NEAR(f[0], 0.9, 1e-15);
    EXPECT_NEAR(f[1], 1.71, 1e-15);

    EXPECT_THROW(forecast_ets(ann, 0), InvalidInput);
}

TEST(Ets, EvaluateMatchesDirectRecursion) {
    const std::vector<double> y{1.0, 1.4, 0.9, 2.2, 2.5, 2.1, 3.3};
    const auto fit = evaluate_ets(y, EtsKind::AAdN, 0.4, 0.2, 0.9, 0.8, 0.3);
    const auto trace = oracle::ets_recursion(y, 0.4, 0.2, 0.9, 0.8, 0.3);
    EXPECT_NEAR(fit.level, trace.level, 1e-12);
    EXPECT_NEAR(fit.trend, trace.trend, 1e-12);
    double sse = 0.0;
    for (double e : trace.errors) sse += e * e;
    EXPECT_NEAR(fit.sigma2, sse / y.size(), 1e-12);
}

TEST(Ets, AiccHandComputation) {
    const std::vector<double> y{2.0, 2.5, 1.5, 3.0, 2.0, 2.8};
    const auto fit = evaluate_ets(y, EtsKind::ANN, 0.3, 0.0, 1.0, 2.0, 0.0);
    const auto trace = oracle::ets_recursion(y, 0.3, 0.0, 1.0, 2.0, 0.0);
    double sse = 0.0;
    for (double e : trace.errors) sse += e * e;
    const double n = 6.0, q = 3.0;
    const double loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * sse / n) + 1.0);
    EXPECT_NEAR(fit.loglik, loglik, 1e-12);
    EXPECT_NEAR(fit.aicc, -2.0 * loglik + 2.0 * q * n / (n - q - 1.0), 1e-12);
}

TEST(Ets, ConstantSeries) {
    const std::vector<double> y(12, 4.25);
    for (auto kinds : {std::vector<EtsKind>{EtsKind::ANN}, std::vector<EtsKind>{EtsKind::AAN},
                       std::vector<EtsKind>{EtsKind::AAdN}, std::vector<EtsKind>{kAllEtsKinds, kAllEtsKinds + 3}}) {
        const auto fit = fit_ets(y, kinds);
        for (double f : forecast_ets(fit, 5)) EXPECT_NEAR(f, 4.25, 1e-9);
    }
}

TEST(Ets, LinearSeriesUnderHolt) {
    std::vector<double> y;
    for (int t = 1; t <= 20; ++t) y.push_back(t);
    const EtsKind family[] = {EtsKind::AAN};
    const auto fit = fit_ets(y, family);
    const auto f = forecast_ets(fit, 5);
    for (int h = 1; h <= 5; ++h) EXPECT_NEAR(f[h - 1], 20.0 + h, 1e-4);
    // the reported final states reproduce the direct recursion
    const auto trace = oracle::ets_recursion(y, fit.alpha, fit.beta, 1.0, fit.level0, fit.trend0);
    EXPECT_NEAR(trace.level, fit.level, 1e-8);
    EXPECT_NEAR(trace.trend, fit.trend, 1e-8);
}

TEST(Ets, ParameterBounds) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> y{0.0};
        for (int t = 1; t < 25; ++t) y.push_back(y.back() + 0.2 + z(rng));
        for (EtsKind k : kAllEtsKinds) {
            const EtsKind fam[] = {k};
            const auto fit = fit_ets(y, fam);
            EXPECT_GE(fit.alpha, 1e-4);
            EXPECT_LE(fit.alpha, 0.9999);
            if (k != EtsKind::ANN) {
                EXPECT_GE(fit.beta, 1e-4 - 1e-15);
                EXPECT_LE(fit.beta, fit.alpha + 1e-15);
            }
            if (k == EtsKind::AAdN) {
                EXPECT_GE(fit.phi, 0.8);
                EXPECT_LE(fit.phi, 0.98);
            }
            EXPECT_TRUE(std::isfinite(fit.aicc));
        }
    }
}

TEST(Ets, NoiseSeriesPrefersSimpleSmoothing) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    int ok = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> y(30);
        for (auto& v : y) v = z(rng);
        const EtsKind ann[] = {EtsKind::ANN};
        const EtsKind aan[] = {EtsKind::AAN};
        ok += fit_ets(y, ann).aicc <= fit_ets(y, aan).aicc + 2.0 ? 1 : 0;
    }
    EXPECT_GE(ok, 0.9 * reps);
}

TEST(Ets, ShiftEquivariance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    std::vector<double> y{0.0};
    for (int t = 1; t < 20; ++t) y.push_back(0.7 * y.back() + z(rng));
    std::vector<double> shifted = y;
    for (auto& v : shifted) v += 12.5;
    for (EtsKind k : kAllEtsKinds) {
        const EtsKind fam[] = {k};
        const auto a = forecast_ets(fit_ets(y, fam), 6);
        const auto b = forecast_ets(fit_ets(shifted, fam), 6);
        for (int h = 0; h < 6; ++h) EXPECT_NEAR(b[h], a[h] + 12.5, 1e-8);
    }
}

TEST(Ets, ShortSeries) {
    EXPECT_THROW(fit_ets(std::vector<double>{1, 2, 3}), InsufficientData);
    // four points: only simple smoothing can be corrected; it falls back to AIC
    const auto fit = fit_ets(std::vector<double>{1, 2, 1.5, 2.5});
    EXPECT_EQ(fit.kind, EtsKind::ANN);
    EXPECT_TRUE(fit.small_sample);
    const auto five = fit_ets(std::vector<double>{1, 2, 1.5, 2.5, 2.0});
    EXPECT_EQ(five.kind, EtsKind::ANN);
    EXPECT_FALSE(five.small_sample);
}

TEST(Ets, RejectsNonFinite) {
    EXPECT_THROW(fit_ets(std::vector<double>{1, 2, NAN, 3, 4}), InvalidInput);
}

TEST(Ets, CurveForecastAssembly) {
    // K = 1 with a linear score series: the curve forecast is the hand assembly
    FpcaModel m{AgeGrid::integers(0, 2)};
    m.mean = Eigen::Vector3d(1.0, 2.0, 3.0);
    m.eigenfunctions = Eigen::RowVector3d(0.5, 1.0, -0.5);
    m.k = 1;
    m.scores.resize(10, 1);
    for (int t = 0; t < 10; ++t) m.scores(t, 0) = t - 4.5;
    m.quad_weights = m.grid.quadrature_weights();
    const auto cf = forecast_curves(m, 5, kAllEtsKinds, 2000);
    const std::vector<double> scores(m.scores.data(), m.scores.data() + 10);
    const auto beta = forecast_ets(fit_ets(scores), 5);
    for (int h = 1; h <= 5; ++h) {
        const Eigen::Vector3d expected = m.mean + beta[h - 1] * m.eigenfunctions.row(0).transpose();
        EXPECT_LE((cf.curves.row(h - 1).transpose() - expected).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_EQ(cf.target_year(h), 2000 + h);
    }
    const auto one = forecast_curves(m, 1, kAllEtsKinds, 2000);
    EXPECT_EQ(one.curves.row(0), cf.curves.row(0));
}

TEST(Ets, CurveForecastConstantScores) {
    FpcaModel m{AgeGrid::integers(0, 3)};
    m.mean = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
    m.eigenfunctions = Eigen::MatrixXd::Identity(2, 4);
    m.k = 2;
    m.scores = Eigen::MatrixXd::Constant(8, 2, 0.0);
    m.scores.col(0).setConstant(1.5);
    m.scores.col(1).setConstant(-0.5);
    m.quad_weights = m.grid.quadrature_weights();
    const auto cf = forecast_curves(m, 3);
    const Eigen::Vector4d expected(1.6, -0.3, 0.3, 0.4);
    for (int h = 0; h < 3; ++h) EXPECT_LE((cf.curves.row(h).transpose() - expected).cwiseAbs().maxCoeff(), 1e-9);
}
