#include <gtest/gtest.h>

#include <random>

#include "cpfts/error.hpp"
#include "cpfts/metrics.hpp"

using namespace cpfts;

namespace {

FunctionalSeries actual_series(const Eigen::MatrixXd& values, int first = 2000) {
    std::vector<int> years;
    for (Eigen::Index t = 0; t < values.rows(); ++t) years.push_back(first + static_cast<int>(t));
    return FunctionalSeries(AgeGrid::integers(0, static_cast<int>(values.cols()) - 1), years, values);
}

IntervalForecast interval(int origin, int h, Eigen::VectorXd lb, Eigen::VectorXd ub) {
    Eigen::VectorXd point = 0.5 * (lb + ub);
    return {origin, h, point, std::move(lb), std::move(ub)};
}

}  // namespace

TEST(IntervalScore, HandCases) {
    EXPECT_NEAR(interval_score(-1.0, 1.0, 0.0, 0.2), 2.0, 1e-12);
    EXPECT_NEAR(interval_score(0.0, 1.0, -0.25, 0.2), 3.5, 1e-12);
    EXPECT_NEAR(interval_score(0.0, 1.0, 1.5, 0.05), 21.0, 1e-12);
    EXPECT_THROW(interval_score(1.0, 0.0, 0.5, 0.2), InvalidInterval);
    EXPECT_THROW(interval_score(0.0, 1.0, 0.5, 0.0), InvalidInput);
}

TEST(IntervalScore, MeanOfHandCases) {
    const auto actual = actual_series((Eigen::MatrixXd(2, 3) << 0, 0, 0, 0.0, -0.25, 1.5).finished());
    IntervalForecastSet set;
    set.alpha = 0.2;
    set.add(interval(2000, 1, Eigen::Vector3d(-1, 0, 0), Eigen::Vector3d(1, 1, 1)));
    // alpha enters the mean score only through the penalty; use 0.2 for all three cells
    const double expected = (2.0 + 3.5 + (1.0 + 10.0 * 0.5)) / 3.0;
    EXPECT_NEAR(mean_interval_score_h(set, actual, 1, 0.2), expected, 1e-12);
}

TEST(IntervalScore, ProprietySmoke) {
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> z;
    const double q10 = -1.2815515655446004, q25 = -0.6744897501960817, q01 = -2.3263478740408408;
    double s_true = 0, s_narrow = 0, s_wide = 0;
    for (int i = 0; i < 10000; ++i) {
        const double y = z(rng);
        s_true += interval_score(q10, -q10, y, 0.2);
        s_narrow += interval_score(q25, -q25, y, 0.2);
        s_wide += interval_score(q01, -q01, y, 0.2);
    }
    EXPECT_LT(s_true, s_narrow);
    EXPECT_LT(s_true, s_wide);
}

TEST(IntervalScore, NarrowerWinsWithSameCoverage) {
    const auto actual = actual_series(Eigen::MatrixXd::Zero(2, 2));
    IntervalForecastSet narrow, wide;
    narrow.add(interval(2000, 1, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)));
    wide.add(interval(2000, 1, Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)));
    EXPECT_LT(mean_interval_score_h(narrow, actual, 1, 0.2), mean_interval_score_h(wide, actual, 1, 0.2));
    EXPECT_NEAR(mean_interval_score_h(wide, actual, 1, 0.2), 2.0 * mean_interval_score_h(narrow, actual, 1, 0.2),
                1e-12);
    EXPECT_NEAR(mean_interval_score_h(narrow, actual, 1, 0.2), 2.0, 1e-12);
}

TEST(Ecp, Examples) {
    const auto actual = actual_series((Eigen::MatrixXd(3, 2) << 0, 0, 0.5, 3.0, 0, 0).finished());
    IntervalForecastSet set;
    set.add(interval(2000, 1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)));  // one age outside
    EXPECT_DOUBLE_EQ(ecp_h(set, actual, 1), 0.5);
    set.add(interval(2001, 1, Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)));  // bounds inclusive
    EXPECT_DOUBLE_EQ(ecp_h(set, actual, 1), 0.75);
    EXPECT_DOUBLE_EQ(cpd_h(set, actual, 1, 0.2), 0.05);
    EXPECT_THROW(ecp_h(set, actual, 2), InsufficientData);
}

TEST(Cpd, Examples) {
    const auto actual = actual_series(Eigen::MatrixXd::Zero(2, 10));
    IntervalForecastSet all;
    all.add(interval(2000, 1, Eigen::VectorXd::Constant(10, -1), Eigen::VectorXd::Constant(10, 1)));
    EXPECT_DOUBLE_EQ(cpd_h(all, actual, 1, 0.2), 0.2);
    IntervalForecastSet nine;
    Eigen::VectorXd lb = Eigen::VectorXd::Constant(10, -1);
    lb[3] = 0.5;
    nine.add(interval(2000, 1, lb, Eigen::VectorXd::Constant(10, 1)));
    EXPECT_NEAR(cpd_h(nine, actual, 1, 0.05), 0.05, 1e-15);
    EXPECT_NEAR(cpd_h(nine, actual, 1, 0.1), 0.0, 1e-15);
}

TEST(Cpd, IdentityOnRandomInstances) {
    std::mt19937_64 rng(1000);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> a(0.01, 0.5);
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 2 + rep % 5, J = 2 + rep % 7;
        Eigen::MatrixXd v(n, J);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
        const auto actual = actual_series(v);
        IntervalForecastSet set;
        for (int o = 2000; o < 2000 + n - 1; ++o) {
            Eigen::VectorXd c(J), w(J);
            for (int j = 0; j < J; ++j) {
                c[j] = z(rng);
                w[j] = std::abs(z(rng));
            }
            set.add(interval(o, 1, c - w, c + w));
        }
        const double alpha = a(rng);
        EXPECT_EQ(cpd_h(set, actual, 1, alpha), std::abs((1.0 - ecp_h(set, actual, 1)) - alpha));
    }
}

TEST(IntervalSet, RejectsCrossedBounds) {
    IntervalForecastSet set;
    EXPECT_THROW(set.add(interval(2000, 1, Eigen::Vector2d(0, 2), Eigen::Vector2d(1, 1))), InvalidInterval);
}

TEST(Summary, SixNumbers) {
    const auto s = summarize_over_horizons(std::vector<double>{1, 2, 3, 4, 5});
    EXPECT_EQ(s.min, 1);
    EXPECT_EQ(s.median, 3);
    EXPECT_EQ(s.mean, 3);
    EXPECT_EQ(s.max, 5);
    const auto c = summarize_over_horizons(std::vector<double>{0.7, 0.7, 0.7});
    EXPECT_EQ(c.min, 0.7);
    EXPECT_EQ(c.q1, 0.7);
    EXPECT_EQ(c.q3, 0.7);
    const auto t = summarize_over_horizons(std::vector<double>{0, 1});
    EXPECT_DOUBLE_EQ(t.q1, 0.25);
    EXPECT_DOUBLE_EQ(t.q3, 0.75);
    EXPECT_THROW(summarize_over_horizons(std::vector<double>{}), InvalidInput);
}

TEST(QuantilesByAge, Averages) {
    const AgeGrid grid = AgeGrid::integers(0, 1);
    IntervalForecastSet set;
    set.add(interval(2000, 1, Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2)));
    set.add(interval(2001, 1, Eigen::Vector2d(-3, -2), Eigen::Vector2d(3, 2)));
    set.add(interval(2000, 2, Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5)));
    const auto q = averaged_predicted_quantiles(set, grid);
    ASSERT_EQ(q.size(), 4u);
    EXPECT_EQ(q[0].h, 1);
    EXPECT_DOUBLE_EQ(q[0].mean_qhat, 2.0);
    EXPECT_DOUBLE_EQ(q[1].mean_qhat, 2.0);
    EXPECT_EQ(q[2].h, 2);
    EXPECT_DOUBLE_EQ(q[3].mean_qhat, 5.0);
}
