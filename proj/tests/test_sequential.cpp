#include <gtest/gtest.h>

#include <random>

#include "cpfts/error.hpp"
#include "cpfts/sequential_conformal.hpp"

using namespace cpfts;

namespace {

std::vector<int> years_from(int first, int n) {
    std::vector<int> y;
    for (int t = 0; t < n; ++t) y.push_back(first + t);
    return y;
}

}  // namespace

TEST(Sequential, ConstantResidualWorld) {
    const int n = 6, J = 3;
    const Eigen::MatrixXd point = Eigen::MatrixXd::Constant(n, J, 1.0);
    Eigen::MatrixXd actual = point;
    for (int t = 0; t < n; ++t) actual.row(t).array() += (t % 2 ? 0.4 : -0.4);
    const Eigen::MatrixXd history = Eigen::MatrixXd::Constant(10, J, 0.4);
    const auto r = run_sequential(point, actual, years_from(2001, n), history, {0.2, -1});
    EXPECT_LE((r.qhat.array() - 0.4).abs().maxCoeff(), 1e-9);
    EXPECT_TRUE(((actual.array() >= r.lower.array() - 1e-9) && (actual.array() <= r.upper.array() + 1e-9)).all());
}

TEST(Sequential, ZeroErrorWorld) {
    const Eigen::MatrixXd point = Eigen::MatrixXd::Constant(4, 2, -3.0);
    const auto r = run_sequential(point, point, years_from(2001, 4), Eigen::MatrixXd::Zero(5, 2), {0.2, -1});
    EXPECT_TRUE(r.qhat.isZero());
    EXPECT_EQ(r.lower, point);
    EXPECT_EQ(r.upper, point);
}

TEST(Sequential, NoLookAhead) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    const int n = 8, J = 4;
    Eigen::MatrixXd point(n, J), actual(n, J), history(12, J);
    for (Eigen::Index i = 0; i < point.size(); ++i) point.data()[i] = z(rng);
    for (Eigen::Index i = 0; i < actual.size(); ++i) actual.data()[i] = point.data()[i] + z(rng);
    for (Eigen::Index i = 0; i < history.size(); ++i) history.data()[i] = z(rng);
    const auto base = run_sequential(point, actual, years_from(2001, n), history, {0.2, -1});
    for (int l = 0; l < n; ++l) {
        Eigen::MatrixXd perturbed = actual;
        perturbed.row(l).array() += 10.0;
        const auto other = run_sequential(point, perturbed, years_from(2001, n), history, {0.2, -1});
        EXPECT_EQ(other.lower.topRows(l + 1), base.lower.topRows(l + 1));
        EXPECT_EQ(other.upper.topRows(l + 1), base.upper.topRows(l + 1));
    }
    EXPECT_TRUE((base.qhat.array() >= 0.0).all());
}

TEST(Sequential, MissingActualMidStream) {
    Eigen::MatrixXd point = Eigen::MatrixXd::Zero(3, 2);
    Eigen::MatrixXd actual = point;
    actual(1, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        run_sequential(point, actual, years_from(2010, 3), Eigen::MatrixXd::Ones(4, 2), {0.2, -1});
        FAIL() << "expected a stream error";
    } catch (const StreamError& e) {
        EXPECT_NE(std::string(e.what()).find("2011"), std::string::npos);
    }
    // the last actual is never used
    actual(1, 0) = 0.0;
    actual(2, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_NO_THROW(run_sequential(point, actual, years_from(2010, 3), Eigen::MatrixXd::Ones(4, 2), {0.2, -1}));
}

TEST(Sequential, ShortHistoryRejected) {
    const Eigen::MatrixXd point = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(run_sequential(point, point, years_from(2000, 2), Eigen::MatrixXd::Ones(2, 2), {0.2, -1}),
                 InsufficientData);
}

TEST(Sequential, IidStreamCoverage) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    const int n = 40, J = 50;
    int covered = 0, cells = 0;
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::MatrixXd point = Eigen::MatrixXd::Zero(n, J), actual(n, J), history(30, J);
        for (Eigen::Index i = 0; i < actual.size(); ++i) actual.data()[i] = z(rng);
        for (Eigen::Index i = 0; i < history.size(); ++i) history.data()[i] = z(rng);
        const auto r = run_sequential(point, actual, years_from(1, n), history, {0.2, -1});
        covered += ((actual.array() >= r.lower.array()) && (actual.array() <= r.upper.array())).count();
        cells += static_cast<int>(actual.size());
    }
    EXPECT_NEAR(static_cast<double>(covered) / cells, 0.8, 0.05);
}
