#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpfts/error.hpp"
#include "cpfts/io.hpp"
#include "cpfts/synth.hpp"

using namespace cpfts;
namespace fs = std::filesystem;

namespace {

std::string hmd_text(int first_year, int last_year, int max_age, double rate = 0.01) {
    std::ostringstream s;
    s << "Australia, Death rates (period 1x1)\n\n";
    s << "  Year          Age             Female            Male           Total\n";
    for (int y = first_year; y <= last_year; ++y) {
        for (int a = 0; a <= max_age; ++a) {
            s << "  " << y << "  " << a << (a == max_age ? "+" : "") << "  " << rate * (1 + a) << "  "
              << rate * (1.1 + a) << "  " << rate * (1.05 + a) << "\n";
        }
    }
    return s.str();
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cpfts_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST(Hmd, ParsesDocumentedRow) {
    std::istringstream in("Year Age Female Male Total\n1921  0  0.059987  0.071259  0.065823\n");
    const auto t = parse_hmd(in);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].year, 1921);
    EXPECT_EQ(t.rows[0].age, 0);
    EXPECT_DOUBLE_EQ(t.rows[0].female, 0.059987);
    EXPECT_DOUBLE_EQ(t.rows[0].male, 0.071259);
    EXPECT_DOUBLE_EQ(t.rows[0].total, 0.065823);
}

TEST(Hmd, CommaDelimitedAndMissing) {
    std::istringstream in("Year,Age,Female,Male,Total\n1921,0,.,0.5,0.4\n1921,1,0.1,0.2,0.3\n1921,2+,0.1,0.2,0.3\n");
    const auto t = parse_hmd(in);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_TRUE(std::isnan(t.rows[0].female));
    EXPECT_TRUE(t.rows[2].open_ended);
    EXPECT_EQ(t.rows[2].age, 2);
}

TEST(Hmd, Errors) {
    std::istringstream dup("Year Age Female Male Total\n1921 0 1 1 1\n1921 0 1 1 1\n");
    try {
        parse_hmd(dup);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("1921"), std::string::npos);
    }
    std::istringstream bad("Year Age Female Male Total\n1921 0 1 x 1\n");
    EXPECT_THROW(parse_hmd(bad), ParseError);
    std::istringstream short_row("Year Age Female Male Total\n1921 0 1 1\n");
    EXPECT_THROW(parse_hmd(short_row), ParseError);
    std::istringstream no_header("1921 0 1 1 1\n");
    EXPECT_THROW(parse_hmd(no_header), SchemaError);
    std::istringstream layout("Year Age Rate\n1921 0 1\n");
    EXPECT_THROW(parse_hmd(layout), SchemaError);
    std::istringstream gap("Year Age Female Male Total\n1921 0 1 1 1\n1921 2 1 1 1\n");
    EXPECT_THROW(parse_hmd(gap), SchemaError);
}

TEST(ToFunctionalSeries, LogAndTopGroup) {
    std::ostringstream s;
    s << "Year Age Female Male Total\n";
    for (int a = 0; a <= 110; ++a) {
        const double r = a >= 100 ? 0.4 : 0.05;
        s << "2000 " << a << (a == 110 ? "+" : "") << " " << r << " " << r << " " << r << "\n";
    }
    std::istringstream in(s.str());
    const auto series = to_functional_series(parse_hmd(in), Sex::female, 100);
    EXPECT_EQ(series.ages(), 101u);
    EXPECT_NEAR(series.values()(0, 0), std::log(0.05), 1e-15);
    EXPECT_NEAR(series.values()(0, 100), std::log(0.4), 1e-15);
}

TEST(ToFunctionalSeries, TopGroupIsMeanOfRates) {
    std::istringstream in("Year Age Female Male Total\n2000 0 0.1 0.1 0.1\n2000 1 0.2 0.2 0.2\n2000 2 0.4 0.4 0.4\n");
    const auto series = to_functional_series(parse_hmd(in), Sex::total, 1);
    EXPECT_NEAR(series.values()(0, 1), std::log(0.3), 1e-15);
}

TEST(ToFunctionalSeries, ImputesInLogScale) {
    // ln rates -4 at age 49 and -2 at age 51; age 50 missing
    std::ostringstream s;
    s << "Year Age Female Male Total\n";
    for (int a = 0; a <= 100; ++a) {
        double r = std::exp(a < 50 ? -4.0 : -2.0);
        std::string text = std::to_string(r);
        std::ostringstream v;
        v.precision(17);
        v << r;
        s << "2000 " << a << (a == 100 ? "+" : "") << " " << (a == 50 ? "." : v.str()) << " 0.1 0.1\n";
    }
    std::istringstream in(s.str());
    ImputationReport report;
    const auto series = to_functional_series(parse_hmd(in), Sex::female, 100, &report);
    EXPECT_NEAR(series.values()(0, 50), -3.0, 1e-12);
    EXPECT_NEAR(series.values()(0, 49), -4.0, 1e-12);
    ASSERT_EQ(report.cells.size(), 1u);
    EXPECT_EQ(report.cells[0], (std::pair<int, int>{2000, 50}));
}

TEST(ImputeCurve, EndpointsAndErrors) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd v(5);
    v << nan, 1.0, nan, 3.0, nan;
    impute_curve(v, 2000);
    EXPECT_DOUBLE_EQ(v[0], 1.0);
    EXPECT_DOUBLE_EQ(v[2], 2.0);
    EXPECT_DOUBLE_EQ(v[4], 3.0);
    Eigen::VectorXd one(3);
    one << nan, 1.0, nan;
    try {
        impute_curve(one, 1933);
        FAIL();
    } catch (const ImputationError& e) {
        EXPECT_NE(std::string(e.what()).find("1933"), std::string::npos);
    }
}

TEST(ToFunctionalSeries, ZeroRatesAreImputedValidCellsUntouched) {
    std::istringstream in(hmd_text(1990, 1992, 5));
    auto table = parse_hmd(in);
    const auto clean = to_functional_series(table, Sex::male, 5);
    table.rows[2].male = 0.0;  // 1990, age 2
    ImputationReport report;
    const auto imputed = to_functional_series(table, Sex::male, 5, &report);
    ASSERT_EQ(report.cells.size(), 1u);
    for (Eigen::Index t = 0; t < 3; ++t) {
        for (Eigen::Index j = 0; j < 6; ++j) {
            if (t == 0 && j == 2) continue;
            EXPECT_EQ(imputed.values()(t, j), clean.values()(t, j));
        }
    }
}

TEST(WideCsv, RoundTripThroughSynth) {
    SynthSpec spec;
    spec.n = 12;
    spec.ages = 7;
    spec.seed = 3;
    const auto series = synth_generate(spec);
    std::stringstream buf;
    write_wide_csv(buf, series);
    const auto back = parse_wide_csv(buf, true);
    EXPECT_EQ(back.values(), series.values());
    EXPECT_EQ(back.grid(), series.grid());
    EXPECT_EQ(back.first_year(), series.first_year());
}

TEST(WideCsv, RawRatesAreLogged) {
    std::istringstream in("year,0,1,2\n2000,0.1,0.2,0.4\n2001,0.1,,0.4\n");
    const auto s = parse_wide_csv(in, false);
    EXPECT_NEAR(s.values()(0, 1), std::log(0.2), 1e-15);
    EXPECT_NEAR(s.values()(1, 1), 0.5 * (std::log(0.1) + std::log(0.4)), 1e-15);
    std::istringstream bad("year,0,1\n2000,0.1\n");
    EXPECT_THROW(parse_wide_csv(bad, false), ParseError);
}

TEST(LoadSeries, DetectsLayout) {
    const auto dir = temp_dir("detect");
    {
        std::ofstream f(dir / "hmd.txt");
        f << hmd_text(1950, 1955, 4);
    }
    {
        std::ofstream f(dir / "wide.csv");
        f << "year,0,1\n1950,-2,-3\n1951,-2.5,-3.5\n";
    }
    const auto h = load_series(dir / "hmd.txt", {Sex::female, 4, false});
    EXPECT_EQ(h.size(), 6u);
    EXPECT_EQ(h.ages(), 5u);
    const auto w = load_series(dir / "wide.csv", {Sex::total, 100, true});
    EXPECT_EQ(w.values()(1, 1), -3.5);
    EXPECT_THROW(load_series(dir / "missing.txt", {}), IoError);
}

TEST(Report, WritesFilesWithExactHeaders) {
    SynthSpec spec;
    spec.n = 30;
    spec.ages = 8;
    spec.seed = 9;
    const auto data = synth_generate(spec);
    BacktestConfig c;
    c.max_horizon = 3;
    const auto result = run_backtest(data, c);
    const auto dir = temp_dir("report");
    write_report(result, dir);
    EXPECT_EQ(read_lines(dir / "metrics_by_horizon.csv")[0],
              "method,sex,alpha,stat,h,ecp,cpd,mean_width,mean_interval_score");
    EXPECT_EQ(read_lines(dir / "summary.csv")[0], "metric,alpha,stat,min,q1,median,mean,q3,max");
    EXPECT_EQ(read_lines(dir / "intervals.csv")[0], "origin,target,h,age,point,lb,ub");
    EXPECT_EQ(read_lines(dir / "quantiles_by_age.csv")[0], "age,h,mean_qhat");
    EXPECT_TRUE(fs::exists(dir / "config.json"));
    EXPECT_TRUE(fs::exists(dir / "calibration.csv"));

    // metrics round-trip to printed precision
    const auto lines = read_lines(dir / "metrics_by_horizon.csv");
    ASSERT_EQ(lines.size(), 4u);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f;
        std::stringstream ss(lines[i]);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        const auto& m = result.report.by_horizon[i - 1];
        EXPECT_EQ(f[0], "split");
        EXPECT_EQ(std::stoi(f[4]), m.h);
        EXPECT_EQ(f[5], format_number(m.ecp));
        EXPECT_NEAR(std::stod(f[7]), m.mean_width, 1e-5 * std::abs(m.mean_width));
    }
}

TEST(Report, EmptyAndSingleHorizon) {
    BacktestResult empty;
    empty.report.config.alphas = {0.2};
    const auto dir = temp_dir("empty");
    write_report(empty, dir);
    EXPECT_EQ(read_lines(dir / "summary.csv").size(), 1u);

    BacktestResult one;
    one.report.config.alphas = {0.2};
    one.report.summaries.push_back({"ecp", 0.2, summarize_over_horizons(std::vector<double>{0.8125})});
    const auto dir1 = temp_dir("single");
    write_report(one, dir1);
    const auto lines = read_lines(dir1 / "summary.csv");
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[1], "ecp,0.2,sd,0.8125,0.8125,0.8125,0.8125,0.8125,0.8125");
}

TEST(Report, SeveralLevelsGetSubdirectories) {
    SynthSpec spec;
    spec.n = 30;
    spec.ages = 6;
    const auto data = synth_generate(spec);
    BacktestConfig c;
    c.max_horizon = 2;
    c.alphas = {0.2, 0.05};
    const auto dir = temp_dir("levels");
    write_report(run_backtest(data, c), dir);
    EXPECT_TRUE(fs::exists(dir / "alpha_0.2" / "intervals.csv"));
    EXPECT_TRUE(fs::exists(dir / "alpha_0.05" / "quantiles_by_age.csv"));
}

TEST(Report, UnwritableDirectory) {
    const auto dir = temp_dir("blocked");
    { std::ofstream f(dir / "file"); }
    BacktestResult r;
    EXPECT_THROW(write_report(r, dir / "file" / "sub"), IoError);
}

TEST(Formatting, SixSignificantDigits) {
    EXPECT_EQ(format_number(0.123456789), "0.123457");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_EQ(format_number(1234567.0), "1.23457e+06");
}
