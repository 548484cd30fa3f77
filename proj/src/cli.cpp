#include "cpfts/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpfts/backtest.hpp"
#include "cpfts/error.hpp"
#include "cpfts/io.hpp"
#include "cpfts/synth.hpp"

namespace cpfts {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return kExitUsage;
        case ErrorCategory::data: return kExitData;
        case ErrorCategory::numeric: return kExitNumeric;
    }
    return kExitNumeric;
}

struct DataArgs {
    std::string input;
    std::string sex = "total";
    int top_age = 100;
    bool log_input = false;

    void add(CLI::App& app) {
        app.add_option("--input", input, "Rates file (1x1 period layout) or wide CSV")->required();
        app.add_option("--sex", sex, "female, male or total")->capture_default_str();
        app.add_option("--top-age", top_age, "Ages at or above collapse into this group")->capture_default_str();
        app.add_flag("--log-input", log_input, "Wide CSV values are already log rates");
    }

    LoadOptions options() const { return {parse_sex(sex), top_age, log_input}; }
};

struct RunArgs {
    DataArgs data;
    std::string method = "split";
    std::string stat = "sd";
    std::vector<double> alphas;
    std::string scheme = "expanding";
    int window = 0;
    std::string k = "evr";
    double tau = 1e-3;
    std::string split = "auto";
    std::string tuning = "single";
    bool isotonic = false;
    std::string calibration = "pointwise";
    int horizons = 20;
    bool freeze_model = false;
    int min_history = 0;
    std::uint64_t seed = 0;
    std::string out;

    void add(CLI::App& app, bool with_method, bool with_split_options) {
        data.add(app);
        if (with_method) {
            app.add_option("--method", method, "split or sequential")->capture_default_str();
        }
        if (with_split_options) {
            app.add_option("--stat", stat, "sd, iqr, mad or quantile")->capture_default_str();
            app.add_option("--tuning", tuning, "single or double")->capture_default_str();
            app.add_flag("--isotonic", isotonic, "Make the multipliers nondecreasing in h");
            app.add_option("--calibration", calibration, "pointwise or band coverage on the validation set")
                ->capture_default_str();
        }
        app.add_option("--alpha", alphas, "Significance level, repeatable (default 0.2)");
        app.add_option("--scheme", scheme, "expanding or rolling")->capture_default_str();
        app.add_option("--window", window, "Rolling window length (0: initial training length)")
            ->capture_default_str();
        app.add_option("--k", k, "evr or a fixed number of components")->capture_default_str();
        app.add_option("--tau", tau, "Eigenvalue threshold for evr")->capture_default_str();
        app.add_option("--split", split, "Y1:Y2,Y3:Y4,Y5:Y6 or auto")->capture_default_str();
        app.add_option("--horizons", horizons, "Maximum forecast horizon")->capture_default_str();
        if (with_method || !with_split_options) {
            app.add_flag("--freeze-model", freeze_model,
                         "Sequential: keep the pre-test principal components for test origins");
            app.add_option("--min-history", min_history,
                           "Sequential: shortest training window for the residual history (0: half the training "
                           "range)")
                ->capture_default_str();
        }
        app.add_option("--seed", seed, "Recorded in the report; the pipeline is deterministic")
            ->capture_default_str();
    }

    BacktestConfig config() const {
        BacktestConfig c;
        c.method = parse_method(method);
        c.stat = parse_stat_kind(stat);
        if (!alphas.empty()) c.alphas = alphas;
        c.scheme.kind = parse_scheme(scheme);
        c.scheme.rolling_length = window;
        if (k == "evr") {
            c.k_rule = KRule::evr(tau);
        } else {
            std::size_t used = 0;
            int value = 0;
            try {
                value = std::stoi(k, &used);
            } catch (const std::logic_error&) {
                used = 0;
            }
            if (used != k.size()) {
                throw InvalidInput("--k must be 'evr' or an integer, got '" + k + "'");
            }
            c.k_rule = KRule::fixed(value);
        }
        if (split != "auto") c.split = SplitSpec::parse(split);
        if (tuning != "single" && tuning != "double") {
            throw InvalidInput("--tuning must be single or double");
        }
        c.double_tuning = tuning == "double";
        c.isotonic = isotonic;
        c.criterion = parse_coverage_criterion(calibration);
        c.max_horizon = horizons;
        c.freeze_model = freeze_model;
        c.min_history_train = min_history;
        c.sex = to_string(parse_sex(data.sex));
        c.seed = seed;
        validate(c);
        return c;
    }
};

struct SynthArgs {
    SynthSpec spec;
    std::string out = "-";

    void add(CLI::App& app) {
        app.add_option("--n", spec.n, "Number of years")->capture_default_str();
        app.add_option("--ages", spec.ages, "Number of ages 0..ages-1")->capture_default_str();
        app.add_option("--first-year", spec.first_year, "First calendar year")->capture_default_str();
        app.add_option("--components", spec.k_true, "Number of true components")->capture_default_str();
        app.add_option("--ar", spec.ar, "AR(1) coefficient per component, repeatable (default 0.5)");
        app.add_option("--innov-sd", spec.innov_sd, "Innovation sd per component, repeatable (default 1/k)");
        app.add_option("--noise", spec.noise_sd, "Measurement noise sd")->capture_default_str();
        app.add_option("--seed", spec.seed, "Random seed")->capture_default_str();
        app.add_option("--out", out, "Output CSV ('-' for stdout); values are log rates")->capture_default_str();
    }
};

void print_report_summary(std::ostream& out, const BacktestResult& r) {
    out << "split " << r.report.split.to_string() << '\n';
    out << "method,alpha,h,ecp,cpd,mean_width,mean_interval_score,status\n";
    for (const auto& m : r.report.by_horizon) {
        out << to_string(r.report.config.method) << ',' << format_number(m.alpha) << ',' << m.h << ',';
        if (m.status == "ok") {
            out << format_number(m.ecp) << ',' << format_number(m.cpd) << ',' << format_number(m.mean_width) << ','
                << format_number(m.mean_interval_score);
        } else {
            out << ",,,";
        }
        out << ',' << m.status << '\n';
    }
}

int run_backtest_command(const RunArgs& args, std::ostream& out, std::optional<Method> forced) {
    BacktestConfig config = args.config();
    if (forced) config.method = *forced;
    const FunctionalSeries data = load_series(args.data.input, args.data.options());
    const BacktestResult result = run_backtest(data, config);
    write_report(result, args.out, args.data.input);
    print_report_summary(out, result);
    out << "report written to " << args.out << '\n';
    for (const auto& m : result.report.by_horizon) {
        if (m.status == "ok") return kExitOk;
    }
    return kExitNumeric;
}

int run_calibrate_command(const RunArgs& args, std::ostream& out) {
    BacktestConfig config = args.config();
    config.method = Method::split;
    const FunctionalSeries data = load_series(args.data.input, args.data.options());
    const auto calibration = calibrate_split(data, config);
    write_calibration_csv(out, calibration);
    if (!args.out.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(args.out, ec);
        std::ofstream file(std::filesystem::path(args.out) / "calibration.csv");
        if (ec || !file) {
            throw IoError("cannot write calibration.csv in " + args.out);
        }
        write_calibration_csv(file, calibration);
    }
    for (const auto& c : calibration) {
        if (c.status == "ok") return kExitOk;
    }
    return kExitNumeric;
}

int run_validate_command(const DataArgs& args, std::ostream& out) {
    ImputationReport report;
    const FunctionalSeries data = load_series(args.input, args.options(), &report);
    out << "years " << data.first_year() << ".." << data.last_year() << " (" << data.size() << ")\n";
    out << "ages " << format_number(data.grid()[0]) << ".." << format_number(data.grid()[data.ages() - 1]) << " ("
        << data.ages() << ")\n";
    out << "imputed cells " << report.cells.size() << '\n';
    for (const auto& [year, age] : report.cells) {
        out << "  " << year << ',' << age << '\n';
    }
    return kExitOk;
}

int run_synth_command(const SynthArgs& args, std::ostream& out) {
    const FunctionalSeries data = synth_generate(args.spec);
    if (args.out == "-") {
        write_wide_csv(out, data);
        return kExitOk;
    }
    std::ofstream file(args.out, std::ios::binary);
    if (!file) {
        throw IoError("cannot write " + args.out);
    }
    write_wide_csv(file, data);
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conformal prediction intervals for functional time series forecasts", "cpfts"};
    app.require_subcommand(1);

    RunArgs backtest_args, sequential_args, calibrate_args;
    DataArgs validate_args;
    SynthArgs synth_args;

    auto* backtest = app.add_subcommand("backtest", "Forecast, build intervals and evaluate on the test years");
    backtest_args.add(*backtest, true, true);
    backtest->add_option("--out", backtest_args.out, "Report directory")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Split calibration only: scale summary and multipliers per h");
    calibrate_args.add(*calibrate, false, true);
    calibrate->add_option("--out", calibrate_args.out, "Directory for calibration.csv");

    auto* sequential = app.add_subcommand("sequential", "Sequential intervals on the test years");
    sequential_args.add(*sequential, false, false);
    sequential->add_option("--out", sequential_args.out, "Report directory")->required();

    auto* synth = app.add_subcommand("synth", "Write a synthetic series as wide CSV");
    synth_args.add(*synth);

    auto* validate_data = app.add_subcommand("validate-data", "Load and check an input file");
    validate_args.add(*validate_data);

    CLI::App* active = &app;
    try {
        app.parse(argc, argv);
        if (backtest->parsed()) {
            active = backtest;
            return run_backtest_command(backtest_args, out, std::nullopt);
        }
        if (sequential->parsed()) {
            active = sequential;
            return run_backtest_command(sequential_args, out, Method::sequential);
        }
        if (calibrate->parsed()) {
            active = calibrate;
            return run_calibrate_command(calibrate_args, out);
        }
        if (synth->parsed()) {
            active = synth;
            return run_synth_command(synth_args, out);
        }
        active = validate_data;
        return run_validate_command(validate_args, out);
    } catch (const CLI::CallForHelp&) {
        CLI::App* target = &app;
        for (auto* sub : app.get_subcommands()) target = sub;
        out << target->help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        CLI::App* target = &app;
        for (auto* sub : app.get_subcommands()) target = sub;
        err << "error: " << e.what() << "\n\n" << target->help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (e.category() == ErrorCategory::usage) {
            err << '\n' << active->help();
        }
        return exit_code(e.category());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace cpfts
