#include "cpfts/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "cpfts/error.hpp"
#include "cpfts/sequential_conformal.hpp"

namespace cpfts {

namespace {

int effective_horizons(const BacktestConfig& config, const SplitSpec& split) {
    return std::min(config.max_horizon, split.test.length());
}

SplitSpec resolve_split(const FunctionalSeries& data, const BacktestConfig& config) {
    SplitSpec split = config.split ? *config.split : SplitSpec::from_proportions(data.first_year(), data.last_year());
    split.validate(data.first_year(), data.last_year());
    return split;
}

// Point forecasts are shared by every (phase, horizon, alpha) that uses the
// same training window.
class ForecastCache {
public:
    ForecastCache(const FunctionalSeries& data, const BacktestConfig& config, int horizons)
        : data_(data), config_(config), horizons_(horizons) {}

    const CurveForecast& get(const YearRange& window, const FpcaModel* frozen = nullptr) {
        const auto key = std::make_tuple(window.first, window.last, frozen != nullptr);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            it = cache_.emplace(key, forecast_from_window(data_, window, horizons_, config_.k_rule, config_.family,
                                                          frozen))
                     .first;
        }
        return it->second;
    }

private:
    const FunctionalSeries& data_;
    const BacktestConfig& config_;
    int horizons_;
    std::map<std::tuple<int, int, bool>, CurveForecast> cache_;
};

struct SplitState {
    std::vector<HorizonCalibration> calibration;
    std::map<int, ResidualSet> residuals;
};

SplitState calibrate_impl(const FunctionalSeries& data, const BacktestConfig& config, const SplitSpec& split,
                          ForecastCache& cache) {
    const int H = effective_horizons(config, split);
    SplitState state;
    for (int h = 1; h <= H; ++h) {
        std::vector<CurveForecast> forecasts;
        for (const auto& o : make_origins(config.scheme, split, Phase::validation, h)) {
            forecasts.push_back(cache.get(o.train));
        }
        if (!forecasts.empty()) {
            state.residuals.emplace(h, compute_residuals(data, forecasts, h));
        }
    }

    for (double alpha : config.alphas) {
        std::vector<std::size_t> ok;
        for (int h = 1; h <= H; ++h) {
            HorizonCalibration cal;
            cal.alpha = alpha;
            cal.h = h;
            const auto it = state.residuals.find(h);
            if (it == state.residuals.end()) {
                cal.status = "no-validation-origins";
                state.calibration.push_back(std::move(cal));
                continue;
            }
            const ResidualSet& res = it->second;
            cal.m = res.count();
            try {
                cal.scale = scale_function(res, config.stat, alpha);
                if (config.double_tuning) {
                    const auto pair = calibrate_xi_pair(res, cal.scale, alpha, config.criterion);
                    cal.xi_lower = pair.lower;
                    cal.xi_upper = pair.upper;
                } else {
                    cal.xi_lower = cal.xi_upper = calibrate_xi(res, cal.scale, alpha, config.criterion);
                }
                cal.xi_lower_raw = cal.xi_lower;
                cal.xi_upper_raw = cal.xi_upper;
                ok.push_back(state.calibration.size());
            } catch (const NonCalibrable& e) {
                cal.status = "non-calibrable";
            } catch (const InsufficientData& e) {
                cal.status = "insufficient-validation-data";
            }
            state.calibration.push_back(std::move(cal));
        }

        if (config.isotonic && !ok.empty()) {
            std::vector<double> lo, hi;
            for (auto i : ok) {
                lo.push_back(state.calibration[i].xi_lower);
                hi.push_back(state.calibration[i].xi_upper);
            }
            const auto lo_s = isotonic_smooth_xi(lo);
            const auto hi_s = isotonic_smooth_xi(hi);
            for (std::size_t k = 0; k < ok.size(); ++k) {
                state.calibration[ok[k]].xi_lower = lo_s[k];
                state.calibration[ok[k]].xi_upper = hi_s[k];
            }
        }
        for (auto i : ok) {
            auto& cal = state.calibration[i];
            cal.achieved_ecp = calibration_ecp(state.residuals.at(cal.h), cal.scale, cal.xi_lower, cal.xi_upper,
                                               config.criterion);
        }
    }
    return state;
}

void run_split(const FunctionalSeries& data, const BacktestConfig& config, const SplitSpec& split,
               ForecastCache& cache, BacktestResult& result,
               std::map<std::pair<double, int>, std::string>& status) {
    SplitState state = calibrate_impl(data, config, split, cache);
    const int H = effective_horizons(config, split);
    for (double alpha : config.alphas) {
        IntervalForecastSet set;
        set.method = Method::split;
        set.alpha = alpha;
        for (const auto& cal : state.calibration) {
            if (cal.alpha != alpha) continue;
            status[{alpha, cal.h}] = cal.status;
            if (cal.status != "ok" || cal.h > H) continue;
            for (const auto& o : make_origins(config.scheme, split, Phase::test, cal.h)) {
                const CurveForecast& fc = cache.get(o.train);
                const Eigen::VectorXd point = fc.curves.row(cal.h - 1).transpose();
                auto [lb, ub] = predict_interval_split(point, cal.scale, cal.xi_lower, cal.xi_upper);
                set.add({o.origin, cal.h, point, std::move(lb), std::move(ub)});
            }
        }
        result.intervals.push_back(std::move(set));
    }
    result.calibration = std::move(state.calibration);
}

YearRange sequential_window(const BacktestConfig& config, const SplitSpec& split, int origin) {
    if (config.scheme.kind == SchemeKind::expanding) {
        return {split.train.first, origin};
    }
    const int length = config.scheme.rolling_length > 0 ? config.scheme.rolling_length
                                                        : split.validation.last - split.train.first + 1;
    return {std::max(split.train.first, origin - length + 1), origin};
}

void run_sequential_method(const FunctionalSeries& data, const BacktestConfig& config, const SplitSpec& split,
                           ForecastCache& cache, BacktestResult& result,
                           std::map<std::pair<double, int>, std::string>& status) {
    const int H = effective_horizons(config, split);
    const auto J = static_cast<Eigen::Index>(data.ages());
    const int min_fit = config.min_history_train > 0 ? config.min_history_train
                                                     : (split.train.length() + 1) / 2;
    const int first_origin = split.train.first + min_fit - 1;
    const int last_pre_test = split.validation.last;

    std::optional<FpcaModel> frozen;
    if (config.freeze_model) {
        const YearRange w = sequential_window(config, split, last_pre_test);
        frozen = fpca(data.slice_years(w.first, w.last), config.k_rule);
    }
    auto forecast_at = [&](int origin) -> const CurveForecast& {
        const YearRange w = sequential_window(config, split, origin);
        const bool use_frozen = frozen && origin >= last_pre_test;
        return cache.get(w, use_frozen ? &*frozen : nullptr);
    };

    for (double alpha : config.alphas) {
        IntervalForecastSet set;
        set.method = Method::sequential;
        set.alpha = alpha;
        result.intervals.push_back(std::move(set));
    }

    for (int h = 1; h <= H; ++h) {
        std::vector<Eigen::VectorXd> history_rows;
        for (int o = first_origin; o + h <= split.test.first - 1; ++o) {
            const CurveForecast& fc = forecast_at(o);
            history_rows.push_back(data.curve(o + h) - fc.curves.row(h - 1).transpose());
        }
        if (history_rows.size() < 3) {
            for (double alpha : config.alphas) status[{alpha, h}] = "insufficient-history";
            continue;
        }
        Eigen::MatrixXd history(static_cast<Eigen::Index>(history_rows.size()), J);
        for (std::size_t s = 0; s < history_rows.size(); ++s) {
            history.row(static_cast<Eigen::Index>(s)) = history_rows[s].transpose();
        }

        const int n_test = split.test.length();
        Eigen::MatrixXd points(n_test, J);
        Eigen::MatrixXd actuals(n_test, J);
        std::vector<int> years;
        for (int t = 0; t < n_test; ++t) {
            const int target = split.test.first + t;
            points.row(t) = forecast_at(target - h).curves.row(h - 1);
            actuals.row(t) = data.curve(target).transpose();
            years.push_back(target);
        }

        for (std::size_t a = 0; a < config.alphas.size(); ++a) {
            const double alpha = config.alphas[a];
            const auto seq = run_sequential(points, actuals, years, history, SequentialOptions{alpha, -1});
            for (int t = 0; t < n_test; ++t) {
                const int origin = years[static_cast<std::size_t>(t)] - h;
                if (origin < last_pre_test) continue;
                result.intervals[a].add({origin, h, seq.point.row(t).transpose(), seq.lower.row(t).transpose(),
                                         seq.upper.row(t).transpose()});
            }
            status[{alpha, h}] = "ok";
        }
    }
}

}  // namespace

SplitSpec SplitSpec::from_proportions(int first_year, int last_year) {
    const int n = last_year - first_year + 1;
    if (n < 5) {
        throw InvalidInput("at least five years are needed to split the sample");
    }
    const int n_train = static_cast<int>(std::floor(0.6 * n));
    const int n_test = std::max(1, static_cast<int>(std::floor(0.2 * n)));
    const int n_val = n - n_train - n_test;
    SplitSpec s;
    s.train = {first_year, first_year + n_train - 1};
    s.validation = {s.train.last + 1, s.train.last + n_val};
    s.test = {s.validation.last + 1, last_year};
    return s;
}

SplitSpec SplitSpec::parse(const std::string& text) {
    std::vector<YearRange> ranges;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) {
            throw InvalidInput("split range '" + part + "' is not of the form Y1:Y2");
        }
        try {
            std::size_t used_a = 0, used_b = 0;
            const std::string a = part.substr(0, colon), b = part.substr(colon + 1);
            YearRange r{std::stoi(a, &used_a), std::stoi(b, &used_b)};
            if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(part);
            ranges.push_back(r);
        } catch (const std::logic_error&) {
            throw InvalidInput("split range '" + part + "' is not of the form Y1:Y2");
        }
    }
    if (ranges.size() != 3) {
        throw InvalidInput("split needs three ranges train,validation,test");
    }
    return {ranges[0], ranges[1], ranges[2]};
}

void SplitSpec::validate(int first_year, int last_year) const {
    for (const auto* r : {&train, &validation, &test}) {
        if (r->length() < 1) {
            throw InvalidInput("split ranges must be nonempty: " + to_string());
        }
    }
    if (validation.first != train.last + 1 || test.first != validation.last + 1) {
        throw InvalidInput("split ranges must be contiguous and ordered: " + to_string());
    }
    if (train.first < first_year || test.last > last_year) {
        throw InvalidInput("split " + to_string() + " exceeds the data years " + std::to_string(first_year) + ":" +
                           std::to_string(last_year));
    }
}

std::string SplitSpec::to_string() const {
    auto r = [](const YearRange& y) { return std::to_string(y.first) + ":" + std::to_string(y.last); };
    return r(train) + "," + r(validation) + "," + r(test);
}

std::string to_string(SchemeKind k) { return k == SchemeKind::expanding ? "expanding" : "rolling"; }

SchemeKind parse_scheme(const std::string& text) {
    if (text == "expanding") return SchemeKind::expanding;
    if (text == "rolling") return SchemeKind::rolling;
    throw InvalidInput("unknown window scheme '" + text + "'");
}

std::vector<Origin> make_origins(const WindowScheme& scheme, const SplitSpec& split, Phase phase, int h) {
    if (h < 1) {
        throw InvalidInput("horizon must be at least 1");
    }
    const YearRange& range = phase == Phase::validation ? split.validation : split.test;
    const int first_origin = range.first - 1;
    const int default_length = first_origin - split.train.first + 1;
    const int length = scheme.rolling_length > 0 ? scheme.rolling_length : default_length;
    if (scheme.kind == SchemeKind::rolling && length < 4) {
        throw InvalidInput("rolling window length must be at least 4");
    }
    std::vector<Origin> out;
    for (int o = first_origin; o + h <= range.last; ++o) {
        Origin origin;
        origin.origin = o;
        origin.target = o + h;
        origin.train = scheme.kind == SchemeKind::expanding
                           ? YearRange{split.train.first, o}
                           : YearRange{std::max(split.train.first, o - length + 1), o};
        out.push_back(origin);
    }
    return out;
}

void validate(const BacktestConfig& config) {
    if (config.alphas.empty()) {
        throw InvalidInput("at least one alpha is required");
    }
    for (double a : config.alphas) {
        if (!(a > 0.0 && a < 1.0)) {
            throw InvalidInput("alpha must lie in (0, 1)");
        }
    }
    if (config.max_horizon < 1) {
        throw InvalidInput("maximum horizon must be at least 1");
    }
    if (config.scheme.kind == SchemeKind::rolling && config.scheme.rolling_length != 0 &&
        config.scheme.rolling_length < 4) {
        throw InvalidInput("rolling window length must be at least 4");
    }
    if (config.k_rule.kind == KRule::Kind::fixed && config.k_rule.k < 1) {
        throw InvalidK("fixed K must be at least 1");
    }
    if (config.k_rule.kind == KRule::Kind::evr && !(config.k_rule.tau > 0.0)) {
        throw InvalidInput("tau must be positive");
    }
    if (config.family.empty()) {
        throw InvalidInput("empty ets family");
    }
    if (config.min_history_train != 0 && config.min_history_train < 4) {
        throw InvalidInput("minimum history training window must be at least 4 years");
    }
}

std::string BacktestReport::stat_label() const {
    return config.method == Method::split ? to_string(config.stat) : "na";
}

CurveForecast forecast_from_window(const FunctionalSeries& data, const YearRange& window, int horizons,
                                   const KRule& k_rule, std::span<const EtsKind> family, const FpcaModel* frozen) {
    const FunctionalSeries train = data.slice_years(window.first, window.last);
    if (frozen == nullptr) {
        return forecast_curves(fpca(train, k_rule), horizons, family, window.last);
    }
    FpcaModel model = *frozen;
    model.scores.resize(static_cast<Eigen::Index>(train.size()), model.k);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(train.size()); ++t) {
        model.scores.row(t) = project(model, train.values().row(t).transpose()).transpose();
    }
    return forecast_curves(model, horizons, family, window.last);
}

std::vector<HorizonCalibration> calibrate_split(const FunctionalSeries& data, const BacktestConfig& config) {
    validate(config);
    const SplitSpec split = resolve_split(data, config);
    ForecastCache cache(data, config, effective_horizons(config, split));
    return calibrate_impl(data, config, split, cache).calibration;
}

BacktestResult run_backtest(const FunctionalSeries& data, const BacktestConfig& config) {
    validate(config);
    const SplitSpec split = resolve_split(data, config);
    const int H = effective_horizons(config, split);
    ForecastCache cache(data, config, H);

    BacktestResult result;
    std::map<std::pair<double, int>, std::string> status;
    if (config.method == Method::split) {
        run_split(data, config, split, cache, result, status);
    } else {
        run_sequential_method(data, config, split, cache, result, status);
    }

    BacktestReport& report = result.report;
    report.config = config;
    report.split = split;
    report.grid = data.grid();
    const char* metric_names[] = {"ecp", "cpd", "mean_width", "mean_interval_score"};
    for (std::size_t a = 0; a < config.alphas.size(); ++a) {
        const double alpha = config.alphas[a];
        const IntervalForecastSet& set = result.intervals[a];
        std::vector<double> columns[4];
        for (int h = 1; h <= H; ++h) {
            HorizonMetrics m;
            m.alpha = alpha;
            m.h = h;
            const auto st = status.find({alpha, h});
            m.status = st == status.end() ? "no-test-origins" : st->second;
            const auto cells = set.at_horizon(h);
            m.forecasts = static_cast<int>(cells.size());
            if (m.status == "ok" && cells.empty()) {
                m.status = "no-test-origins";
            }
            if (m.status == "ok") {
                m.ecp = ecp_h(set, data, h);
                m.cpd = cpd_h(set, data, h, alpha);
                m.mean_width = mean_width_h(set, h);
                m.mean_interval_score = mean_interval_score_h(set, data, h, alpha);
                columns[0].push_back(m.ecp);
                columns[1].push_back(m.cpd);
                columns[2].push_back(m.mean_width);
                columns[3].push_back(m.mean_interval_score);
            }
            report.by_horizon.push_back(m);
        }
        for (int k = 0; k < 4; ++k) {
            if (!columns[k].empty()) {
                report.summaries.push_back({metric_names[k], alpha, summarize_over_horizons(columns[k])});
            }
        }
        report.quantiles_by_age[alpha] = averaged_predicted_quantiles(set, data.grid());
    }
    return result;
}

}  // namespace cpfts
