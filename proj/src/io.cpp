#include "cpfts/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cpfts/error.hpp"

namespace cpfts {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_fields(const std::string& line, bool comma) {
    std::vector<std::string> out;
    if (comma) {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) out.push_back(trim(f));
        if (!line.empty() && line.back() == ',') out.emplace_back();
    } else {
        std::istringstream ss(line);
        std::string f;
        while (ss >> f) out.push_back(f);
    }
    return out;
}

std::optional<double> to_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

std::optional<int> to_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        return std::nullopt;
    }
    return static_cast<int>(v);
}

/// "0", "42", "110+" -> (age, open-ended)
std::optional<std::pair<int, bool>> parse_age_label(std::string s) {
    bool open = false;
    if (!s.empty() && s.back() == '+') {
        open = true;
        s.pop_back();
    }
    const auto v = to_int(s);
    if (!v || *v < 0) return std::nullopt;
    return std::make_pair(*v, open);
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

std::string alpha_label(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return buf;
}

}  // namespace

std::string to_string(Sex s) {
    switch (s) {
        case Sex::female: return "female";
        case Sex::male: return "male";
        case Sex::total: return "total";
    }
    return "total";
}

Sex parse_sex(const std::string& text) {
    const std::string t = lower(text);
    if (t == "female") return Sex::female;
    if (t == "male") return Sex::male;
    if (t == "total") return Sex::total;
    throw InvalidInput("unknown sex '" + text + "'");
}

double RawMortalityRow::rate(Sex s) const {
    switch (s) {
        case Sex::female: return female;
        case Sex::male: return male;
        case Sex::total: return total;
    }
    return total;
}

RawMortalityTable parse_hmd(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool comma = false;
    std::vector<std::size_t> column(5);  // year, age, female, male, total
    bool have_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        comma = line.find(',') != std::string::npos;
        const auto fields = split_fields(line, comma);
        std::map<std::string, std::size_t> names;
        for (std::size_t i = 0; i < fields.size(); ++i) names[lower(fields[i])] = i;
        if (!names.count("year") || !names.count("age")) {
            continue;  // free-text preamble
        }
        const char* required[] = {"year", "age", "female", "male", "total"};
        for (std::size_t c = 0; c < 5; ++c) {
            const auto it = names.find(required[c]);
            if (it == names.end()) {
                throw SchemaError("header on line " + std::to_string(line_no) + " lacks a '" + required[c] +
                                  "' column");
            }
            column[c] = it->second;
        }
        have_header = true;
        break;
    }
    if (!have_header) {
        throw SchemaError("no Year/Age/Female/Male/Total header found");
    }

    const std::size_t width = *std::max_element(column.begin(), column.end()) + 1;
    RawMortalityTable table;
    std::set<std::pair<int, int>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto fields = split_fields(line, comma);
        if (fields.size() < width) {
            throw ParseError("expected at least " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        RawMortalityRow row;
        const auto year = to_int(fields[column[0]]);
        if (!year) throw ParseError("bad year '" + fields[column[0]] + "'", line_no);
        const auto age = parse_age_label(fields[column[1]]);
        if (!age) throw ParseError("bad age '" + fields[column[1]] + "'", line_no);
        row.year = *year;
        row.age = age->first;
        row.open_ended = age->second;
        double* rates[] = {&row.female, &row.male, &row.total};
        for (std::size_t c = 0; c < 3; ++c) {
            const std::string& f = fields[column[c + 2]];
            if (f == ".") {
                *rates[c] = kNaN;
                continue;
            }
            const auto v = to_double(f);
            if (!v || !(*v >= 0.0) || !std::isfinite(*v)) {
                throw ParseError("bad rate '" + f + "'", line_no);
            }
            *rates[c] = *v;
        }
        if (!seen.insert({row.year, row.age}).second) {
            throw ParseError("duplicate entry for year " + std::to_string(row.year) + ", age " +
                                 std::to_string(row.age),
                             line_no);
        }
        table.rows.push_back(row);
    }
    if (table.rows.empty()) {
        throw SchemaError("no data rows after the header");
    }

    std::map<int, std::vector<int>> ages;
    for (const auto& r : table.rows) ages[r.year].push_back(r.age);
    for (auto& [year, list] : ages) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i] != list.front() + static_cast<int>(i)) {
                throw SchemaError("ages for year " + std::to_string(year) + " are not contiguous");
            }
        }
    }
    return table;
}

RawMortalityTable load_hmd(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_hmd(in);
}

void impute_curve(Eigen::Ref<Eigen::VectorXd> v, int year, std::vector<int>* filled) {
    std::vector<Eigen::Index> valid;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (std::isfinite(v[j])) valid.push_back(j);
    }
    if (valid.size() < 2) {
        throw ImputationError("year " + std::to_string(year) + " has fewer than two usable rates");
    }
    if (valid.size() == static_cast<std::size_t>(v.size())) return;
    std::size_t next = 0;  // first valid index >= j
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        while (next < valid.size() && valid[next] < j) ++next;
        if (next < valid.size() && valid[next] == j) continue;
        if (next == 0) {
            v[j] = v[valid.front()];
        } else if (next == valid.size()) {
            v[j] = v[valid.back()];
        } else {
            const auto a = valid[next - 1], b = valid[next];
            const double t = static_cast<double>(j - a) / static_cast<double>(b - a);
            v[j] = (1.0 - t) * v[a] + t * v[b];
        }
        if (filled) filled->push_back(static_cast<int>(j));
    }
}

FunctionalSeries to_functional_series(const RawMortalityTable& table, Sex sex, int top_age,
                                      ImputationReport* report) {
    if (top_age < 1) {
        throw InvalidInput("top age must be at least 1");
    }
    std::map<int, std::vector<const RawMortalityRow*>> by_year;
    for (const auto& r : table.rows) by_year[r.year].push_back(&r);
    if (by_year.empty()) {
        throw SchemaError("empty rates table");
    }

    const auto J = static_cast<Eigen::Index>(top_age + 1);
    std::vector<int> years;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(by_year.size()), J);
    Eigen::Index row = 0;
    for (const auto& [year, rows] : by_year) {
        Eigen::VectorXd curve = Eigen::VectorXd::Constant(J, kNaN);
        std::vector<bool> present(static_cast<std::size_t>(J), false);
        double top_sum = 0.0;
        int top_count = 0;
        bool reaches_top = false;
        for (const auto* r : rows) {
            const double rate = r->rate(sex);
            const bool usable = std::isfinite(rate) && rate > 0.0;
            if (r->age >= top_age) {
                reaches_top = true;
                if (usable) {
                    top_sum += rate;
                    ++top_count;
                }
            } else {
                present[static_cast<std::size_t>(r->age)] = true;
                if (usable) curve[r->age] = std::log(rate);
            }
        }
        for (Eigen::Index j = 0; j + 1 < J; ++j) {
            if (!present[static_cast<std::size_t>(j)]) {
                throw SchemaError("year " + std::to_string(year) + " lacks age " + std::to_string(j));
            }
        }
        if (!reaches_top) {
            throw SchemaError("year " + std::to_string(year) + " has no ages at or above " +
                              std::to_string(top_age));
        }
        if (top_count > 0) curve[J - 1] = std::log(top_sum / top_count);

        std::vector<int> filled;
        impute_curve(curve, year, &filled);
        if (report) {
            for (int j : filled) report->cells.emplace_back(year, j);
        }
        values.row(row++) = curve.transpose();
        years.push_back(year);
    }
    return FunctionalSeries(AgeGrid::integers(0, top_age), std::move(years), std::move(values));
}

FunctionalSeries parse_wide_csv(std::istream& in, bool log_input, ImputationReport* report) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        header = split_fields(line, true);
        break;
    }
    if (header.size() < 3 || lower(header.front()) != "year") {
        throw SchemaError("wide layout needs a 'year' column followed by at least two age columns");
    }
    std::vector<double> ages;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const auto age = parse_age_label(header[i]);
        const auto real_age = to_double(header[i]);
        if (age) {
            ages.push_back(age->first);
        } else if (real_age) {
            ages.push_back(*real_age);
        } else {
            throw SchemaError("column '" + header[i] + "' is not an age label");
        }
    }
    AgeGrid grid(ages);  // validates ordering

    std::vector<int> years;
    std::vector<Eigen::VectorXd> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto fields = split_fields(line, true);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        const auto year = to_int(fields[0]);
        if (!year) throw ParseError("bad year '" + fields[0] + "'", line_no);
        Eigen::VectorXd curve(static_cast<Eigen::Index>(ages.size()));
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto j = static_cast<Eigen::Index>(i - 1);
            const std::string& f = fields[i];
            if (f.empty() || f == "." || lower(f) == "na" || lower(f) == "nan") {
                curve[j] = kNaN;
                continue;
            }
            const auto v = to_double(f);
            if (!v || (!log_input && *v < 0.0) || !std::isfinite(*v)) {
                throw ParseError("bad value '" + f + "'", line_no);
            }
            curve[j] = log_input ? *v : (*v > 0.0 ? std::log(*v) : kNaN);
        }
        std::vector<int> filled;
        impute_curve(curve, *year, &filled);
        if (report) {
            for (int j : filled) report->cells.emplace_back(*year, static_cast<int>(ages[static_cast<std::size_t>(j)]));
        }
        years.push_back(*year);
        rows.push_back(std::move(curve));
    }
    if (rows.empty()) {
        throw SchemaError("no data rows after the header");
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ages.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) values.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    return FunctionalSeries(std::move(grid), std::move(years), std::move(values));
}

FunctionalSeries load_wide_csv(const std::filesystem::path& path, bool log_input, ImputationReport* report) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_wide_csv(in, log_input, report);
}

void write_wide_csv(std::ostream& out, const FunctionalSeries& series) {
    char buf[64];
    out << "year";
    for (double a : series.grid().ages()) {
        std::snprintf(buf, sizeof buf, "%.17g", a);
        out << ',' << buf;
    }
    out << '\n';
    for (std::size_t t = 0; t < series.size(); ++t) {
        out << series.years()[t];
        for (Eigen::Index j = 0; j < series.values().cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", series.values()(static_cast<Eigen::Index>(t), j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

FunctionalSeries load_series(const std::filesystem::path& path, const LoadOptions& options,
                             ImputationReport* report) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    bool wide = false;
    while (std::getline(in, line)) {
        if (is_blank(line)) continue;
        const auto fields = split_fields(line, line.find(',') != std::string::npos);
        bool has_age = false;
        for (const auto& f : fields) has_age = has_age || lower(f) == "age";
        wide = !fields.empty() && lower(fields.front()) == "year" && !has_age;
        break;
    }
    in.clear();
    in.seekg(0);
    if (wide) {
        return parse_wide_csv(in, options.log_input, report);
    }
    return to_functional_series(parse_hmd(in), options.sex, options.top_age, report);
}

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

void write_calibration_csv(std::ostream& out, const std::vector<HorizonCalibration>& calibration) {
    out << "alpha,h,m,xi_lower,xi_upper,xi_lower_raw,xi_upper_raw,achieved_ecp,gamma_min,gamma_median,gamma_max,"
           "status\n";
    for (const auto& c : calibration) {
        out << format_number(c.alpha) << ',' << c.h << ',' << c.m << ',';
        if (c.status == "ok") {
            std::vector<double> g(c.scale.gamma.data(), c.scale.gamma.data() + c.scale.gamma.size());
            std::sort(g.begin(), g.end());
            const double med = g.size() % 2 ? g[g.size() / 2] : 0.5 * (g[g.size() / 2 - 1] + g[g.size() / 2]);
            out << format_number(c.xi_lower) << ',' << format_number(c.xi_upper) << ','
                << format_number(c.xi_lower_raw) << ',' << format_number(c.xi_upper_raw) << ','
                << format_number(c.achieved_ecp) << ',' << format_number(g.front()) << ',' << format_number(med)
                << ',' << format_number(g.back());
        } else {
            out << ",,,,,,,";
        }
        out << ',' << c.status << '\n';
    }
}

void write_report(const BacktestResult& result, const std::filesystem::path& dir, const std::string& input) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    const BacktestReport& report = result.report;
    const BacktestConfig& config = report.config;
    const std::string method = to_string(config.method);
    const std::string stat = report.stat_label();

    {
        auto out = open_output(dir / "metrics_by_horizon.csv");
        out << "method,sex,alpha,stat,h,ecp,cpd,mean_width,mean_interval_score\n";
        for (const auto& m : report.by_horizon) {
            if (m.status != "ok") continue;
            out << method << ',' << config.sex << ',' << format_number(m.alpha) << ',' << stat << ',' << m.h << ','
                << format_number(m.ecp) << ',' << format_number(m.cpd) << ',' << format_number(m.mean_width) << ','
                << format_number(m.mean_interval_score) << '\n';
        }
    }
    {
        auto out = open_output(dir / "summary.csv");
        out << "metric,alpha,stat,min,q1,median,mean,q3,max\n";
        for (const auto& s : report.summaries) {
            const auto& v = s.summary;
            out << s.metric << ',' << format_number(s.alpha) << ',' << stat << ',' << format_number(v.min) << ','
                << format_number(v.q1) << ',' << format_number(v.median) << ',' << format_number(v.mean) << ','
                << format_number(v.q3) << ',' << format_number(v.max) << '\n';
        }
    }

    const bool per_alpha = config.alphas.size() > 1;
    for (const auto& set : result.intervals) {
        std::filesystem::path target = dir;
        if (per_alpha) {
            target = dir / ("alpha_" + alpha_label(set.alpha));
            std::filesystem::create_directories(target, ec);
            if (ec) {
                throw IoError("cannot create " + target.string() + ": " + ec.message());
            }
        }
        {
            auto out = open_output(target / "intervals.csv");
            out << "origin,target,h,age,point,lb,ub\n";
            std::vector<const IntervalForecast*> order;
            for (const auto& f : set.forecasts) order.push_back(&f);
            std::stable_sort(order.begin(), order.end(), [](const IntervalForecast* a, const IntervalForecast* b) {
                return std::tie(a->horizon, a->origin) < std::tie(b->horizon, b->origin);
            });
            for (const auto* f : order) {
                for (std::size_t j = 0; j < report.grid.size(); ++j) {
                    const auto jj = static_cast<Eigen::Index>(j);
                    out << f->origin << ',' << f->target() << ',' << f->horizon << ',' << format_number(report.grid[j])
                        << ',' << format_number(f->point[jj]) << ',' << format_number(f->lower[jj]) << ','
                        << format_number(f->upper[jj]) << '\n';
                }
            }
        }
        {
            auto out = open_output(target / "quantiles_by_age.csv");
            out << "age,h,mean_qhat\n";
            const auto it = report.quantiles_by_age.find(set.alpha);
            if (it != report.quantiles_by_age.end()) {
                for (const auto& q : it->second) {
                    out << format_number(q.age) << ',' << q.h << ',' << format_number(q.mean_qhat) << '\n';
                }
            }
        }
    }

    if (config.method == Method::split) {
        auto out = open_output(dir / "calibration.csv");
        write_calibration_csv(out, result.calibration);
    }

    nlohmann::ordered_json j;
    j["input"] = input;
    j["method"] = method;
    j["sex"] = config.sex;
    j["stat"] = stat;
    j["alpha"] = config.alphas;
    j["scheme"] = to_string(config.scheme.kind);
    j["rolling_length"] = config.scheme.rolling_length;
    if (config.k_rule.kind == KRule::Kind::fixed) {
        j["k"] = config.k_rule.k;
    } else {
        j["k"] = "evr";
        j["tau"] = config.k_rule.tau;
    }
    j["split"] = report.split.to_string();
    j["split_source"] = config.split ? "explicit" : "auto";
    j["tuning"] = config.double_tuning ? "double" : "single";
    j["isotonic"] = config.isotonic;
    j["calibration"] = to_string(config.criterion);
    j["max_horizon"] = config.max_horizon;
    j["freeze_model"] = config.freeze_model;
    j["min_history"] = config.min_history_train;
    std::vector<std::string> family;
    for (auto k : config.family) family.push_back(to_string(k));
    j["ets_family"] = family;
    j["seed"] = config.seed;
    j["ages"] = {report.grid[0], report.grid[report.grid.size() - 1], report.grid.size()};
    auto failed = nlohmann::ordered_json::array();
    for (const auto& m : report.by_horizon) {
        if (m.status != "ok") failed.push_back({{"alpha", m.alpha}, {"h", m.h}, {"status", m.status}});
    }
    j["failed_horizons"] = failed;
    auto out = open_output(dir / "config.json");
    out << j.dump(2) << '\n';
}

}  // namespace cpfts
