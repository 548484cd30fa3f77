#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpfts/backtest.hpp"
#include "cpfts/error.hpp"
#include "cpfts/fts.hpp"
#include "cpfts/io.hpp"
#include "cpfts/quantile_regression.hpp"
#include "cpfts/sequential_conformal.hpp"
#include "cpfts/split_conformal.hpp"
#include "cpfts/synth.hpp"

namespace py = pybind11;
using namespace cpfts;

namespace {

FunctionalSeries make_series(const std::vector<int>& years, const std::vector<double>& ages,
                             const Eigen::MatrixXd& values) {
    return FunctionalSeries(AgeGrid(ages), years, values);
}

KRule make_k_rule(const py::object& k, double tau) {
    if (k.is_none()) return KRule::evr(tau);
    if (py::isinstance<py::str>(k)) {
        if (k.cast<std::string>() != "evr") throw InvalidInput("k must be 'evr' or an integer");
        return KRule::evr(tau);
    }
    return KRule::fixed(k.cast<int>());
}

py::dict fpca_dict(const FpcaModel& m) {
    py::dict d;
    d["mean"] = m.mean;
    d["eigenvalues"] = m.eigenvalues;
    d["eigenfunctions"] = m.eigenfunctions;
    d["scores"] = m.scores;
    d["k"] = m.k;
    d["quad_weights"] = m.quad_weights;
    d["degenerate_spectrum"] = m.degenerate_spectrum;
    return d;
}

ResidualSet make_residuals(const Eigen::MatrixXd& residuals) {
    ResidualSet r;
    r.residuals = residuals;
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
        r.origin_years.push_back(static_cast<int>(i));
        r.target_years.push_back(static_cast<int>(i) + 1);
    }
    return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conformal prediction intervals for functional time series forecasts";

    py::register_exception<Error>(m, "CpftsError", PyExc_RuntimeError);

    m.def(
        "fpca",
        [](const std::vector<int>& years, const std::vector<double>& ages, const Eigen::MatrixXd& values,
           const py::object& k, double tau) { return fpca_dict(fpca(make_series(years, ages, values), make_k_rule(k, tau))); },
        py::arg("years"), py::arg("ages"), py::arg("values"), py::arg("k") = py::none(), py::arg("tau") = 1e-3,
        "Principal components of curves on a grid (rows are years).");

    m.def(
        "select_k_evr",
        [](const std::vector<double>& eigenvalues, double tau, int k_max) {
            const auto s = select_k_evr(eigenvalues, tau, k_max);
            return py::make_tuple(s.k, s.degenerate);
        },
        py::arg("eigenvalues"), py::arg("tau") = 1e-3, py::arg("k_max") = 0);

    m.def(
        "scale_function",
        [](const Eigen::MatrixXd& residuals, const std::string& stat, double alpha) {
            return scale_function(make_residuals(residuals), parse_stat_kind(stat), alpha).gamma;
        },
        py::arg("residuals"), py::arg("stat") = "sd", py::arg("alpha") = 0.2);

    m.def(
        "calibrate_xi",
        [](const Eigen::MatrixXd& residuals, const std::string& stat, double alpha, const std::string& criterion) {
            const auto r = make_residuals(residuals);
            const auto scale = scale_function(r, parse_stat_kind(stat), alpha);
            return calibrate_xi(r, scale, alpha, parse_coverage_criterion(criterion));
        },
        py::arg("residuals"), py::arg("stat") = "sd", py::arg("alpha") = 0.2, py::arg("criterion") = "band",
        "Smallest multiplier of the scale function reaching 1 - alpha coverage on the residuals.");

    m.def(
        "isotonic_smooth",
        [](const std::vector<double>& xi) { return isotonic_smooth_xi(xi); }, py::arg("xi"));

    m.def("pinball_loss", &pinball_loss, py::arg("actual"), py::arg("predicted"), py::arg("level"));

    m.def(
        "quantile_regression",
        [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double level) {
            const auto fit = quantile_regression(X, y, level);
            return py::make_tuple(fit.coefficients, fit.loss);
        },
        py::arg("X"), py::arg("y"), py::arg("level"));

    m.def(
        "select_ar_order",
        [](const std::vector<double>& series, double level, int p_max) {
            return select_ar_order(series, level, p_max);
        },
        py::arg("series"), py::arg("level"), py::arg("p_max") = -1);

    m.def(
        "run_sequential",
        [](const Eigen::MatrixXd& point, const Eigen::MatrixXd& actual, const std::vector<int>& years,
           const Eigen::MatrixXd& history, double alpha) {
            const auto r = run_sequential(point, actual, years, history, SequentialOptions{alpha, -1});
            py::dict d;
            d["lower"] = r.lower;
            d["upper"] = r.upper;
            d["qhat"] = r.qhat;
            d["orders"] = r.orders;
            return d;
        },
        py::arg("point"), py::arg("actual"), py::arg("years"), py::arg("history"), py::arg("alpha") = 0.2);

    m.def("interval_score", &interval_score, py::arg("lb"), py::arg("ub"), py::arg("actual"), py::arg("alpha"));

    m.def(
        "synth_generate",
        [](int n, int ages, int components, const std::vector<double>& ar, const std::vector<double>& innov_sd,
           double noise_sd, std::uint64_t seed) {
            SynthSpec spec;
            spec.n = n;
            spec.ages = ages;
            spec.k_true = components;
            spec.ar = ar;
            spec.innov_sd = innov_sd;
            spec.noise_sd = noise_sd;
            spec.seed = seed;
            const auto s = synth_generate(spec);
            return py::make_tuple(std::vector<int>(s.years().begin(), s.years().end()),
                                  std::vector<double>(s.grid().ages().begin(), s.grid().ages().end()), s.values());
        },
        py::arg("n") = 100, py::arg("ages") = 101, py::arg("components") = 2, py::arg("ar") = std::vector<double>{},
        py::arg("innov_sd") = std::vector<double>{}, py::arg("noise_sd") = 0.1, py::arg("seed") = 1,
        "Returns (years, ages, values).");

    m.def(
        "load_series",
        [](const std::string& path, const std::string& sex, int top_age, bool log_input) {
            const auto s = load_series(path, LoadOptions{parse_sex(sex), top_age, log_input});
            return py::make_tuple(std::vector<int>(s.years().begin(), s.years().end()),
                                  std::vector<double>(s.grid().ages().begin(), s.grid().ages().end()), s.values());
        },
        py::arg("path"), py::arg("sex") = "total", py::arg("top_age") = 100, py::arg("log_input") = false);

    m.def(
        "run_backtest",
        [](const std::vector<int>& years, const std::vector<double>& ages, const Eigen::MatrixXd& values,
           const std::string& method, const std::string& stat, const std::vector<double>& alphas,
           const std::string& scheme, const py::object& k, double tau, const std::string& split, bool double_tuning,
           bool isotonic, int horizons, const std::string& criterion, const std::string& out) {
            BacktestConfig c;
            c.method = parse_method(method);
            c.stat = parse_stat_kind(stat);
            c.alphas = alphas;
            c.scheme.kind = parse_scheme(scheme);
            c.k_rule = make_k_rule(k, tau);
            if (split != "auto") c.split = SplitSpec::parse(split);
            c.double_tuning = double_tuning;
            c.isotonic = isotonic;
            c.max_horizon = horizons;
            c.criterion = parse_coverage_criterion(criterion);
            const auto result = run_backtest(make_series(years, ages, values), c);
            if (!out.empty()) write_report(result, out);
            py::list rows;
            for (const auto& mh : result.report.by_horizon) {
                py::dict d;
                d["alpha"] = mh.alpha;
                d["h"] = mh.h;
                d["status"] = mh.status;
                d["ecp"] = mh.ecp;
                d["cpd"] = mh.cpd;
                d["mean_width"] = mh.mean_width;
                d["mean_interval_score"] = mh.mean_interval_score;
                rows.append(d);
            }
            return rows;
        },
        py::arg("years"), py::arg("ages"), py::arg("values"), py::arg("method") = "split", py::arg("stat") = "sd",
        py::arg("alphas") = std::vector<double>{0.2}, py::arg("scheme") = "expanding", py::arg("k") = py::none(),
        py::arg("tau") = 1e-3, py::arg("split") = "auto", py::arg("double_tuning") = false,
        py::arg("isotonic") = false, py::arg("horizons") = 20, py::arg("criterion") = "pointwise",
        py::arg("out") = "", "Per-horizon test metrics; writes the report files when out is given.");
}
