#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace cpfts {

/// Strictly ascending age labels u_1 < ... < u_J, J >= 2.
class AgeGrid {
public:
    explicit AgeGrid(std::vector<double> ages);

    /// Unit-spaced grid first, first+1, ..., last.
    static AgeGrid integers(int first, int last);

    std::size_t size() const noexcept { return ages_.size(); }
    std::span<const double> ages() const noexcept { return ages_; }
    double operator[](std::size_t j) const { return ages_[j]; }

    /// Trapezoid-rule weights for the L2 inner product on the grid. On a unit
    /// grid these are 1 in the interior and 1/2 at the two endpoints.
    Eigen::VectorXd quadrature_weights() const;

    bool operator==(const AgeGrid& other) const = default;

private:
    std::vector<double> ages_;
};

/// n curves on a common age grid, one per consecutive calendar year.
class FunctionalSeries {
public:
    FunctionalSeries(AgeGrid grid, std::vector<int> years, Eigen::MatrixXd values);

    const AgeGrid& grid() const noexcept { return grid_; }
    std::span<const int> years() const noexcept { return years_; }
    /// Rows are years, columns are ages.
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    std::size_t size() const noexcept { return years_.size(); }
    std::size_t ages() const noexcept { return grid_.size(); }
    int first_year() const { return years_.front(); }
    int last_year() const { return years_.back(); }

    std::optional<std::size_t> index_of(int year) const;
    bool contains(int year) const { return index_of(year).has_value(); }
    Eigen::VectorXd curve(int year) const;

    /// Curves for years first..last inclusive.
    FunctionalSeries slice_years(int first, int last) const;

private:
    AgeGrid grid_;
    std::vector<int> years_;
    Eigen::MatrixXd values_;
};

/// How many principal components to retain.
struct KRule {
    enum class Kind { fixed, evr };

    Kind kind = Kind::evr;
    int k = 0;          ///< fixed only
    double tau = 1e-3;  ///< evr only
    int k_max = 0;      ///< evr only; 0 selects min(n-1, J-1)

    static KRule fixed(int k) { return {Kind::fixed, k, 1e-3, 0}; }
    static KRule evr(double tau = 1e-3, int k_max = 0) { return {Kind::evr, 0, tau, k_max}; }
};

struct FpcaModel {
    AgeGrid grid;
    Eigen::VectorXd mean;            ///< length J
    Eigen::VectorXd eigenvalues;     ///< length J, descending, nonnegative
    Eigen::MatrixXd eigenfunctions;  ///< K x J, orthonormal under quad_weights
    Eigen::MatrixXd scores;          ///< n x K
    int k = 0;
    Eigen::VectorXd quad_weights;    ///< length J
    bool degenerate_spectrum = false;
};

struct EvrSelection {
    int k = 1;
    /// Every eigenvalue was at or below tau; k falls back to 1.
    bool degenerate = false;
};

Eigen::VectorXd mean_curve(const FunctionalSeries& series);

/// Sample covariance over years (denominator n-1) of the curve values, J x J.
Eigen::MatrixXd covariance_matrix(const FunctionalSeries& series);

/// Eigen-decomposes the weighted covariance operator and projects the centred
/// curves onto the leading eigenfunctions. Each eigenfunction is signed so
/// that its entry of largest magnitude is positive.
FpcaModel fpca(const FunctionalSeries& series, const KRule& rule);

/// Eigenvalue-ratio choice of K: the smallest k in [1, k_max] minimising
/// lambda_{k+1}/lambda_k when lambda_k > tau, and 1 otherwise.
EvrSelection select_k_evr(std::span<const double> eigenvalues, double tau, int k_max);

/// mean + sum_k scores_k * phi_k.
Eigen::VectorXd reconstruct(const FpcaModel& model, const Eigen::VectorXd& scores);

/// Weighted inner products <curve - mean, phi_k>, k = 1..K.
Eigen::VectorXd project(const FpcaModel& model, const Eigen::VectorXd& curve);

}  // namespace cpfts
