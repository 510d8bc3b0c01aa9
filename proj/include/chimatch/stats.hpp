#ifndef CHIMATCH_STATS_HPP
#define CHIMATCH_STATS_HPP

#include "chimatch/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace chimatch {

// A scalar statistic plus a flag for zero-variance / zero-norm inputs.
struct Estimate {
    double value = 0.0;
    bool degenerate = false;
};

enum class SimilarityMode { pearson, cosine, mutual_information, objective };

std::string to_string(SimilarityMode mode);

// Cross-dataset feature affinities. Rows and columns carry feature identities.
struct SimilarityMatrix {
    std::string row_label;
    std::string col_label;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    Matrix values;
    BoolMatrix degenerate;
    SimilarityMode mode = SimilarityMode::pearson;

    std::size_t rows() const { return row_ids.size(); }
    std::size_t cols() const { return col_ids.size(); }
    bool empty() const { return row_ids.empty() || col_ids.empty(); }
    SimilarityMatrix transposed() const;
    // Throws if dimensions disagree or bounded modes exceed [-1,1].
    void validate() const;
};

struct PValueEntry {
    std::string row_feature;
    std::string col_feature;
    double statistic = 0.0;
    double p_value = 1.0;
    bool accepted = false;
};

struct PValueReport {
    std::vector<PValueEntry> pairs;
    double fdr_level = 0.05;
    std::size_t holdout_n = 0;
};

namespace detail {

// Copies any vector-like expression (matrix or array) into a VectorXd.
template <class Derived>
Eigen::VectorXd materialize(const Eigen::DenseBase<Derived>& d)
{
    return Eigen::VectorXd::NullaryExpr(d.size(),
                                        [&](Eigen::Index i) { return static_cast<double>(d.derived().coeff(i)); });
}

inline double degenerate_scale(const Eigen::VectorXd& x)
{
    const double m = x.cwiseAbs().maxCoeff();
    const double tol = 16.0 * std::numeric_limits<double>::epsilon() * m;
    return static_cast<double>(x.size()) * tol * tol;
}

} // namespace detail

// Sample Pearson correlation. Zero-variance input gives 0 flagged degenerate.
template <class DX, class DY>
Estimate pearson(const Eigen::DenseBase<DX>& x, const Eigen::DenseBase<DY>& y)
{
    if (x.size() != y.size()) {
        throw Error("pearson: length mismatch (" + std::to_string(x.size()) + " vs "
                    + std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) {
        throw Error("pearson: need at least 3 observations");
    }
    const Eigen::VectorXd xv = detail::materialize(x);
    const Eigen::VectorXd yv = detail::materialize(y);
    const Eigen::ArrayXd dx = xv.array() - xv.mean();
    const Eigen::ArrayXd dy = yv.array() - yv.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (sxx <= detail::degenerate_scale(xv) || syy <= detail::degenerate_scale(yv)) {
        return {0.0, true};
    }
    const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
    return {std::clamp(r, -1.0, 1.0), false};
}

// u.v / (|u||v|). A zero vector gives 0 flagged degenerate.
template <class DU, class DV>
Estimate cosine(const Eigen::DenseBase<DU>& u, const Eigen::DenseBase<DV>& v)
{
    if (u.size() != v.size()) {
        throw Error("cosine: length mismatch");
    }
    const Eigen::VectorXd ua = detail::materialize(u);
    const Eigen::VectorXd va = detail::materialize(v);
    const double nu = ua.norm();
    const double nv = va.norm();
    if (!(nu > 0.0) || !(nv > 0.0)) {
        return {0.0, true};
    }
    return {std::clamp(ua.dot(va) / (nu * nv), -1.0, 1.0), false};
}

struct CorrelationMatrix {
    Matrix values;
    BoolMatrix degenerate;
};

// Pearson correlation between every column of x and every column of y
// (same row count). Degenerate columns contribute 0 entries.
CorrelationMatrix correlate_columns(const Matrix& x, const Matrix& y);

// Two-sided p-value of a sample correlation under H0: rho = 0, using the
// Student-t distribution with n-2 degrees of freedom.
double pearson_pvalue(double r, std::size_t n);

// Benjamini-Yekutieli FDR control. Returns the acceptance mask in input order.
std::vector<bool> by_stepdown(std::span<const double> pvalues, double q);

// Harmonic number c(m) = sum_{j=1..m} 1/j.
double harmonic(std::size_t m);

// Discretizes a column: columns with at most `bins` distinct values use those
// values as levels (binary columns get their two natural levels); otherwise
// equal-frequency bins with cut points at empirical quantiles.
std::vector<int> discretize(const Eigen::Ref<const Vector>& x, int bins);

// Shannon entropy (nats) of a discrete code vector.
double entropy(std::span<const int> codes);

// Plug-in mutual information (nats) of two discrete code vectors.
double mutual_information_codes(std::span<const int> x, std::span<const int> y);

// Plug-in mutual information on the discretized columns. A constant column
// gives 0 flagged degenerate.
Estimate mutual_information(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                            int bins = 8);

struct RankSumResult {
    double statistic = 0.0; // Mann-Whitney U of the first sample
    double z = 0.0;
    double p_value = 1.0;
};

// Midranks for ties (1-based).
Vector midranks(std::span<const double> values);

// Wilcoxon rank-sum test, two-sided, normal approximation with tie-corrected
// variance and continuity correction.
RankSumResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b);

double normal_sf(double z);

double mean(std::span<const double> v);
double sample_sd(std::span<const double> v);

} // namespace chimatch

#endif // CHIMATCH_STATS_HPP
