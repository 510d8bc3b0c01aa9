#include "chimatch/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <map>
#include <numeric>

namespace chimatch {

std::string to_string(SimilarityMode mode)
{
    switch (mode) {
    case SimilarityMode::pearson: return "pearson";
    case SimilarityMode::cosine: return "cosine";
    case SimilarityMode::mutual_information: return "mutual_information";
    case SimilarityMode::objective: return "objective";
    }
    return "pearson";
}

SimilarityMatrix SimilarityMatrix::transposed() const
{
    SimilarityMatrix t;
    t.row_label = col_label;
    t.col_label = row_label;
    t.row_ids = col_ids;
    t.col_ids = row_ids;
    t.values = values.transpose();
    t.degenerate = degenerate.transpose();
    t.mode = mode;
    return t;
}

void SimilarityMatrix::validate() const
{
    if (static_cast<std::size_t>(values.rows()) != row_ids.size()
        || static_cast<std::size_t>(values.cols()) != col_ids.size()) {
        throw Error("similarity matrix: value shape does not match feature ids");
    }
    if (degenerate.size() != 0
        && (degenerate.rows() != values.rows() || degenerate.cols() != values.cols())) {
        throw Error("similarity matrix: degenerate flags shape mismatch");
    }
    if (mode == SimilarityMode::pearson || mode == SimilarityMode::cosine) {
        if (values.size() > 0 && values.cwiseAbs().maxCoeff() > 1.0 + 1e-9) {
            throw Error("similarity matrix: correlation entries outside [-1,1]");
        }
    }
    if (mode == SimilarityMode::mutual_information) {
        if (values.size() > 0 && values.minCoeff() < 0.0) {
            throw Error("similarity matrix: negative mutual information");
        }
    }
}

CorrelationMatrix correlate_columns(const Matrix& x, const Matrix& y)
{
    if (x.rows() != y.rows()) {
        throw Error("correlate_columns: row count mismatch");
    }
    if (x.rows() < 3) {
        throw Error("correlate_columns: need at least 3 rows");
    }
    auto standardize = [](const Matrix& m, std::vector<bool>& degenerate) {
        Matrix s = m.rowwise() - m.colwise().mean();
        degenerate.assign(static_cast<std::size_t>(m.cols()), false);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double ss = s.col(j).squaredNorm();
            if (ss <= detail::degenerate_scale(m.col(j))) {
                s.col(j).setZero();
                degenerate[static_cast<std::size_t>(j)] = true;
            } else {
                s.col(j) /= std::sqrt(ss);
            }
        }
        return s;
    };
    std::vector<bool> dx;
    std::vector<bool> dy;
    const Matrix sx = standardize(x, dx);
    const Matrix sy = standardize(y, dy);
    CorrelationMatrix out;
    out.values = (sx.transpose() * sy).cwiseMax(-1.0).cwiseMin(1.0);
    out.degenerate.resize(x.cols(), y.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            out.degenerate(i, j) = dx[static_cast<std::size_t>(i)] || dy[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

double pearson_pvalue(double r, std::size_t n)
{
    if (n < 4) {
        throw Error("pearson_pvalue: need n >= 4");
    }
    if (std::isnan(r) || std::abs(r) > 1.0 + 1e-12) {
        throw Error("pearson_pvalue: |r| must not exceed 1");
    }
    const double ar = std::min(std::abs(r), 1.0);
    if (ar >= 1.0) {
        return 0.0;
    }
    const double df = static_cast<double>(n - 2);
    const double t = ar * std::sqrt(df / ((1.0 - ar) * (1.0 + ar)));
    const boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

double harmonic(std::size_t m)
{
    double c = 0.0;
    for (std::size_t j = m; j >= 1; --j) {
        c += 1.0 / static_cast<double>(j);
    }
    return c;
}

std::vector<bool> by_stepdown(std::span<const double> pvalues, double q)
{
    const std::size_t m = pvalues.size();
    std::vector<bool> mask(m, false);
    if (m == 0) {
        return mask;
    }
    if (!(q > 0.0 && q < 1.0)) {
        throw Error("by_stepdown: q must be in (0,1)");
    }
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error("by_stepdown: p-values must lie in [0,1]");
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    const double denom = static_cast<double>(m) * harmonic(m);
    std::size_t accepted = 0;
    for (std::size_t i = m; i >= 1; --i) {
        if (pvalues[order[i - 1]] <= static_cast<double>(i) * q / denom) {
            accepted = i;
            break;
        }
    }
    for (std::size_t i = 0; i < accepted; ++i) {
        mask[order[i]] = true;
    }
    return mask;
}

std::vector<int> discretize(const Eigen::Ref<const Vector>& x, int bins)
{
    if (bins < 2) {
        throw Error("discretize: need at least 2 bins");
    }
    const auto n = static_cast<std::size_t>(x.size());
    std::vector<double> sorted(x.data(), x.data() + n);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct;
    for (double v : sorted) {
        if (distinct.empty() || v != distinct.back()) {
            distinct.push_back(v);
            if (distinct.size() > static_cast<std::size_t>(bins)) {
                break;
            }
        }
    }
    std::vector<int> codes(n);
    if (distinct.size() <= static_cast<std::size_t>(bins)) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = std::lower_bound(distinct.begin(), distinct.end(), x(static_cast<Eigen::Index>(i)));
            codes[i] = static_cast<int>(it - distinct.begin());
        }
        return codes;
    }
    std::vector<double> cuts;
    for (int b = 1; b < bins; ++b) {
        const auto pos = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(bins);
        cuts.push_back(sorted[std::min(pos, n - 1)]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = std::upper_bound(cuts.begin(), cuts.end(), x(static_cast<Eigen::Index>(i)));
        codes[i] = static_cast<int>(it - cuts.begin());
    }
    return codes;
}

double entropy(std::span<const int> codes)
{
    if (codes.empty()) {
        return 0.0;
    }
    std::map<int, std::size_t> counts;
    for (int c : codes) {
        ++counts[c];
    }
    const double n = static_cast<double>(codes.size());
    double h = 0.0;
    for (const auto& [code, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information_codes(std::span<const int> x, std::span<const int> y)
{
    if (x.size() != y.size()) {
        throw Error("mutual_information: length mismatch");
    }
    if (x.empty()) {
        return 0.0;
    }
    const int nx = *std::max_element(x.begin(), x.end()) + 1;
    const int ny = *std::max_element(y.begin(), y.end()) + 1;
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(nx, ny);
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint(x[i], y[i]) += 1.0;
    }
    const double n = static_cast<double>(x.size());
    joint /= n;
    const Eigen::VectorXd px = joint.rowwise().sum();
    const Eigen::RowVectorXd py = joint.colwise().sum();
    double mi = 0.0;
    for (int a = 0; a < nx; ++a) {
        for (int b = 0; b < ny; ++b) {
            const double pab = joint(a, b);
            if (pab > 0.0) {
                mi += pab * std::log(pab / (px(a) * py(b)));
            }
        }
    }
    return std::max(mi, 0.0);
}

Estimate mutual_information(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, int bins)
{
    if (x.size() != y.size()) {
        throw Error("mutual_information: length mismatch");
    }
    if (x.size() == 0) {
        return {0.0, true};
    }
    const bool cx = x.maxCoeff() == x.minCoeff();
    const bool cy = y.maxCoeff() == y.minCoeff();
    if (cx || cy) {
        return {0.0, true};
    }
    const auto codes_x = discretize(x, bins);
    const auto codes_y = discretize(y, bins);
    return {mutual_information_codes(codes_x, codes_y), false};
}

Vector midranks(std::span<const double> values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Vector ranks(static_cast<Eigen::Index>(n));
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks(static_cast<Eigen::Index>(order[k])) = r;
        }
        i = j + 1;
    }
    return ranks;
}

double normal_sf(double z)
{
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

RankSumResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 3 || b.size() < 3) {
        throw Error("wilcoxon_ranksum: each sample needs at least 3 values");
    }
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const Vector ranks = midranks(pooled);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double big_n = na + nb;
    const double rank_sum_a = ranks.head(static_cast<Eigen::Index>(a.size())).sum();

    RankSumResult out;
    out.statistic = rank_sum_a - na * (na + 1.0) / 2.0;

    // tie correction: sum over tie groups of t^3 - t
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if (!(var > 0.0)) {
        out.z = 0.0;
        out.p_value = 1.0;
        return out;
    }
    const double dev = std::max(0.0, std::abs(out.statistic - mu) - 0.5);
    out.z = dev / std::sqrt(var);
    out.p_value = std::min(1.0, 2.0 * normal_sf(out.z));
    return out;
}

double mean(std::span<const double> v)
{
    if (v.empty()) {
        return 0.0;
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v)
{
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace chimatch
