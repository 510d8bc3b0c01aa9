#include "chimatch/kang.hpp"

#include "chimatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace chimatch {

std::string to_string(KangMetric m)
{
    return m == KangMetric::euclidean ? "euclidean" : "normal";
}

KangMetric kang_metric_from_string(const std::string& s)
{
    if (s == "euclidean") {
        return KangMetric::euclidean;
    }
    if (s == "normal") {
        return KangMetric::normal;
    }
    throw Error("unknown Kang metric '" + s + "'");
}

void KangConfig::validate() const
{
    if (iterations < 1) {
        throw Error("kang: iterations must be at least 1");
    }
    if (!(alpha > 0.0)) {
        throw Error("kang: alpha must be positive");
    }
    if (bins < 2) {
        throw Error("kang: need at least 2 bins");
    }
}

Matrix mi_matrix(const Dataset& ds, int bins)
{
    const auto p = static_cast<Eigen::Index>(ds.cols());
    if (p < 2) {
        throw Error("mi_matrix: need at least 2 columns");
    }
    std::vector<std::vector<int>> codes;
    codes.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        codes.push_back(discretize(ds.values().col(j), bins));
    }
    Matrix m(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto& ci = codes[static_cast<std::size_t>(i)];
        m(i, i) = entropy(ci);
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double v = mutual_information_codes(ci, codes[static_cast<std::size_t>(j)]);
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return m;
}

Dataset pad_with_knockoffs(const Dataset& ds, std::size_t count, std::uint64_t seed)
{
    if (count == 0) {
        return ds;
    }
    if (ds.cols() == 0) {
        throw Error("pad_with_knockoffs: dataset has no columns");
    }
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(ds.rows());
    Matrix v(n, static_cast<Eigen::Index>(ds.cols() + count));
    v.leftCols(static_cast<Eigen::Index>(ds.cols())) = ds.values();
    auto feats = ds.features();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t src = c % ds.cols();
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        const auto dst = static_cast<Eigen::Index>(ds.cols() + c);
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i, dst) = ds.values()(order[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(src));
        }
        FeatureMeta f = ds.feature(src);
        f.name = "knockoff" + std::to_string(c);
        f.imputed_rows.clear();
        f.origin = FeatureOrigin::encoded;
        feats.push_back(std::move(f));
    }
    return Dataset(ds.name(), std::move(v), std::move(feats), ds.mapped_count());
}

Matrix pad_mi_matrix(const Matrix& mi, Eigen::Index size, std::uint64_t seed)
{
    const Eigen::Index p = mi.rows();
    if (size <= p) {
        return mi;
    }
    std::vector<double> off;
    std::vector<double> diag;
    for (Eigen::Index i = 0; i < p; ++i) {
        diag.push_back(mi(i, i));
        for (Eigen::Index j = i + 1; j < p; ++j) {
            off.push_back(mi(i, j));
        }
    }
    if (off.empty()) {
        off.push_back(0.0);
    }
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick_off(0, off.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_diag(0, diag.size() - 1);
    Matrix out(size, size);
    out.topLeftCorner(p, p) = mi;
    for (Eigen::Index i = p; i < size; ++i) {
        out(i, i) = diag[pick_diag(rng)];
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = off[pick_off(rng)];
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

namespace {

class Objective {
public:
    Objective(const Matrix& a, const Matrix& b, const KangConfig& cfg) : a_(a), b_(b), cfg_(cfg) {}

    double term(Eigen::Index i, Eigen::Index j, const std::vector<std::size_t>& pi) const
    {
        const double d = a_(i, j) - b_(static_cast<Eigen::Index>(pi[static_cast<std::size_t>(i)]),
                                       static_cast<Eigen::Index>(pi[static_cast<std::size_t>(j)]));
        return cfg_.metric == KangMetric::euclidean ? d * d : std::exp(-d * d / cfg_.alpha);
    }

    // larger is better
    double score(double raw) const { return cfg_.metric == KangMetric::euclidean ? -raw : raw; }

    double total(const std::vector<std::size_t>& pi) const
    {
        double s = 0.0;
        const auto n = a_.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                s += term(i, j, pi);
            }
        }
        return s;
    }

    // sum of the terms that involve u or v
    double partial(Eigen::Index u, Eigen::Index v, const std::vector<std::size_t>& pi) const
    {
        double s = 0.0;
        for (Eigen::Index j = 0; j < a_.rows(); ++j) {
            if (j != u && j != v) {
                s += term(u, j, pi) + term(v, j, pi);
            }
        }
        return s;
    }

    double contribution(Eigen::Index i, const std::vector<std::size_t>& pi) const
    {
        double s = 0.0;
        for (Eigen::Index j = 0; j < a_.rows(); ++j) {
            if (j != i) {
                s += term(i, j, pi);
            }
        }
        return s;
    }

private:
    const Matrix& a_;
    const Matrix& b_;
    const KangConfig& cfg_;
};

} // namespace

double kang_objective(const Matrix& mi_a, const Matrix& mi_b, const std::vector<std::size_t>& assignment,
                      const KangConfig& cfg)
{
    if (mi_a.rows() != mi_b.rows() || static_cast<std::size_t>(mi_a.rows()) != assignment.size()) {
        throw Error("kang_objective: size mismatch");
    }
    return Objective(mi_a, mi_b, cfg).total(assignment);
}

KangResult kang_match(const Matrix& mi_a_in, const Matrix& mi_b_in,
                      const std::vector<std::pair<std::size_t, std::size_t>>& known, const KangConfig& cfg)
{
    cfg.validate();
    if (mi_a_in.rows() != mi_a_in.cols() || mi_b_in.rows() != mi_b_in.cols()) {
        throw Error("kang_match: MI matrices must be square");
    }
    const auto pa = static_cast<std::size_t>(mi_a_in.rows());
    const auto pb = static_cast<std::size_t>(mi_b_in.rows());
    std::set<std::size_t> ka;
    std::set<std::size_t> kb;
    for (const auto& [i, j] : known) {
        if (i >= pa || j >= pb) {
            throw Error("kang_match: known pair (" + std::to_string(i) + ", " + std::to_string(j)
                        + ") references a missing feature");
        }
        if (!ka.insert(i).second || !kb.insert(j).second) {
            throw Error("kang_match: feature fixed twice by known pairs");
        }
    }
    const auto n = static_cast<Eigen::Index>(std::max(pa, pb));
    const Matrix mi_a = pad_mi_matrix(mi_a_in, n, derive_seed(cfg.seed, 31));
    const Matrix mi_b = pad_mi_matrix(mi_b_in, n, derive_seed(cfg.seed, 32));
    const Objective obj(mi_a, mi_b, cfg);

    std::vector<std::size_t> free_a;
    std::vector<std::size_t> free_b;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        if (!ka.contains(i)) {
            free_a.push_back(i);
        }
        if (!kb.contains(i)) {
            free_b.push_back(i);
        }
    }

    KangResult best;
    best.metric = cfg.metric;
    best.restarts = std::max(1, cfg.iterations / 500);
    double best_score = -std::numeric_limits<double>::infinity();
    Rng rng(derive_seed(cfg.seed, 33));
    for (int r = 0; r < best.restarts; ++r) {
        int budget = cfg.iterations / best.restarts + (r < cfg.iterations % best.restarts ? 1 : 0);
        std::vector<std::size_t> pi(static_cast<std::size_t>(n));
        for (const auto& [i, j] : known) {
            pi[i] = j;
        }
        auto targets = free_b;
        std::shuffle(targets.begin(), targets.end(), rng);
        for (std::size_t t = 0; t < free_a.size(); ++t) {
            pi[free_a[t]] = targets[t];
        }
        double current = obj.total(pi);
        if (r == 0) {
            best.initial_objective = current;
        }
        --budget; // the initial assignment is the first iteration
        if (free_a.size() >= 2) {
            std::uniform_int_distribution<std::size_t> pick(0, free_a.size() - 1);
            for (; budget > 0; --budget) {
                const std::size_t s1 = pick(rng);
                std::size_t s2 = pick(rng);
                while (s2 == s1) {
                    s2 = pick(rng);
                }
                const auto u = static_cast<Eigen::Index>(free_a[s1]);
                const auto v = static_cast<Eigen::Index>(free_a[s2]);
                const double before = obj.partial(u, v, pi);
                std::swap(pi[static_cast<std::size_t>(u)], pi[static_cast<std::size_t>(v)]);
                const double after = obj.partial(u, v, pi);
                if (obj.score(after) > obj.score(before)) {
                    current += after - before;
                } else {
                    std::swap(pi[static_cast<std::size_t>(u)], pi[static_cast<std::size_t>(v)]);
                }
            }
        }
        current = obj.total(pi); // drop accumulated rounding
        if (obj.score(current) > best_score) {
            best_score = obj.score(current);
            best.objective = current;
            best.assignment = pi;
        }
    }
    return best;
}

std::vector<MatchProposal> kang_proposals(const Dataset& a_in, const Dataset& b_in, const KangConfig& cfg,
                                          KangResult* detail)
{
    cfg.validate();
    const std::size_t k = a_in.mapped_count();
    if (b_in.mapped_count() != k) {
        throw Error("kang: mapped counts differ");
    }
    if (a_in.unmapped_count() == 0 || b_in.unmapped_count() == 0) {
        return {};
    }
    const std::size_t pa = a_in.cols();
    const std::size_t pb = b_in.cols();
    const std::size_t n = std::max(pa, pb);
    const Dataset a = pad_with_knockoffs(a_in, n - pa, derive_seed(cfg.seed, 41));
    const Dataset b = pad_with_knockoffs(b_in, n - pb, derive_seed(cfg.seed, 42));
    const Matrix ma = mi_matrix(a, cfg.bins);
    const Matrix mb = mi_matrix(b, cfg.bins);
    std::vector<std::pair<std::size_t, std::size_t>> known;
    for (std::size_t j = 0; j < k; ++j) {
        known.emplace_back(j, j);
    }
    auto res = kang_match(ma, mb, known, cfg);
    const Objective obj(ma, mb, cfg);
    std::vector<MatchProposal> out;
    for (std::size_t i = k; i < pa; ++i) {
        const std::size_t j = res.assignment[i];
        if (j < k || j >= pb) {
            continue; // matched to a knock-off
        }
        MatchProposal p;
        p.feature_a = a.feature(i).name;
        p.feature_b = b.feature(j).name;
        p.similarity = obj.score(obj.contribution(static_cast<Eigen::Index>(i), res.assignment));
        p.accepted = true;
        p.p_value = std::numeric_limits<double>::quiet_NaN(); // not tested
        p.rank_of_choice = 0;
        out.push_back(std::move(p));
    }
    if (detail != nullptr) {
        *detail = std::move(res);
    }
    return out;
}

} // namespace chimatch
