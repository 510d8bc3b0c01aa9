#include "chimatch/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace chimatch {

std::string to_string(Family family)
{
    switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::two_cluster_gaussian: return "two_cluster_gaussian";
    case Family::binarized_two_cluster: return "binarized_two_cluster";
    case Family::independent_gaussian: return "independent_gaussian";
    }
    return "gaussian";
}

Family family_from_string(const std::string& s)
{
    for (auto f : {Family::gaussian, Family::two_cluster_gaussian, Family::binarized_two_cluster,
                   Family::independent_gaussian}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw Error("unknown generator family '" + s + "'");
}

std::string to_string(MapKind kind)
{
    switch (kind) {
    case MapKind::permutation: return "permutation";
    case MapKind::onto: return "onto";
    case MapKind::partial: return "partial";
    }
    return "permutation";
}

MapKind map_kind_from_string(const std::string& s)
{
    for (auto k : {MapKind::permutation, MapKind::onto, MapKind::partial}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw Error("unknown map kind '" + s + "'");
}

Matrix make_covariance(const CovarianceSpec& spec)
{
    if (spec.dim < 1 || spec.factor_dim < 1) {
        throw Error("make_covariance: dimensions must be positive");
    }
    if (spec.factor_dim > spec.dim) {
        throw Error("make_covariance: factor dimension exceeds data dimension");
    }
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> diag(1, 20);
    Matrix w(spec.dim, spec.factor_dim);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            w(i, j) = normal(rng);
        }
    }
    Matrix cov = w * w.transpose();
    for (int i = 0; i < spec.dim; ++i) {
        cov(i, i) += static_cast<double>(diag(rng));
    }
    // exact symmetry regardless of summation order
    return 0.5 * (cov + cov.transpose());
}

MixtureMeans draw_mixture_means(int dim, double low, double high, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(low, high);
    MixtureMeans m{Vector(dim), Vector(dim)};
    for (int i = 0; i < dim; ++i) {
        m.first(i) = unif(rng);
    }
    for (int i = 0; i < dim; ++i) {
        m.second(i) = unif(rng);
    }
    return m;
}

namespace {

Matrix gaussian_draws(std::size_t n, const Matrix& cov, Rng& rng)
{
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw Error("sample: covariance is not positive definite");
    }
    const Matrix lower = llt.matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(static_cast<Eigen::Index>(n), cov.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            z(i, j) = normal(rng);
        }
    }
    return z * lower.transpose();
}

} // namespace

Dataset sample(const GeneratorSpec& spec, const Matrix& cov, const std::string& name)
{
    if (spec.n_samples < 2) {
        throw Error("sample: need at least 2 samples");
    }
    if (spec.dim < 1) {
        throw Error("sample: dimension must be positive");
    }
    const bool independent = spec.family == Family::independent_gaussian;
    if (!independent && (cov.rows() != spec.dim || cov.cols() != spec.dim)) {
        throw Error("sample: covariance dimension does not match generator");
    }
    Rng rng(spec.seed);
    Matrix x;
    switch (spec.family) {
    case Family::independent_gaussian:
        x = gaussian_draws(spec.n_samples, Matrix::Identity(spec.dim, spec.dim), rng);
        break;
    case Family::gaussian:
        x = gaussian_draws(spec.n_samples, cov, rng);
        break;
    case Family::two_cluster_gaussian:
    case Family::binarized_two_cluster: {
        const auto means = draw_mixture_means(spec.dim, spec.mean_low, spec.mean_high, spec.param_seed);
        x = gaussian_draws(spec.n_samples, cov, rng);
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            x.row(i) += (coin(rng) ? means.first : means.second).transpose();
        }
        if (spec.family == Family::binarized_two_cluster) {
            // standardize, then threshold at 0
            const RowVector mu = x.colwise().mean();
            x = ((x.rowwise() - mu).array() > 0.0).cast<double>().matrix();
        }
        break;
    }
    }

    std::vector<FeatureMeta> feats(static_cast<std::size_t>(spec.dim));
    for (int j = 0; j < spec.dim; ++j) {
        auto& f = feats[static_cast<std::size_t>(j)];
        f.name = "v" + std::to_string(j);
        f.kind = spec.family == Family::binarized_two_cluster ? FeatureKind::binary : FeatureKind::continuous;
    }
    return Dataset(name, std::move(x), std::move(feats), 0);
}

void ScenarioSpec::validate() const
{
    std::set<std::string> a_seen;
    std::set<std::string> b_seen;
    for (const auto& [a, b] : gold_map) {
        if (!a_seen.insert(a).second || !b_seen.insert(b).second) {
            throw Error("scenario: gold map is not one-to-one");
        }
    }
    std::set<std::string> t_seen;
    for (const auto& [b, tag] : transformed_features) {
        if (!t_seen.insert(b).second) {
            throw Error("scenario: feature '" + b + "' transformed twice");
        }
    }
}

namespace {

std::vector<std::size_t> draw_subset(std::vector<std::size_t> pool, std::size_t count, Rng& rng)
{
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(count);
    return pool;
}

} // namespace

Scenario build_scenario(const Dataset& source_a, const Dataset& source_b, const ScenarioOptions& opt)
{
    if (source_a.cols() != source_b.cols()) {
        throw Error("build_scenario: sources must share the same columns");
    }
    const std::size_t dim = source_a.cols();
    switch (opt.map_kind) {
    case MapKind::permutation:
        if (opt.drop_a != 0 || opt.drop_b != 0) {
            throw Error("build_scenario: a permutation scenario drops no columns");
        }
        break;
    case MapKind::onto:
        if ((opt.drop_a == 0) == (opt.drop_b == 0)) {
            throw Error("build_scenario: an onto scenario drops columns from exactly one side");
        }
        break;
    case MapKind::partial:
        if (opt.drop_a == 0 || opt.drop_b == 0) {
            throw Error("build_scenario: a partial scenario drops columns from both sides");
        }
        break;
    }
    if (opt.drop_a + opt.drop_b + opt.k_mapped > dim) {
        throw Error("build_scenario: not enough shared columns for the mapped set");
    }
    if (opt.k_mapped < 1) {
        throw Error("build_scenario: need at least one mapped column");
    }
    if (!opt.force_dropped_from_a.empty() && opt.force_dropped_from_a.size() != opt.drop_a) {
        throw Error("build_scenario: forced drop list must match drop_a");
    }

    Rng trial_rng(derive_seed(opt.seed, static_cast<std::uint64_t>(opt.trial)));
    Rng perm_rng(derive_seed(opt.seed, static_cast<std::uint64_t>(opt.trial),
                             static_cast<std::uint64_t>(opt.permutation) + 1));

    std::set<std::size_t> reserved(opt.force_dropped_from_a.begin(), opt.force_dropped_from_a.end());
    reserved.insert(opt.force_transformed.begin(), opt.force_transformed.end());
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < dim; ++j) {
        if (!reserved.contains(j)) {
            pool.push_back(j);
        }
    }
    if (pool.size() < opt.k_mapped) {
        throw Error("build_scenario: forced choices leave too few mapped candidates");
    }
    auto mapped = draw_subset(pool, opt.k_mapped, trial_rng);
    std::set<std::size_t> mapped_set(mapped.begin(), mapped.end());

    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < dim; ++j) {
        if (!mapped_set.contains(j) && !reserved.contains(j)) {
            candidates.push_back(j);
        }
    }
    std::vector<std::size_t> dropped_from_a = opt.force_dropped_from_a;
    std::vector<std::size_t> dropped_from_b;
    {
        const std::size_t extra_a = opt.drop_a - dropped_from_a.size();
        if (extra_a + opt.drop_b > candidates.size()) {
            throw Error("build_scenario: inconsistent drop counts");
        }
        auto drawn = draw_subset(candidates, extra_a + opt.drop_b, perm_rng);
        dropped_from_a.insert(dropped_from_a.end(), drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(extra_a));
        dropped_from_b.assign(drawn.begin() + static_cast<std::ptrdiff_t>(extra_a), drawn.end());
    }
    std::set<std::size_t> drop_a_set(dropped_from_a.begin(), dropped_from_a.end());
    std::set<std::size_t> drop_b_set(dropped_from_b.begin(), dropped_from_b.end());

    // A: mapped first, then its remaining columns in source order
    std::vector<std::size_t> a_cols = mapped;
    for (std::size_t j = 0; j < dim; ++j) {
        if (!mapped_set.contains(j) && !drop_a_set.contains(j)) {
            a_cols.push_back(j);
        }
    }
    // B: mapped first, then its remaining columns in a random order
    std::vector<std::size_t> b_unmapped;
    for (std::size_t j = 0; j < dim; ++j) {
        if (!mapped_set.contains(j) && !drop_b_set.contains(j)) {
            b_unmapped.push_back(j);
        }
    }
    std::shuffle(b_unmapped.begin(), b_unmapped.end(), perm_rng);
    std::vector<std::size_t> b_cols = mapped;
    b_cols.insert(b_cols.end(), b_unmapped.begin(), b_unmapped.end());

    // square transform on shared unmapped columns of B
    std::vector<std::size_t> transformed = opt.force_transformed;
    if (transformed.size() < opt.transform_count) {
        std::vector<std::size_t> shared_unmapped;
        for (auto j : b_unmapped) {
            if (!drop_a_set.contains(j)
                && std::find(transformed.begin(), transformed.end(), j) == transformed.end()) {
                shared_unmapped.push_back(j);
            }
        }
        std::sort(shared_unmapped.begin(), shared_unmapped.end());
        const std::size_t need = opt.transform_count - transformed.size();
        if (need > shared_unmapped.size()) {
            throw Error("build_scenario: more transforms requested than shared unmapped columns");
        }
        auto drawn = draw_subset(shared_unmapped, need, perm_rng);
        transformed.insert(transformed.end(), drawn.begin(), drawn.end());
    }
    for (auto j : transformed) {
        if (mapped_set.contains(j) || drop_b_set.contains(j)) {
            throw Error("build_scenario: only unmapped columns present in B can be transformed");
        }
    }

    Dataset a = source_a.select_columns(a_cols, mapped.size()).with_name("A");
    Dataset b_raw = source_b.select_columns(b_cols, mapped.size());

    Matrix b_values = b_raw.values();
    auto b_feats = b_raw.features();
    std::map<std::size_t, std::string> b_name_of;
    for (std::size_t pos = 0; pos < b_cols.size(); ++pos) {
        const auto src = b_cols[pos];
        if (pos >= mapped.size()) {
            b_feats[pos].name = "b" + std::to_string(pos - mapped.size());
        }
        b_name_of[src] = b_feats[pos].name;
        if (std::find(transformed.begin(), transformed.end(), src) != transformed.end()) {
            auto col = b_values.col(static_cast<Eigen::Index>(pos));
            const double mu = col.mean();
            const double sd = std::sqrt((col.array() - mu).square().sum() / static_cast<double>(col.size() - 1));
            col = ((col.array() - mu) / (sd > 0.0 ? sd : 1.0)).square().matrix();
            b_feats[pos].kind = FeatureKind::continuous;
        }
    }
    Dataset b("B", std::move(b_values), std::move(b_feats), mapped.size());

    Scenario out{std::move(a), std::move(b), {}, {}};
    auto& spec = out.spec;
    spec.map_kind = opt.map_kind;
    spec.seed = opt.seed;
    spec.trial = opt.trial;
    spec.permutation = opt.permutation;
    for (auto j : mapped) {
        spec.mapped.push_back(source_a.feature(j).name);
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (mapped_set.contains(j) || drop_a_set.contains(j) || drop_b_set.contains(j)) {
            continue;
        }
        spec.gold_map.emplace_back(source_a.feature(j).name, b_name_of.at(j));
    }
    for (auto j : transformed) {
        spec.transformed_features.emplace_back(b_name_of.at(j), "square");
    }
    for (auto j : dropped_from_a) {
        spec.b_only.push_back(b_name_of.at(j));
    }
    for (auto j : dropped_from_b) {
        spec.a_only.push_back(source_a.feature(j).name);
    }
    spec.validate();

    std::vector<FeatureMeta> w_feats;
    Matrix w_vals(static_cast<Eigen::Index>(source_a.rows()), static_cast<Eigen::Index>(dropped_from_a.size()));
    for (std::size_t i = 0; i < dropped_from_a.size(); ++i) {
        const auto j = dropped_from_a[i];
        w_vals.col(static_cast<Eigen::Index>(i)) = source_a.column(j);
        FeatureMeta f = source_a.feature(j);
        f.name = b_name_of.at(j);
        w_feats.push_back(std::move(f));
    }
    out.a_withheld = Dataset("A_withheld", std::move(w_vals), std::move(w_feats), 0);
    return out;
}

} // namespace chimatch
