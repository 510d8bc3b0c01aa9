#include "chimatch/kmf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace chimatch {

std::vector<Fingerprint> fingerprints(const Dataset& ds)
{
    const std::size_t k = ds.mapped_count();
    if (k == 0) {
        throw Error("fingerprints: dataset '" + ds.name() + "' has no mapped columns");
    }
    if (ds.rows() < 3) {
        throw Error("fingerprints: need at least 3 rows");
    }
    const Matrix mapped = ds.mapped_block();
    const Matrix unmapped = ds.unmapped_block();
    const auto c = correlate_columns(unmapped, mapped);
    std::vector<Fingerprint> out;
    for (std::size_t u = 0; u < ds.unmapped_count(); ++u) {
        const auto row = static_cast<Eigen::Index>(u);
        Fingerprint fp;
        fp.feature = ds.feature(k + u).name;
        fp.values = c.values.row(row).transpose();
        fp.degenerate.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            fp.degenerate[j] = c.degenerate(row, static_cast<Eigen::Index>(j));
        }
        out.push_back(std::move(fp));
    }
    return out;
}

SimilarityMatrix kmf_similarity(const std::vector<Fingerprint>& a, const std::vector<Fingerprint>& b,
                                const std::string& label_a, const std::string& label_b)
{
    SimilarityMatrix s;
    s.row_label = label_a;
    s.col_label = label_b;
    s.mode = SimilarityMode::cosine;
    const auto na = static_cast<Eigen::Index>(a.size());
    const auto nb = static_cast<Eigen::Index>(b.size());
    s.values = Matrix::Zero(na, nb);
    s.degenerate = BoolMatrix::Constant(na, nb, false);
    for (const auto& f : a) {
        s.row_ids.push_back(f.feature);
    }
    for (const auto& f : b) {
        s.col_ids.push_back(f.feature);
    }
    for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = 0; j < nb; ++j) {
            const auto& fa = a[static_cast<std::size_t>(i)].values;
            const auto& fb = b[static_cast<std::size_t>(j)].values;
            if (fa.size() != fb.size()) {
                throw Error("kmf_similarity: fingerprint lengths differ (" + std::to_string(fa.size()) + " vs "
                            + std::to_string(fb.size()) + ")");
            }
            const auto e = cosine(fa, fb);
            s.values(i, j) = e.value;
            s.degenerate(i, j) = e.degenerate;
        }
    }
    return s;
}

SimilarityMatrix kmf_similarity(const Dataset& a, const Dataset& b)
{
    if (a.mapped_count() != b.mapped_count()) {
        throw Error("kmf_similarity: mapped counts differ");
    }
    return kmf_similarity(fingerprints(a), fingerprints(b), a.name(), b.name());
}

std::vector<MatchProposal> select_promotions(const std::vector<MatchProposal>& proposals,
                                             const PromotionPolicy& policy)
{
    std::vector<MatchProposal> eligible;
    for (const auto& p : proposals) {
        if (!policy.require_accepted || p.accepted) {
            eligible.push_back(p);
        }
    }
    std::stable_sort(eligible.begin(), eligible.end(),
                     [](const MatchProposal& x, const MatchProposal& y) { return x.similarity > y.similarity; });
    if (policy.kind == PromotionPolicy::Kind::threshold) {
        std::erase_if(eligible, [&](const MatchProposal& p) { return !(p.similarity >= policy.value); });
        return eligible;
    }
    if (!(policy.value >= 0.0 && policy.value <= 1.0)) {
        throw Error("promote: top fraction must lie in [0,1]");
    }
    const auto take = static_cast<std::size_t>(std::ceil(policy.value * static_cast<double>(eligible.size()) - 1e-12));
    eligible.resize(std::min(take, eligible.size()));
    return eligible;
}

Dataset extend_mapped(const Dataset& ds, const std::vector<std::string>& names)
{
    auto order = ds.mapped_names();
    order.insert(order.end(), names.begin(), names.end());
    return reorder_mapped_first(ds, order);
}

Promotion promote_matches(const Dataset& a, const Dataset& b, const std::vector<MatchProposal>& proposals,
                          const PromotionPolicy& policy)
{
    const auto selected = select_promotions(proposals, policy);
    const auto mapped_a = a.mapped_names();
    const auto mapped_b = b.mapped_names();
    const std::set<std::string> ma(mapped_a.begin(), mapped_a.end());
    const std::set<std::string> mb(mapped_b.begin(), mapped_b.end());
    std::set<std::string> seen_a;
    std::set<std::string> seen_b;
    Promotion out;
    std::vector<std::string> names_a;
    std::vector<std::string> names_b;
    for (const auto& p : selected) {
        if (ma.contains(p.feature_a) || mb.contains(p.feature_b)) {
            throw Error("promote: (" + p.feature_a + ", " + p.feature_b + ") involves an already-mapped feature");
        }
        if (!seen_a.insert(p.feature_a).second || !seen_b.insert(p.feature_b).second) {
            throw Error("promote: feature selected twice in (" + p.feature_a + ", " + p.feature_b + ")");
        }
        names_a.push_back(p.feature_a);
        names_b.push_back(p.feature_b);
        out.promoted.emplace_back(p.feature_a, p.feature_b);
    }
    out.a = extend_mapped(a, names_a);
    out.b = extend_mapped(b, names_b);
    return out;
}

namespace {

struct Standardized {
    Matrix z;
    RowVector mean;
    RowVector sd;
};

Standardized standardize(const Matrix& x)
{
    Standardized s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean();
    s.z = x.rowwise() - s.mean;
    s.sd = (s.z.array().square().colwise().sum() / std::max(1.0, n - 1.0)).sqrt();
    for (Eigen::Index j = 0; j < s.sd.size(); ++j) {
        if (!(s.sd(j) > 0.0)) {
            s.sd(j) = 1.0;
        }
    }
    s.z.array().rowwise() /= s.sd.array();
    return s;
}

} // namespace

Dataset linear_translate(const Dataset& b_train, const Dataset& a_rows, double ridge)
{
    const std::size_t k = b_train.mapped_count();
    if (k == 0 || a_rows.mapped_count() != k) {
        throw Error("linear_translate: datasets need the same nonzero mapped count");
    }
    const auto mb = standardize(b_train.mapped_block());
    const auto ub = standardize(b_train.unmapped_block());
    const auto ma = standardize(a_rows.mapped_block());
    const auto kk = static_cast<Eigen::Index>(k);
    Matrix gram = mb.z.transpose() * mb.z;
    gram.diagonal().array() += ridge * static_cast<double>(b_train.rows());
    const Matrix beta = gram.ldlt().solve(mb.z.transpose() * ub.z);
    Matrix out(ma.z.rows(), static_cast<Eigen::Index>(b_train.cols()));
    out.leftCols(kk) = ma.z;
    out.rightCols(static_cast<Eigen::Index>(b_train.unmapped_count())) = ma.z * beta;
    auto feats = b_train.features();
    for (auto& f : feats) {
        f.imputed_rows.clear();
    }
    return Dataset(a_rows.name() + "->" + b_train.name(), std::move(out), std::move(feats), k);
}

void write_fingerprints_csv(std::ostream& os, const std::vector<Fingerprint>& fps,
                            const std::vector<std::string>& mapped_names)
{
    os << "feature";
    for (const auto& m : mapped_names) {
        os << ',' << m;
    }
    os << '\n';
    for (const auto& fp : fps) {
        if (static_cast<std::size_t>(fp.values.size()) != mapped_names.size()) {
            throw Error("write_fingerprints_csv: fingerprint length does not match mapped names");
        }
        os << fp.feature;
        for (Eigen::Index j = 0; j < fp.values.size(); ++j) {
            os << ',' << fp.values(j);
        }
        os << '\n';
    }
}

} // namespace chimatch
