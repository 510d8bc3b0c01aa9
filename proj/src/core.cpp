#include "chimatch/core.hpp"

#include "chimatch/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

namespace chimatch {

void emit_warning(Diagnostics* diag, std::string msg)
{
    if (diag != nullptr) {
        diag->warn(std::move(msg));
    } else {
        log::warn(msg);
    }
}

std::string to_string(FeatureKind kind)
{
    switch (kind) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::binary: return "binary";
    case FeatureKind::onehot_member: return "onehot";
    }
    return "continuous";
}

Dataset::Dataset(std::string name, Matrix values, std::vector<FeatureMeta> features,
                 std::size_t mapped_count)
    : name_(std::move(name))
    , values_(std::move(values))
    , features_(std::move(features))
    , mapped_count_(mapped_count)
{
    validate();
}

void Dataset::validate() const
{
    if (features_.size() != cols()) {
        throw Error("dataset '" + name_ + "': " + std::to_string(features_.size())
                    + " feature descriptors for " + std::to_string(cols()) + " columns");
    }
    if (mapped_count_ > cols()) {
        throw Error("dataset '" + name_ + "': mapped_count exceeds column count");
    }
    std::unordered_set<std::string> seen;
    for (const auto& f : features_) {
        if (!seen.insert(f.name).second) {
            throw Error("dataset '" + name_ + "': duplicate feature name '" + f.name + "'");
        }
    }
    for (std::size_t j = 0; j < mapped_count_; ++j) {
        if (!(features_[j].certainty_weight > 0.0)) {
            throw Error("dataset '" + name_ + "': mapped feature '" + features_[j].name
                        + "' needs a positive certainty weight");
        }
    }
}

std::optional<std::size_t> Dataset::find(const std::string& feature_name) const
{
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].name == feature_name) {
            return j;
        }
    }
    return std::nullopt;
}

std::size_t Dataset::index_of(const std::string& feature_name) const
{
    if (auto j = find(feature_name)) {
        return *j;
    }
    throw Error("dataset '" + name_ + "' has no feature '" + feature_name + "'");
}

std::vector<std::string> Dataset::feature_names() const
{
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) {
        out.push_back(f.name);
    }
    return out;
}

std::vector<std::string> Dataset::mapped_names() const
{
    auto all = feature_names();
    all.resize(mapped_count_);
    return all;
}

std::vector<std::string> Dataset::unmapped_names() const
{
    auto all = feature_names();
    return {all.begin() + static_cast<std::ptrdiff_t>(mapped_count_), all.end()};
}

Vector Dataset::mapped_weights() const
{
    Vector w(static_cast<Eigen::Index>(mapped_count_));
    for (std::size_t k = 0; k < mapped_count_; ++k) {
        w(static_cast<Eigen::Index>(k)) = features_[k].certainty_weight;
    }
    return w;
}

bool Dataset::has_missing() const
{
    return values_.hasNaN();
}

Dataset Dataset::with_name(std::string name) const
{
    Dataset out = *this;
    out.name_ = std::move(name);
    return out;
}

Dataset Dataset::with_values(Matrix values) const
{
    return Dataset(name_, std::move(values), features_, mapped_count_);
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const
{
    Matrix v(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= this->rows()) {
            throw Error("row index out of range");
        }
        v.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
    }
    auto feats = features_;
    for (auto& f : feats) {
        f.imputed_rows.clear();
    }
    return Dataset(name_, std::move(v), std::move(feats), mapped_count_);
}

Dataset Dataset::select_columns(std::span<const std::size_t> cols, std::size_t mapped_count) const
{
    Matrix v(values_.rows(), static_cast<Eigen::Index>(cols.size()));
    std::vector<FeatureMeta> feats;
    feats.reserve(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        v.col(static_cast<Eigen::Index>(j)) = values_.col(static_cast<Eigen::Index>(cols[j]));
        feats.push_back(features_.at(cols[j]));
    }
    return Dataset(name_, std::move(v), std::move(feats), mapped_count);
}

Dataset Dataset::with_mapped_count(std::size_t k) const
{
    return Dataset(name_, values_, features_, k);
}

Dataset Dataset::with_certainty_weights(const std::map<std::string, double>& weights) const
{
    auto feats = features_;
    for (const auto& [name, w] : weights) {
        feats.at(index_of(name)).certainty_weight = w;
    }
    return Dataset(name_, values_, std::move(feats), mapped_count_);
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

bool all_binary(const std::vector<std::optional<double>>& col)
{
    bool any = false;
    for (const auto& v : col) {
        if (v) {
            any = true;
            if (*v != 0.0 && *v != 1.0) {
                return false;
            }
        }
    }
    return any;
}

} // namespace

Dataset one_hot_encode(const RawTable& data, Diagnostics* diag)
{
    const std::size_t n = data.rows();
    std::vector<FeatureMeta> feats;
    std::vector<Vector> cols;

    for (const auto& col : data.columns) {
        if (col.size() != n) {
            throw Error("column '" + col.name + "' has inconsistent length");
        }
        if (!col.categorical) {
            Vector v(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                v(static_cast<Eigen::Index>(i)) = col.numeric[i] ? *col.numeric[i] : nan;
            }
            FeatureMeta meta;
            meta.name = col.name;
            meta.kind = all_binary(col.numeric) ? FeatureKind::binary : FeatureKind::continuous;
            feats.push_back(std::move(meta));
            cols.push_back(std::move(v));
            continue;
        }

        std::set<std::string> levels;
        for (const auto& t : col.text) {
            if (t) {
                levels.insert(*t);
            }
        }
        if (levels.empty()) {
            throw Error("categorical column '" + col.name + "' has no observed values");
        }
        if (levels.size() == 1) {
            emit_warning(diag, "categorical column '" + col.name
                                   + "' has a single level; encoded column is constant");
        }
        for (const auto& level : levels) {
            Vector v(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const auto& t = col.text[i];
                v(static_cast<Eigen::Index>(i)) = t ? (*t == level ? 1.0 : 0.0) : nan;
            }
            FeatureMeta meta;
            meta.name = col.name + "=" + level;
            meta.kind = FeatureKind::onehot_member;
            meta.origin = FeatureOrigin::encoded;
            meta.parent = col.name;
            meta.level = level;
            feats.push_back(std::move(meta));
            cols.push_back(std::move(v));
        }
    }

    Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        values.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    return Dataset(data.name, std::move(values), std::move(feats), 0);
}

Dataset unit_norm(const Dataset& ds, Diagnostics* diag)
{
    Matrix v = ds.values();
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        if (ds.feature(j).kind != FeatureKind::continuous) {
            continue;
        }
        auto col = v.col(static_cast<Eigen::Index>(j));
        const double norm = col.norm();
        if (!(norm > 0.0)) {
            emit_warning(diag, "feature '" + ds.feature(j).name
                                   + "' is all zero; left unnormalized");
            continue;
        }
        col /= norm;
    }
    return ds.with_values(std::move(v));
}

Dataset impute_simple(const Dataset& ds)
{
    Matrix v = ds.values();
    auto feats = ds.features();
    const auto n = v.rows();

    auto missing_rows = [&](Eigen::Index j) {
        std::vector<std::size_t> rows;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(v(i, j))) {
                rows.push_back(static_cast<std::size_t>(i));
            }
        }
        return rows;
    };

    // onehot groups are imputed jointly so each row still sums to one
    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (std::size_t j = 0; j < feats.size(); ++j) {
        if (feats[j].kind == FeatureKind::onehot_member) {
            groups[feats[j].parent].push_back(static_cast<Eigen::Index>(j));
        }
    }

    for (std::size_t jj = 0; jj < feats.size(); ++jj) {
        const auto j = static_cast<Eigen::Index>(jj);
        auto& meta = feats[jj];
        if (meta.kind == FeatureKind::onehot_member) {
            continue;
        }
        auto rows = missing_rows(j);
        if (rows.empty()) {
            continue;
        }
        if (rows.size() == static_cast<std::size_t>(n)) {
            throw Error("feature '" + meta.name + "' is entirely missing");
        }
        double fill = 0.0;
        double sum = 0.0;
        Eigen::Index count = 0;
        Eigen::Index ones = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isnan(v(i, j))) {
                sum += v(i, j);
                ++count;
                ones += v(i, j) == 1.0 ? 1 : 0;
            }
        }
        if (meta.kind == FeatureKind::binary) {
            // ties go to 1
            fill = (2 * ones >= count) ? 1.0 : 0.0;
        } else {
            fill = sum / static_cast<double>(count);
        }
        for (auto i : rows) {
            v(static_cast<Eigen::Index>(i), j) = fill;
        }
        meta.imputed_rows = std::move(rows);
    }

    for (const auto& [parent, members] : groups) {
        std::vector<std::size_t> rows;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(v(i, members.front()))) {
                rows.push_back(static_cast<std::size_t>(i));
            }
        }
        if (rows.empty()) {
            continue;
        }
        if (rows.size() == static_cast<std::size_t>(n)) {
            throw Error("feature '" + parent + "' is entirely missing");
        }
        Eigen::Index best = members.front();
        double best_count = -1.0;
        for (auto j : members) {
            double c = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                c += std::isnan(v(i, j)) ? 0.0 : v(i, j);
            }
            if (c > best_count) {
                best_count = c;
                best = j;
            }
        }
        for (auto i : rows) {
            for (auto j : members) {
                v(static_cast<Eigen::Index>(i), j) = j == best ? 1.0 : 0.0;
            }
        }
        for (auto j : members) {
            feats[static_cast<std::size_t>(j)].imputed_rows = rows;
        }
    }

    return Dataset(ds.name(), std::move(v), std::move(feats), ds.mapped_count());
}

Dataset reorder_mapped_first(const Dataset& ds, std::span<const std::string> mapped)
{
    std::vector<std::size_t> order;
    std::vector<bool> taken(ds.cols(), false);
    for (const auto& name : mapped) {
        const auto j = ds.index_of(name);
        if (taken[j]) {
            throw Error("feature '" + name + "' listed twice in mapped set");
        }
        taken[j] = true;
        order.push_back(j);
    }
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        if (!taken[j]) {
            order.push_back(j);
        }
    }
    return ds.select_columns(order, mapped.size());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_rows(std::size_t n, double holdout_fraction, std::uint64_t seed)
{
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
        throw Error("holdout fraction must be in [0,1)");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
    std::vector<std::size_t> hold(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(hold)};
}

} // namespace chimatch
