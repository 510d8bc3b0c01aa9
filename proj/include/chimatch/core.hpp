#ifndef CHIMATCH_CORE_HPP
#define CHIMATCH_CORE_HPP

#include "chimatch/types.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

enum class FeatureKind { continuous, binary, onehot_member };
enum class FeatureOrigin { raw, encoded };

std::string to_string(FeatureKind kind);

struct FeatureMeta {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    FeatureOrigin origin = FeatureOrigin::raw;
    // set for onehot members only
    std::string parent;
    std::string level;
    // only meaningful for mapped columns
    double certainty_weight = 1.0;
    // rows filled in by imputation
    std::vector<std::size_t> imputed_rows;

    bool is_binary_like() const { return kind != FeatureKind::continuous; }
};

// Numeric table with feature metadata. The first mapped_count columns are the
// known-mapped features, stored in the same order in every dataset of a pair.
// Values are n rows by p columns. Missing entries are NaN until imputed.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::string name, Matrix values, std::vector<FeatureMeta> features,
            std::size_t mapped_count = 0);

    const std::string& name() const { return name_; }
    const Matrix& values() const { return values_; }
    const std::vector<FeatureMeta>& features() const { return features_; }
    const FeatureMeta& feature(std::size_t j) const { return features_.at(j); }
    std::size_t mapped_count() const { return mapped_count_; }
    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t unmapped_count() const { return cols() - mapped_count_; }

    std::optional<std::size_t> find(const std::string& feature_name) const;
    std::size_t index_of(const std::string& feature_name) const;
    std::vector<std::string> feature_names() const;
    std::vector<std::string> mapped_names() const;
    std::vector<std::string> unmapped_names() const;
    auto column(std::size_t j) const { return values_.col(static_cast<Eigen::Index>(j)); }
    auto column(const std::string& feature_name) const { return column(index_of(feature_name)); }

    // Known-mapped block and the remainder, as views.
    auto mapped_block() const
    {
        return values_.leftCols(static_cast<Eigen::Index>(mapped_count_));
    }
    auto unmapped_block() const
    {
        return values_.rightCols(static_cast<Eigen::Index>(unmapped_count()));
    }
    Vector mapped_weights() const;

    bool has_missing() const;

    Dataset with_name(std::string name) const;
    Dataset with_values(Matrix values) const;
    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset select_columns(std::span<const std::size_t> cols, std::size_t mapped_count) const;
    Dataset with_mapped_count(std::size_t k) const;
    Dataset with_certainty_weights(const std::map<std::string, double>& weights) const;

private:
    void validate() const;

    std::string name_;
    Matrix values_;
    std::vector<FeatureMeta> features_;
    std::size_t mapped_count_ = 0;
};

// Table as read from a file, before encoding.
struct RawColumn {
    std::string name;
    bool categorical = false;
    std::vector<std::optional<double>> numeric;
    std::vector<std::optional<std::string>> text;

    std::size_t size() const { return categorical ? text.size() : numeric.size(); }
};

struct RawTable {
    std::string name;
    std::vector<RawColumn> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

// Expands every categorical column with m observed levels into m binary
// columns named "<column>=<level>", levels sorted lexicographically.
// Numeric columns pass through; observed values all in {0,1} mark them binary.
// Missing cells stay NaN for impute_simple.
Dataset one_hot_encode(const RawTable& data, Diagnostics* diag = nullptr);

// Scales continuous columns to unit Euclidean norm. Binary and onehot columns
// are left alone, as are all-zero columns (with a warning).
Dataset unit_norm(const Dataset& ds, Diagnostics* diag = nullptr);

// Fills NaN cells: continuous by the observed mean, binary by the mode,
// onehot groups by their modal level. Filled rows are recorded per feature.
Dataset impute_simple(const Dataset& ds);

// Moves the named features to the front in the given order; the rest keep
// their relative order. Sets mapped_count to the number of names.
Dataset reorder_mapped_first(const Dataset& ds, std::span<const std::string> mapped);

// Splits the rows into (train, holdout) with a seeded shuffle.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_rows(std::size_t n, double holdout_fraction, std::uint64_t seed);

} // namespace chimatch

#endif // CHIMATCH_CORE_HPP
