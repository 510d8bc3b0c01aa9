#ifndef CHIMATCH_SYNTHGEN_HPP
#define CHIMATCH_SYNTHGEN_HPP

#include "chimatch/core.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

struct CovarianceSpec {
    int dim = 20;
    int factor_dim = 10;
    std::uint64_t seed = 0;
};

// W W^T + D with W an n-by-k standard normal matrix and D diagonal with
// integers drawn uniformly from [1,20].
Matrix make_covariance(const CovarianceSpec& spec);

enum class Family { gaussian, two_cluster_gaussian, binarized_two_cluster, independent_gaussian };

std::string to_string(Family family);
Family family_from_string(const std::string& s);

struct GeneratorSpec {
    Family family = Family::gaussian;
    int dim = 20;
    std::size_t n_samples = 10000;
    double mean_low = 10.0;
    double mean_high = 20.0;
    // Seeds the distribution parameters (mixture means); share it across the
    // two databases of a pair so they sample the same distribution.
    std::uint64_t param_seed = 0;
    // Seeds the draws themselves.
    std::uint64_t seed = 0;
};

struct MixtureMeans {
    Vector first;
    Vector second;
};

MixtureMeans draw_mixture_means(int dim, double low, double high, std::uint64_t seed);

// Draws n_samples rows. Columns are named v0..v{dim-1}. `cov` is ignored for
// the independent family (identity covariance).
Dataset sample(const GeneratorSpec& spec, const Matrix& cov, const std::string& name = "synthetic");

enum class MapKind { permutation, onto, partial };

std::string to_string(MapKind kind);
MapKind map_kind_from_string(const std::string& s);

using FeaturePair = std::pair<std::string, std::string>;

struct ScenarioSpec {
    MapKind map_kind = MapKind::permutation;
    // ground truth over the unmapped features, (feature in A, feature in B)
    std::vector<FeaturePair> gold_map;
    // known-mapped features, named identically in both datasets
    std::vector<std::string> mapped;
    // (feature in B, transform tag)
    std::vector<FeaturePair> transformed_features;
    // B features absent from A / A features absent from B
    std::vector<std::string> b_only;
    std::vector<std::string> a_only;
    std::uint64_t seed = 0;
    int trial = 0;
    int permutation = 0;

    // Throws unless the gold map is one-to-one and transforms are unique.
    void validate() const;
};

struct ScenarioOptions {
    MapKind map_kind = MapKind::permutation;
    std::size_t k_mapped = 4;
    // columns present only in B (dropped from A) and only in A
    std::size_t drop_a = 0;
    std::size_t drop_b = 0;
    std::size_t transform_count = 0;
    std::uint64_t seed = 0;
    int trial = 0;
    int permutation = 0;
    // optional explicit choices, by source column index
    std::vector<std::size_t> force_dropped_from_a;
    std::vector<std::size_t> force_transformed;
};

struct Scenario {
    Dataset a;
    Dataset b;
    ScenarioSpec spec;
    // A-row truth for the B-only features, columns named as in B
    Dataset a_withheld;
};

// Builds a matching scenario from two independent samples of the same
// distribution. The mapped set is drawn per trial; drops, transforms and the
// order of B's unmapped columns are drawn per permutation replicate.
Scenario build_scenario(const Dataset& source_a, const Dataset& source_b, const ScenarioOptions& opt);

} // namespace chimatch

#endif // CHIMATCH_SYNTHGEN_HPP
