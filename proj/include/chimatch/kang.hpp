#ifndef CHIMATCH_KANG_HPP
#define CHIMATCH_KANG_HPP

#include "chimatch/core.hpp"
#include "chimatch/matcher.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

enum class KangMetric { euclidean, normal };

std::string to_string(KangMetric m);
KangMetric kang_metric_from_string(const std::string& s);

struct KangConfig {
    KangMetric metric = KangMetric::euclidean;
    // bandwidth of the normal metric
    double alpha = 0.01;
    int iterations = 3000;
    std::uint64_t seed = 0;
    int bins = 8;

    void validate() const;
};

// Pairwise mutual information of the discretized columns. The diagonal holds
// each column's entropy.
Matrix mi_matrix(const Dataset& ds, int bins = 8);

// Appends `count` knock-off columns: copies of real columns (cycling through
// them) with rows shuffled independently, named "knockoff<i>".
Dataset pad_with_knockoffs(const Dataset& ds, std::size_t count, std::uint64_t seed);

// Grows a square MI matrix to `size` with entries drawn from its own
// off-diagonal (and, for the new diagonal, diagonal) values.
Matrix pad_mi_matrix(const Matrix& mi, Eigen::Index size, std::uint64_t seed);

struct KangResult {
    // assignment[i] = column of B assigned to column i of A (padded indices
    // included)
    std::vector<std::size_t> assignment;
    double objective = 0.0;
    double initial_objective = 0.0;
    // euclidean: sum of squared differences (lower is better);
    // normal: kernel similarity (higher is better)
    KangMetric metric = KangMetric::euclidean;
    int restarts = 1;
};

// Objective of a full assignment over pairs i < j.
double kang_objective(const Matrix& mi_a, const Matrix& mi_b, const std::vector<std::size_t>& assignment,
                      const KangConfig& cfg);

// Random-restart swap hill climbing over assignments of B columns to A
// columns. Known pairs (A index, B index) are fixed. Unequal sizes are padded
// with pad_mi_matrix.
KangResult kang_match(const Matrix& mi_a, const Matrix& mi_b, const std::vector<std::pair<std::size_t, std::size_t>>& known,
                      const KangConfig& cfg);

// Dataset-level driver: knock-off padding, MI matrices, search over the
// unmapped columns with the mapped prefix fixed. Every real-real unmapped pair
// of the result is reported as accepted; similarity is the pair's objective
// contribution (higher is better under both metrics).
std::vector<MatchProposal> kang_proposals(const Dataset& a, const Dataset& b, const KangConfig& cfg,
                                          KangResult* detail = nullptr);

} // namespace chimatch

#endif // CHIMATCH_KANG_HPP
