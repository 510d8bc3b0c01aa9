#ifndef CHIMATCH_KMF_HPP
#define CHIMATCH_KMF_HPP

#include "chimatch/core.hpp"
#include "chimatch/matcher.hpp"
#include "chimatch/stats.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

// K-vector of Pearson correlations between an unmapped column and the mapped
// columns, in mapped order. Degenerate entries hold 0.
struct Fingerprint {
    std::string feature;
    Vector values;
    std::vector<bool> degenerate;
};

std::vector<Fingerprint> fingerprints(const Dataset& ds);

// Cosine similarity between every A fingerprint (rows) and B fingerprint
// (columns).
SimilarityMatrix kmf_similarity(const std::vector<Fingerprint>& a, const std::vector<Fingerprint>& b,
                                const std::string& label_a = "A", const std::string& label_b = "B");

SimilarityMatrix kmf_similarity(const Dataset& a, const Dataset& b);

struct PromotionPolicy {
    enum class Kind { threshold, top_fraction };
    Kind kind = Kind::threshold;
    double value = 0.5;
    // only consider proposals that passed the hold-out filter
    bool require_accepted = true;
};

struct Promotion {
    Dataset a;
    Dataset b;
    std::vector<std::pair<std::string, std::string>> promoted;

    std::size_t mapped_count() const { return a.mapped_count(); }
};

// Selects proposals by the policy and appends them, in similarity order, to
// the mapped prefixes of both datasets.
std::vector<MatchProposal> select_promotions(const std::vector<MatchProposal>& proposals,
                                             const PromotionPolicy& policy);

Promotion promote_matches(const Dataset& a, const Dataset& b, const std::vector<MatchProposal>& proposals,
                          const PromotionPolicy& policy);

// Applies the same mapped-prefix extension to another pair of datasets with
// the same columns (hold-out rows, say).
Dataset extend_mapped(const Dataset& ds, const std::vector<std::string>& names);

// Predicts B's unmapped columns on the rows of `a_rows` from the shared
// mapped columns: least-squares coefficients of each standardized unmapped B
// column on B's standardized mapped block, applied to A's standardized mapped
// block. Mapped columns pass through standardized. Columns carry B's names.
Dataset linear_translate(const Dataset& b_train, const Dataset& a_rows, double ridge = 1e-8);

void write_fingerprints_csv(std::ostream& os, const std::vector<Fingerprint>& fps,
                            const std::vector<std::string>& mapped_names);

} // namespace chimatch

#endif // CHIMATCH_KMF_HPP
