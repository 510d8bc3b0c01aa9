#ifndef CHIMATCH_MATCHER_HPP
#define CHIMATCH_MATCHER_HPP

#include "chimatch/core.hpp"
#include "chimatch/stats.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

struct MatchProposal {
    std::string feature_a;
    std::string feature_b;
    double similarity = 0.0;
    double holdout_stat = 0.0;
    double p_value = 1.0;
    bool accepted = false;
    // 1 = the applicant got its first preference
    int rank_of_choice = 0;
    bool pinned = false;
};

enum class Direction { a_applies, b_applies };

// Strict preference orders for a two-sided matching. Applicant lists hold
// reviewer indices, most preferred first. reviewer_rank[r][a] is the position
// of applicant a in reviewer r's order, or -1 when the pair is forbidden.
struct PreferenceProfile {
    std::vector<std::vector<std::size_t>> applicant_prefs;
    std::vector<std::vector<int>> reviewer_rank;

    std::size_t applicants() const { return applicant_prefs.size(); }
    std::size_t reviewers() const { return reviewer_rank.size(); }
    bool acceptable(std::size_t a, std::size_t r) const { return reviewer_rank[r][a] >= 0; }
};

using Matching = std::vector<std::optional<std::size_t>>; // applicant -> reviewer

// Both sides rank by score (higher first). NaN scores and flagged entries sort
// last; ties break by ascending index. `forbidden` (applicant x reviewer) may be
// empty.
PreferenceProfile preferences_from_scores(const Matrix& applicant_by_reviewer,
                                          const BoolMatrix& degenerate = {},
                                          const BoolMatrix& forbidden = {});

// Applicant-proposing deferred acceptance with one slot per reviewer. Equal
// sides give the stable-marriage variant; unequal sides the hospital-resident
// variant with unit capacity.
Matching gale_shapley(const PreferenceProfile& prefs);

// Pairs (applicant, reviewer) that block the matching.
std::vector<std::pair<std::size_t, std::size_t>> blocking_pairs(const PreferenceProfile& prefs,
                                                                const Matching& m);

// Side with fewer features applies; ties go to A.
Direction default_direction(const SimilarityMatrix& sim);

// Rows of `sim` are A features, columns are B features.
std::vector<MatchProposal> gale_shapley(const SimilarityMatrix& sim, Direction direction,
                                        const std::vector<std::pair<std::string, std::string>>& forbidden = {});

// Pearson r of each proposal on hold-out rows (A column against the translated
// column named after the B feature), two-sided p-values, and BY acceptance at
// level q. Pinned proposals keep their acceptance and are not tested.
std::vector<MatchProposal> holdout_filter(std::vector<MatchProposal> matches, const Dataset& a_holdout,
                                          const Dataset& translated_holdout, double q = 0.05,
                                          PValueReport* report = nullptr);

// Rejects accepted proposals whose similarity is below `floor`.
void apply_similarity_floor(std::vector<MatchProposal>& matches, double floor);

// Fixes user-confirmed pairs, then reruns Gale-Shapley on what is left with the
// forbidden pairs removed from every preference list.
std::vector<MatchProposal> pin_and_rerun(const SimilarityMatrix& sim,
                                         const std::vector<std::pair<std::string, std::string>>& pinned,
                                         const std::vector<std::pair<std::string, std::string>>& forbidden,
                                         Direction direction);

std::vector<MatchProposal> accepted_only(const std::vector<MatchProposal>& matches);

} // namespace chimatch

#endif // CHIMATCH_MATCHER_HPP
