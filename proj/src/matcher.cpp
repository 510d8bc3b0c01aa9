#include "chimatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace chimatch {

namespace {

double effective_score(const Matrix& s, const BoolMatrix& degenerate, Eigen::Index i, Eigen::Index j)
{
    const double v = s(i, j);
    if (std::isnan(v) || (degenerate.size() != 0 && degenerate(i, j))) {
        return -std::numeric_limits<double>::infinity();
    }
    return v;
}

} // namespace

PreferenceProfile preferences_from_scores(const Matrix& scores, const BoolMatrix& degenerate,
                                          const BoolMatrix& forbidden)
{
    const auto na = static_cast<std::size_t>(scores.rows());
    const auto nr = static_cast<std::size_t>(scores.cols());
    auto is_forbidden = [&](std::size_t a, std::size_t r) {
        return forbidden.size() != 0 && forbidden(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r));
    };
    auto score = [&](std::size_t a, std::size_t r) {
        return effective_score(scores, degenerate, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r));
    };

    PreferenceProfile p;
    p.applicant_prefs.resize(na);
    for (std::size_t a = 0; a < na; ++a) {
        auto& list = p.applicant_prefs[a];
        for (std::size_t r = 0; r < nr; ++r) {
            if (!is_forbidden(a, r)) {
                list.push_back(r);
            }
        }
        std::stable_sort(list.begin(), list.end(),
                         [&](std::size_t x, std::size_t y) { return score(a, x) > score(a, y); });
    }
    p.reviewer_rank.assign(nr, std::vector<int>(na, -1));
    for (std::size_t r = 0; r < nr; ++r) {
        std::vector<std::size_t> order;
        for (std::size_t a = 0; a < na; ++a) {
            if (!is_forbidden(a, r)) {
                order.push_back(a);
            }
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return score(x, r) > score(y, r); });
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            p.reviewer_rank[r][order[pos]] = static_cast<int>(pos);
        }
    }
    return p;
}

Matching gale_shapley(const PreferenceProfile& prefs)
{
    const std::size_t na = prefs.applicants();
    const std::size_t nr = prefs.reviewers();
    Matching match(na);
    std::vector<std::optional<std::size_t>> held(nr);
    std::vector<std::size_t> next(na, 0);
    std::deque<std::size_t> free;
    for (std::size_t a = 0; a < na; ++a) {
        free.push_back(a);
    }
    while (!free.empty()) {
        const std::size_t a = free.front();
        free.pop_front();
        const auto& list = prefs.applicant_prefs[a];
        if (next[a] >= list.size()) {
            continue; // exhausted, stays unmatched
        }
        const std::size_t r = list[next[a]++];
        if (!prefs.acceptable(a, r)) {
            free.push_front(a);
            continue;
        }
        if (!held[r]) {
            held[r] = a;
            match[a] = r;
        } else if (prefs.reviewer_rank[r][a] < prefs.reviewer_rank[r][*held[r]]) {
            const std::size_t loser = *held[r];
            match[loser].reset();
            free.push_front(loser);
            held[r] = a;
            match[a] = r;
        } else {
            free.push_front(a);
        }
    }
    return match;
}

std::vector<std::pair<std::size_t, std::size_t>> blocking_pairs(const PreferenceProfile& prefs, const Matching& m)
{
    const std::size_t na = prefs.applicants();
    const std::size_t nr = prefs.reviewers();
    std::vector<std::optional<std::size_t>> held(nr);
    for (std::size_t a = 0; a < na; ++a) {
        if (m[a]) {
            held[*m[a]] = a;
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < na; ++a) {
        const auto& list = prefs.applicant_prefs[a];
        for (std::size_t r : list) {
            if (m[a] && *m[a] == r) {
                break; // everything after is worse for a
            }
            if (!prefs.acceptable(a, r)) {
                continue;
            }
            const bool reviewer_prefers =
                !held[r] || prefs.reviewer_rank[r][a] < prefs.reviewer_rank[r][*held[r]];
            if (reviewer_prefers) {
                out.emplace_back(a, r);
            }
        }
    }
    return out;
}

Direction default_direction(const SimilarityMatrix& sim)
{
    return sim.rows() <= sim.cols() ? Direction::a_applies : Direction::b_applies;
}

std::vector<MatchProposal> gale_shapley(const SimilarityMatrix& sim, Direction direction,
                                        const std::vector<std::pair<std::string, std::string>>& forbidden)
{
    sim.validate();
    if (sim.empty()) {
        return {};
    }
    BoolMatrix forbid;
    if (!forbidden.empty()) {
        forbid = BoolMatrix::Constant(static_cast<Eigen::Index>(sim.rows()), static_cast<Eigen::Index>(sim.cols()), false);
        for (const auto& [fa, fb] : forbidden) {
            auto ia = std::find(sim.row_ids.begin(), sim.row_ids.end(), fa);
            auto ib = std::find(sim.col_ids.begin(), sim.col_ids.end(), fb);
            if (ia == sim.row_ids.end() || ib == sim.col_ids.end()) {
                continue; // pairs outside this matrix are irrelevant
            }
            forbid(ia - sim.row_ids.begin(), ib - sim.col_ids.begin()) = true;
        }
    }

    const bool a_applies = direction == Direction::a_applies;
    const Matrix scores = a_applies ? sim.values : Matrix(sim.values.transpose());
    BoolMatrix degenerate;
    if (sim.degenerate.size() != 0) {
        degenerate = a_applies ? sim.degenerate : BoolMatrix(sim.degenerate.transpose());
    }
    if (forbid.size() != 0 && !a_applies) {
        forbid = BoolMatrix(forbid.transpose());
    }
    const auto prefs = preferences_from_scores(scores, degenerate, forbid);
    const auto match = gale_shapley(prefs);

    std::vector<MatchProposal> out;
    for (std::size_t app = 0; app < match.size(); ++app) {
        if (!match[app]) {
            continue;
        }
        const std::size_t rev = *match[app];
        const std::size_t ia = a_applies ? app : rev;
        const std::size_t ib = a_applies ? rev : app;
        MatchProposal p;
        p.feature_a = sim.row_ids[ia];
        p.feature_b = sim.col_ids[ib];
        p.similarity = sim.values(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib));
        const auto& list = prefs.applicant_prefs[app];
        p.rank_of_choice = static_cast<int>(std::find(list.begin(), list.end(), rev) - list.begin()) + 1;
        out.push_back(std::move(p));
    }
    // stable output order: by A feature position
    std::map<std::string, std::size_t> row_pos;
    for (std::size_t i = 0; i < sim.row_ids.size(); ++i) {
        row_pos[sim.row_ids[i]] = i;
    }
    std::sort(out.begin(), out.end(), [&](const MatchProposal& x, const MatchProposal& y) {
        return row_pos[x.feature_a] < row_pos[y.feature_a];
    });
    return out;
}

std::vector<MatchProposal> holdout_filter(std::vector<MatchProposal> matches, const Dataset& a_holdout,
                                          const Dataset& translated_holdout, double q, PValueReport* report)
{
    if (a_holdout.rows() != translated_holdout.rows()) {
        throw Error("holdout_filter: hold-out row counts differ");
    }
    if (a_holdout.rows() < 4) {
        throw Error("holdout_filter: need at least 4 hold-out rows");
    }
    std::vector<std::size_t> tested;
    std::vector<double> pvalues;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        auto& m = matches[i];
        if (m.pinned) {
            continue;
        }
        const auto ja = a_holdout.find(m.feature_a);
        const auto jb = translated_holdout.find(m.feature_b);
        if (!ja || !jb) {
            throw Error("holdout_filter: hold-out data lacks a column for proposal (" + m.feature_a + ", "
                        + m.feature_b + ")");
        }
        const auto r = pearson(a_holdout.column(*ja), translated_holdout.column(*jb));
        m.holdout_stat = r.value;
        m.p_value = r.degenerate ? 1.0 : pearson_pvalue(r.value, a_holdout.rows());
        tested.push_back(i);
        pvalues.push_back(m.p_value);
    }
    const auto mask = by_stepdown(pvalues, q);
    for (std::size_t t = 0; t < tested.size(); ++t) {
        matches[tested[t]].accepted = mask[t];
    }
    if (report != nullptr) {
        report->fdr_level = q;
        report->holdout_n = a_holdout.rows();
        report->pairs.clear();
        for (auto i : tested) {
            const auto& m = matches[i];
            report->pairs.push_back({m.feature_a, m.feature_b, m.holdout_stat, m.p_value, m.accepted});
        }
        std::stable_sort(report->pairs.begin(), report->pairs.end(),
                         [](const PValueEntry& x, const PValueEntry& y) { return x.p_value < y.p_value; });
    }
    return matches;
}

void apply_similarity_floor(std::vector<MatchProposal>& matches, double floor)
{
    for (auto& m : matches) {
        if (!m.pinned && m.similarity < floor) {
            m.accepted = false;
        }
    }
}

std::vector<MatchProposal> pin_and_rerun(const SimilarityMatrix& sim,
                                         const std::vector<std::pair<std::string, std::string>>& pinned,
                                         const std::vector<std::pair<std::string, std::string>>& forbidden,
                                         Direction direction)
{
    std::set<std::string> used_a;
    std::set<std::string> used_b;
    std::vector<MatchProposal> out;
    for (const auto& [fa, fb] : pinned) {
        if (!used_a.insert(fa).second || !used_b.insert(fb).second) {
            throw Error("pin_and_rerun: feature pinned twice in (" + fa + ", " + fb + ")");
        }
        auto ia = std::find(sim.row_ids.begin(), sim.row_ids.end(), fa);
        auto ib = std::find(sim.col_ids.begin(), sim.col_ids.end(), fb);
        if (ia == sim.row_ids.end() || ib == sim.col_ids.end()) {
            throw Error("pin_and_rerun: pinned pair (" + fa + ", " + fb + ") not in similarity matrix");
        }
        MatchProposal p;
        p.feature_a = fa;
        p.feature_b = fb;
        p.similarity = sim.values(ia - sim.row_ids.begin(), ib - sim.col_ids.begin());
        p.accepted = true;
        p.pinned = true;
        p.p_value = std::numeric_limits<double>::quiet_NaN(); // not tested
        p.rank_of_choice = 0;
        out.push_back(std::move(p));
    }

    SimilarityMatrix rest;
    rest.row_label = sim.row_label;
    rest.col_label = sim.col_label;
    rest.mode = sim.mode;
    std::vector<Eigen::Index> ri;
    std::vector<Eigen::Index> ci;
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        if (!used_a.contains(sim.row_ids[i])) {
            ri.push_back(static_cast<Eigen::Index>(i));
            rest.row_ids.push_back(sim.row_ids[i]);
        }
    }
    for (std::size_t j = 0; j < sim.cols(); ++j) {
        if (!used_b.contains(sim.col_ids[j])) {
            ci.push_back(static_cast<Eigen::Index>(j));
            rest.col_ids.push_back(sim.col_ids[j]);
        }
    }
    rest.values = sim.values(ri, ci);
    if (sim.degenerate.size() != 0) {
        rest.degenerate = sim.degenerate(ri, ci);
    }
    auto matched = gale_shapley(rest, direction, forbidden);
    out.insert(out.end(), matched.begin(), matched.end());
    return out;
}

std::vector<MatchProposal> accepted_only(const std::vector<MatchProposal>& matches)
{
    std::vector<MatchProposal> out;
    std::copy_if(matches.begin(), matches.end(), std::back_inserter(out),
                 [](const MatchProposal& m) { return m.accepted; });
    return out;
}

} // namespace chimatch
