#include "chimatch/pipeline.hpp"

#include "chimatch/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace chimatch {

std::string to_string(Method m)
{
    switch (m) {
    case Method::kmf:
        return "kmf";
    case Method::chimeric:
        return "chimeric";
    case Method::kmf_then_chimeric:
        return "kmf_then_chimeric";
    case Method::kang:
        return "kang";
    }
    return "?";
}

Method method_from_string(const std::string& s)
{
    for (Method m : {Method::kmf, Method::chimeric, Method::kmf_then_chimeric, Method::kang}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw Error("unknown method '" + s + "' (expected kmf, chimeric, kmf_then_chimeric or kang)");
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::true_positive:
        return "TP";
    case Outcome::false_positive:
        return "FP";
    case Outcome::false_negative:
        return "FN";
    case Outcome::ignored:
        return "ignored";
    }
    return "?";
}

std::string to_string(HoldoutTranslation h)
{
    return h == HoldoutTranslation::full ? "full" : "knockout";
}

HoldoutTranslation holdout_translation_from_string(const std::string& s)
{
    if (s == "full") {
        return HoldoutTranslation::full;
    }
    if (s == "knockout") {
        return HoldoutTranslation::knockout;
    }
    throw Error("unknown hold-out translation '" + s + "' (expected full or knockout)");
}

nlohmann::json to_json(const PipelineConfig& c)
{
    nlohmann::json forbidden = nlohmann::json::array();
    for (const auto& [a, b] : c.forbidden) {
        forbidden.push_back({a, b});
    }
    nlohmann::json j = {
        {"method", to_string(c.method)},
        {"chimeric", to_json(c.chimeric)},
        {"kang",
         {{"metric", to_string(c.kang.metric)},
          {"alpha", c.kang.alpha},
          {"iterations", c.kang.iterations},
          {"bins", c.kang.bins},
          {"seed", c.kang.seed}}},
        {"promotion",
         {{"kind", c.promotion.kind == PromotionPolicy::Kind::threshold ? "threshold" : "top_fraction"},
          {"value", c.promotion.value},
          {"require_accepted", c.promotion.require_accepted}}},
        {"holdout_fraction", c.holdout_fraction},
        {"fdr_q", c.fdr_q},
        {"flip_direction", c.flip_direction},
        {"dependence", c.dependence == DependenceMeasure::pearson ? "pearson" : "mutual_information"},
        {"holdout_translation", to_string(c.holdout_translation)},
        {"forbidden", forbidden},
        {"seed", c.seed}};
    if (c.similarity_floor) {
        j["similarity_floor"] = *c.similarity_floor;
    }
    return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig c)
{
    if (j.contains("method")) {
        c.method = method_from_string(j.at("method").get<std::string>());
    }
    if (j.contains("chimeric")) {
        c.chimeric = chimeric_config_from_json(j.at("chimeric"), c.chimeric);
    }
    if (j.contains("kang")) {
        const auto& k = j.at("kang");
        if (k.contains("metric")) {
            c.kang.metric = kang_metric_from_string(k.at("metric").get<std::string>());
        }
        c.kang.alpha = k.value("alpha", c.kang.alpha);
        c.kang.iterations = k.value("iterations", c.kang.iterations);
        c.kang.bins = k.value("bins", c.kang.bins);
        c.kang.seed = k.value("seed", c.kang.seed);
    }
    if (j.contains("promotion")) {
        const auto& p = j.at("promotion");
        const auto kind = p.value("kind", std::string("threshold"));
        if (kind == "threshold") {
            c.promotion.kind = PromotionPolicy::Kind::threshold;
        } else if (kind == "top_fraction") {
            c.promotion.kind = PromotionPolicy::Kind::top_fraction;
        } else {
            throw Error("unknown promotion kind '" + kind + "'");
        }
        c.promotion.value = p.value("value", c.promotion.value);
        c.promotion.require_accepted = p.value("require_accepted", c.promotion.require_accepted);
    }
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.fdr_q = j.value("fdr_q", c.fdr_q);
    if (j.contains("similarity_floor") && !j.at("similarity_floor").is_null()) {
        c.similarity_floor = j.at("similarity_floor").get<double>();
    }
    c.flip_direction = j.value("flip_direction", c.flip_direction);
    if (j.contains("dependence")) {
        const auto d = j.at("dependence").get<std::string>();
        if (d == "pearson") {
            c.dependence = DependenceMeasure::pearson;
        } else if (d == "mutual_information") {
            c.dependence = DependenceMeasure::mutual_information;
        } else {
            throw Error("unknown dependence measure '" + d + "'");
        }
    }
    if (j.contains("holdout_translation")) {
        c.holdout_translation = holdout_translation_from_string(j.at("holdout_translation").get<std::string>());
    }
    if (j.contains("forbidden")) {
        c.forbidden.clear();
        for (const auto& p : j.at("forbidden")) {
            c.forbidden.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        }
    }
    c.seed = j.value("seed", c.seed);
    return c;
}

Dataset preprocess(const RawTable& table, const std::vector<MappedEntry>& mapped, Diagnostics* diag)
{
    Dataset ds = impute_simple(one_hot_encode(table, diag));
    std::vector<std::string> order;
    std::map<std::string, double> weights;
    for (const auto& m : mapped) {
        if (ds.find(m.name)) {
            order.push_back(m.name);
            weights[m.name] = m.weight;
            continue;
        }
        // a categorical column stands for all of its encoded levels
        bool expanded = false;
        for (const auto& f : ds.features()) {
            if (f.kind == FeatureKind::onehot_member && f.parent == m.name) {
                order.push_back(f.name);
                weights[f.name] = m.weight;
                expanded = true;
            }
        }
        if (!expanded) {
            throw Error("mapped feature '" + m.name + "' not found in '" + table.name + "'");
        }
    }
    ds = reorder_mapped_first(ds, order).with_certainty_weights(weights);
    return unit_norm(ds, diag);
}

namespace {

std::vector<std::size_t> range(std::size_t from, std::size_t to)
{
    std::vector<std::size_t> v;
    for (std::size_t i = from; i < to; ++i) {
        v.push_back(i);
    }
    return v;
}

Dataset unmapped_only(const Dataset& ds)
{
    return ds.select_columns(range(ds.mapped_count(), ds.cols()), 0);
}

struct Split {
    Dataset a_train;
    Dataset a_holdout;
    Dataset b_train;
    Dataset b_holdout;
};

Split split_pair(const Dataset& a, const Dataset& b, const PipelineConfig& cfg)
{
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) {
        throw Error("holdout fraction must lie in (0,1)");
    }
    const auto [tra, hoa] = split_rows(a.rows(), cfg.holdout_fraction, derive_seed(cfg.seed, 1));
    const auto [trb, hob] = split_rows(b.rows(), cfg.holdout_fraction, derive_seed(cfg.seed, 2));
    if (hoa.size() < 4) {
        throw Error("hold-out sample of '" + a.name() + "' has " + std::to_string(hoa.size())
                    + " rows; need at least 4");
    }
    return {a.select_rows(tra), a.select_rows(hoa), b.select_rows(trb), b.select_rows(hob)};
}

struct StageResult {
    std::vector<MatchProposal> proposals;
    SimilarityMatrix similarity;
    PValueReport report;
    std::optional<ChimericModel> model;
};

StageResult kmf_stage(const Split& s, const PipelineConfig& cfg)
{
    StageResult r;
    r.similarity = kmf_similarity(s.a_train, s.b_train);
    auto props = gale_shapley(r.similarity, default_direction(r.similarity), cfg.forbidden);
    const Dataset translated = linear_translate(s.b_train, s.a_holdout);
    r.proposals = holdout_filter(std::move(props), s.a_holdout, translated, cfg.fdr_q, &r.report);
    if (cfg.similarity_floor) {
        apply_similarity_floor(r.proposals, *cfg.similarity_floor);
    }
    return r;
}

std::vector<std::pair<std::string, std::string>> swapped(const std::vector<std::pair<std::string, std::string>>& v)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [a, b] : v) {
        out.emplace_back(b, a);
    }
    return out;
}

// Hold-out translation where each proposed target column is computed with
// its proposed partner shuffled across rows.
Dataset knockout_translation(const ChimericModel& m, const Dataset& x, TranslateDirection dir,
                             const std::vector<MatchProposal>& props, std::uint64_t seed)
{
    const Dataset plain = m.translate(x, dir);
    Matrix z = plain.values();
    Rng rng(seed);
    std::vector<Eigen::Index> order(x.rows());
    for (const auto& p : props) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t i = x.index_of(p.feature_a);
        Matrix v = x.values();
        for (std::size_t r = 0; r < order.size(); ++r) {
            v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
                x.values()(order[r], static_cast<Eigen::Index>(i));
        }
        const Dataset ko = m.translate(x.with_values(std::move(v)), dir);
        const std::size_t j = plain.index_of(p.feature_b);
        z.col(static_cast<Eigen::Index>(j)) = ko.column(j);
    }
    return plain.with_values(std::move(z));
}

StageResult chimeric_stage(const Split& s, const PipelineConfig& cfg)
{
    ChimericConfig cc = cfg.chimeric;
    cc.seed = derive_seed(cfg.seed, 3, cfg.chimeric.seed);
    StageResult r;
    r.model = train_chimeric(s.a_train, s.b_train, cc);
    const ChimericModel& m = *r.model;

    const bool flip = cfg.flip_direction;
    const auto dir = flip ? TranslateDirection::b_to_a : TranslateDirection::a_to_b;
    const Dataset& x_train = flip ? s.b_train : s.a_train;
    const Dataset& x_holdout = flip ? s.b_holdout : s.a_holdout;
    const Dataset z_train = m.translate(x_train, dir);

    SimilarityMatrix dep = chimeric_dependence(unmapped_only(x_train), unmapped_only(z_train), cfg.dependence);
    const auto forbidden = flip ? swapped(cfg.forbidden) : cfg.forbidden;
    auto props = gale_shapley(dep, default_direction(dep), forbidden);
    const Dataset z_holdout = cfg.holdout_translation == HoldoutTranslation::full
                                  ? m.translate(x_holdout, dir)
                                  : knockout_translation(m, x_holdout, dir, props, derive_seed(cfg.seed, 7));
    props = holdout_filter(std::move(props), x_holdout, z_holdout, cfg.fdr_q, &r.report);
    if (cfg.similarity_floor) {
        apply_similarity_floor(props, *cfg.similarity_floor);
    }
    if (flip) {
        for (auto& p : props) {
            std::swap(p.feature_a, p.feature_b);
        }
        for (auto& e : r.report.pairs) {
            std::swap(e.row_feature, e.col_feature);
        }
        dep = dep.transposed();
    }
    r.proposals = std::move(props);
    r.similarity = std::move(dep);
    return r;
}

void check_pair(const Dataset& a, const Dataset& b, bool need_anchor)
{
    if (a.mapped_count() != b.mapped_count()) {
        throw Error("datasets disagree on the number of mapped features (" + std::to_string(a.mapped_count())
                    + " vs " + std::to_string(b.mapped_count()) + ")");
    }
    if (need_anchor && a.mapped_count() == 0) {
        throw Error("method needs at least one known-mapped feature");
    }
    if (a.has_missing() || b.has_missing()) {
        throw Error("datasets contain missing values; impute first");
    }
}

MatchResult finish(StageResult&& st, const Split& s)
{
    MatchResult r;
    r.proposals = std::move(st.proposals);
    r.similarity = std::move(st.similarity);
    r.report = std::move(st.report);
    r.model = std::move(st.model);
    r.train_rows_a = s.a_train.rows();
    r.holdout_rows_a = s.a_holdout.rows();
    return r;
}

} // namespace

MatchResult run_two_stage(const Dataset& a, const Dataset& b, const PipelineConfig& cfg)
{
    check_pair(a, b, true);
    if (a.unmapped_count() == 0 || b.unmapped_count() == 0) {
        return {};
    }
    const Split s = split_pair(a, b, cfg);
    StageResult first = kmf_stage(s, cfg);
    const auto selected = select_promotions(first.proposals, cfg.promotion);
    const Promotion promo = promote_matches(a, b, first.proposals, cfg.promotion);

    std::vector<MatchProposal> promoted;
    for (auto p : selected) {
        p.accepted = true;
        promoted.push_back(std::move(p));
    }
    MatchResult r;
    if (promo.a.unmapped_count() == 0 || promo.b.unmapped_count() == 0) {
        r = finish(std::move(first), s);
        r.proposals = promoted;
    } else {
        const Split s2 = split_pair(promo.a, promo.b, cfg);
        r = finish(chimeric_stage(s2, cfg), s2);
        r.proposals.insert(r.proposals.begin(), promoted.begin(), promoted.end());
    }
    r.promoted = promo.promoted;
    return r;
}

MatchResult run_method(const Dataset& a, const Dataset& b, const PipelineConfig& cfg)
{
    check_pair(a, b, cfg.method != Method::kang);
    if (a.unmapped_count() == 0 || b.unmapped_count() == 0) {
        return {};
    }
    switch (cfg.method) {
    case Method::kmf: {
        const Split s = split_pair(a, b, cfg);
        return finish(kmf_stage(s, cfg), s);
    }
    case Method::chimeric: {
        const Split s = split_pair(a, b, cfg);
        return finish(chimeric_stage(s, cfg), s);
    }
    case Method::kmf_then_chimeric:
        return run_two_stage(a, b, cfg);
    case Method::kang: {
        KangConfig kc = cfg.kang;
        kc.seed = derive_seed(cfg.seed, 4, cfg.kang.seed);
        MatchResult r;
        r.proposals = kang_proposals(a, b, kc);
        r.train_rows_a = a.rows();
        return r;
    }
    }
    throw Error("unknown method");
}

EvalReport evaluate(const std::vector<MatchProposal>& proposals, const ScenarioSpec& scenario)
{
    std::map<std::string, std::string> gold_a;
    std::map<std::string, std::string> gold_b;
    for (const auto& [fa, fb] : scenario.gold_map) {
        gold_a[fa] = fb;
        gold_b[fb] = fa;
    }
    std::set<std::string> known_a(scenario.a_only.begin(), scenario.a_only.end());
    std::set<std::string> known_b(scenario.b_only.begin(), scenario.b_only.end());
    const std::set<std::string> mapped(scenario.mapped.begin(), scenario.mapped.end());
    for (const auto& m : scenario.mapped) {
        known_a.insert(m);
        known_b.insert(m);
    }
    for (const auto& [fa, fb] : scenario.gold_map) {
        known_a.insert(fa);
        known_b.insert(fb);
    }

    EvalReport r;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : proposals) {
        if (!known_a.contains(p.feature_a)) {
            throw Error("evaluate: unknown feature '" + p.feature_a + "' on side A");
        }
        if (!known_b.contains(p.feature_b)) {
            throw Error("evaluate: unknown feature '" + p.feature_b + "' on side B");
        }
        if (!p.accepted || !seen.insert({p.feature_a, p.feature_b}).second) {
            continue;
        }
        PairOutcome o{p.feature_a, p.feature_b, Outcome::ignored};
        const auto ga = gold_a.find(p.feature_a);
        const auto gb = gold_b.find(p.feature_b);
        const bool a_mapped = mapped.contains(p.feature_a);
        const bool b_mapped = mapped.contains(p.feature_b);
        if (ga != gold_a.end() && ga->second == p.feature_b) {
            o.outcome = Outcome::true_positive;
            ++r.tp;
        } else if (ga != gold_a.end() || gb != gold_b.end() || a_mapped != b_mapped
                   || (a_mapped && p.feature_a != p.feature_b)) {
            // a mapped feature's partner is its namesake
            o.outcome = Outcome::false_positive;
            ++r.fp;
        }
        r.pairs.push_back(std::move(o));
    }
    for (const auto& [fa, fb] : scenario.gold_map) {
        if (!seen.contains({fa, fb})) {
            r.pairs.push_back({fa, fb, Outcome::false_negative});
            ++r.fn;
        }
    }
    const double tp = static_cast<double>(r.tp);
    const double denom = 2.0 * tp + static_cast<double>(r.fp + r.fn);
    r.f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    r.precision = r.tp + r.fp > 0 ? tp / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = r.tp + r.fn > 0 ? tp / static_cast<double>(r.tp + r.fn) : 0.0;
    return r;
}

void write_eval_csv(std::ostream& os, const EvalReport& r)
{
    os << "metric,value\n";
    os << "tp," << r.tp << "\nfp," << r.fp << "\nfn," << r.fn << '\n';
    os << "precision," << format_double(r.precision) << "\nrecall," << format_double(r.recall) << "\nf1,"
       << format_double(r.f1) << '\n';
}

TuneResult tune_hyperparams(const Dataset& a, const Dataset& b, const std::vector<PipelineConfig>& grid,
                            TuneProtocol protocol, int folds, std::uint64_t seed)
{
    if (grid.empty()) {
        throw Error("tune: empty grid");
    }
    check_pair(a, b, true);
    const std::size_t k = a.mapped_count();
    std::vector<std::vector<std::size_t>> hidden_sets;
    if (protocol == TuneProtocol::leave_one_out) {
        if (k < 2) {
            throw Error("tune: leave-one-out needs at least 2 mapped features");
        }
        for (std::size_t i = 0; i < k; ++i) {
            hidden_sets.push_back({i});
        }
    } else {
        if (k < 4) {
            throw Error("tune: half split needs at least 4 mapped features");
        }
        if (folds < 1) {
            throw Error("tune: need at least one fold");
        }
        for (int f = 0; f < folds; ++f) {
            Rng rng(derive_seed(seed, 51, static_cast<std::uint64_t>(f)));
            auto idx = range(0, k);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(k / 2);
            std::sort(idx.begin(), idx.end());
            hidden_sets.push_back(idx);
        }
    }

    TuneResult out;
    out.fold_scores.assign(grid.size(), {});
    const auto a_unmapped = a.unmapped_names();
    const auto b_unmapped = b.unmapped_names();
    for (const auto& hidden : hidden_sets) {
        const std::set<std::size_t> h(hidden.begin(), hidden.end());
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < k; ++i) {
            if (!h.contains(i)) {
                order.push_back(i);
            }
        }
        const std::size_t kept = order.size();
        order.insert(order.end(), hidden.begin(), hidden.end());
        for (std::size_t j = k; j < a.cols(); ++j) {
            order.push_back(j);
        }
        std::vector<std::size_t> order_b(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::size_t j = k; j < b.cols(); ++j) {
            order_b.push_back(j);
        }
        const Dataset fa = a.select_columns(order, kept);
        const Dataset fb = b.select_columns(order_b, kept);
        ScenarioSpec spec;
        for (std::size_t i : hidden) {
            spec.gold_map.emplace_back(a.feature(i).name, b.feature(i).name);
        }
        spec.a_only = a_unmapped;
        spec.b_only = b_unmapped;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double f1 = 0.0;
            try {
                f1 = evaluate(run_method(fa, fb, grid[g]).proposals, spec).f1;
            } catch (const Error& e) {
                log::warn("tune: grid point " + std::to_string(g) + " failed: " + e.what());
            }
            out.fold_scores[g].push_back(f1);
        }
    }
    for (const auto& scores : out.fold_scores) {
        out.mean_scores.push_back(std::accumulate(scores.begin(), scores.end(), 0.0)
                                  / static_cast<double>(scores.size()));
    }
    out.best_index = static_cast<std::size_t>(
        std::max_element(out.mean_scores.begin(), out.mean_scores.end()) - out.mean_scores.begin());
    out.best = grid[out.best_index];
    return out;
}

void ExperimentConfig::validate() const
{
    if (n_samples.empty() || k_mapped.empty() || drop_a.empty() || drop_b.empty() || methods.empty()) {
        throw Error("experiment: every sweep list must be nonempty");
    }
    if (n_trials < 1 || n_perms < 1) {
        throw Error("experiment: n_trials and n_perms must be at least 1");
    }
    if (dim < 2) {
        throw Error("experiment: dim must be at least 2");
    }
}

nlohmann::json to_json(const ExperimentConfig& c)
{
    std::vector<std::string> methods;
    for (auto m : c.methods) {
        methods.push_back(to_string(m));
    }
    return {{"family", to_string(c.family)},
            {"dim", c.dim},
            {"factor_dim", c.factor_dim},
            {"n_samples", c.n_samples},
            {"map_kind", to_string(c.map_kind)},
            {"k_mapped", c.k_mapped},
            {"drop_a", c.drop_a},
            {"drop_b", c.drop_b},
            {"transform_count", c.transform_count},
            {"latent_dims", c.latent_dims},
            {"methods", methods},
            {"pipeline", to_json(c.pipeline)},
            {"n_trials", c.n_trials},
            {"n_perms", c.n_perms},
            {"seed", c.seed},
            {"threads", c.threads},
            {"output_dir", c.output_dir.string()}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j)
{
    ExperimentConfig c;
    if (j.contains("family")) {
        c.family = family_from_string(j.at("family").get<std::string>());
    }
    c.dim = j.value("dim", c.dim);
    c.factor_dim = j.value("factor_dim", c.factor_dim);
    c.n_samples = j.value("n_samples", c.n_samples);
    if (j.contains("map_kind")) {
        c.map_kind = map_kind_from_string(j.at("map_kind").get<std::string>());
    }
    c.k_mapped = j.value("k_mapped", c.k_mapped);
    c.drop_a = j.value("drop_a", c.drop_a);
    c.drop_b = j.value("drop_b", c.drop_b);
    c.transform_count = j.value("transform_count", c.transform_count);
    c.latent_dims = j.value("latent_dims", c.latent_dims);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) {
            c.methods.push_back(method_from_string(m.get<std::string>()));
        }
    }
    if (c.map_kind != MapKind::permutation) {
        // normal-kernel search for onto and partial maps
        c.pipeline.kang.metric = KangMetric::normal;
        c.pipeline.kang.iterations = 5000;
    }
    if (j.contains("pipeline")) {
        c.pipeline = pipeline_config_from_json(j.at("pipeline"), c.pipeline);
    }
    c.n_trials = j.value("n_trials", c.n_trials);
    c.n_perms = j.value("n_perms", c.n_perms);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.output_dir = j.value("output_dir", std::string());
    c.validate();
    return c;
}

double BenchmarkReport::overall_mean_f1(Method m) const
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : summary) {
        if (s.method == m && s.replicates > s.failures) {
            sum += s.mean_f1;
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

Scenario benchmark_scenario(const ExperimentConfig& cfg, const SweepPoint& point, int trial, int perm)
{
    const auto t = static_cast<std::uint64_t>(trial);
    const Matrix cov = make_covariance({cfg.dim, cfg.factor_dim, derive_seed(cfg.seed, 1, t)});
    GeneratorSpec g;
    g.family = cfg.family;
    g.dim = cfg.dim;
    g.n_samples = point.n_samples;
    g.param_seed = derive_seed(cfg.seed, 2, t);
    g.seed = derive_seed(cfg.seed, 3, t);
    const Dataset src_a = sample(g, cov, "A");
    g.seed = derive_seed(cfg.seed, 4, t);
    const Dataset src_b = sample(g, cov, "B");
    ScenarioOptions o;
    o.map_kind = cfg.map_kind;
    o.k_mapped = point.k_mapped;
    o.drop_a = point.drop_a;
    o.drop_b = point.drop_b;
    o.transform_count = cfg.transform_count;
    o.seed = derive_seed(cfg.seed, 5);
    o.trial = trial;
    o.permutation = perm;
    Scenario sc = build_scenario(src_a, src_b, o);
    sc.a = unit_norm(sc.a);
    sc.b = unit_norm(sc.b);
    return sc;
}

namespace {

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg)
{
    std::vector<int> latents = cfg.latent_dims;
    if (latents.empty()) {
        latents.push_back(cfg.pipeline.chimeric.latent_dim);
    }
    std::vector<SweepPoint> pts;
    for (auto n : cfg.n_samples) {
        for (auto k : cfg.k_mapped) {
            for (int l : latents) {
                for (auto da : cfg.drop_a) {
                    for (auto db : cfg.drop_b) {
                        pts.push_back({n, k, l, da, db});
                    }
                }
            }
        }
    }
    return pts;
}

bool same_point(const SweepPoint& x, const SweepPoint& y)
{
    return x.n_samples == y.n_samples && x.k_mapped == y.k_mapped && x.latent_dim == y.latent_dim
           && x.drop_a == y.drop_a && x.drop_b == y.drop_b;
}

void write_point(std::ostream& os, const SweepPoint& p)
{
    os << p.n_samples << ',' << p.k_mapped << ',' << p.latent_dim << ',' << p.drop_a << ',' << p.drop_b;
}

// Plain set arithmetic over the gold map, independent of evaluate's
// bookkeeping.
double naive_f1(const std::vector<MatchProposal>& proposals, const ScenarioSpec& spec)
{
    std::set<std::pair<std::string, std::string>> accepted;
    for (const auto& p : proposals) {
        if (p.accepted) {
            accepted.insert({p.feature_a, p.feature_b});
        }
    }
    std::set<std::string> gold_a;
    std::set<std::string> gold_b;
    std::set<std::pair<std::string, std::string>> gold;
    for (const auto& g : spec.gold_map) {
        gold.insert(g);
        gold_a.insert(g.first);
        gold_b.insert(g.second);
    }
    for (const auto& m : spec.mapped) {
        gold_a.insert(m);
        gold_b.insert(m);
    }
    double tp = 0;
    double fp = 0;
    for (const auto& pr : accepted) {
        if (gold.contains(pr)) {
            tp += 1;
        } else if (gold_a.contains(pr.first) || gold_b.contains(pr.second)) {
            const bool known_pair = pr.first == pr.second && std::find(spec.mapped.begin(), spec.mapped.end(),
                                                                       pr.first) != spec.mapped.end();
            fp += known_pair ? 0 : 1;
        }
    }
    const double fn = static_cast<double>(gold.size()) - tp;
    return tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
}

constexpr const char* point_header = "n_samples,k_mapped,latent_dim,drop_a,drop_b";

std::string csv_escape(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
    }
    return out + '"';
}

} // namespace

BenchmarkReport run_benchmark(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto points = sweep_points(cfg);
    struct Task {
        std::size_t point;
        int trial;
        int perm;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (int t = 0; t < cfg.n_trials; ++t) {
            for (int q = 0; q < cfg.n_perms; ++q) {
                tasks.push_back({p, t, q});
            }
        }
    }
    const std::size_t n_methods = cfg.methods.size();
    std::vector<ReplicateRecord> records(tasks.size() * n_methods);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::size_t done = 0;

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& task = tasks[i];
            const SweepPoint& pt = points[task.point];
            std::optional<Scenario> sc;
            std::string scenario_error;
            try {
                sc = benchmark_scenario(cfg, pt, task.trial, task.perm);
            } catch (const std::exception& e) {
                scenario_error = e.what();
            }
            for (std::size_t m = 0; m < n_methods; ++m) {
                ReplicateRecord& rec = records[i * n_methods + m];
                rec.point = pt;
                rec.trial = task.trial;
                rec.perm = task.perm;
                rec.method = cfg.methods[m];
                if (!sc) {
                    rec.ok = false;
                    rec.error = scenario_error;
                    continue;
                }
                PipelineConfig pc = cfg.pipeline;
                pc.method = cfg.methods[m];
                pc.chimeric.latent_dim = pt.latent_dim;
                pc.seed = derive_seed(derive_seed(cfg.seed, 6, task.point),
                                      static_cast<std::uint64_t>(task.trial), static_cast<std::uint64_t>(task.perm));
                try {
                    const MatchResult res = run_method(sc->a, sc->b, pc);
                    rec.eval = evaluate(res.proposals, sc->spec);
                    if (std::abs(rec.eval.f1 - naive_f1(res.proposals, sc->spec)) > 1e-12) {
                        throw Error("internal: F1 disagrees with the set-based recount");
                    }
                    if (res.model) {
                        rec.reconstruction = reconstruction_scores(*res.model, *sc);
                    }
                } catch (const std::exception& e) {
                    rec.ok = false;
                    rec.error = e.what();
                }
            }
            std::lock_guard lock(log_mutex);
            ++done;
            log::info("bench: replicate " + std::to_string(done) + "/" + std::to_string(tasks.size()) + " done");
        }
    };
    unsigned n_threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, tasks.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }

    BenchmarkReport report;
    report.replicates = std::move(records);
    for (const auto& pt : points) {
        std::vector<std::vector<double>> f1s(n_methods);
        for (std::size_t m = 0; m < n_methods; ++m) {
            SummaryRow row;
            row.point = pt;
            row.method = cfg.methods[m];
            for (const auto& rec : report.replicates) {
                if (rec.method == row.method && same_point(rec.point, pt)) {
                    ++row.replicates;
                    if (rec.ok) {
                        f1s[m].push_back(rec.eval.f1);
                    } else {
                        ++row.failures;
                    }
                }
            }
            if (!f1s[m].empty()) {
                row.mean_f1 = mean(f1s[m]);
                if (f1s[m].size() > 1) {
                    row.sd_f1 = sample_sd(f1s[m]);
                }
            }
            report.summary.push_back(row);
        }
        for (std::size_t x = 0; x < n_methods; ++x) {
            for (std::size_t y = x + 1; y < n_methods; ++y) {
                if (f1s[x].size() < 3 || f1s[y].size() < 3) {
                    continue;
                }
                WilcoxonRow w;
                w.point = pt;
                w.first = cfg.methods[x];
                w.second = cfg.methods[y];
                w.test = wilcoxon_ranksum(f1s[x], f1s[y]);
                w.significant = w.test.p_value < 0.05;
                report.wilcoxon.push_back(w);
            }
        }
    }

    if (!cfg.output_dir.empty()) {
        std::ostringstream s;
        std::ostringstream r;
        std::ostringstream w;
        write_summary_csv(s, report);
        write_replicates_csv(r, report);
        write_wilcoxon_csv(w, report);
        std::ostringstream c;
        write_reconstruction_csv(c, report);
        write_text(cfg.output_dir / "reconstruction.csv", c.str());
        write_text(cfg.output_dir / "summary.csv", s.str());
        write_text(cfg.output_dir / "replicates.csv", r.str());
        write_text(cfg.output_dir / "wilcoxon.csv", w.str());
    }
    return report;
}

std::vector<ReconstructionRecord> reconstruction_scores(const ChimericModel& model, const Scenario& sc)
{
    std::vector<ReconstructionRecord> out;
    const Dataset z = model.translate(sc.a, TranslateDirection::a_to_b);
    for (std::size_t j = 0; j < sc.a_withheld.cols(); ++j) {
        const std::string& name = sc.a_withheld.feature(j).name;
        if (const auto col = z.find(name)) {
            out.push_back({name, "unshared", pearson(z.column(*col), sc.a_withheld.column(j)).value,
                           mutual_information(z.column(*col), sc.a_withheld.column(j)).value});
        }
    }
    for (const auto& [fb, tag] : sc.spec.transformed_features) {
        const auto g = std::find_if(sc.spec.gold_map.begin(), sc.spec.gold_map.end(),
                                    [&](const FeaturePair& p) { return p.second == fb; });
        const auto col = z.find(fb);
        if (g == sc.spec.gold_map.end() || !col || !sc.a.find(g->first)) {
            continue;
        }
        const Vector truth = sc.a.column(g->first);
        out.push_back({fb, "transformed", pearson(z.column(*col), truth.array().square().matrix()).value,
                       mutual_information(z.column(*col), truth).value});
    }
    return out;
}

void write_reconstruction_csv(std::ostream& os, const BenchmarkReport& r)
{
    os << point_header << ",trial,perm,method,feature,kind,pearson,mutual_information\n";
    for (const auto& rec : r.replicates) {
        for (const auto& c : rec.reconstruction) {
            write_point(os, rec.point);
            os << ',' << rec.trial << ',' << rec.perm << ',' << to_string(rec.method) << ',' << c.feature << ','
               << c.kind << ',' << format_double(c.pearson) << ',' << format_double(c.mutual_information) << '\n';
        }
    }
}

void write_summary_csv(std::ostream& os, const BenchmarkReport& r)
{
    os << point_header << ",method,replicates,failures,mean_f1,sd_f1\n";
    for (const auto& s : r.summary) {
        write_point(os, s.point);
        os << ',' << to_string(s.method) << ',' << s.replicates << ',' << s.failures << ','
           << format_double(s.mean_f1) << ',' << (s.sd_f1 ? format_double(*s.sd_f1) : std::string()) << '\n';
    }
}

void write_replicates_csv(std::ostream& os, const BenchmarkReport& r)
{
    os << point_header << ",trial,perm,method,status,f1,tp,fp,fn,error\n";
    for (const auto& rec : r.replicates) {
        write_point(os, rec.point);
        os << ',' << rec.trial << ',' << rec.perm << ',' << to_string(rec.method) << ','
           << (rec.ok ? "ok" : "failed") << ',';
        if (rec.ok) {
            os << format_double(rec.eval.f1) << ',' << rec.eval.tp << ',' << rec.eval.fp << ',' << rec.eval.fn << ',';
        } else {
            os << ",,,," << csv_escape(rec.error);
        }
        os << '\n';
    }
}

void write_wilcoxon_csv(std::ostream& os, const BenchmarkReport& r)
{
    os << point_header << ",method_1,method_2,U,z,p_value,significant\n";
    for (const auto& w : r.wilcoxon) {
        write_point(os, w.point);
        os << ',' << to_string(w.first) << ',' << to_string(w.second) << ',' << format_double(w.test.statistic)
           << ',' << format_double(w.test.z) << ',' << format_double(w.test.p_value) << ','
           << (w.significant ? 1 : 0) << '\n';
    }
}

} // namespace chimatch
