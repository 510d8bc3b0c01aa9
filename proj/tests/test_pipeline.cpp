#include "chimatch/pipeline.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace chimatch;

namespace {

MatchProposal accepted(const std::string& a, const std::string& b, bool ok = true)
{
    MatchProposal p;
    p.feature_a = a;
    p.feature_b = b;
    p.accepted = ok;
    return p;
}

ScenarioSpec three_pairs()
{
    ScenarioSpec s;
    s.map_kind = MapKind::partial;
    s.gold_map = {{"a1", "b1"}, {"a2", "b2"}, {"a3", "b3"}};
    s.mapped = {"m0", "m1"};
    s.a_only = {"a9"};
    s.b_only = {"b9"};
    return s;
}

// Set-based F1 computed directly from the evaluation rules.
double naive_f1(const std::vector<MatchProposal>& props, const ScenarioSpec& s)
{
    std::set<std::pair<std::string, std::string>> acc;
    for (const auto& p : props) {
        if (p.accepted) {
            acc.insert({p.feature_a, p.feature_b});
        }
    }
    const std::set<std::pair<std::string, std::string>> gold(s.gold_map.begin(), s.gold_map.end());
    std::set<std::string> ga;
    std::set<std::string> gb;
    for (const auto& [a, b] : gold) {
        ga.insert(a);
        gb.insert(b);
    }
    const std::set<std::string> mapped(s.mapped.begin(), s.mapped.end());
    double tp = 0;
    double fp = 0;
    for (const auto& pr : acc) {
        if (gold.contains(pr)) {
            ++tp;
        } else if (ga.contains(pr.first) || gb.contains(pr.second)
                   || mapped.contains(pr.first) != mapped.contains(pr.second)
                   || (mapped.contains(pr.first) && pr.first != pr.second)) {
            ++fp;
        }
    }
    const double fn = static_cast<double>(gold.size()) - tp;
    return 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
}

Scenario gaussian_scenario(std::size_t n, std::size_t k, std::uint64_t seed)
{
    ExperimentConfig cfg;
    cfg.seed = seed;
    SweepPoint pt;
    pt.n_samples = n;
    pt.k_mapped = k;
    return benchmark_scenario(cfg, pt, 0, 0);
}

PipelineConfig fast_pipeline(Method m)
{
    PipelineConfig c;
    c.method = m;
    c.chimeric.epochs = 5;
    c.chimeric.hidden = {20, 10};
    c.kang.iterations = 500;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("evaluate examples")
{
    const ScenarioSpec s = three_pairs();
    SUBCASE("perfect")
    {
        const auto r = evaluate({accepted("a1", "b1"), accepted("a2", "b2"), accepted("a3", "b3")}, s);
        CHECK(r.f1 == 1.0);
        CHECK(r.tp == 3);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
    }
    SUBCASE("nothing accepted")
    {
        const auto r = evaluate({accepted("a1", "b1", false)}, s);
        CHECK(r.f1 == 0.0);
        CHECK(r.fn == 3);
        CHECK(evaluate({}, s).f1 == 0.0);
    }
    SUBCASE("two correct and one wrong")
    {
        const auto r = evaluate({accepted("a1", "b1"), accepted("a2", "b2"), accepted("a3", "b9")}, s);
        CHECK(r.tp == 2);
        CHECK(r.fp == 1);
        CHECK(r.fn == 1);
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("pairs between gold-less features are ignored")
    {
        const auto r = evaluate({accepted("a1", "b1"), accepted("a9", "b9")}, s);
        CHECK(r.fp == 0);
        REQUIRE(r.pairs.size() == 4);
        CHECK(r.pairs[1].outcome == Outcome::ignored);
    }
    SUBCASE("mapped features only pair with their namesake")
    {
        CHECK(evaluate({accepted("m0", "m1")}, s).fp == 1);
        CHECK(evaluate({accepted("m0", "b9")}, s).fp == 1);
        CHECK(evaluate({accepted("m0", "m0")}, s).fp == 0);
    }
    SUBCASE("duplicates count once")
    {
        const auto r = evaluate({accepted("a1", "b2"), accepted("a1", "b2")}, s);
        CHECK(r.fp == 1);
    }
    SUBCASE("unknown feature")
    {
        CHECK_THROWS_AS(evaluate({accepted("zz", "b1")}, s), Error);
        CHECK_THROWS_AS(evaluate({accepted("a1", "zz", false)}, s), Error);
    }
}

TEST_CASE("evaluate agrees with a set-based count and ignores order")
{
    const ScenarioSpec s = three_pairs();
    const std::vector<std::string> as = {"a1", "a2", "a3", "a9", "m0", "m1"};
    const std::vector<std::string> bs = {"b1", "b2", "b3", "b9", "m0", "m1"};
    Rng rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, 5);
    std::bernoulli_distribution coin(0.7);
    for (int t = 0; t < 300; ++t) {
        std::vector<MatchProposal> props;
        const std::size_t n = pick(rng) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            props.push_back(accepted(as[pick(rng)], bs[pick(rng)], coin(rng)));
        }
        const double f1 = evaluate(props, s).f1;
        CHECK(f1 == doctest::Approx(naive_f1(props, s)).epsilon(1e-15));
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        std::shuffle(props.begin(), props.end(), rng);
        CHECK(evaluate(props, s).f1 == f1);
    }
}

TEST_CASE("eval csv")
{
    EvalReport r;
    r.tp = 2;
    r.fp = 1;
    r.fn = 1;
    r.precision = 2.0 / 3.0;
    r.recall = 2.0 / 3.0;
    r.f1 = 2.0 / 3.0;
    std::ostringstream os;
    write_eval_csv(os, r);
    CHECK(os.str().rfind("metric,value\ntp,2\nfp,1\nfn,1\nprecision,", 0) == 0);
}

TEST_CASE("string conversions")
{
    for (Method m : {Method::kmf, Method::chimeric, Method::kmf_then_chimeric, Method::kang}) {
        CHECK(method_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(method_from_string("magic"), Error);
    CHECK(to_string(Outcome::true_positive) == "TP");
    CHECK(holdout_translation_from_string("full") == HoldoutTranslation::full);
}

TEST_CASE("pipeline config json")
{
    PipelineConfig c;
    c.method = Method::chimeric;
    c.similarity_floor = 0.3;
    c.flip_direction = true;
    c.dependence = DependenceMeasure::mutual_information;
    c.forbidden = {{"x", "y"}};
    c.promotion.kind = PromotionPolicy::Kind::top_fraction;
    c.promotion.value = 0.25;
    c.kang.metric = KangMetric::normal;
    c.seed = 99;
    const PipelineConfig back = pipeline_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.similarity_floor == 0.3);
    CHECK(back.forbidden == c.forbidden);
    CHECK_FALSE(pipeline_config_from_json(nlohmann::json::object()).similarity_floor.has_value());
}

TEST_CASE("experiment config json")
{
    ExperimentConfig c;
    c.family = Family::two_cluster_gaussian;
    c.k_mapped = {2, 4};
    c.latent_dims = {5, 10};
    c.methods = {Method::chimeric};
    c.n_trials = 2;
    c.output_dir = "out/x";
    const ExperimentConfig back = experiment_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));

    // onto and partial maps default the Kang search to the normal metric
    const auto onto = experiment_config_from_json({{"map_kind", "onto"}, {"drop_a", {2}}});
    CHECK(onto.pipeline.kang.metric == KangMetric::normal);
    CHECK(onto.pipeline.kang.iterations == 5000);
    CHECK_THROWS_AS(experiment_config_from_json({{"k_mapped", nlohmann::json::array()}}), Error);
    CHECK_THROWS_AS(experiment_config_from_json({{"n_perms", 0}}), Error);
}

TEST_CASE("preprocess expands a mapped categorical and orders it first")
{
    RawTable t;
    t.name = "t";
    RawColumn num;
    num.name = "x";
    num.numeric = {1.0, 2.0, std::nullopt, 4.0};
    RawColumn cat;
    cat.name = "c";
    cat.categorical = true;
    cat.text = {"u", "v", "u", "u"};
    t.columns = {num, cat};
    const Dataset ds = preprocess(t, {{"c", 0.5}});
    CHECK(ds.mapped_count() == 2);
    CHECK(ds.feature_names() == std::vector<std::string>{"c=u", "c=v", "x"});
    CHECK(ds.feature(0).certainty_weight == 0.5);
    CHECK(ds.column("x").norm() == doctest::Approx(1.0));
    CHECK_FALSE(ds.has_missing());
    CHECK_THROWS_AS(preprocess(t, {{"nope", 1.0}}), Error);
}

TEST_CASE("run_method on a small Gaussian pair")
{
    const Scenario sc = gaussian_scenario(3000, 8, 4);
    SUBCASE("kmf")
    {
        const MatchResult r = run_method(sc.a, sc.b, fast_pipeline(Method::kmf));
        CHECK(r.proposals.size() == 12);
        CHECK(evaluate(r.proposals, sc.spec).f1 >= 0.7);
        CHECK(r.similarity.rows() == 12);
        CHECK(r.holdout_rows_a == 750);
        CHECK_FALSE(r.model.has_value());
    }
    SUBCASE("two-stage keeps promoted pairs first and accepted")
    {
        const MatchResult r = run_method(sc.a, sc.b, fast_pipeline(Method::kmf_then_chimeric));
        REQUIRE(r.promoted.size() <= r.proposals.size());
        for (std::size_t i = 0; i < r.promoted.size(); ++i) {
            CHECK(r.proposals[i].feature_a == r.promoted[i].first);
            CHECK(r.proposals[i].accepted);
        }
        std::set<std::string> seen;
        for (const auto& p : r.proposals) {
            CHECK(seen.insert(p.feature_a).second);
        }
    }
    SUBCASE("kang")
    {
        const MatchResult r = run_method(sc.a, sc.b, fast_pipeline(Method::kang));
        CHECK_FALSE(r.proposals.empty());
        CHECK(evaluate(r.proposals, sc.spec).f1 >= 0.0);
    }
    SUBCASE("same seed, same result")
    {
        const auto x = run_method(sc.a, sc.b, fast_pipeline(Method::chimeric));
        const auto y = run_method(sc.a, sc.b, fast_pipeline(Method::chimeric));
        REQUIRE(x.proposals.size() == y.proposals.size());
        for (std::size_t i = 0; i < x.proposals.size(); ++i) {
            CHECK(x.proposals[i].feature_b == y.proposals[i].feature_b);
            CHECK(x.proposals[i].p_value == y.proposals[i].p_value);
        }
    }
}

TEST_CASE("everything pre-mapped yields no proposals")
{
    const Scenario sc = gaussian_scenario(500, 4, 5);
    std::vector<std::string> all = sc.a.mapped_names();
    for (const auto& [fa, fb] : sc.spec.gold_map) {
        (void)fb;
        all.push_back(fa);
    }
    // rename B's unmapped columns after their A partners so both sides share names
    std::vector<FeatureMeta> fb = sc.b.features();
    for (auto& f : fb) {
        for (const auto& [ga, gb] : sc.spec.gold_map) {
            if (f.name == gb) {
                f.name = ga;
            }
        }
    }
    const Dataset b = reorder_mapped_first(Dataset("B", sc.b.values(), fb), all);
    const Dataset a = reorder_mapped_first(sc.a, all);
    for (Method m : {Method::kmf, Method::chimeric, Method::kmf_then_chimeric, Method::kang}) {
        const MatchResult r = run_method(a, b, fast_pipeline(m));
        CHECK(r.proposals.empty());
        CHECK(r.report.pairs.empty());
    }
}

TEST_CASE("tune_hyperparams")
{
    const Scenario sc = gaussian_scenario(2000, 6, 6);
    SUBCASE("singleton grid")
    {
        const TuneResult t = tune_hyperparams(sc.a, sc.b, {fast_pipeline(Method::kmf)}, TuneProtocol::half_split, 3, 1);
        CHECK(t.best_index == 0);
        REQUIRE(t.fold_scores.size() == 1);
        CHECK(t.fold_scores[0].size() == 3);
        CHECK(t.best.method == Method::kmf);
        double mean = 0.0;
        for (double v : t.fold_scores[0]) {
            mean += v / 3.0;
        }
        CHECK(t.mean_scores[0] == doctest::Approx(mean));
    }
    SUBCASE("leave-one-out with two mapped features")
    {
        const Dataset a = sc.a.with_mapped_count(2);
        const Dataset b = sc.b.with_mapped_count(2);
        const TuneResult t = tune_hyperparams(a, b, {fast_pipeline(Method::kmf)}, TuneProtocol::leave_one_out);
        CHECK(t.fold_scores[0].size() == 2);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(tune_hyperparams(sc.a, sc.b, {}, TuneProtocol::half_split), Error);
        CHECK_THROWS_AS(tune_hyperparams(sc.a.with_mapped_count(3), sc.b.with_mapped_count(3),
                                         {fast_pipeline(Method::kmf)}, TuneProtocol::half_split),
                        Error);
        CHECK_THROWS_AS(tune_hyperparams(sc.a.with_mapped_count(1), sc.b.with_mapped_count(1),
                                         {fast_pipeline(Method::kmf)}, TuneProtocol::leave_one_out),
                        Error);
    }
}

TEST_CASE("half-split selection lands near the grid optimum")
{
    const Scenario sc = gaussian_scenario(4000, 10, 7);
    std::vector<PipelineConfig> grid;
    for (double floor : {-1.0, 0.6, 0.9, 0.99}) {
        PipelineConfig c = fast_pipeline(Method::kmf);
        c.similarity_floor = floor;
        grid.push_back(c);
    }
    PipelineConfig k = fast_pipeline(Method::kang);
    grid.push_back(k);
    const TuneResult t = tune_hyperparams(sc.a, sc.b, grid, TuneProtocol::half_split, 4, 2);
    std::vector<double> truth;
    for (const auto& c : grid) {
        truth.push_back(evaluate(run_method(sc.a, sc.b, c).proposals, sc.spec).f1);
    }
    const double best = *std::max_element(truth.begin(), truth.end());
    CHECK(truth[t.best_index] >= best - 0.1);
}

TEST_CASE("run_benchmark with a single replicate")
{
    ExperimentConfig c;
    c.dim = 8;
    c.factor_dim = 4;
    c.n_samples = {600};
    c.k_mapped = {3};
    c.methods = {Method::kmf, Method::kang};
    c.pipeline = fast_pipeline(Method::kmf);
    c.n_trials = 1;
    c.n_perms = 1;
    c.threads = 1;
    const BenchmarkReport r = run_benchmark(c);
    REQUIRE(r.summary.size() == 2);
    for (const auto& s : r.summary) {
        CHECK(s.replicates == 1);
        CHECK(s.failures == 0);
        CHECK_FALSE(s.sd_f1.has_value());
    }
    CHECK(r.replicates.size() == 2);
    // too few replicates for a rank-sum comparison
    CHECK(r.wilcoxon.empty());

    c.n_trials = 2;
    c.n_perms = 2;
    c.threads = 2;
    const BenchmarkReport r2 = run_benchmark(c);
    c.threads = 1;
    const BenchmarkReport r3 = run_benchmark(c);
    std::ostringstream x;
    std::ostringstream y;
    write_replicates_csv(x, r2);
    write_summary_csv(x, r2);
    write_wilcoxon_csv(x, r2);
    write_replicates_csv(y, r3);
    write_summary_csv(y, r3);
    write_wilcoxon_csv(y, r3);
    CHECK(x.str() == y.str());
    CHECK(r2.summary[0].sd_f1.has_value());
    CHECK(r2.wilcoxon.size() == 1);
}
