#include "chimatch/stats.hpp"
#include "chimatch/synthgen.hpp"

#include <doctest.h>

#include <set>

using namespace chimatch;

TEST_CASE("make_covariance is symmetric positive definite")
{
    const Matrix c = make_covariance({20, 10, 4});
    CHECK(c.rows() == 20);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-9);
    Rng rng(8);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 100; ++t) {
        Vector x(20);
        for (auto& v : x) {
            v = nd(rng);
        }
        CHECK(x.dot(c * x) > 0.0);
    }
    CHECK(make_covariance({20, 10, 4}) == c);
}

TEST_CASE("make_covariance boundaries")
{
    const Matrix c = make_covariance({1, 1, 2});
    REQUIRE(c.size() == 1);
    CHECK(c(0, 0) >= 1.0);
    CHECK_THROWS_AS(make_covariance({3, 4, 0}), Error);
}

TEST_CASE("gaussian sample covariance tracks the target")
{
    const Matrix c = make_covariance({20, 10, 1});
    GeneratorSpec g;
    g.n_samples = 10000;
    g.seed = 2;
    const Dataset ds = sample(g, c);
    const Matrix x = ds.values();
    const RowVector mu = x.colwise().mean();
    const Matrix centered = x.rowwise() - mu;
    const Matrix s = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    CHECK((s - c).norm() / c.norm() < 0.1);
    CHECK(mu.cwiseAbs().maxCoeff() < 0.3);
}

TEST_CASE("binarized family is 0/1 and two_cluster means fall in range")
{
    const Matrix c = make_covariance({20, 10, 1});
    GeneratorSpec g;
    g.family = Family::binarized_two_cluster;
    g.n_samples = 500;
    const Dataset b = sample(g, c);
    CHECK((b.values().array() * (1.0 - b.values().array())).abs().maxCoeff() == 0.0);
    CHECK(b.feature(0).kind == FeatureKind::binary);

    g.family = Family::two_cluster_gaussian;
    g.n_samples = 4000;
    const Dataset t = sample(g, c);
    const RowVector mu = t.values().colwise().mean();
    // the pooled mean is the midpoint of two means drawn in [10,20]
    CHECK(mu.minCoeff() > 10.0 - 0.5);
    CHECK(mu.maxCoeff() < 20.0 + 0.5);
    const auto means = draw_mixture_means(20, 10.0, 20.0, g.param_seed);
    CHECK(means.first.minCoeff() >= 10.0);
    CHECK(means.second.maxCoeff() <= 20.0);
}

TEST_CASE("sample rejects a non-positive-definite covariance")
{
    GeneratorSpec g;
    g.dim = 2;
    Matrix bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK_THROWS_AS(sample(g, bad), Error);
}

TEST_CASE("build_scenario counts and determinism")
{
    const Matrix c = make_covariance({20, 10, 1});
    GeneratorSpec g;
    g.n_samples = 200;
    g.seed = 1;
    const Dataset sa = sample(g, c, "A");
    g.seed = 2;
    const Dataset sb = sample(g, c, "B");
    ScenarioOptions o;
    o.k_mapped = 4;
    o.seed = 3;

    SUBCASE("permutation")
    {
        const Scenario s = build_scenario(sa, sb, o);
        CHECK(s.spec.gold_map.size() == 16);
        CHECK(s.a.mapped_count() == 4);
        CHECK(s.b.cols() == 20);
        CHECK_NOTHROW(s.spec.validate());
        for (const auto& [fa, fb] : s.spec.gold_map) {
            CHECK(s.a.find(fa));
            CHECK(s.b.find(fb));
        }
        const Scenario again = build_scenario(sa, sb, o);
        CHECK(again.b.values() == s.b.values());
        CHECK(again.spec.gold_map == s.spec.gold_map);
    }
    SUBCASE("onto with extra B columns")
    {
        o.map_kind = MapKind::onto;
        o.drop_a = 5;
        const Scenario s = build_scenario(sa, sb, o);
        CHECK(s.spec.b_only.size() == 5);
        CHECK(s.spec.gold_map.size() == 11);
        CHECK(s.a.cols() == 15);
        CHECK(s.a_withheld.cols() == 5);
    }
    SUBCASE("partial")
    {
        o.map_kind = MapKind::partial;
        o.drop_a = 2;
        o.drop_b = 3;
        const Scenario s = build_scenario(sa, sb, o);
        CHECK(s.spec.b_only.size() == 2);
        CHECK(s.spec.a_only.size() == 3);
        CHECK(s.spec.gold_map.size() == 11);
    }
    SUBCASE("inconsistent drops")
    {
        o.drop_a = 2;
        CHECK_THROWS_AS(build_scenario(sa, sb, o), Error);
        o.map_kind = MapKind::partial;
        CHECK_THROWS_AS(build_scenario(sa, sb, o), Error);
    }
    SUBCASE("mapped set depends on the trial only")
    {
        ScenarioOptions p = o;
        p.permutation = 1;
        const Scenario s0 = build_scenario(sa, sb, o);
        const Scenario s1 = build_scenario(sa, sb, p);
        CHECK(s0.spec.mapped == s1.spec.mapped);
        CHECK(s0.spec.gold_map != s1.spec.gold_map);
    }
}

TEST_CASE("square transform decorrelates a symmetric column")
{
    const Matrix c = make_covariance({20, 10, 1});
    GeneratorSpec g;
    g.n_samples = 10000;
    g.seed = 1;
    const Dataset sa = sample(g, c, "A");
    g.seed = 2;
    const Dataset sb = sample(g, c, "B");
    ScenarioOptions o;
    o.k_mapped = 4;
    o.transform_count = 1;
    o.seed = 5;
    const Scenario s = build_scenario(sa, sb, o);
    REQUIRE(s.spec.transformed_features.size() == 1);
    const auto& fb = s.spec.transformed_features[0].first;
    CHECK(s.b.column(fb).minCoeff() >= 0.0);
    std::string src;
    for (const auto& [a, b] : s.spec.gold_map) {
        if (b == fb) {
            src = a;
        }
    }
    REQUIRE_FALSE(src.empty());
    const Vector raw = sb.column(src);
    CHECK(std::abs(pearson(raw, raw.array().square().matrix()).value) < 0.05);
    // the transformed B column is a function of B's own untransformed draw
    CHECK(std::abs(pearson(s.b.column(fb), raw.array().square().matrix()).value) > 0.999);
}
