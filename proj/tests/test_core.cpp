#include "chimatch/core.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

using namespace chimatch;

namespace {

RawColumn text_column(std::string name, std::vector<std::optional<std::string>> v)
{
    RawColumn c;
    c.name = std::move(name);
    c.categorical = true;
    c.text = std::move(v);
    return c;
}

RawColumn numeric_column(std::string name, std::vector<std::optional<double>> v)
{
    RawColumn c;
    c.name = std::move(name);
    c.numeric = std::move(v);
    return c;
}

Dataset named(std::vector<std::string> names, const Matrix& v)
{
    std::vector<FeatureMeta> f;
    for (auto& n : names) {
        FeatureMeta m;
        m.name = n;
        f.push_back(m);
    }
    return Dataset("t", v, f);
}

} // namespace

TEST_CASE("one_hot_encode expands two levels")
{
    RawTable t{"t", {text_column("c", {"a", "b", "a"})}};
    const Dataset ds = one_hot_encode(t);
    REQUIRE(ds.cols() == 2);
    CHECK(ds.feature(0).name == "c=a");
    CHECK(ds.feature(1).name == "c=b");
    CHECK(ds.feature(0).kind == FeatureKind::onehot_member);
    CHECK(ds.feature(0).parent == "c");
    CHECK(ds.feature(1).level == "b");
    CHECK(ds.column(0)(0) == 1.0);
    CHECK(ds.column(0)(1) == 0.0);
    CHECK(ds.column(0)(2) == 1.0);
    CHECK(ds.column(1)(1) == 1.0);
}

TEST_CASE("one_hot_encode keeps a single level with a warning")
{
    RawTable t{"t", {text_column("c", {"x", "x", "x"})}};
    Diagnostics diag;
    const Dataset ds = one_hot_encode(t, &diag);
    REQUIRE(ds.cols() == 1);
    CHECK(ds.column(0).sum() == 3.0);
    CHECK_FALSE(diag.empty());
}

TEST_CASE("one_hot_encode sorts levels and preserves row sums")
{
    RawTable t{"t",
               {text_column("z", {"q", "b", "m", "b"}), numeric_column("n", {1.5, 2.0, 3.0, 4.0}),
                numeric_column("flag", {0, 1, 1, 0})}};
    const Dataset ds = one_hot_encode(t);
    CHECK(ds.rows() == 4);
    CHECK(ds.feature_names() == std::vector<std::string>{"z=b", "z=m", "z=q", "n", "flag"});
    CHECK(ds.feature(4).kind == FeatureKind::binary);
    CHECK(ds.feature(3).kind == FeatureKind::continuous);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(ds.values().row(static_cast<Eigen::Index>(r)).head(3).sum() == 1.0);
    }
}

TEST_CASE("unit_norm scales continuous columns")
{
    Matrix v(2, 2);
    v << 3, 1, 4, 0;
    auto ds = named({"x", "flag"}, v);
    std::vector<FeatureMeta> f = ds.features();
    f[1].kind = FeatureKind::binary;
    ds = Dataset("t", v, f);
    const Dataset u = unit_norm(ds);
    CHECK(u.column(0)(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(u.column(0)(1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(u.column(1)(0) == 1.0);
}

TEST_CASE("unit_norm leaves zero columns with a warning")
{
    Matrix v = Matrix::Zero(3, 1);
    Diagnostics diag;
    const Dataset u = unit_norm(named({"z"}, v), &diag);
    CHECK(u.column(0).isZero());
    CHECK_FALSE(diag.empty());
}

TEST_CASE("unit_norm gives unit columns and is scale invariant")
{
    Rng rng(3);
    std::normal_distribution<double> nd;
    Matrix v(50, 3);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v.data()[i] = nd(rng);
    }
    const Dataset u = unit_norm(named({"a", "b", "c"}, v));
    const Dataset s = unit_norm(named({"a", "b", "c"}, 7.5 * v));
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(u.column(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK((u.values() - s.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("impute_simple fills mean and mode")
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    RawTable t{"t", {numeric_column("c", {1.0, std::nullopt, 3.0}), numeric_column("b", {0, 1, 1})}};
    Dataset ds = one_hot_encode(t);
    ds = impute_simple(ds);
    CHECK(ds.column(0)(1) == 2.0);
    CHECK(ds.feature(0).imputed_rows == std::vector<std::size_t>{1});

    Matrix v(4, 1);
    v << 0, 1, 1, nan;
    std::vector<FeatureMeta> f(1);
    f[0].name = "bin";
    f[0].kind = FeatureKind::binary;
    const Dataset filled = impute_simple(Dataset("t", v, f));
    CHECK(filled.column(0)(3) == 1.0);
    CHECK_FALSE(filled.has_missing());
}

TEST_CASE("impute_simple rejects a fully missing column")
{
    RawTable t{"t", {numeric_column("gone", {std::nullopt, std::nullopt})}};
    CHECK_THROWS_WITH_AS(impute_simple(one_hot_encode(t)), doctest::Contains("gone"), Error);
}

TEST_CASE("reorder_mapped_first")
{
    Matrix v(1, 3);
    v << 1, 2, 3;
    const Dataset ds = named({"c", "a", "b"}, v);
    const std::vector<std::string> mapped = {"b"};
    const Dataset r = reorder_mapped_first(ds, mapped);
    CHECK(r.feature_names() == std::vector<std::string>{"b", "c", "a"});
    CHECK(r.mapped_count() == 1);
    CHECK(r.values()(0, 0) == 3.0);

    SUBCASE("idempotent")
    {
        const Dataset twice = reorder_mapped_first(r, mapped);
        CHECK(twice.feature_names() == r.feature_names());
        CHECK(twice.values() == r.values());
    }
    SUBCASE("all mapped")
    {
        const std::vector<std::string> all = {"a", "b", "c"};
        const Dataset full = reorder_mapped_first(ds, all);
        CHECK(full.mapped_count() == 3);
        CHECK(full.feature_names() == all);
    }
    SUBCASE("unknown name")
    {
        const std::vector<std::string> bad = {"z"};
        CHECK_THROWS_AS(reorder_mapped_first(ds, bad), Error);
    }
}

TEST_CASE("dataset rejects duplicate names and bad mapped counts")
{
    Matrix v = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(named({"a", "a"}, v), Error);
    std::vector<FeatureMeta> f(2);
    f[0].name = "a";
    f[1].name = "b";
    CHECK_THROWS_AS(Dataset("t", v, f, 3), Error);
    f[0].certainty_weight = 0.0;
    CHECK_THROWS_AS(Dataset("t", v, f, 1), Error);
}

TEST_CASE("split_rows partitions deterministically")
{
    const auto [tr, ho] = split_rows(100, 0.25, 9);
    CHECK(ho.size() == 25);
    CHECK(tr.size() == 75);
    std::vector<std::size_t> all(tr);
    all.insert(all.end(), ho.begin(), ho.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(all[i] == i);
    }
    const auto again = split_rows(100, 0.25, 9);
    CHECK(again.second == ho);
}
