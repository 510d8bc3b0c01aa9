#include "chimatch/io.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <sstream>

using namespace chimatch;

TEST_CASE("split_csv_line handles quotes")
{
    CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_line("\"x,y\",\"say \"\"hi\"\"\",") == std::vector<std::string>{"x,y", "say \"hi\"", ""});
    CHECK(split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
    CHECK_THROWS_AS(split_csv_line("\"open"), Error);
}

TEST_CASE("read_csv_table types and missing cells")
{
    std::istringstream in("num,cat,flag\n1.5,red,0\nNA,blue,1\n3,,1\n");
    const RawTable t = read_csv_table(in, "t");
    REQUIRE(t.columns.size() == 3);
    CHECK(t.rows() == 3);
    CHECK_FALSE(t.columns[0].categorical);
    CHECK(t.columns[0].numeric[0] == 1.5);
    CHECK_FALSE(t.columns[0].numeric[1].has_value());
    CHECK(t.columns[1].categorical);
    CHECK(t.columns[1].text[1] == "blue");
    CHECK_FALSE(t.columns[1].text[2].has_value());

    std::istringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(read_csv_table(ragged, "r"), Error);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv_table(empty, "e"), Error);
}

TEST_CASE("mapped list and pairs files")
{
    std::istringstream m("# known\nage\n\nsex,0.5\n");
    const auto list = read_mapped_list(m);
    REQUIRE(list.size() == 2);
    CHECK(list[0].name == "age");
    CHECK(list[0].weight == 1.0);
    CHECK(list[1].weight == 0.5);
    std::istringstream bad("x,-1\n");
    CHECK_THROWS_AS(read_mapped_list(bad), Error);

    std::istringstream p("a,b\n# skip\nc,d\n");
    const auto pairs = read_pairs(p);
    CHECK(pairs == std::vector<std::pair<std::string, std::string>>{{"a", "b"}, {"c", "d"}});
    std::istringstream p2("a\n");
    CHECK_THROWS_AS(read_pairs(p2), Error);
}

TEST_CASE("proposals csv round trip")
{
    std::vector<MatchProposal> props(2);
    props[0].feature_a = "lab, value";
    props[0].feature_b = "b\"1";
    props[0].similarity = 0.1 + 0.2;
    props[0].holdout_stat = -1.0 / 3.0;
    props[0].p_value = 1e-300;
    props[0].accepted = true;
    props[0].rank_of_choice = 2;
    props[1].feature_a = "x";
    props[1].feature_b = "y";
    props[1].p_value = std::numeric_limits<double>::quiet_NaN();
    std::stringstream ss;
    write_proposals_csv(ss, props);
    const auto back = read_proposals_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].feature_a == props[0].feature_a);
    CHECK(back[0].feature_b == props[0].feature_b);
    CHECK(back[0].similarity == props[0].similarity);
    CHECK(back[0].holdout_stat == props[0].holdout_stat);
    CHECK(back[0].p_value == props[0].p_value);
    CHECK(back[0].accepted);
    CHECK(back[0].rank_of_choice == 2);
    CHECK_FALSE(back[1].accepted);
    CHECK(std::isnan(back[1].p_value));

    // accepted defaults to true when the column is absent
    std::istringstream minimal("featureA,featureB\np,q\n");
    const auto m = read_proposals_csv(minimal);
    REQUIRE(m.size() == 1);
    CHECK(m[0].accepted);
    std::istringstream wrong("a,b\n");
    CHECK_THROWS_AS(read_proposals_csv(wrong), Error);
}

TEST_CASE("similarity and dataset csv")
{
    SimilarityMatrix s;
    s.row_ids = {"r0", "r1"};
    s.col_ids = {"c0"};
    s.values = Matrix::Constant(2, 1, 0.25);
    std::ostringstream os;
    write_similarity_csv(os, s);
    CHECK(os.str() == "feature,c0\nr0,0.25\nr1,0.25\n");

    Matrix v(2, 2);
    v << 1.0, 0.1, -2.5, 1e-17;
    std::vector<FeatureMeta> f(2);
    f[0].name = "p";
    f[1].name = "q,r";
    std::stringstream ds;
    write_dataset_csv(ds, Dataset("d", v, f));
    const RawTable t = read_csv_table(ds, "d");
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[1].name == "q,r");
    CHECK(t.columns[1].numeric[1] == 1e-17);
    CHECK(t.columns[0].numeric[1] == -2.5);
}

TEST_CASE("scenario manifest round trip")
{
    ScenarioSpec s;
    s.map_kind = MapKind::partial;
    s.gold_map = {{"a1", "b4"}, {"a2", "b0"}};
    s.mapped = {"m0", "m1"};
    s.transformed_features = {{"b4", "square"}};
    s.b_only = {"b9"};
    s.a_only = {"a7"};
    s.seed = 1234567890123ULL;
    s.trial = 2;
    s.permutation = 1;
    const ScenarioSpec back = scenario_spec_from_json(to_json(s));
    CHECK(back.map_kind == s.map_kind);
    CHECK(back.gold_map == s.gold_map);
    CHECK(back.mapped == s.mapped);
    CHECK(back.transformed_features == s.transformed_features);
    CHECK(back.b_only == s.b_only);
    CHECK(back.a_only == s.a_only);
    CHECK(back.seed == s.seed);
    CHECK(back.trial == 2);
    CHECK(back.permutation == 1);
    CHECK(to_json(back) == to_json(s));
}

TEST_CASE("format_double round trips")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.125}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
