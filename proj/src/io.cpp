#include "chimatch/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace chimatch {

namespace {

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s)
{
    return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

std::optional<double> parse_number(const std::string& s)
{
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        return std::nullopt;
    }
    return v;
}

std::string quote_if_needed(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

bool skip_line(const std::string& line)
{
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

} // namespace

std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) {
        throw Error("unterminated quote in CSV record");
    }
    out.push_back(trim(field));
    return out;
}

RawTable read_csv_table(std::istream& is, const std::string& name)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw Error("CSV '" + name + "' is empty");
    }
    const auto header = split_csv_line(line);
    std::vector<std::vector<std::string>> cells(header.size());
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw Error("CSV '" + name + "' line " + std::to_string(lineno) + ": expected "
                        + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            cells[j].push_back(fields[j]);
        }
    }
    RawTable t;
    t.name = name;
    for (std::size_t j = 0; j < header.size(); ++j) {
        RawColumn col;
        col.name = header[j];
        bool numeric = true;
        std::vector<std::optional<double>> nums;
        for (const auto& c : cells[j]) {
            if (is_missing(c)) {
                nums.emplace_back();
                continue;
            }
            auto v = parse_number(c);
            if (!v) {
                numeric = false;
                break;
            }
            nums.push_back(v);
        }
        if (numeric) {
            col.numeric = std::move(nums);
        } else {
            col.categorical = true;
            for (const auto& c : cells[j]) {
                col.text.push_back(is_missing(c) ? std::nullopt : std::optional<std::string>(c));
            }
        }
        t.columns.push_back(std::move(col));
    }
    return t;
}

RawTable read_csv_table(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return read_csv_table(in, path.stem().string());
}

std::vector<MappedEntry> read_mapped_list(std::istream& is)
{
    std::vector<MappedEntry> out;
    std::string line;
    while (std::getline(is, line)) {
        if (skip_line(line)) {
            continue;
        }
        const auto f = split_csv_line(line);
        MappedEntry e;
        e.name = f.at(0);
        if (f.size() > 1 && !f[1].empty()) {
            const auto w = parse_number(f[1]);
            if (!w || !(*w > 0.0)) {
                throw Error("mapped list: bad certainty weight for '" + e.name + "'");
            }
            e.weight = *w;
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<MappedEntry> read_mapped_list(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return read_mapped_list(in);
}

std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& is)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (skip_line(line)) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 2 || f[0].empty() || f[1].empty()) {
            throw Error("pairs file: expected 'featureA,featureB', got '" + trim(line) + "'");
        }
        out.emplace_back(f[0], f[1]);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return read_pairs(in);
}

void write_proposals_csv(std::ostream& os, const std::vector<MatchProposal>& proposals)
{
    os << "featureA,featureB,similarity,holdout_stat,p_value,accepted,rank_of_choice\n";
    for (const auto& p : proposals) {
        os << quote_if_needed(p.feature_a) << ',' << quote_if_needed(p.feature_b) << ','
           << format_double(p.similarity) << ',' << format_double(p.holdout_stat) << ','
           << format_double(p.p_value) << ',' << (p.accepted ? 1 : 0) << ',' << p.rank_of_choice << '\n';
    }
}

std::vector<MatchProposal> read_proposals_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw Error("proposals CSV is empty");
    }
    const auto header = split_csv_line(line);
    auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) {
                return j;
            }
        }
        return std::nullopt;
    };
    const auto ia = col("featureA");
    const auto ib = col("featureB");
    if (!ia || !ib) {
        throw Error("proposals CSV needs featureA and featureB columns");
    }
    const auto is_ = col("similarity");
    const auto ih = col("holdout_stat");
    const auto ip = col("p_value");
    const auto iacc = col("accepted");
    const auto ir = col("rank_of_choice");
    auto num = [](const std::vector<std::string>& f, std::optional<std::size_t> i, double dflt) {
        if (!i || f.at(*i).empty()) {
            return dflt;
        }
        if (f[*i] == "nan") {
            return std::numeric_limits<double>::quiet_NaN();
        }
        const auto v = parse_number(f[*i]);
        if (!v) {
            throw Error("proposals CSV: bad number '" + f[*i] + "'");
        }
        return *v;
    };
    std::vector<MatchProposal> out;
    while (std::getline(is, line)) {
        if (skip_line(line)) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) {
            throw Error("proposals CSV: field count mismatch");
        }
        MatchProposal p;
        p.feature_a = f[*ia];
        p.feature_b = f[*ib];
        p.similarity = num(f, is_, 0.0);
        p.holdout_stat = num(f, ih, 0.0);
        p.p_value = num(f, ip, 1.0);
        p.accepted = iacc ? (f[*iacc] == "1" || f[*iacc] == "true") : true;
        p.rank_of_choice = static_cast<int>(num(f, ir, 0.0));
        out.push_back(std::move(p));
    }
    return out;
}

void write_similarity_csv(std::ostream& os, const SimilarityMatrix& sim)
{
    os << "feature";
    for (const auto& c : sim.col_ids) {
        os << ',' << quote_if_needed(c);
    }
    os << '\n';
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        os << quote_if_needed(sim.row_ids[i]);
        for (std::size_t j = 0; j < sim.cols(); ++j) {
            os << ',' << format_double(sim.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        os << '\n';
    }
}

void write_dataset_csv(std::ostream& os, const Dataset& ds)
{
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        os << (j ? "," : "") << quote_if_needed(ds.feature(j).name);
    }
    os << '\n';
    for (Eigen::Index i = 0; i < ds.values().rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.values().cols(); ++j) {
            const double v = ds.values()(i, j);
            os << (j ? "," : "") << (std::isnan(v) ? std::string("NA") : format_double(v));
        }
        os << '\n';
    }
}

void write_pvalue_report_csv(std::ostream& os, const PValueReport& report)
{
    os << "featureA,featureB,statistic,p_value,accepted\n";
    for (const auto& e : report.pairs) {
        os << quote_if_needed(e.row_feature) << ',' << quote_if_needed(e.col_feature) << ','
           << format_double(e.statistic) << ',' << format_double(e.p_value) << ',' << (e.accepted ? 1 : 0) << '\n';
    }
}

nlohmann::json to_json(const ScenarioSpec& s)
{
    auto pairs = [](const std::vector<FeaturePair>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [a, b] : v) {
            arr.push_back({a, b});
        }
        return arr;
    };
    return {{"map_kind", to_string(s.map_kind)}, {"gold_map", pairs(s.gold_map)},
            {"mapped", s.mapped},               {"transformed_features", pairs(s.transformed_features)},
            {"b_only", s.b_only},               {"a_only", s.a_only},
            {"seed", s.seed},                   {"trial", s.trial},
            {"permutation", s.permutation}};
}

ScenarioSpec scenario_spec_from_json(const nlohmann::json& j)
{
    auto pairs = [](const nlohmann::json& arr) {
        std::vector<FeaturePair> v;
        for (const auto& p : arr) {
            if (!p.is_array() || p.size() != 2) {
                throw Error("manifest: pairs must be two-element arrays");
            }
            v.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
        }
        return v;
    };
    ScenarioSpec s;
    s.map_kind = map_kind_from_string(j.value("map_kind", "permutation"));
    s.gold_map = pairs(j.at("gold_map"));
    s.mapped = j.value("mapped", std::vector<std::string>{});
    if (j.contains("transformed_features")) {
        s.transformed_features = pairs(j.at("transformed_features"));
    }
    s.b_only = j.value("b_only", std::vector<std::string>{});
    s.a_only = j.value("a_only", std::vector<std::string>{});
    s.seed = j.value("seed", std::uint64_t{0});
    s.trial = j.value("trial", 0);
    s.permutation = j.value("permutation", 0);
    s.validate();
    return s;
}

nlohmann::json read_json(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("'" + path.string() + "': " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw Error("write to '" + path.string() + "' failed");
    }
}

} // namespace chimatch
