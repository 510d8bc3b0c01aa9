#ifndef CHIMATCH_IO_HPP
#define CHIMATCH_IO_HPP

#include "chimatch/core.hpp"
#include "chimatch/matcher.hpp"
#include "chimatch/stats.hpp"
#include "chimatch/synthgen.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

// Comma-separated table with a header row. Quoted fields may contain commas
// and doubled quotes. Empty cells, "NA" and "NaN" are missing. A column is
// numeric when every present cell parses as a number.
RawTable read_csv_table(std::istream& is, const std::string& name);
RawTable read_csv_table(const std::filesystem::path& path);

// Splits one CSV record into fields.
std::vector<std::string> split_csv_line(const std::string& line);

struct MappedEntry {
    std::string name;
    double weight = 1.0;
};

// One mapped feature per line: "name" or "name,weight". Blank lines and lines
// starting with '#' are skipped.
std::vector<MappedEntry> read_mapped_list(std::istream& is);
std::vector<MappedEntry> read_mapped_list(const std::filesystem::path& path);

// One pair per line: "featureA,featureB".
std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& is);
std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path);

void write_proposals_csv(std::ostream& os, const std::vector<MatchProposal>& proposals);
std::vector<MatchProposal> read_proposals_csv(std::istream& is);

void write_similarity_csv(std::ostream& os, const SimilarityMatrix& sim);
void write_dataset_csv(std::ostream& os, const Dataset& ds);
void write_pvalue_report_csv(std::ostream& os, const PValueReport& report);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_spec_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace chimatch

#endif // CHIMATCH_IO_HPP
