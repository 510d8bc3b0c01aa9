#ifndef CHIMATCH_PIPELINE_HPP
#define CHIMATCH_PIPELINE_HPP

#include "chimatch/chimeric.hpp"
#include "chimatch/core.hpp"
#include "chimatch/io.hpp"
#include "chimatch/kang.hpp"
#include "chimatch/kmf.hpp"
#include "chimatch/matcher.hpp"
#include "chimatch/synthgen.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chimatch {

enum class Method { kmf, chimeric, kmf_then_chimeric, kang };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// How the chimeric hold-out translation is formed for a pair (i, j).
// full: translate the hold-out rows as they are. knockout: shuffle column i
// across the hold-out rows first, so z_j can only correlate with x_i through
// the other features and a direct input-to-output path through the network
// cannot by itself make the pair significant.
enum class HoldoutTranslation { full, knockout };

std::string to_string(HoldoutTranslation h);
HoldoutTranslation holdout_translation_from_string(const std::string& s);

struct PipelineConfig {
    Method method = Method::kmf_then_chimeric;
    ChimericConfig chimeric;
    KangConfig kang;
    PromotionPolicy promotion;
    double holdout_fraction = 0.25;
    double fdr_q = 0.05;
    // unset by default; rejects accepted proposals below this similarity
    std::optional<double> similarity_floor;
    // match (x^B, z^A) instead of (x^A, z^B)
    bool flip_direction = false;
    DependenceMeasure dependence = DependenceMeasure::pearson;
    HoldoutTranslation holdout_translation = HoldoutTranslation::knockout;
    std::vector<std::pair<std::string, std::string>> forbidden;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

// Reads, encodes, imputes, orders the mapped features first (with their
// certainty weights) and scales to unit norm.
Dataset preprocess(const RawTable& table, const std::vector<MappedEntry>& mapped, Diagnostics* diag = nullptr);

struct MatchResult {
    // final proposals over the unmapped features, accepted flag set
    std::vector<MatchProposal> proposals;
    // similarity the final matching was computed from
    SimilarityMatrix similarity;
    PValueReport report;
    // pairs added to the mapped set by the two-stage pipeline
    std::vector<std::pair<std::string, std::string>> promoted;
    std::optional<ChimericModel> model;
    std::size_t train_rows_a = 0;
    std::size_t holdout_rows_a = 0;
};

// Runs one method end to end on two preprocessed datasets sharing their
// mapped prefix.
MatchResult run_method(const Dataset& a, const Dataset& b, const PipelineConfig& cfg);

// KMF -> GS -> BY -> promote -> chimeric training -> chimeric dependence ->
// GS -> BY. Promoted pairs stay in the output as accepted.
MatchResult run_two_stage(const Dataset& a, const Dataset& b, const PipelineConfig& cfg);

enum class Outcome { true_positive, false_positive, false_negative, ignored };

std::string to_string(Outcome o);

struct PairOutcome {
    std::string feature_a;
    std::string feature_b;
    Outcome outcome = Outcome::ignored;
};

struct EvalReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::vector<PairOutcome> pairs;
};

// TP: accepted pair in the gold map. FP: accepted pair where either side has
// a different gold partner. Pairs between two gold-less features are ignored.
// FN: gold pairs not accepted. F1 = 2TP / (2TP + FP + FN), 0 when undefined.
EvalReport evaluate(const std::vector<MatchProposal>& proposals, const ScenarioSpec& scenario);

void write_eval_csv(std::ostream& os, const EvalReport& report);

enum class TuneProtocol { leave_one_out, half_split };

struct TuneResult {
    std::size_t best_index = 0;
    PipelineConfig best;
    std::vector<double> mean_scores;
    // fold_scores[config][fold]
    std::vector<std::vector<double>> fold_scores;
};

// Hides mapped features, runs the pipeline with each grid point and scores the
// recovery of the hidden pairs by F1. leave_one_out hides one mapped feature
// per fold (K folds, K >= 2); half_split hides a random half per fold (K >= 4).
TuneResult tune_hyperparams(const Dataset& a, const Dataset& b, const std::vector<PipelineConfig>& grid,
                            TuneProtocol protocol, int folds = 10, std::uint64_t seed = 0);

struct ExperimentConfig {
    Family family = Family::gaussian;
    int dim = 20;
    int factor_dim = 10;
    std::vector<std::size_t> n_samples = {10000};
    MapKind map_kind = MapKind::permutation;
    std::vector<std::size_t> k_mapped = {2, 4, 6, 8, 10};
    std::vector<std::size_t> drop_a = {0};
    std::vector<std::size_t> drop_b = {0};
    std::size_t transform_count = 0;
    // empty = the pipeline's configured latent dimension only
    std::vector<int> latent_dims;
    std::vector<Method> methods = {Method::kmf, Method::kmf_then_chimeric, Method::kang};
    PipelineConfig pipeline;
    int n_trials = 3;
    int n_perms = 3;
    std::uint64_t seed = 0;
    // 0 = hardware concurrency
    unsigned threads = 0;
    std::filesystem::path output_dir;

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct SweepPoint {
    std::size_t n_samples = 0;
    std::size_t k_mapped = 0;
    int latent_dim = 0;
    std::size_t drop_a = 0;
    std::size_t drop_b = 0;
};

// How well a chimeric translation of A's rows recovers a B feature: an
// unshared feature against its withheld truth, or a transformed feature
// against its untransformed A partner (pearson to the squared partner).
struct ReconstructionRecord {
    std::string feature;
    std::string kind; // "unshared" or "transformed"
    double pearson = 0.0;
    double mutual_information = 0.0;
};

struct ReplicateRecord {
    SweepPoint point;
    int trial = 0;
    int perm = 0;
    Method method = Method::kmf;
    bool ok = true;
    std::string error;
    EvalReport eval;
    std::vector<ReconstructionRecord> reconstruction;
};

struct SummaryRow {
    SweepPoint point;
    Method method = Method::kmf;
    std::size_t replicates = 0;
    std::size_t failures = 0;
    double mean_f1 = 0.0;
    std::optional<double> sd_f1;
};

struct WilcoxonRow {
    SweepPoint point;
    Method first = Method::kmf;
    Method second = Method::kmf;
    RankSumResult test;
    bool significant = false;
};

struct BenchmarkReport {
    std::vector<ReplicateRecord> replicates;
    std::vector<SummaryRow> summary;
    std::vector<WilcoxonRow> wilcoxon;

    // Mean F1 of a method over every sweep point.
    double overall_mean_f1(Method m) const;
};

// Generates the scenario of one replicate; the covariance and the two source
// samples depend on the trial only, drops and column order on the permutation.
Scenario benchmark_scenario(const ExperimentConfig& cfg, const SweepPoint& point, int trial, int perm);

// Runs every sweep point x trial x permutation x method in a worker pool.
// Results are deterministic given the master seed. Writes summary.csv,
// replicates.csv, reconstruction.csv and wilcoxon.csv when output_dir is set.
BenchmarkReport run_benchmark(const ExperimentConfig& cfg);

void write_summary_csv(std::ostream& os, const BenchmarkReport& r);
void write_replicates_csv(std::ostream& os, const BenchmarkReport& r);
void write_wilcoxon_csv(std::ostream& os, const BenchmarkReport& r);
void write_reconstruction_csv(std::ostream& os, const BenchmarkReport& r);

// Reconstruction scores of a trained model on a benchmark scenario.
std::vector<ReconstructionRecord> reconstruction_scores(const ChimericModel& model, const Scenario& sc);

} // namespace chimatch

#endif // CHIMATCH_PIPELINE_HPP
