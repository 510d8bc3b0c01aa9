#include "chimatch/io.hpp"
#include "chimatch/log.hpp"
#include "chimatch/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace chimatch;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

struct PairInputs {
    std::string a;
    std::string b;
    std::string mapped_a;
    std::string mapped_b;
    std::string config;
    std::string method;
};

void add_pair_inputs(CLI::App* cmd, PairInputs& in)
{
    cmd->add_option("--a", in.a, "CSV of database A")->required()->check(CLI::ExistingFile);
    cmd->add_option("--b", in.b, "CSV of database B")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mapped", in.mapped_a, "mapped feature list (name[,weight] per line)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--mapped-b", in.mapped_b, "B's names for the mapped features, in the same order")
        ->check(CLI::ExistingFile);
    cmd->add_option("--config", in.config, "pipeline configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--method", in.method, "kmf, chimeric, kmf_then_chimeric or kang");
}

std::pair<Dataset, Dataset> load_pair(const PairInputs& in)
{
    const auto mapped_a = read_mapped_list(fs::path(in.mapped_a));
    const auto mapped_b = in.mapped_b.empty() ? mapped_a : read_mapped_list(fs::path(in.mapped_b));
    if (mapped_a.size() != mapped_b.size()) {
        throw Error("mapped lists for A and B differ in length");
    }
    Dataset a = preprocess(read_csv_table(fs::path(in.a)), mapped_a);
    Dataset b = preprocess(read_csv_table(fs::path(in.b)), mapped_b);
    return {std::move(a), std::move(b)};
}

PipelineConfig load_pipeline(const PairInputs& in, const Common& common)
{
    PipelineConfig cfg;
    if (!in.config.empty()) {
        cfg = pipeline_config_from_json(read_json(in.config));
    }
    if (!in.method.empty()) {
        cfg.method = method_from_string(in.method);
    }
    if (common.seed) {
        cfg.seed = *common.seed;
    }
    return cfg;
}

template <typename Writer>
void emit(const std::string& path, Writer&& w)
{
    std::ostringstream os;
    w(os);
    if (path.empty() || path == "-") {
        std::cout << os.str();
    } else {
        write_text(path, os.str());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Schema matching across databases with partially shared features"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "master seed; overrides seeds in configuration files");
    app.add_option("--log-level", common.log_level, "debug, info, warn, error or off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic matching scenario");
    std::string synth_out;
    std::string synth_family = "gaussian";
    std::string synth_map = "permutation";
    int synth_dim = 20;
    int synth_factor = 10;
    std::size_t synth_n = 10000;
    std::size_t synth_k = 4;
    std::size_t synth_drop_a = 0;
    std::size_t synth_drop_b = 0;
    std::size_t synth_transform = 0;
    int synth_trial = 0;
    int synth_perm = 0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--family", synth_family, "gaussian, two_cluster_gaussian, binarized_two_cluster, independent_gaussian");
    synth->add_option("--map-kind", synth_map, "permutation, onto or partial");
    synth->add_option("--dim", synth_dim);
    synth->add_option("--factor-dim", synth_factor);
    synth->add_option("--n", synth_n, "rows per database");
    synth->add_option("--k", synth_k, "known-mapped features");
    synth->add_option("--drop-a", synth_drop_a, "features present only in B");
    synth->add_option("--drop-b", synth_drop_b, "features present only in A");
    synth->add_option("--transform", synth_transform, "unmapped B features to square");
    synth->add_option("--trial", synth_trial);
    synth->add_option("--perm", synth_perm);

    // match
    auto* match = app.add_subcommand("match", "propose matches between two databases");
    PairInputs match_in;
    std::string match_out;
    std::string match_sim;
    std::string match_pvals;
    std::string match_model;
    std::string match_trace;
    add_pair_inputs(match, match_in);
    match->add_option("--out", match_out, "proposals CSV (default stdout)");
    match->add_option("--similarity", match_sim, "write the final similarity matrix");
    match->add_option("--pvalues", match_pvals, "write the hold-out p-value report");
    match->add_option("--model", match_model, "write the trained chimeric model (JSON)");
    match->add_option("--loss-trace", match_trace, "write per-epoch chimeric losses");

    // translate
    auto* translate = app.add_subcommand("translate", "translate rows of one database into the other's features");
    PairInputs tr_in;
    std::string tr_out;
    std::string tr_model_out;
    bool tr_reverse = false;
    add_pair_inputs(translate, tr_in);
    translate->add_option("--out", tr_out, "translated CSV (default stdout)");
    translate->add_option("--model", tr_model_out, "write the trained model (JSON)");
    translate->add_flag("--b-to-a", tr_reverse, "translate B's rows into A's features");

    // eval
    auto* eval = app.add_subcommand("eval", "score proposals against a scenario manifest");
    std::string eval_props;
    std::string eval_manifest;
    std::string eval_out;
    std::string eval_pairs;
    eval->add_option("--proposals", eval_props)->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", eval_manifest)->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "metrics CSV (default stdout)");
    eval->add_option("--pairs", eval_pairs, "per-pair outcomes CSV");

    // tune
    auto* tune = app.add_subcommand("tune", "choose pipeline hyperparameters by hiding mapped features");
    PairInputs tune_in;
    std::string tune_grid;
    std::string tune_protocol = "leave_one_out";
    int tune_folds = 10;
    std::string tune_out;
    add_pair_inputs(tune, tune_in);
    tune->add_option("--grid", tune_grid, "JSON array of pipeline configurations")
        ->required()
        ->check(CLI::ExistingFile);
    tune->add_option("--protocol", tune_protocol)->check(CLI::IsMember({"leave_one_out", "half_split"}));
    tune->add_option("--folds", tune_folds, "folds for half_split");
    tune->add_option("--out", tune_out, "best configuration JSON (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "run a replicated synthetic benchmark");
    std::string bench_config;
    std::string bench_out;
    unsigned bench_threads = 0;
    bench->add_option("--config", bench_config, "experiment configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    bench->add_option("--out", bench_out, "output directory (overrides the configuration)");
    bench->add_option("--threads", bench_threads, "worker threads (0 = configuration or hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::map<std::string, log::Level> levels = {{"debug", log::Level::debug},
                                                      {"info", log::Level::info},
                                                      {"warn", log::Level::warn},
                                                      {"error", log::Level::error},
                                                      {"off", log::Level::off}};
    log::set_level(levels.at(common.log_level));

    try {
        if (*synth) {
            const std::uint64_t seed = common.seed.value_or(0);
            ExperimentConfig cfg;
            cfg.family = family_from_string(synth_family);
            cfg.map_kind = map_kind_from_string(synth_map);
            cfg.dim = synth_dim;
            cfg.factor_dim = synth_factor;
            cfg.transform_count = synth_transform;
            cfg.seed = seed;
            const SweepPoint pt{synth_n, synth_k, cfg.pipeline.chimeric.latent_dim, synth_drop_a, synth_drop_b};
            const Scenario sc = benchmark_scenario(cfg, pt, synth_trial, synth_perm);
            const fs::path dir(synth_out);
            emit((dir / "A.csv").string(), [&](std::ostream& os) { write_dataset_csv(os, sc.a); });
            emit((dir / "B.csv").string(), [&](std::ostream& os) { write_dataset_csv(os, sc.b); });
            write_text(dir / "manifest.json", to_json(sc.spec).dump(2) + "\n");
            std::string mapped;
            for (const auto& m : sc.spec.mapped) {
                mapped += m + "\n";
            }
            write_text(dir / "mapped.txt", mapped);
            if (sc.a_withheld.cols() > 0) {
                emit((dir / "A_withheld.csv").string(), [&](std::ostream& os) { write_dataset_csv(os, sc.a_withheld); });
            }
            log::info("wrote scenario to " + dir.string());
        } else if (*match) {
            const auto [a, b] = load_pair(match_in);
            const PipelineConfig cfg = load_pipeline(match_in, common);
            const MatchResult r = run_method(a, b, cfg);
            emit(match_out, [&](std::ostream& os) { write_proposals_csv(os, r.proposals); });
            if (!match_sim.empty()) {
                emit(match_sim, [&](std::ostream& os) { write_similarity_csv(os, r.similarity); });
            }
            if (!match_pvals.empty()) {
                emit(match_pvals, [&](std::ostream& os) { write_pvalue_report_csv(os, r.report); });
            }
            if (!match_model.empty() || !match_trace.empty()) {
                if (!r.model) {
                    log::warn("no chimeric model was trained; skipping model outputs");
                } else {
                    if (!match_model.empty()) {
                        write_text(match_model, r.model->to_json().dump() + "\n");
                    }
                    if (!match_trace.empty()) {
                        emit(match_trace, [&](std::ostream& os) { write_loss_trace(os, r.model->trace()); });
                    }
                }
            }
            std::size_t accepted = 0;
            for (const auto& p : r.proposals) {
                accepted += p.accepted ? 1 : 0;
            }
            log::info(std::to_string(r.proposals.size()) + " proposals, " + std::to_string(accepted) + " accepted");
        } else if (*translate) {
            const auto [a, b] = load_pair(tr_in);
            PipelineConfig cfg = load_pipeline(tr_in, common);
            ChimericConfig cc = cfg.chimeric;
            cc.seed = derive_seed(cfg.seed, 3, cfg.chimeric.seed);
            const ChimericModel model = train_chimeric(a, b, cc);
            const Dataset z = tr_reverse ? model.translate(b, TranslateDirection::b_to_a)
                                         : model.translate(a, TranslateDirection::a_to_b);
            emit(tr_out, [&](std::ostream& os) { write_dataset_csv(os, z); });
            if (!tr_model_out.empty()) {
                write_text(tr_model_out, model.to_json().dump() + "\n");
            }
        } else if (*eval) {
            std::ifstream in(eval_props);
            if (!in) {
                throw Error("cannot open " + eval_props);
            }
            const auto props = read_proposals_csv(in);
            const ScenarioSpec spec = scenario_spec_from_json(read_json(eval_manifest));
            const EvalReport r = evaluate(props, spec);
            emit(eval_out, [&](std::ostream& os) { write_eval_csv(os, r); });
            if (!eval_pairs.empty()) {
                emit(eval_pairs, [&](std::ostream& os) {
                    os << "featureA,featureB,outcome\n";
                    for (const auto& p : r.pairs) {
                        os << p.feature_a << ',' << p.feature_b << ',' << to_string(p.outcome) << '\n';
                    }
                });
            }
        } else if (*tune) {
            const auto [a, b] = load_pair(tune_in);
            const PipelineConfig base = load_pipeline(tune_in, common);
            std::vector<PipelineConfig> grid;
            for (const auto& j : read_json(tune_grid)) {
                PipelineConfig c = pipeline_config_from_json(j, base);
                if (common.seed) {
                    c.seed = *common.seed;
                }
                grid.push_back(std::move(c));
            }
            const TuneProtocol protocol =
                tune_protocol == "half_split" ? TuneProtocol::half_split : TuneProtocol::leave_one_out;
            const TuneResult r = tune_hyperparams(a, b, grid, protocol, tune_folds, base.seed);
            nlohmann::json out = {{"best_index", r.best_index},
                                  {"best", to_json(r.best)},
                                  {"mean_scores", r.mean_scores},
                                  {"fold_scores", r.fold_scores}};
            emit(tune_out, [&](std::ostream& os) { os << out.dump(2) << '\n'; });
        } else if (*bench) {
            ExperimentConfig cfg = experiment_config_from_json(read_json(bench_config));
            if (common.seed) {
                cfg.seed = *common.seed;
            }
            if (!bench_out.empty()) {
                cfg.output_dir = bench_out;
            }
            if (bench_threads != 0) {
                cfg.threads = bench_threads;
            }
            if (cfg.output_dir.empty()) {
                throw Error("bench: no output directory (use --out)");
            }
            const BenchmarkReport r = run_benchmark(cfg);
            for (const auto& m : cfg.methods) {
                log::info(to_string(m) + ": mean F1 " + format_double(r.overall_mean_f1(m)));
            }
        }
    } catch (const std::exception& e) {
        log::error(e.what());
        return 1;
    }
    return 0;
}
