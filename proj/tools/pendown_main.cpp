// pendown: handwriting-dynamics classification pipeline over plain-text
// artifacts.  Subcommands mirror the pipeline stages:
//
//   synth     generate a synthetic digitizer cohort (manifest + recordings)
//   extract   manifest -> per-task feature matrix
//   filter    matrix -> per-group rank-sum pass grid + reduced matrices
//   rank      scoped matrix -> ordered feature list
//   train     scoped matrix [+ ranking] -> serialized model
//   evaluate  matrix -> cohort report (full scheme, or staged single group)
//   report    cohort report -> comparison table + bar data
//
// Every failure is reported as a single JSON record on stderr with a
// nonzero exit status.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pendown/stages.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pendown;

namespace {

struct ProtocolFlags {
    int reps = 50;
    int folds = 10;
    double split = 0.8;
    double alpha = 0.05;
    double tol = svm::kDefaultTolerance;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string leak = "paper";
    std::string order = "descending";

    sel::ProtocolConfig protocol() const {
        sel::ProtocolConfig pc;
        pc.reps = reps;
        pc.cv_folds = folds;
        pc.train_fraction = split;
        pc.seed = seed;
        pc.tol = tol;
        pc.leak = sel::leak_mode_from(leak);
        pc.alpha = alpha;
        pc.threads = threads;
        return pc;
    }

    coh::EvalConfig eval() const {
        coh::EvalConfig cfg;
        cfg.protocol = protocol();
        cfg.order = sel::order_from(order);
        return cfg;
    }
};

void add_protocol_flags(CLI::App* cmd, ProtocolFlags& pf, bool with_order = true) {
    cmd->add_option("--reps", pf.reps, "protocol repetitions")->check(CLI::PositiveNumber);
    cmd->add_option("--folds", pf.folds, "cross-validation folds")->check(CLI::PositiveNumber);
    cmd->add_option("--split", pf.split, "training fraction of each repetition")
        ->check(CLI::Range(0.01, 0.99));
    cmd->add_option("--alpha", pf.alpha, "filter significance level")
        ->check(CLI::Range(1e-9, 0.999999));
    cmd->add_option("--tol", pf.tol, "solver KKT tolerance");
    cmd->add_option("--seed", pf.seed, "base random seed");
    cmd->add_option("--threads", pf.threads, "worker threads (0 = all cores)");
    cmd->add_option("--leak-mode", pf.leak, "paper | clean")
        ->check(CLI::IsMember({"paper", "clean"}));
    if (with_order)
        cmd->add_option("--order", pf.order, "descending | random")
            ->check(CLI::IsMember({"descending", "random"}));
}

synth::EffectSpec parse_effect(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError("effect must be GROUP:KIND:SIZE, got '" + text + "'");
    synth::EffectSpec e;
    e.group = text.substr(0, c1);
    e.kind = text.substr(c1 + 1, c2 - c1 - 1);
    e.size = parse_double(text.substr(c2 + 1), "effect size");
    return e;
}

std::vector<int> tasks_in_manifest(const fs::path& manifest_path) {
    const ink::Manifest m =
        ink::parse_manifest(ink::read_file(manifest_path), manifest_path.string());
    std::vector<int> tasks;
    for (const ink::ManifestEntry& e : m.entries)
        if (std::find(tasks.begin(), tasks.end(), e.task) == tasks.end()) tasks.push_back(e.task);
    std::sort(tasks.begin(), tasks.end());
    return tasks;
}

int run(int argc, char** argv) {
    CLI::App app{"handwriting-dynamics classification pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort");
    std::string synth_out;
    synth::SynthConfig scfg;
    std::vector<std::string> effect_texts;
    std::vector<int> synth_tasks = {1};
    int pd_per_cell = 5, hc_per_cell = 5;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", scfg.seed, "generator seed");
    synth_cmd->add_option("--tasks", synth_tasks, "task ids (1..7)");
    synth_cmd->add_option("--effect", effect_texts,
                          "GROUP:KIND:SIZE, e.g. Female:tremor:1.0 (repeatable)");
    synth_cmd->add_option("--pd-per-cell", pd_per_cell, "PD subjects per sex/age cell");
    synth_cmd->add_option("--hc-per-cell", hc_per_cell, "controls per sex/age cell");
    synth_cmd->add_option("--noise", scfg.noise, "trajectory noise sigma");
    synth_cmd->add_option("--rate", scfg.sample_rate_hz, "sample rate, Hz");
    synth_cmd->add_option("--duration", scfg.duration_s, "recording length, seconds");

    // ---- extract ----
    auto* extract_cmd = app.add_subcommand("extract", "build per-task feature matrices");
    std::string ex_manifest, ex_task = "all", ex_registry = "full", ex_out;
    extract_cmd->add_option("--manifest", ex_manifest, "dataset manifest")->required();
    extract_cmd->add_option("--task", ex_task, "task id 1..7, or 'all'");
    extract_cmd->add_option("--registry", ex_registry, "full | compact")
        ->check(CLI::IsMember({"full", "compact"}));
    extract_cmd->add_option("--out", ex_out, "output directory")->required();

    // ---- filter ----
    auto* filter_cmd = app.add_subcommand("filter", "rank-sum feature filter per cohort group");
    std::string fl_matrix, fl_scheme = "combined", fl_out;
    double fl_alpha = 0.05;
    int fl_age = coh::kDefaultAgeThreshold;
    filter_cmd->add_option("--matrix", fl_matrix, "feature matrix")->required();
    filter_cmd->add_option("--scheme", fl_scheme, "combined | sex | age | sexage")
        ->check(CLI::IsMember({"combined", "sex", "age", "sexage"}));
    filter_cmd->add_option("--alpha", fl_alpha, "significance level")
        ->check(CLI::Range(1e-9, 0.999999));
    filter_cmd->add_option("--age-threshold", fl_age, "lowest age counted as Old");
    filter_cmd->add_option("--out", fl_out, "output directory")->required();

    // ---- rank ----
    auto* rank_cmd = app.add_subcommand("rank", "order features by individual accuracy");
    std::string rk_matrix, rk_out;
    ProtocolFlags rk_flags;
    rank_cmd->add_option("--matrix", rk_matrix, "scoped feature matrix")->required();
    rank_cmd->add_option("--out", rk_out, "output directory")->required();
    add_protocol_flags(rank_cmd, rk_flags);

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "grid-search and fit a final model");
    std::string tr_matrix, tr_ranking, tr_out;
    std::size_t tr_top_n = 0;
    ProtocolFlags tr_flags;
    train_cmd->add_option("--matrix", tr_matrix, "scoped feature matrix")->required();
    train_cmd->add_option("--ranking", tr_ranking, "ranking file (optional)");
    train_cmd->add_option("--top-n", tr_top_n, "use only the best N features (0 = all)");
    train_cmd->add_option("--out", tr_out, "output directory")->required();
    add_protocol_flags(train_cmd, tr_flags);

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "cohort evaluation protocol");
    std::string ev_matrix, ev_ranking, ev_scheme = "combined", ev_out;
    int ev_age = coh::kDefaultAgeThreshold;
    ProtocolFlags ev_flags;
    eval_cmd->add_option("--matrix", ev_matrix, "feature matrix")->required();
    eval_cmd->add_option("--ranking", ev_ranking,
                         "precomputed ranking (single-group staged mode)");
    eval_cmd->add_option("--scheme", ev_scheme, "combined | sex | age | sexage")
        ->check(CLI::IsMember({"combined", "sex", "age", "sexage"}));
    eval_cmd->add_option("--age-threshold", ev_age, "lowest age counted as Old");
    eval_cmd->add_option("--out", ev_out, "output directory")->required();
    add_protocol_flags(eval_cmd, ev_flags);

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "render tables from a cohort report");
    std::string rp_report, rp_out;
    report_cmd->add_option("--report", rp_report, "cohort report file")->required();
    report_cmd->add_option("--out", rp_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed()) {
        scfg.tasks = synth_tasks;
        scfg.cells = {{'M', false, pd_per_cell, hc_per_cell},
                      {'M', true, pd_per_cell, hc_per_cell},
                      {'F', false, pd_per_cell, hc_per_cell},
                      {'F', true, pd_per_cell, hc_per_cell}};
        scfg.effects.clear();
        for (const std::string& t : effect_texts) scfg.effects.push_back(parse_effect(t));
        const fs::path manifest = stages::stage_synth(scfg, synth_out);
        std::cout << manifest.string() << "\n";
        return 0;
    }

    if (extract_cmd->parsed()) {
        const feat::RegistryProfile profile = feat::profile_from(ex_registry);
        std::vector<int> tasks;
        if (ex_task == "all")
            tasks = tasks_in_manifest(ex_manifest);
        else
            tasks.push_back(static_cast<int>(parse_long(ex_task, "--task")));
        for (int task : tasks) {
            const fs::path out =
                fs::path(ex_out) / ("features_t" + std::to_string(task) + ".tsv");
            stages::stage_extract(ex_manifest, task, profile, out);
            std::cout << out.string() << "\n";
        }
        return 0;
    }

    if (filter_cmd->parsed()) {
        const coh::CohortScheme scheme{coh::scheme_from(fl_scheme), fl_age};
        const stages::FilterStageResult res =
            stages::stage_filter(fl_matrix, scheme, fl_alpha, fl_out);
        std::cout << res.grid_path.string() << "\n";
        for (const fs::path& p : res.reduced_paths) std::cout << p.string() << "\n";
        return 0;
    }

    if (rank_cmd->parsed()) {
        const feat::FeatureMatrix m =
            feat::parse_matrix(ink::read_file(rk_matrix), rk_matrix);
        std::string group = "Combined";
        if (auto it = m.annotations.find("scope"); it != m.annotations.end()) group = it->second;
        const fs::path out = fs::path(rk_out) / ("ranking_" + group + ".tsv");
        stages::stage_rank(rk_matrix, sel::order_from(rk_flags.order), rk_flags.protocol(), out);
        std::cout << out.string() << "\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        const fs::path out = fs::path(tr_out) / "model.txt";
        stages::stage_train(tr_matrix, tr_ranking.empty() ? fs::path{} : fs::path(tr_ranking),
                            tr_top_n, tr_flags.protocol(), out);
        std::cout << out.string() << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        fs::path out;
        if (ev_ranking.empty()) {
            const coh::CohortScheme scheme{coh::scheme_from(ev_scheme), ev_age};
            out = stages::stage_evaluate(ev_matrix, scheme, ev_flags.eval(), ev_out);
        } else {
            out = stages::stage_evaluate_staged(ev_matrix, ev_ranking, ev_flags.eval(), ev_out);
        }
        std::cout << out.string() << "\n";
        return 0;
    }

    if (report_cmd->parsed()) {
        const stages::ReportStageResult res = stages::stage_report(rp_report, rp_out);
        std::cout << res.table_path.string() << "\n" << res.bars_path.string() << "\n";
        return 0;
    }

    return 0;
}

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        json rec = {{"error", {{"type", error_kind(e)}, {"message", e.what()}}}};
        std::cerr << rec.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json rec = {{"error", {{"type", "internal"}, {"message", e.what()}}}};
        std::cerr << rec.dump() << "\n";
        return 2;
    }
}
