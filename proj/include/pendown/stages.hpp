#pragma once

// pendown/stages.hpp
//
// Disk-level pipeline stages: synth -> extract -> filter -> rank -> train /
// evaluate -> report.  Each stage reads plain structured text, writes its
// artifacts atomically (temp file + rename), and records provenance (stage
// name, seed, config, input digests) next to its primary output.
//
// Staged runs compose bit-for-bit with in-process runs: scoped matrices
// carry their group/scheme/filter annotations in the header, and every
// number is serialized with shortest-round-trip formatting, so running
// `extract | filter | rank | evaluate` over files equals the single-shot
// evaluation byte for byte.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pendown/cohorts.hpp"
#include "pendown/common.hpp"
#include "pendown/features.hpp"
#include "pendown/ink.hpp"
#include "pendown/mannwhitney.hpp"
#include "pendown/selection.hpp"
#include "pendown/svm.hpp"
#include "pendown/synth.hpp"

namespace pendown::stages {

namespace fs = std::filesystem;

// ----------------------------------------------------------- file helpers --

// Temp-then-rename so readers never observe a half-written artifact.
inline void atomic_write(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.good()) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string());
}

inline std::string content_digest(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

inline std::string file_digest(const fs::path& path) { return content_digest(ink::read_file(path)); }

// Digest of a dataset: manifest bytes plus each referenced recording's bytes.
inline std::string dataset_digest(const fs::path& manifest_path) {
    const std::string text = ink::read_file(manifest_path);
    const ink::Manifest m = ink::parse_manifest(text, manifest_path.string());
    fs::path root = manifest_path.parent_path();
    if (!m.base_dir.empty()) root /= m.base_dir;
    std::string acc = content_digest(text);
    for (const ink::ManifestEntry& e : m.entries) acc += "\n" + file_digest(root / e.path);
    return content_digest(acc);
}

// -------------------------------------------------------------- provenance --

struct Provenance {
    std::string stage;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config;  // ordered
    std::vector<std::pair<std::string, std::string>> inputs;  // path -> digest
};

inline std::string serialize_provenance(const Provenance& p) {
    std::string out = "# pendown provenance v1\nstage " + p.stage + "\nseed " +
                      std::to_string(p.seed) + "\n";
    for (const auto& [key, value] : p.config) out += "config " + key + " " + value + "\n";
    for (const auto& [path, digest] : p.inputs) out += "input " + path + " fnv64 " + digest + "\n";
    return out;
}

inline void write_provenance(const fs::path& primary_output, const Provenance& p) {
    atomic_write(primary_output.string() + ".prov", serialize_provenance(p));
}

// ---------------------------------------------------------- dataset output --

// Writes one recording file per (subject, task) under <dir>/rec/ plus
// <dir>/manifest.txt; returns the manifest path.
inline fs::path write_dataset(const ink::Dataset& ds, const fs::path& dir) {
    ink::Manifest m;
    m.time.unit = ink::TimeSpec::Unit::Seconds;
    m.base_dir = "rec";
    m.subjects = ds.subjects;
    for (const ink::Recording& rec : ds.recordings) {
        const std::string name = rec.subject_id + "_t" + std::to_string(rec.task) + ".txt";
        atomic_write(dir / "rec" / name, ink::serialize_recording(rec));
        m.entries.push_back({rec.subject_id, rec.task, name});
    }
    const fs::path manifest_path = dir / "manifest.txt";
    atomic_write(manifest_path, ink::serialize_manifest(m));
    return manifest_path;
}

// ------------------------------------------------------------- ranking i/o --

inline std::string serialize_ranking(const std::vector<sel::RankedFeature>& ranked, int task,
                                     const std::string& group, sel::RankOrder order) {
    std::string out = "# pendown ranking v1\n";
    const std::map<std::string, std::string> notes = {
        {"group", group}, {"order", std::string(sel::order_name(order))},
        {"task", std::to_string(task)}};
    for (const auto& [key, value] : notes) out += "# @" + key + " " + value + "\n";
    out += "rank\tfeature\tindividual_accuracy\n";
    for (const sel::RankedFeature& rf : ranked) {
        out += std::to_string(rf.rank) + "\t" + rf.feature.render() + "\t" +
               (rf.individual_accuracy ? format_double(*rf.individual_accuracy)
                                       : std::string("NA")) +
               "\n";
    }
    return out;
}

struct RankingFile {
    int task = 0;
    std::string group = "Combined";
    sel::RankOrder order = sel::RankOrder::Descending;
    std::vector<sel::RankedFeature> ranked;  // columns unresolved (0)
};

inline RankingFile parse_ranking(std::string_view text, const std::string& source) {
    RankingFile rf;
    bool saw_header = false;
    std::size_t lineno = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;
        const std::string where = ink::detail::at_line(source, lineno);
        auto f = ink::detail::split_ws(line);
        if (f.empty()) continue;
        if (f[0][0] == '#') {
            if (f.size() >= 3 && f[1] == "@group") rf.group = std::string(f[2]);
            if (f.size() >= 3 && f[1] == "@order") rf.order = sel::order_from(f[2]);
            if (f.size() >= 3 && f[1] == "@task")
                rf.task = static_cast<int>(parse_long(f[2], where));
            continue;
        }
        if (!saw_header) {
            if (f.size() != 3 || f[0] != "rank") throw ParseError(where + ": bad ranking header");
            saw_header = true;
            continue;
        }
        if (f.size() != 3) throw ParseError(where + ": expected 3 fields");
        sel::RankedFeature r;
        r.rank = static_cast<int>(parse_long(f[0], where));
        r.feature = feat::parse_feature_id(f[1]);
        if (f[2] != "NA") r.individual_accuracy = parse_double(f[2], where);
        rf.ranked.push_back(std::move(r));
    }
    if (!saw_header) throw ParseError(source + ": empty ranking file");
    return rf;
}

// Binds parsed ranking rows to matrix columns by feature id.
inline std::vector<sel::RankedFeature> resolve_ranking(const RankingFile& rf,
                                                       const feat::FeatureMatrix& m) {
    std::vector<sel::RankedFeature> out = rf.ranked;
    for (sel::RankedFeature& r : out) {
        bool found = false;
        for (std::size_t j = 0; j < m.feature_count(); ++j) {
            if (!(m.features[j] == r.feature)) continue;
            r.column = j;
            found = true;
            break;
        }
        if (!found)
            throw ValidationError("ranking refers to feature '" + r.feature.render() +
                                  "' absent from the matrix");
    }
    return out;
}

// --------------------------------------------------------------- curve i/o --

inline std::string serialize_curve(const sel::AccuracyCurve& curve, sel::RankOrder order,
                                   const std::string& group) {
    std::string out = "# pendown curve v1\nn\tmean_acc\tstd_acc\torder\tcohort\n";
    for (const sel::CurvePoint& p : curve.points) {
        out += std::to_string(p.n) + "\t" + format_double(p.mean_accuracy) + "\t" +
               format_double(p.std_accuracy) + "\t" + std::string(sel::order_name(order)) + "\t" +
               group + "\n";
    }
    return out;
}

// ------------------------------------------------------- filter grid i/o --

struct FilterRecord {
    int task = 0;
    std::string group;
    std::size_t n_pd = 0, n_hc = 0, passed = 0, total = 0;
    bool fallback = false;
};

inline std::string serialize_filter_grid(const std::vector<FilterRecord>& records) {
    std::string out = "# pendown filter report v1\ntask\tgroup\tn_pd\tn_hc\tpassed\ttotal\tfallback\n";
    for (const FilterRecord& r : records) {
        out += std::to_string(r.task) + "\t" + r.group + "\t" + std::to_string(r.n_pd) + "\t" +
               std::to_string(r.n_hc) + "\t" + std::to_string(r.passed) + "\t" +
               std::to_string(r.total) + "\t" + (r.fallback ? "1" : "0") + "\n";
    }
    return out;
}

// -------------------------------------------------------------- report i/o --

inline std::string serialize_report(const coh::CohortReport& report,
                                    const std::map<std::string, std::string>& annotations) {
    std::string out = "# pendown cohort report v1\n";
    for (const auto& [key, value] : annotations) out += "# @" + key + " " + value + "\n";
    for (const coh::GroupReport& g : report.groups) {
        out += "group " + g.name + "\n";
        out += "counts pd " + std::to_string(g.n_pd) + " hc " + std::to_string(g.n_hc) + "\n";
        if (!g.evaluated) {
            out += "status skipped " + g.skip_reason + "\nend\n";
            continue;
        }
        out += "status evaluated\n";
        if (report.leak == sel::LeakMode::Clean) {
            out += std::string("filter per_rep fallback ") + (g.filter_fallback ? "1" : "0") + "\n";
        } else {
            out += "filter kept " + std::to_string(g.filter_kept) + " total " +
                   std::to_string(g.filter_total) + " fallback " + (g.filter_fallback ? "1" : "0") +
                   "\n";
            out += "best_n " + std::to_string(g.best_n) + "\n";
            out += "selected";
            for (std::size_t i = 0; i < g.best_n && i < g.ranking.size(); ++i)
                out += " " + g.ranking[i].feature.render();
            out += "\n";
        }
        const sel::ProtocolResult& pr = g.final_metrics;
        out += "metrics acc " + format_double(pr.mean_accuracy) + " std " +
               format_double(pr.std_accuracy) + " pre " +
               (pr.mean_precision ? format_double(*pr.mean_precision) : std::string("NA")) +
               " rec " + (pr.mean_recall ? format_double(*pr.mean_recall) : std::string("NA")) +
               "\n";
        out += "confusion tp " + std::to_string(pr.totals.tp) + " fp " +
               std::to_string(pr.totals.fp) + " tn " + std::to_string(pr.totals.tn) + " fn " +
               std::to_string(pr.totals.fn) + "\n";
        out += "end\n";
    }
    return out;
}

struct ReportGroup {
    std::string name;
    std::size_t n_pd = 0, n_hc = 0;
    bool evaluated = false;
    std::string skip_reason;
    double acc = 0.0, acc_std = 0.0;
    std::optional<double> pre, rec;
};

struct ReportFile {
    std::map<std::string, std::string> annotations;
    std::vector<ReportGroup> groups;
};

inline ReportFile parse_report(std::string_view text, const std::string& source) {
    ReportFile rf;
    ReportGroup cur;
    bool open = false;
    std::size_t lineno = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;
        const std::string where = ink::detail::at_line(source, lineno);
        auto f = ink::detail::split_ws(line);
        if (f.empty()) continue;
        if (f[0][0] == '#') {
            if (f.size() >= 3 && f[1].size() > 1 && f[1][0] == '@') {
                std::string value(f[2]);
                for (std::size_t i = 3; i < f.size(); ++i) value += " " + std::string(f[i]);
                rf.annotations[std::string(f[1].substr(1))] = value;
            }
            continue;
        }
        if (f[0] == "group") {
            if (open) throw ParseError(where + ": group without end");
            if (f.size() != 2) throw ParseError(where + ": group wants a name");
            cur = ReportGroup{};
            cur.name = std::string(f[1]);
            open = true;
        } else if (!open) {
            throw ParseError(where + ": record line outside a group");
        } else if (f[0] == "counts") {
            if (f.size() != 5) throw ParseError(where + ": malformed counts");
            cur.n_pd = static_cast<std::size_t>(parse_long(f[2], where));
            cur.n_hc = static_cast<std::size_t>(parse_long(f[4], where));
        } else if (f[0] == "status") {
            cur.evaluated = f.size() >= 2 && f[1] == "evaluated";
            if (!cur.evaluated)
                for (std::size_t i = 2; i < f.size(); ++i)
                    cur.skip_reason += (i > 2 ? " " : "") + std::string(f[i]);
        } else if (f[0] == "metrics") {
            if (f.size() != 9) throw ParseError(where + ": malformed metrics");
            cur.acc = parse_double(f[2], where);
            cur.acc_std = parse_double(f[4], where);
            if (f[6] != "NA") cur.pre = parse_double(f[6], where);
            if (f[8] != "NA") cur.rec = parse_double(f[8], where);
        } else if (f[0] == "end") {
            rf.groups.push_back(cur);
            open = false;
        }
        // filter / best_n / selected / confusion lines are carried verbatim
        // by the report but not needed by downstream stages.
    }
    if (open) throw ParseError(source + ": unterminated group record");
    return rf;
}

// Comparison table: one row per evaluated group (accuracy / precision /
// recall / accuracy std, all percent).
inline std::string serialize_comparison(const ReportFile& rf) {
    std::string out = "# pendown comparison v1\nclass\tp_acc\tp_pre\tp_rec\tsd\n";
    for (const ReportGroup& g : rf.groups) {
        if (!g.evaluated) continue;
        out += g.name + "\t" + format_double(g.acc) + "\t" +
               (g.pre ? format_double(*g.pre) : std::string("NA")) + "\t" +
               (g.rec ? format_double(*g.rec) : std::string("NA")) + "\t" +
               format_double(g.acc_std) + "\n";
    }
    return out;
}

// Bar-chart data: group vs accuracy.
inline std::string serialize_bars(const ReportFile& rf) {
    std::string out = "# pendown bars v1\ngroup\taccuracy\n";
    for (const ReportGroup& g : rf.groups) {
        if (!g.evaluated) continue;
        out += g.name + "\t" + format_double(g.acc) + "\n";
    }
    return out;
}

// ------------------------------------------------------------------ stages --

inline fs::path stage_synth(const synth::SynthConfig& cfg, const fs::path& out_dir) {
    const ink::Dataset ds = synth::generate(cfg);
    const fs::path manifest = write_dataset(ds, out_dir);
    Provenance p;
    p.stage = "synth";
    p.seed = cfg.seed;
    p.config.emplace_back("subjects", std::to_string(ds.subjects.size()));
    p.config.emplace_back("tasks", std::to_string(cfg.tasks.size()));
    for (const synth::EffectSpec& e : cfg.effects)
        p.config.emplace_back("effect", e.group + ":" + e.kind + ":" + format_double(e.size));
    p.config.emplace_back("noise", format_double(cfg.noise));
    write_provenance(manifest, p);
    return manifest;
}

inline fs::path stage_extract(const fs::path& manifest_path, int task,
                              feat::RegistryProfile profile, const fs::path& out_path) {
    const ink::Dataset ds = ink::load_dataset(manifest_path);
    const feat::FeatureMatrix m = feat::assemble_matrix(ds, task, profile);
    atomic_write(out_path, feat::serialize_matrix(m));
    Provenance p;
    p.stage = "extract";
    p.config.emplace_back("task", std::to_string(task));
    p.config.emplace_back("registry", std::string(feat::profile_name(profile)));
    p.inputs.emplace_back(manifest_path.string(), dataset_digest(manifest_path));
    write_provenance(out_path, p);
    return out_path;
}

struct FilterStageResult {
    fs::path grid_path;
    std::vector<fs::path> reduced_paths;  // one per group, Combined first
};

// Runs the rank-sum filter per group (plus the Combined baseline) and writes
// a pass-count grid plus one scoped, reduced matrix per group with enough
// annotations for later stages to reproduce the in-process pipeline.
inline FilterStageResult stage_filter(const fs::path& matrix_path, const coh::CohortScheme& scheme,
                                      double alpha, const fs::path& out_dir) {
    const feat::FeatureMatrix m =
        feat::parse_matrix(ink::read_file(matrix_path), matrix_path.string());
    std::vector<std::string> names = {"Combined"};
    if (scheme.kind != coh::Scheme::Combined)
        for (const std::string& g : coh::group_names(scheme)) names.push_back(g);

    FilterStageResult res;
    std::vector<FilterRecord> records;
    for (const std::string& name : names) {
        const coh::CohortScheme eff = name == "Combined"
                                          ? coh::CohortScheme{coh::Scheme::Combined,
                                                              scheme.age_threshold}
                                          : scheme;
        const std::vector<std::size_t> rows = coh::rows_for_group(m, name, eff);
        FilterRecord rec;
        rec.task = m.task;
        rec.group = name;
        rec.total = m.feature_count();
        for (std::size_t i : rows)
            (m.labels[i] == ink::kLabelPd ? rec.n_pd : rec.n_hc) += 1;
        if (rec.n_pd == 0 || rec.n_hc == 0) {
            records.push_back(rec);
            continue;  // nothing to test; no reduced matrix for this group
        }
        const mw::FilterResult filt = mw::filter_features(m, rows, alpha);
        std::vector<std::size_t> kept = filt.kept;
        if (kept.empty()) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < filt.tests.size(); ++j)
                if (filt.tests[j].stat.p < filt.tests[best].stat.p) best = j;
            kept.push_back(best);
            rec.fallback = true;
        }
        rec.passed = filt.kept.size();
        records.push_back(rec);

        feat::FeatureMatrix reduced;
        reduced.task = m.task;
        reduced.profile = m.profile;
        reduced.annotations = m.annotations;
        reduced.annotations["scope"] = name;
        reduced.annotations["scheme"] = std::string(coh::scheme_name(scheme.kind));
        reduced.annotations["alpha"] = format_double(alpha);
        reduced.annotations["filter_total"] = std::to_string(m.feature_count());
        reduced.annotations["fallback"] = rec.fallback ? "1" : "0";
        for (std::size_t j : kept) reduced.features.push_back(m.features[j]);
        for (std::size_t i : rows) {
            reduced.subject_ids.push_back(m.subject_ids[i]);
            reduced.labels.push_back(m.labels[i]);
            reduced.sexes.push_back(m.sexes[i]);
            reduced.ages.push_back(m.ages[i]);
            std::vector<std::optional<double>> row;
            for (std::size_t j : kept) row.push_back(m.rows[i][j]);
            reduced.rows.push_back(std::move(row));
        }
        const fs::path rp = out_dir / ("reduced_" + name + ".tsv");
        atomic_write(rp, feat::serialize_matrix(reduced));
        res.reduced_paths.push_back(rp);
    }

    res.grid_path = out_dir / "filter_report.tsv";
    atomic_write(res.grid_path, serialize_filter_grid(records));
    Provenance p;
    p.stage = "filter";
    p.config.emplace_back("scheme", std::string(coh::scheme_name(scheme.kind)));
    p.config.emplace_back("alpha", format_double(alpha));
    p.config.emplace_back("age_threshold", std::to_string(scheme.age_threshold));
    p.inputs.emplace_back(matrix_path.string(), file_digest(matrix_path));
    write_provenance(res.grid_path, p);
    return res;
}

// Ranks a scoped matrix (all of its rows and columns).  The matrix's scope
// annotation picks the group seed, exactly as the in-process pipeline does.
inline fs::path stage_rank(const fs::path& matrix_path, sel::RankOrder order,
                           const sel::ProtocolConfig& base_cfg, const fs::path& out_path) {
    const feat::FeatureMatrix m =
        feat::parse_matrix(ink::read_file(matrix_path), matrix_path.string());
    std::string group = "Combined";
    if (auto it = m.annotations.find("scope"); it != m.annotations.end()) group = it->second;
    sel::ProtocolConfig pc = base_cfg;
    pc.seed = derive_seed(base_cfg.seed, group);
    const std::vector<std::size_t> rows = feat::all_rows(m);
    const std::vector<std::size_t> cols = feat::all_columns(m);
    const std::vector<sel::RankedFeature> ranked = sel::rank_features(m, rows, cols, order, pc);
    atomic_write(out_path, serialize_ranking(ranked, m.task, group, order));
    Provenance p;
    p.stage = "rank";
    p.seed = base_cfg.seed;
    p.config.emplace_back("order", std::string(sel::order_name(order)));
    p.config.emplace_back("group", group);
    p.config.emplace_back("reps", std::to_string(pc.reps));
    p.config.emplace_back("folds", std::to_string(pc.cv_folds));
    p.inputs.emplace_back(matrix_path.string(), file_digest(matrix_path));
    write_provenance(out_path, p);
    return out_path;
}

namespace detail {

inline std::map<std::string, std::string> report_annotations(const coh::CohortReport& report,
                                                             const coh::EvalConfig& cfg) {
    return {
        {"alpha", format_double(cfg.protocol.alpha)},
        {"folds", std::to_string(cfg.protocol.cv_folds)},
        {"leak", std::string(sel::leak_mode_name(cfg.protocol.leak))},
        {"order", std::string(sel::order_name(cfg.order))},
        {"reps", std::to_string(cfg.protocol.reps)},
        {"scheme", std::string(coh::scheme_name(report.scheme.kind))},
        {"seed", std::to_string(cfg.protocol.seed)},
        {"split", format_double(cfg.protocol.train_fraction)},
        {"task", std::to_string(report.task)},
    };
}

inline void write_group_artifacts(const coh::CohortReport& report, const coh::EvalConfig& cfg,
                                  const fs::path& out_dir) {
    for (const coh::GroupReport& g : report.groups) {
        if (!g.evaluated || report.leak == sel::LeakMode::Clean) continue;
        atomic_write(out_dir / ("ranking_" + g.name + ".tsv"),
                     serialize_ranking(g.ranking, report.task, g.name, cfg.order));
        atomic_write(out_dir / ("curve_" + g.name + ".tsv"),
                     serialize_curve(g.curve, cfg.order, g.name));
    }
}

}  // namespace detail

// Whole-scheme evaluation from an unreduced matrix: per group, filter ->
// rank -> curve -> final metrics; writes report.txt plus per-group ranking
// and curve files.
inline fs::path stage_evaluate(const fs::path& matrix_path, const coh::CohortScheme& scheme,
                               const coh::EvalConfig& cfg, const fs::path& out_dir) {
    const feat::FeatureMatrix m =
        feat::parse_matrix(ink::read_file(matrix_path), matrix_path.string());
    const coh::CohortReport report = coh::evaluate_scheme(m, scheme, cfg);
    const fs::path report_path = out_dir / "report.txt";
    atomic_write(report_path, serialize_report(report, detail::report_annotations(report, cfg)));
    detail::write_group_artifacts(report, cfg, out_dir);
    Provenance p;
    p.stage = "evaluate";
    p.seed = cfg.protocol.seed;
    p.config.emplace_back("scheme", std::string(coh::scheme_name(scheme.kind)));
    p.config.emplace_back("leak", std::string(sel::leak_mode_name(cfg.protocol.leak)));
    p.inputs.emplace_back(matrix_path.string(), file_digest(matrix_path));
    write_provenance(report_path, p);
    return report_path;
}

// Single-group evaluation from a filtered (scoped) matrix plus a ranking
// file: the staged twin of stage_evaluate's per-group pipeline.
inline fs::path stage_evaluate_staged(const fs::path& matrix_path, const fs::path& ranking_path,
                                      const coh::EvalConfig& cfg, const fs::path& out_dir) {
    const feat::FeatureMatrix m =
        feat::parse_matrix(ink::read_file(matrix_path), matrix_path.string());
    const RankingFile rf = parse_ranking(ink::read_file(ranking_path), ranking_path.string());

    auto note = [&](const char* key, const std::string& fallback) {
        auto it = m.annotations.find(key);
        return it != m.annotations.end() ? it->second : fallback;
    };
    const std::string group = note("scope", "Combined");
    if (group != rf.group)
        throw ValidationError("matrix scope '" + group + "' does not match ranking group '" +
                              rf.group + "'");

    coh::GroupReport g;
    g.name = group;
    for (int label : m.labels) (label == ink::kLabelPd ? g.n_pd : g.n_hc) += 1;
    g.filter_kept = m.feature_count();
    g.filter_total = m.feature_count();
    if (auto it = m.annotations.find("filter_total"); it != m.annotations.end())
        g.filter_total = static_cast<std::size_t>(parse_long(it->second, "filter_total"));
    if (auto it = m.annotations.find("fallback"); it != m.annotations.end())
        g.filter_fallback = it->second == "1";

    sel::ProtocolConfig pc = cfg.protocol;
    pc.seed = derive_seed(cfg.protocol.seed, group);
    const std::vector<std::size_t> rows = feat::all_rows(m);
    g.ranking = resolve_ranking(rf, m);
    g.curve = sel::forward_accumulate(m, rows, g.ranking, pc);
    g.best_n = g.curve.best_n;
    std::vector<std::size_t> final_cols;
    for (std::size_t i = 0; i < g.best_n; ++i) final_cols.push_back(g.ranking[i].column);
    g.final_metrics = sel::evaluate_protocol(m, rows, final_cols, pc);
    g.evaluated = true;

    coh::CohortReport report;
    report.task = m.task;
    report.scheme.kind = coh::scheme_from(note("scheme", "combined"));
    report.leak = cfg.protocol.leak;
    report.groups.push_back(std::move(g));

    const fs::path report_path = out_dir / "report.txt";
    atomic_write(report_path, serialize_report(report, detail::report_annotations(report, cfg)));
    detail::write_group_artifacts(report, cfg, out_dir);
    Provenance p;
    p.stage = "evaluate";
    p.seed = cfg.protocol.seed;
    p.config.emplace_back("group", group);
    p.config.emplace_back("leak", std::string(sel::leak_mode_name(cfg.protocol.leak)));
    p.inputs.emplace_back(matrix_path.string(), file_digest(matrix_path));
    p.inputs.emplace_back(ranking_path.string(), file_digest(ranking_path));
    write_provenance(report_path, p);
    return report_path;
}

// Grid search + final fit over the whole scoped matrix; writes the model
// artifact.  With a ranking file, uses its best `top_n` features (0 = all).
inline fs::path stage_train(const fs::path& matrix_path, const fs::path& ranking_path,
                            std::size_t top_n, const sel::ProtocolConfig& base_cfg,
                            const fs::path& out_path) {
    const feat::FeatureMatrix m =
        feat::parse_matrix(ink::read_file(matrix_path), matrix_path.string());
    std::string group = "Combined";
    if (auto it = m.annotations.find("scope"); it != m.annotations.end()) group = it->second;
    const std::uint64_t seed = derive_seed(base_cfg.seed, group);

    std::vector<std::size_t> cols;
    if (!ranking_path.empty()) {
        const RankingFile rf = parse_ranking(ink::read_file(ranking_path), ranking_path.string());
        const std::vector<sel::RankedFeature> ranked = resolve_ranking(rf, m);
        const std::size_t n = top_n == 0 ? ranked.size() : std::min(top_n, ranked.size());
        for (std::size_t i = 0; i < n; ++i) cols.push_back(ranked[i].column);
        std::sort(cols.begin(), cols.end());
    } else {
        cols = feat::all_columns(m);
        if (top_n > 0 && cols.size() > top_n) cols.resize(top_n);
    }

    const std::vector<std::size_t> rows = feat::all_rows(m);
    const feat::DenseBlock block = feat::impute(m, rows, cols);
    svm::Matrix x(block.n, block.d);
    x.a = block.data;
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = m.labels[rows[i]];

    const svm::GridResult gr =
        svm::grid_search(x, y, base_cfg.grid, base_cfg.cv_folds, seed, base_cfg.tol);
    const svm::TrainOutcome fit =
        svm::train_model(x, y, gr.best_c, gr.best_z, base_cfg.tol, seed);
    atomic_write(out_path, svm::serialize_model(fit.model));

    Provenance p;
    p.stage = "train";
    p.seed = base_cfg.seed;
    p.config.emplace_back("group", group);
    p.config.emplace_back("features", std::to_string(cols.size()));
    p.config.emplace_back("c", format_double(gr.best_c));
    p.config.emplace_back("z", format_double(gr.best_z));
    p.config.emplace_back("cv_accuracy", format_double(gr.best_accuracy));
    p.inputs.emplace_back(matrix_path.string(), file_digest(matrix_path));
    if (!ranking_path.empty())
        p.inputs.emplace_back(ranking_path.string(), file_digest(ranking_path));
    write_provenance(out_path, p);
    return out_path;
}

struct ReportStageResult {
    fs::path table_path, bars_path;
};

// Renders a cohort report into the comparison table and bar-chart data.
inline ReportStageResult stage_report(const fs::path& report_path, const fs::path& out_dir) {
    const ReportFile rf = parse_report(ink::read_file(report_path), report_path.string());
    ReportStageResult res;
    res.table_path = out_dir / "table.tsv";
    res.bars_path = out_dir / "bars.tsv";
    atomic_write(res.table_path, serialize_comparison(rf));
    atomic_write(res.bars_path, serialize_bars(rf));
    Provenance p;
    p.stage = "report";
    p.inputs.emplace_back(report_path.string(), file_digest(report_path));
    write_provenance(res.table_path, p);
    return res;
}

}  // namespace pendown::stages
