#pragma once

// pendown/synth.hpp
//
// Seeded synthetic-cohort generator.  Each subject gets handwriting-like
// digitizer recordings (sums of low-frequency tones + drift + noise, with
// alternating on-surface / in-air strokes and a pressure channel).  Label
// effects are injected into the *signals* of PD subjects in chosen groups —
// a tremor tone, faster pressure dynamics, or an amplitude slowdown — so any
// downstream separability flows through the real kinematics/EMD/energy
// feature math rather than fabricated feature values.
//
// The base seed fully determines the dataset, byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "pendown/cohorts.hpp"
#include "pendown/common.hpp"
#include "pendown/features.hpp"
#include "pendown/ink.hpp"

namespace pendown::synth {

inline constexpr double kTau = 6.283185307179586476925286766559;

// One cohort cell: how many PD / HC subjects of this sex and age band.
struct CohortCell {
    char sex = 'M';         // 'M' | 'F'
    bool old_band = false;  // false: age 40..64, true: age 65..85
    int pd = 0, hc = 0;
};

// A label effect scoped to a group: PD subjects whose group matches get the
// signal-level modification.
struct EffectSpec {
    std::string group = "All";    // All | Male | Female | Young | Old | YoungMale | ...
    std::string kind = "tremor";  // tremor | pressure | slowdown
    double size = 1.0;            // >= 0; 0 disables
};

struct SynthConfig {
    std::vector<CohortCell> cells = {
        {'M', false, 5, 5}, {'M', true, 5, 5}, {'F', false, 5, 5}, {'F', true, 5, 5}};
    std::vector<int> tasks = {1};
    std::vector<EffectSpec> effects;
    double noise = 0.35;          // trajectory noise sigma
    double sample_rate_hz = 100.0;
    double duration_s = 4.0;
    std::uint64_t seed = 1;
};

namespace detail {

inline const std::vector<std::string>& known_groups() {
    static const std::vector<std::string> g = {"All",   "Male",      "Female",    "Young",
                                               "Old",   "YoungMale", "OldMale",   "YoungFemale",
                                               "OldFemale"};
    return g;
}

inline bool group_matches(const std::string& group, char sex, int age) {
    if (group == "All") return true;
    const coh::CohortScheme sex_s{coh::Scheme::Sex, coh::kDefaultAgeThreshold};
    const coh::CohortScheme age_s{coh::Scheme::Age, coh::kDefaultAgeThreshold};
    const coh::CohortScheme both{coh::Scheme::SexAge, coh::kDefaultAgeThreshold};
    return group == coh::group_of(sex, age, sex_s) || group == coh::group_of(sex, age, age_s) ||
           group == coh::group_of(sex, age, both);
}

}  // namespace detail

inline void validate(const SynthConfig& cfg) {
    if (cfg.cells.empty()) throw ConfigError("synth: no cohort cells");
    for (const CohortCell& c : cfg.cells) {
        if (c.sex != 'M' && c.sex != 'F') throw ConfigError("synth: cell sex must be M or F");
        if (c.pd < 0 || c.hc < 0) throw ConfigError("synth: cell counts must be >= 0");
    }
    if (cfg.tasks.empty()) throw ConfigError("synth: no tasks");
    for (int t : cfg.tasks)
        if (t < 1 || t > 7) throw ConfigError("synth: task numbers must be in 1..7");
    for (const EffectSpec& e : cfg.effects) {
        if (!(e.size >= 0.0)) throw ConfigError("synth: effect size must be >= 0");
        if (e.kind != "tremor" && e.kind != "pressure" && e.kind != "slowdown")
            throw ConfigError("synth: unknown effect kind '" + e.kind + "'");
        bool ok = false;
        for (const std::string& g : detail::known_groups()) ok = ok || g == e.group;
        if (!ok) throw ConfigError("synth: unknown effect group '" + e.group + "'");
    }
    if (!(cfg.noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    if (!(cfg.sample_rate_hz > 0.0)) throw ConfigError("synth: sample rate must be positive");
    if (!(cfg.duration_s > 0.0)) throw ConfigError("synth: duration must be positive");
    if (cfg.duration_s * cfg.sample_rate_hz < 64.0)
        throw ConfigError("synth: need at least 64 samples per recording");
}

namespace detail {

inline ink::Recording make_recording(const SynthConfig& cfg, const ink::SubjectMeta& meta,
                                     int task) {
    Rng rng(derive_seed(cfg.seed, meta.id + ".task" + std::to_string(task)));
    const std::size_t n =
        static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.sample_rate_hz + 0.5));
    const double dt = 1.0 / cfg.sample_rate_hz;

    // Base tones; frequencies drift a little with the task index so tasks
    // yield distinct matrices.
    const double f1 = 0.5 + 0.07 * task;
    const double f2 = 1.1 + 0.13 * task;
    const double p1 = rng.uniform(0.0, kTau), p2 = rng.uniform(0.0, kTau);
    const double q1 = rng.uniform(0.0, kTau), q2 = rng.uniform(0.0, kTau);
    const double ax1 = 6.0 * (1.0 + 0.10 * rng.normal());
    const double ax2 = 3.0 * (1.0 + 0.10 * rng.normal());
    const double ay1 = 4.0 * (1.0 + 0.10 * rng.normal());
    const double ay2 = 2.0 * (1.0 + 0.10 * rng.normal());

    // Accumulate label effects that apply to this subject.
    double tremor = 0.0, pressure_fx = 0.0, slowdown = 0.0;
    if (meta.label == ink::kLabelPd)
        for (const EffectSpec& e : cfg.effects) {
            if (!group_matches(e.group, meta.sex, meta.age)) continue;
            if (e.kind == "tremor") tremor += e.size;
            else if (e.kind == "pressure") pressure_fx += e.size;
            else slowdown += e.size;
        }
    const double tremor_amp = 0.55 * tremor * (1.0 + 0.05 * rng.normal());
    const double tremor_hz = 7.5 + 0.4 * rng.unit();
    const double tremor_phase = rng.uniform(0.0, kTau);
    const double scale = 1.0 / (1.0 + 0.30 * slowdown);

    const double press_phase = rng.uniform(0.0, kTau);
    const double press_fx_phase = rng.uniform(0.0, kTau);
    const double tilt_phase = rng.uniform(0.0, kTau);
    const double elev_phase = rng.uniform(0.0, kTau);

    // Alternating on-surface / in-air stroke boundaries (fractions of the
    // recording) with per-subject jitter; segments start and end on-surface.
    double frac[6] = {0.0, 0.30, 0.38, 0.68, 0.76, 1.0};
    for (int b = 1; b <= 4; ++b) frac[b] += rng.uniform(-0.02, 0.02);

    ink::Recording rec;
    rec.subject_id = meta.id;
    rec.task = task;
    rec.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double ft = t / cfg.duration_s;
        int seg = 4;
        while (seg > 0 && ft < frac[seg]) --seg;
        const bool on_surface = (seg % 2) == 0;

        ink::SamplePoint s;
        s.t = t;
        s.x = scale * (ax1 * std::sin(kTau * f1 * t + p1) + ax2 * std::sin(kTau * f2 * t + p2)) +
              0.5 * t + cfg.noise * rng.normal() +
              tremor_amp * std::sin(kTau * tremor_hz * t + tremor_phase);
        s.y = scale * (ay1 * std::sin(kTau * f1 * 1.17 * t + q1) +
                       ay2 * std::sin(kTau * f2 * 0.83 * t + q2)) +
              0.3 * t + cfg.noise * rng.normal() +
              tremor_amp * std::cos(kTau * tremor_hz * t + tremor_phase);
        s.button = on_surface ? 1 : 0;
        if (on_surface) {
            double p = 500.0 + 180.0 * std::sin(kTau * 0.7 * t + press_phase) +
                       30.0 * rng.normal() +
                       pressure_fx * 120.0 * std::sin(kTau * 2.2 * t + press_fx_phase);
            s.pressure = std::max(1.0, p);
        } else {
            s.pressure = 0.0;
        }
        s.tilt = 400.0 + 100.0 * std::sin(kTau * 0.2 * t + tilt_phase);
        s.elevation = 600.0 + 80.0 * std::cos(kTau * 0.15 * t + elev_phase);
        rec.samples.push_back(s);
    }
    rec.strokes = ink::segment_strokes(rec.samples);
    return rec;
}

}  // namespace detail

// Builds the full in-memory dataset: subjects (with seeded ages and UPDRS)
// plus one recording per (subject, task).
inline ink::Dataset generate(const SynthConfig& cfg) {
    validate(cfg);
    ink::Dataset ds;
    int pd_counter = 0, hc_counter = 0;
    for (const CohortCell& cell : cfg.cells) {
        for (int label : {ink::kLabelPd, ink::kLabelHc}) {
            const int count = label == ink::kLabelPd ? cell.pd : cell.hc;
            for (int k = 0; k < count; ++k) {
                int& counter = label == ink::kLabelPd ? pd_counter : hc_counter;
                ++counter;
                char idbuf[16];
                std::snprintf(idbuf, sizeof(idbuf), "%s%03d",
                              label == ink::kLabelPd ? "pd" : "hc", counter);
                ink::SubjectMeta meta;
                meta.id = idbuf;
                meta.sex = cell.sex;
                meta.label = label;
                Rng mrng(derive_seed(cfg.seed, meta.id + ".meta"));
                meta.age = cell.old_band ? 65 + static_cast<int>(mrng.below(21))
                                         : 40 + static_cast<int>(mrng.below(25));
                if (label == ink::kLabelPd)
                    meta.updrs = 10.0 + std::floor(300.0 * mrng.unit()) / 10.0;
                ds.subjects.push_back(meta);
            }
        }
    }
    if (ds.subjects.empty()) throw ConfigError("synth: all cell counts are zero");
    std::sort(ds.subjects.begin(), ds.subjects.end(),
              [](const ink::SubjectMeta& a, const ink::SubjectMeta& b) { return a.id < b.id; });
    for (const ink::SubjectMeta& meta : ds.subjects)
        for (int task : cfg.tasks) ds.recordings.push_back(detail::make_recording(cfg, meta, task));
    return ds;
}

// ------------------------------------------------- matrix-level fixture --

// A feature matrix of unit-variance gaussian columns where the first
// `informative` columns of PD rows are shifted by `effect` standard
// deviations.  Bypasses signal extraction; used to test the statistics and
// selection layers in isolation.
inline feat::FeatureMatrix gaussian_matrix(std::size_t per_label, std::size_t d,
                                           std::size_t informative, double effect,
                                           std::uint64_t seed) {
    if (per_label < 2) throw ConfigError("gaussian_matrix: need >= 2 rows per label");
    if (d == 0 || informative > d) throw ConfigError("gaussian_matrix: bad column counts");
    feat::FeatureMatrix m;
    m.task = 1;
    m.profile = feat::RegistryProfile::Compact;
    for (std::size_t j = 0; j < d; ++j)
        m.features.push_back({1, feat::Stream::Global, "f" + std::to_string(j), "mean"});
    Rng rng(seed);
    for (std::size_t i = 0; i < 2 * per_label; ++i) {
        const int label = i < per_label ? ink::kLabelPd : ink::kLabelHc;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "%s%03zu", label == ink::kLabelPd ? "pd" : "hc",
                      (i % per_label) + 1);
        m.subject_ids.push_back(idbuf);
        m.labels.push_back(label);
        m.sexes.push_back(i % 2 ? 'F' : 'M');
        m.ages.push_back(50 + static_cast<int>(i % 30));
        std::vector<std::optional<double>> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            double v = rng.normal();
            if (label == ink::kLabelPd && j < informative) v += effect;
            row[j] = v;
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace pendown::synth
