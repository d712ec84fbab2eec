#pragma once

// pendown/cohorts.hpp
//
// Cohort schemes: partition subjects into Combined / Sex / Age / SexAge
// groups and run the per-group pipeline (rank-sum filter -> single-feature
// ranking -> forward accumulation -> final protocol metrics) on each viable
// group.  Every scheme report carries the Combined baseline so group effects
// are read side by side.
//
// Group seeds derive from (base seed, group name), so per-group results do
// not depend on evaluation order or on which other groups exist.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/features.hpp"
#include "pendown/ink.hpp"
#include "pendown/mannwhitney.hpp"
#include "pendown/selection.hpp"

namespace pendown::coh {

constexpr int kDefaultAgeThreshold = 65;

enum class Scheme { Combined, Sex, Age, SexAge };

inline std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Combined: return "combined";
        case Scheme::Sex: return "sex";
        case Scheme::Age: return "age";
        default: return "sexage";
    }
}

inline Scheme scheme_from(std::string_view name) {
    if (name == "combined") return Scheme::Combined;
    if (name == "sex") return Scheme::Sex;
    if (name == "age") return Scheme::Age;
    if (name == "sexage") return Scheme::SexAge;
    throw ConfigError("unknown scheme '" + std::string(name) +
                      "' (expected combined|sex|age|sexage)");
}

struct CohortScheme {
    Scheme kind = Scheme::Combined;
    int age_threshold = kDefaultAgeThreshold;  // Old <=> age >= threshold
};

// Group names in fixed report order.
inline std::vector<std::string> group_names(const CohortScheme& s) {
    switch (s.kind) {
        case Scheme::Combined: return {"Combined"};
        case Scheme::Sex: return {"Male", "Female"};
        case Scheme::Age: return {"Young", "Old"};
        default: return {"YoungMale", "OldMale", "YoungFemale", "OldFemale"};
    }
}

inline std::string group_of(char sex, int age, const CohortScheme& s) {
    const bool old_band = age >= s.age_threshold;
    switch (s.kind) {
        case Scheme::Combined: return "Combined";
        case Scheme::Sex: return sex == 'M' ? "Male" : "Female";
        case Scheme::Age: return old_band ? "Old" : "Young";
        default:
            return std::string(old_band ? "Old" : "Young") + (sex == 'M' ? "Male" : "Female");
    }
}

struct SubjectGroup {
    std::string name;
    std::vector<std::string> subject_ids;
    std::size_t n_pd = 0, n_hc = 0;
};

// Total and exclusive: every subject lands in exactly one group.  Groups are
// returned in fixed order, including empties.
inline std::vector<SubjectGroup> partition(const ink::Dataset& ds, const CohortScheme& s) {
    std::vector<SubjectGroup> groups;
    for (const std::string& name : group_names(s)) groups.push_back({name, {}, 0, 0});
    for (const ink::SubjectMeta& sub : ds.subjects) {
        const std::string g = group_of(sub.sex, sub.age, s);
        for (SubjectGroup& grp : groups) {
            if (grp.name != g) continue;
            grp.subject_ids.push_back(sub.id);
            (sub.label == ink::kLabelPd ? grp.n_pd : grp.n_hc) += 1;
            break;
        }
    }
    return groups;
}

// Matrix rows whose subject falls in the named group.
inline std::vector<std::size_t> rows_for_group(const feat::FeatureMatrix& m,
                                               const std::string& group,
                                               const CohortScheme& s) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < m.row_count(); ++i)
        if (group_of(m.sexes[i], m.ages[i], s) == group) rows.push_back(i);
    return rows;
}

// ------------------------------------------------------------- evaluation --

struct EvalConfig {
    sel::ProtocolConfig protocol;  // alpha doubles as the filter level
    sel::RankOrder order = sel::RankOrder::Descending;
};

struct GroupReport {
    std::string name;
    std::size_t n_pd = 0, n_hc = 0;
    bool evaluated = false;
    std::string skip_reason;

    std::size_t filter_kept = 0, filter_total = 0;
    bool filter_fallback = false;  // nothing passed; smallest-p column used
    std::vector<sel::RankedFeature> ranking;
    sel::AccuracyCurve curve;
    std::size_t best_n = 0;
    sel::ProtocolResult final_metrics;
};

struct CohortReport {
    int task = 0;
    CohortScheme scheme;
    sel::LeakMode leak = sel::LeakMode::Paper;
    std::vector<GroupReport> groups;  // Combined baseline first, then scheme groups
};

namespace detail {

inline GroupReport evaluate_group(const feat::FeatureMatrix& m, const std::string& name,
                                  const CohortScheme& scheme, const EvalConfig& cfg) {
    GroupReport rep;
    rep.name = name;
    const std::vector<std::size_t> rows = rows_for_group(m, name, scheme);
    for (std::size_t i : rows) (m.labels[i] == ink::kLabelPd ? rep.n_pd : rep.n_hc) += 1;
    if (rep.n_pd < 2 || rep.n_hc < 2) {
        rep.skip_reason = "class imbalance: need >= 2 subjects per label, have " +
                          std::to_string(rep.n_pd) + " PD / " + std::to_string(rep.n_hc) + " HC";
        return rep;
    }

    sel::ProtocolConfig pc = cfg.protocol;
    pc.seed = derive_seed(cfg.protocol.seed, name);
    rep.filter_total = m.feature_count();

    if (pc.leak == sel::LeakMode::Clean) {
        // Filtering and ranking happen inside each repetition's training
        // split; there is no whole-scope curve to report.
        const std::vector<std::size_t> cols = feat::all_columns(m);
        rep.final_metrics = sel::evaluate_protocol(m, rows, cols, pc);
        for (const sel::RepRecord& r : rep.final_metrics.reps)
            rep.filter_fallback = rep.filter_fallback || r.filter_fallback;
        rep.evaluated = true;
        return rep;
    }

    mw::FilterResult filt = mw::filter_features(m, rows, pc.alpha);
    std::vector<std::size_t> kept = filt.kept;
    if (kept.empty()) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < filt.tests.size(); ++j)
            if (filt.tests[j].stat.p < filt.tests[best].stat.p) best = j;
        kept.push_back(best);
        rep.filter_fallback = true;
    }
    rep.filter_kept = kept.size();

    rep.ranking = sel::rank_features(m, rows, kept, cfg.order, pc);
    rep.curve = sel::forward_accumulate(m, rows, rep.ranking, pc);
    rep.best_n = rep.curve.best_n;

    std::vector<std::size_t> final_cols;
    for (std::size_t i = 0; i < rep.best_n; ++i) final_cols.push_back(rep.ranking[i].column);
    rep.final_metrics = sel::evaluate_protocol(m, rows, final_cols, pc);
    rep.evaluated = true;
    return rep;
}

}  // namespace detail

// Runs the identical pipeline on the Combined baseline and on each group of
// the scheme; only the subject subset differs between rows of the report.
// Groups without >= 2 subjects per label are reported as skipped.
inline CohortReport evaluate_scheme(const feat::FeatureMatrix& m, const CohortScheme& scheme,
                                    const EvalConfig& cfg) {
    CohortReport report;
    report.task = m.task;
    report.scheme = scheme;
    report.leak = cfg.protocol.leak;

    std::vector<std::string> names = {"Combined"};
    if (scheme.kind != Scheme::Combined)
        for (const std::string& g : group_names(scheme)) names.push_back(g);

    bool any = false;
    for (const std::string& name : names) {
        const CohortScheme eff = (name == "Combined")
                                     ? CohortScheme{Scheme::Combined, scheme.age_threshold}
                                     : scheme;
        report.groups.push_back(detail::evaluate_group(m, name, eff, cfg));
        any = any || report.groups.back().evaluated;
    }
    if (!any)
        throw ValidationError("evaluate_scheme: no group has >= 2 subjects per label (task " +
                              std::to_string(m.task) + ")");
    return report;
}

}  // namespace pendown::coh
