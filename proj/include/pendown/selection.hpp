#pragma once

// pendown/selection.hpp
//
// The wrapper layer tying feature matrices to the SVM: the repetition
// protocol (seeded permutation, stratified 80:20 split, grid-searched
// stratified k-fold CV on the training part, final fit, held-out metrics,
// averaged over repetitions), single-feature accuracies, ranking, and
// forward feature-addition curves.
//
// Seed discipline: repetition r draws everything (permutation, split, fold
// assignment, solver scan order) from base_seed + r, so any reported number
// is reproducible from (config, base seed) alone and repetitions can run on
// any number of threads with identical results.
//
// Leakage modes: Paper scopes imputation, filtering and ranking to the whole
// row scope before the protocol runs (matching the published protocol);
// Clean redoes imputation, the rank-sum filter, and the ranking inside each
// repetition using only that repetition's training split.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/features.hpp"
#include "pendown/mannwhitney.hpp"
#include "pendown/svm.hpp"

namespace pendown::sel {

enum class LeakMode { Paper, Clean };

inline std::string_view leak_mode_name(LeakMode m) {
    return m == LeakMode::Paper ? "paper" : "clean";
}

inline LeakMode leak_mode_from(std::string_view name) {
    if (name == "paper") return LeakMode::Paper;
    if (name == "clean") return LeakMode::Clean;
    throw ConfigError("unknown leak mode '" + std::string(name) + "' (expected paper|clean)");
}

enum class RankOrder { Descending, Random };

inline std::string_view order_name(RankOrder o) {
    return o == RankOrder::Descending ? "descending" : "random";
}

inline RankOrder order_from(std::string_view name) {
    if (name == "descending") return RankOrder::Descending;
    if (name == "random") return RankOrder::Random;
    throw ConfigError("unknown order '" + std::string(name) + "' (expected descending|random)");
}

struct ProtocolConfig {
    int reps = 50;
    int cv_folds = 10;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    svm::GridSpec grid;
    double tol = svm::kDefaultTolerance;
    LeakMode leak = LeakMode::Paper;
    double alpha = 0.05;  // per-repetition filter level (Clean mode only)
    int threads = 1;      // repetition workers; 0 = hardware concurrency
};

// ------------------------------------------------------------------ split --

struct Split {
    std::vector<std::size_t> train, test;  // local row indices, ascending
};

// Seeded permutation, then per class the first round(fraction * n) rows go
// to train; both sides keep at least one member of each class.
inline Split stratified_split(std::span<const int> y, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("stratified_split: train fraction must be in (0, 1)");
    Rng rng(seed);
    const std::vector<std::size_t> perm = rng.permutation(y.size());
    Split sp;
    for (int cls : {1, -1}) {
        std::vector<std::size_t> members;
        for (std::size_t p : perm)
            if (y[p] == cls) members.push_back(p);
        if (members.size() < 2)
            throw ValidationError("stratified_split: each class needs >= 2 rows in scope");
        std::size_t n_tr = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
        n_tr = std::clamp<std::size_t>(n_tr, 1, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_tr ? sp.train : sp.test).push_back(members[i]);
    }
    std::sort(sp.train.begin(), sp.train.end());
    std::sort(sp.test.begin(), sp.test.end());
    return sp;
}

// ----------------------------------------------------------- rep protocol --

struct RepRecord {
    svm::ConfusionCounts confusion;
    double accuracy = 0.0;  // percent on the held-out split
    std::optional<double> precision, recall;
    double best_c = 0.0, best_z = 0.0;
    double cv_accuracy = 0.0;        // grid winner's fold-averaged accuracy
    std::size_t grid_cells = 0;      // cells evaluated by this rep's search
    int cv_folds = 0;                // folds actually used
    std::size_t train_rows = 0, test_rows = 0;
    std::size_t features_used = 0;
    bool filter_fallback = false;    // Clean mode: rank-sum filter kept nothing
};

struct ProtocolResult {
    double mean_accuracy = 0.0, std_accuracy = 0.0;  // percent; std over reps (n-1)
    std::optional<double> mean_precision, mean_recall;
    svm::ConfusionCounts totals;
    std::vector<RepRecord> reps;
};

namespace detail {

inline svm::Matrix take_rows(const svm::Matrix& x, std::span<const std::size_t> idx) {
    svm::Matrix out(idx.size(), x.d);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < x.d; ++j) out.at(i, j) = x.at(idx[i], j);
    return out;
}

inline std::vector<int> take_labels(std::span<const int> y, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
    return out;
}

// Grid search + final fit on the given raw train rows, metrics on test rows.
inline RepRecord fit_and_score(const svm::Matrix& xtr, const std::vector<int>& ytr,
                               const svm::Matrix& xte, const std::vector<int>& yte,
                               const ProtocolConfig& cfg, std::uint64_t rep_seed) {
    const svm::GridResult gr = svm::grid_search(xtr, ytr, cfg.grid, cfg.cv_folds, rep_seed, cfg.tol);
    const svm::TrainOutcome fit =
        svm::train_model(xtr, ytr, gr.best_c, gr.best_z, cfg.tol, rep_seed);

    RepRecord rec;
    for (std::size_t i = 0; i < xte.n; ++i) rec.confusion.add(yte[i], fit.model.predict(xte.row(i)));
    const svm::Metrics m = svm::compute_metrics(rec.confusion);
    rec.accuracy = m.accuracy;
    rec.precision = m.precision;
    rec.recall = m.recall;
    rec.best_c = gr.best_c;
    rec.best_z = gr.best_z;
    rec.cv_accuracy = gr.best_accuracy;
    rec.grid_cells = gr.cells_evaluated;
    rec.cv_folds = gr.folds_used;
    rec.train_rows = xtr.n;
    rec.test_rows = xte.n;
    rec.features_used = xtr.d;
    return rec;
}

// Column medians over the observed values of the given global rows (0 when a
// column is entirely missing there).
inline std::vector<double> column_medians(const feat::FeatureMatrix& m,
                                          std::span<const std::size_t> rows,
                                          std::span<const std::size_t> columns) {
    std::vector<double> med(columns.size(), 0.0);
    std::vector<double> seen;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        seen.clear();
        for (std::size_t i : rows) {
            const auto& cell = m.rows[i][columns[j]];
            if (cell) seen.push_back(*cell);
        }
        if (!seen.empty()) {
            std::sort(seen.begin(), seen.end());
            const std::size_t k = seen.size();
            med[j] = (k % 2) ? seen[k / 2] : 0.5 * (seen[k / 2 - 1] + seen[k / 2]);
        }
    }
    return med;
}

inline svm::Matrix dense_with_medians(const feat::FeatureMatrix& m,
                                      std::span<const std::size_t> rows,
                                      std::span<const std::size_t> columns,
                                      std::span<const double> medians) {
    svm::Matrix x(rows.size(), columns.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < columns.size(); ++j) {
            const auto& cell = m.rows[rows[i]][columns[j]];
            x.at(i, j) = cell ? *cell : medians[j];
        }
    return x;
}

inline svm::Matrix select_columns(const svm::Matrix& x, std::span<const std::size_t> cols) {
    svm::Matrix out(x.n, cols.size());
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out.at(i, j) = x.at(i, cols[j]);
    return out;
}

inline void aggregate(ProtocolResult& res) {
    std::vector<double> accs, pres, recs;
    for (const RepRecord& r : res.reps) {
        accs.push_back(r.accuracy);
        if (r.precision) pres.push_back(*r.precision);
        if (r.recall) recs.push_back(*r.recall);
        res.totals += r.confusion;
    }
    res.mean_accuracy = mean_of(accs);
    res.std_accuracy = sample_std(accs);
    if (!pres.empty()) res.mean_precision = mean_of(pres);
    if (!recs.empty()) res.mean_recall = mean_of(recs);
}

}  // namespace detail

// Protocol over an already-dense matrix (columns fixed up front).
inline ProtocolResult evaluate_protocol_dense(const svm::Matrix& x, std::span<const int> y,
                                              const ProtocolConfig& cfg) {
    if (x.n != y.size()) throw ValidationError("evaluate_protocol: row/label count mismatch");
    if (x.d == 0) throw ValidationError("evaluate_protocol: no features");
    if (cfg.reps < 1) throw ConfigError("evaluate_protocol: reps must be >= 1");

    ProtocolResult res;
    res.reps.resize(static_cast<std::size_t>(cfg.reps));
    parallel_for(res.reps.size(), cfg.threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = cfg.seed + r;
        const Split sp = stratified_split(y, cfg.train_fraction, rep_seed);
        const svm::Matrix xtr = detail::take_rows(x, sp.train);
        const svm::Matrix xte = detail::take_rows(x, sp.test);
        const std::vector<int> ytr = detail::take_labels(y, sp.train);
        const std::vector<int> yte = detail::take_labels(y, sp.test);
        res.reps[r] = detail::fit_and_score(xtr, ytr, xte, yte, cfg, rep_seed);
    });
    detail::aggregate(res);
    return res;
}

// Protocol over matrix columns with leakage control.
//
// Paper mode: `columns` is the exact feature set; missing cells are imputed
// with medians over the whole row scope before any split.
//
// Clean mode: `columns` is the candidate pool.  Each repetition imputes with
// its own training medians, filters the pool by the rank-sum test on the
// training split (falling back to the single smallest-p column if nothing
// passes), ranks survivors by single-feature CV accuracy on the training
// split (ties by feature id), and keeps the best `top_n` (0 = all kept).
inline ProtocolResult evaluate_protocol(const feat::FeatureMatrix& m,
                                        std::span<const std::size_t> rows,
                                        std::span<const std::size_t> columns,
                                        const ProtocolConfig& cfg, std::size_t top_n = 0) {
    if (rows.empty()) throw ValidationError("evaluate_protocol: empty row scope");
    if (columns.empty()) throw ValidationError("evaluate_protocol: empty column set");
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = m.labels[rows[i]];

    if (cfg.leak == LeakMode::Paper) {
        const feat::DenseBlock block = feat::impute(m, rows, columns);
        svm::Matrix x(block.n, block.d);
        x.a = block.data;
        return evaluate_protocol_dense(x, y, cfg);
    }

    if (cfg.reps < 1) throw ConfigError("evaluate_protocol: reps must be >= 1");
    ProtocolResult res;
    res.reps.resize(static_cast<std::size_t>(cfg.reps));
    parallel_for(res.reps.size(), cfg.threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = cfg.seed + r;
        const Split sp = stratified_split(y, cfg.train_fraction, rep_seed);

        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i : sp.train) train_rows.push_back(rows[i]);
        for (std::size_t i : sp.test) test_rows.push_back(rows[i]);
        const std::vector<double> med = detail::column_medians(m, train_rows, columns);
        const svm::Matrix xtr_all = detail::dense_with_medians(m, train_rows, columns, med);
        const svm::Matrix xte_all = detail::dense_with_medians(m, test_rows, columns, med);
        const std::vector<int> ytr = detail::take_labels(y, sp.train);
        const std::vector<int> yte = detail::take_labels(y, sp.test);

        feat::DenseBlock trb;
        trb.n = xtr_all.n;
        trb.d = xtr_all.d;
        trb.data = xtr_all.a;
        const mw::FilterResult filt = mw::filter_dense(trb, ytr, cfg.alpha);
        std::vector<std::size_t> kept = filt.kept;
        bool fallback = false;
        if (kept.empty()) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < filt.tests.size(); ++j)
                if (filt.tests[j].stat.p < filt.tests[best].stat.p) best = j;
            kept.push_back(best);
            fallback = true;
        }

        if (kept.size() > 1) {
            std::vector<double> acc(kept.size());
            for (std::size_t j = 0; j < kept.size(); ++j) {
                const std::size_t one[1] = {kept[j]};
                const svm::Matrix xcol = detail::select_columns(xtr_all, one);
                acc[j] = svm::grid_search(xcol, ytr, cfg.grid, cfg.cv_folds, rep_seed, cfg.tol)
                             .best_accuracy;
            }
            std::vector<std::size_t> order(kept.size());
            for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (acc[a] != acc[b]) return acc[a] > acc[b];
                return m.features[columns[kept[a]]] < m.features[columns[kept[b]]];
            });
            std::vector<std::size_t> sorted;
            for (std::size_t j : order) sorted.push_back(kept[j]);
            kept = std::move(sorted);
        }
        if (top_n > 0 && kept.size() > top_n) kept.resize(top_n);
        std::sort(kept.begin(), kept.end());

        const svm::Matrix xtr = detail::select_columns(xtr_all, kept);
        const svm::Matrix xte = detail::select_columns(xte_all, kept);
        res.reps[r] = detail::fit_and_score(xtr, ytr, xte, yte, cfg, rep_seed);
        res.reps[r].filter_fallback = fallback;
    });
    detail::aggregate(res);
    return res;
}

// ---------------------------------------------------------------- ranking --

struct RankedFeature {
    std::size_t column = 0;  // matrix column index
    feat::FeatureId feature;
    std::optional<double> individual_accuracy;  // absent for Random order
    int rank = 0;                               // 1-based position
};

// Mean protocol accuracy of a single-feature classifier.  Ranking is a
// whole-scope construct, so this always runs in Paper mode.
inline double individual_accuracy(const feat::FeatureMatrix& m, std::span<const std::size_t> rows,
                                  std::size_t column, const ProtocolConfig& cfg) {
    const std::size_t one[1] = {column};
    ProtocolConfig pc = cfg;
    pc.leak = LeakMode::Paper;
    return evaluate_protocol(m, rows, one, pc).mean_accuracy;
}

// Descending: sort by individual accuracy (ties by feature id).  Random:
// seeded uniform permutation of the columns; accuracies are not computed.
inline std::vector<RankedFeature> rank_features(const feat::FeatureMatrix& m,
                                                std::span<const std::size_t> rows,
                                                std::span<const std::size_t> columns,
                                                RankOrder order, const ProtocolConfig& cfg) {
    if (columns.empty()) throw ValidationError("rank_features: empty column set");
    std::vector<RankedFeature> out(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out[j].column = columns[j];
        out[j].feature = m.features[columns[j]];
    }
    if (order == RankOrder::Random) {
        Rng rng(cfg.seed);
        rng.shuffle(out);
    } else {
        std::vector<double> acc(columns.size());
        parallel_for(columns.size(), cfg.threads, [&](std::size_t j) {
            ProtocolConfig pc = cfg;
            pc.threads = 1;
            acc[j] = individual_accuracy(m, rows, columns[j], pc);
        });
        for (std::size_t j = 0; j < out.size(); ++j) out[j].individual_accuracy = acc[j];
        std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
            if (*a.individual_accuracy != *b.individual_accuracy)
                return *a.individual_accuracy > *b.individual_accuracy;
            return a.feature < b.feature;
        });
    }
    for (std::size_t j = 0; j < out.size(); ++j) out[j].rank = static_cast<int>(j + 1);
    return out;
}

// ------------------------------------------------------------------ curve --

struct CurvePoint {
    std::size_t n = 0;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
};

struct AccuracyCurve {
    std::vector<CurvePoint> points;  // n = 1 .. ranked size
    std::size_t best_n = 0;          // argmax of mean accuracy, ties -> smaller n
    double best_accuracy = 0.0;
};

// Adds ranked features one at a time, scoring each prefix under the full
// protocol.  In Clean mode the prefix length only caps the per-repetition
// selection (the repetition re-ranks internally).
inline AccuracyCurve forward_accumulate(const feat::FeatureMatrix& m,
                                        std::span<const std::size_t> rows,
                                        const std::vector<RankedFeature>& ranked,
                                        const ProtocolConfig& cfg) {
    if (ranked.empty()) throw ValidationError("forward_accumulate: empty ranking");
    std::vector<std::size_t> pool;
    for (const RankedFeature& rf : ranked) pool.push_back(rf.column);

    AccuracyCurve curve;
    curve.best_accuracy = -1.0;
    for (std::size_t n = 1; n <= ranked.size(); ++n) {
        ProtocolResult pr;
        if (cfg.leak == LeakMode::Paper) {
            const std::vector<std::size_t> prefix(pool.begin(),
                                                  pool.begin() + static_cast<std::ptrdiff_t>(n));
            pr = evaluate_protocol(m, rows, prefix, cfg);
        } else {
            pr = evaluate_protocol(m, rows, pool, cfg, n);
        }
        curve.points.push_back({n, pr.mean_accuracy, pr.std_accuracy});
        if (pr.mean_accuracy > curve.best_accuracy) {
            curve.best_accuracy = pr.mean_accuracy;
            curve.best_n = n;
        }
    }
    return curve;
}

}  // namespace pendown::sel
