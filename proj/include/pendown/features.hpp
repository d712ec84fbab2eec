#pragma once

// pendown/features.hpp
//
// The feature registry and everything that fills it.
//
// A feature is identified by (task, stream, base, functional) and rendered
// as a stable key like "t1.os.jerk.p95".  The registry enumerates, in a
// fixed data-independent order, which features exist for a task; extraction
// evaluates them for one recording, yielding a missing value wherever the
// underlying series is absent or too short.  Matrices hold raw optional
// values; imputation (column median over the rows in scope) happens when a
// dense block is carved out for statistics or training.
//
// Registry layout (Full profile):
//   - 19 kinematic series (9 per pen state + on-surface pressure rate), each
//     under a 15-functional battery                              285
//   - direction-change counts and per-second rates, magnitude and
//     per-axis, both streams                                      24
//   - entropies/energies of the on-surface x/y coordinate streams
//     plus four SNR variants per axis                             18
//   - the same five measures on IMFs 1..3 of each axis            30
//                                                          total 357
// The Compact profile is a ~60-feature subset of the same keys for quick
// end-to-end runs; both profiles are fixed constants.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/emd.hpp"
#include "pendown/ink.hpp"
#include "pendown/kinematics.hpp"
#include "pendown/measures.hpp"

namespace pendown::feat {

// ----------------------------------------------------------- functionals --

// Scalar summaries of a series.  Empty input gives a missing value; unknown
// names are configuration errors.  Kurtosis of a zero-variance series is
// undefined and therefore missing.
inline std::optional<double> functional(std::span<const double> v, std::string_view name) {
    static const char* known[] = {"mean",  "gmean", "median", "mode",    "std",     "m2",
                                  "m3",    "kurt",  "range",  "rrange",  "p1",      "p5",
                                  "p10",   "p20",   "p30",    "p50",     "p90",     "p95",
                                  "p99",   "tmean20", "tmean30", "tmean40"};
    const bool ok = std::any_of(std::begin(known), std::end(known),
                                [&](const char* k) { return name == k; });
    if (!ok) throw ConfigError("functional: unknown name '" + std::string(name) + "'");
    if (v.empty()) return std::nullopt;

    auto sorted = [&]() {
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        return s;
    };
    // Closest-rank interpolation: rank q/100 * (n-1), linear between ranks.
    auto percentile = [&](const std::vector<double>& s, double q) {
        const double r = q / 100.0 * static_cast<double>(s.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(r);
        const double frac = r - static_cast<double>(lo);
        if (lo + 1 >= s.size()) return s.back();
        return s[lo] + frac * (s[lo + 1] - s[lo]);
    };
    auto trimmed = [&](double fraction) -> std::optional<double> {
        std::vector<double> s = sorted();
        const std::size_t cut =
            static_cast<std::size_t>(std::floor(static_cast<double>(s.size()) * fraction / 2.0 + 1e-9));
        if (s.size() <= 2 * cut) return std::nullopt;
        std::span<const double> mid(s.data() + cut, s.size() - 2 * cut);
        return mean_of(mid);
    };

    if (name == "mean") return mean_of(v);
    if (name == "gmean") {
        // Geometric mean of magnitudes, floored so zeros don't blow up.
        double acc = 0.0;
        for (double x : v) acc += std::log(std::max(std::abs(x), 1e-12));
        return std::exp(acc / static_cast<double>(v.size()));
    }
    if (name == "median") {
        std::vector<double> s = sorted();
        const std::size_t n = s.size();
        return (n % 2) ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    }
    if (name == "mode") {
        // Centre of the fullest 16-bin histogram bin; lowest bin wins ties.
        const measures::HistogramEstimate h = measures::histogram(v);
        std::size_t best = 0;
        for (std::size_t i = 1; i < h.p.size(); ++i)
            if (h.p[i] > h.p[best]) best = i;
        const double width = (h.hi - h.lo) / static_cast<double>(h.bins());
        return h.lo + (static_cast<double>(best) + 0.5) * width;
    }
    if (name == "std") return population_std(v);
    if (name == "m2") return central_moment(v, 2);
    if (name == "m3") return central_moment(v, 3);
    if (name == "kurt") {
        const double m2 = central_moment(v, 2);
        if (m2 == 0.0) return std::nullopt;
        return central_moment(v, 4) / (m2 * m2);
    }
    if (name == "range") {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi - *lo;
    }
    if (name == "rrange") {
        std::vector<double> s = sorted();
        return percentile(s, 95.0) - percentile(s, 5.0);
    }
    if (name[0] == 'p') {
        const double q = static_cast<double>(parse_long(name.substr(1), "functional percentile"));
        return percentile(sorted(), q);
    }
    if (name == "tmean20") return trimmed(0.20);
    if (name == "tmean30") return trimmed(0.30);
    return trimmed(0.40);  // tmean40
}

// ------------------------------------------------------------- identities --

enum class Stream { OnSurface, InAir, Global };

inline std::string_view stream_name(Stream s) {
    switch (s) {
        case Stream::OnSurface: return "os";
        case Stream::InAir: return "air";
        case Stream::Global: return "global";
    }
    throw ValidationError("stream_name: bad stream");
}

inline Stream stream_from(std::string_view name) {
    if (name == "os") return Stream::OnSurface;
    if (name == "air") return Stream::InAir;
    if (name == "global") return Stream::Global;
    throw ParseError("unknown stream '" + std::string(name) + "'");
}

struct FeatureId {
    int task = 0;
    Stream stream = Stream::Global;
    std::string base;        // series or measure name, e.g. "jerk", "x_imf2"
    std::string functional;  // battery entry or scalar kind, e.g. "p95", "count"

    std::string render() const {
        return "t" + std::to_string(task) + "." + std::string(stream_name(stream)) + "." + base +
               "." + functional;
    }

    friend bool operator==(const FeatureId&, const FeatureId&) = default;
    friend bool operator<(const FeatureId& a, const FeatureId& b) {
        return std::tie(a.task, a.stream, a.base, a.functional) <
               std::tie(b.task, b.stream, b.base, b.functional);
    }
};

inline FeatureId parse_feature_id(std::string_view key) {
    std::array<std::string_view, 4> part{};
    std::size_t from = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t dot = key.find('.', from);
        if ((i < 3) == (dot == std::string_view::npos))
            throw ParseError("bad feature key '" + std::string(key) + "'");
        part[i] = key.substr(from, (i < 3 ? dot : key.size()) - from);
        from = dot + 1;
    }
    if (part[0].size() < 2 || part[0][0] != 't')
        throw ParseError("bad feature key '" + std::string(key) + "'");
    FeatureId id;
    id.task = static_cast<int>(parse_long(part[0].substr(1), "feature key task"));
    id.stream = stream_from(part[1]);
    id.base = std::string(part[2]);
    id.functional = std::string(part[3]);
    return id;
}

// --------------------------------------------------------------- registry --

enum class RegistryProfile { Full, Compact };

inline std::string_view profile_name(RegistryProfile p) {
    return p == RegistryProfile::Full ? "full" : "compact";
}

inline RegistryProfile profile_from(std::string_view name) {
    if (name == "full") return RegistryProfile::Full;
    if (name == "compact") return RegistryProfile::Compact;
    throw ConfigError("unknown registry profile '" + std::string(name) + "'");
}

namespace detail {

inline const std::vector<std::string>& kinematic_bases(RegistryProfile p) {
    static const std::vector<std::string> full = {"speed", "accel", "jerk",  "vel_x", "vel_y",
                                                  "acc_x", "acc_y", "jerk_x", "jerk_y"};
    static const std::vector<std::string> compact = {"speed", "accel", "jerk"};
    return p == RegistryProfile::Full ? full : compact;
}

inline const std::vector<std::string>& battery(RegistryProfile p) {
    static const std::vector<std::string> full = {"mean", "gmean", "median", "mode", "std",
                                                  "m3",   "kurt",  "range",  "rrange", "p1",
                                                  "p20",  "p30",   "p90",    "p95",  "tmean40"};
    static const std::vector<std::string> compact = {"mean", "std", "rrange", "p95"};
    return p == RegistryProfile::Full ? full : compact;
}

inline const std::vector<std::string>& count_bases(RegistryProfile p) {
    static const std::vector<std::string> full = {"ncv", "nca", "ncv_x", "ncv_y", "nca_x", "nca_y"};
    static const std::vector<std::string> compact = {"ncv", "nca"};
    return p == RegistryProfile::Full ? full : compact;
}

inline const std::vector<std::string>& snr_kinds(RegistryProfile p) {
    static const std::vector<std::string> full = {"snr_ce", "snr_tke", "snr_ice", "snr_itke"};
    static const std::vector<std::string> compact = {"snr_ce", "snr_tke"};
    return p == RegistryProfile::Full ? full : compact;
}

inline int max_imf(RegistryProfile p) { return p == RegistryProfile::Full ? 3 : 1; }

inline const std::vector<std::string>& measure_kinds() {
    static const std::vector<std::string> kinds = {"shannon", "renyi2", "renyi3", "ce", "tke"};
    return kinds;
}

}  // namespace detail

// Fixed enumeration; depends only on (task, profile).
inline std::vector<FeatureId> registry(int task, RegistryProfile profile = RegistryProfile::Full) {
    std::vector<FeatureId> out;
    const auto& bases = detail::kinematic_bases(profile);
    const auto& fns = detail::battery(profile);

    for (Stream stream : {Stream::OnSurface, Stream::InAir}) {
        for (const std::string& base : bases)
            for (const std::string& fn : fns) out.push_back({task, stream, base, fn});
        if (stream == Stream::OnSurface)
            for (const std::string& fn : fns) out.push_back({task, stream, "pressure_rate", fn});
    }
    for (Stream stream : {Stream::OnSurface, Stream::InAir})
        for (const std::string& base : detail::count_bases(profile)) {
            out.push_back({task, stream, base, "count"});
            out.push_back({task, stream, base, "rate"});
        }
    for (const char* axis : {"x", "y"}) {
        for (const std::string& kind : detail::measure_kinds())
            out.push_back({task, Stream::OnSurface, axis, kind});
        for (const std::string& kind : detail::snr_kinds(profile))
            out.push_back({task, Stream::OnSurface, axis, kind});
    }
    for (const char* axis : {"x", "y"})
        for (int k = 1; k <= detail::max_imf(profile); ++k)
            for (const std::string& kind : detail::measure_kinds())
                out.push_back({task, Stream::OnSurface, std::string(axis) + "_imf" + std::to_string(k), kind});
    return out;
}

inline std::size_t registry_size(RegistryProfile profile = RegistryProfile::Full) {
    return registry(1, profile).size();
}

// ------------------------------------------------------------- extraction --

namespace detail {

struct StreamSeriesMap {
    std::map<std::string, const std::vector<double>*> series;
    const kin::StreamKinematics* kin = nullptr;
};

inline StreamSeriesMap series_map(const kin::StreamKinematics& k) {
    StreamSeriesMap m;
    m.kin = &k;
    m.series = {
        {"speed", &k.speed.v},   {"accel", &k.accel.v},   {"jerk", &k.jerk.v},
        {"vel_x", &k.vel_x.v},   {"vel_y", &k.vel_y.v},   {"acc_x", &k.acc_x.v},
        {"acc_y", &k.acc_y.v},   {"jerk_x", &k.jerk_x.v}, {"jerk_y", &k.jerk_y.v},
        {"pressure_rate", &k.pressure_rate.v},
    };
    return m;
}

inline const std::vector<double>* count_source(const kin::StreamKinematics& k, const std::string& base) {
    if (base == "ncv") return &k.speed.v;
    if (base == "nca") return &k.accel.v;
    if (base == "ncv_x") return &k.vel_x.v;
    if (base == "ncv_y") return &k.vel_y.v;
    if (base == "nca_x") return &k.acc_x.v;
    if (base == "nca_y") return &k.acc_y.v;
    throw ConfigError("unknown count base '" + base + "'");
}

struct AxisMeasures {
    std::vector<double> stream;
    std::optional<emd::ImfSet> imfs;
};

inline AxisMeasures axis_measures(const ink::Recording& rec, char axis) {
    AxisMeasures am;
    am.stream = kin::coordinate_stream(rec, /*on_surface=*/true, axis);
    if (am.stream.size() >= 4) am.imfs = emd::decompose(am.stream);
    return am;
}

inline std::optional<double> measure_value(const AxisMeasures& am, std::string_view kind, int imf_index) {
    std::span<const double> src;
    if (imf_index == 0) {
        if (am.stream.empty()) return std::nullopt;
        src = am.stream;
    } else {
        if (!am.imfs || am.imfs->count() < static_cast<std::size_t>(imf_index)) return std::nullopt;
        src = am.imfs->imfs[static_cast<std::size_t>(imf_index) - 1];
    }
    if (kind == "shannon") return measures::shannon_entropy_of(src);
    if (kind == "renyi2") return measures::renyi_entropy_of(src, 2);
    if (kind == "renyi3") return measures::renyi_entropy_of(src, 3);
    if (kind == "ce") return measures::conventional_energy(src);
    if (kind == "tke") {
        if (src.size() < 3) return std::nullopt;
        return measures::teager_kaiser_total(src);
    }
    // SNR variants need the decomposition regardless of imf_index.
    if (!am.imfs || am.imfs->count() < 1) return std::nullopt;
    if (kind == "snr_ce")
        return measures::energy_snr(am.stream, *am.imfs, measures::EnergyKind::Conventional).snr_db;
    if (kind == "snr_tke")
        return measures::energy_snr(am.stream, *am.imfs, measures::EnergyKind::TeagerKaiser).snr_db;
    if (kind == "snr_ice")
        return measures::intrinsic_energy_snr(*am.imfs, measures::EnergyKind::Conventional).snr_db;
    if (kind == "snr_itke")
        return measures::intrinsic_energy_snr(*am.imfs, measures::EnergyKind::TeagerKaiser).snr_db;
    throw ConfigError("unknown measure kind '" + std::string(kind) + "'");
}

}  // namespace detail

// Evaluates the registry for one recording.  Never throws on short or absent
// data; such features are simply missing.
inline std::vector<std::optional<double>> build_feature_vector(const ink::Recording& rec,
                                                               RegistryProfile profile = RegistryProfile::Full) {
    const std::vector<FeatureId> reg = registry(rec.task, profile);
    const kin::StreamKinematics on = kin::stream_kinematics(rec, true);
    const kin::StreamKinematics air = kin::stream_kinematics(rec, false);
    const detail::StreamSeriesMap on_map = detail::series_map(on);
    const detail::StreamSeriesMap air_map = detail::series_map(air);
    const detail::AxisMeasures ax = detail::axis_measures(rec, 'x');
    const detail::AxisMeasures ay = detail::axis_measures(rec, 'y');

    std::vector<std::optional<double>> out;
    out.reserve(reg.size());
    for (const FeatureId& id : reg) {
        const kin::StreamKinematics& k = (id.stream == Stream::InAir) ? air : on;
        const detail::StreamSeriesMap& sm = (id.stream == Stream::InAir) ? air_map : on_map;

        if (id.functional == "count" || id.functional == "rate") {
            const std::vector<double>* src = detail::count_source(k, id.base);
            if (src->empty()) {
                out.push_back(std::nullopt);
            } else if (id.functional == "count") {
                out.push_back(static_cast<double>(kin::count_direction_changes(*src)));
            } else if (k.duration_s > 0.0) {
                out.push_back(static_cast<double>(kin::count_direction_changes(*src)) / k.duration_s);
            } else {
                out.push_back(std::nullopt);
            }
            continue;
        }
        auto it = sm.series.find(id.base);
        if (it != sm.series.end()) {
            out.push_back(functional(*it->second, id.functional));
            continue;
        }
        // Entropy/energy measures on a coordinate axis or one of its IMFs.
        const bool is_imf = id.base.size() > 1;
        const char axis = id.base[0];
        const int imf_index = is_imf ? static_cast<int>(id.base.back() - '0') : 0;
        out.push_back(detail::measure_value(axis == 'x' ? ax : ay, id.functional, imf_index));
    }
    return out;
}

// ----------------------------------------------------------------- matrix --

struct FeatureMatrix {
    int task = 0;
    RegistryProfile profile = RegistryProfile::Full;
    std::map<std::string, std::string> annotations;  // provenance carried in the header
    std::vector<FeatureId> features;
    std::vector<std::string> subject_ids;
    std::vector<int> labels;  // ink::kLabelPd / ink::kLabelHc
    std::vector<char> sexes;
    std::vector<int> ages;
    std::vector<std::vector<std::optional<double>>> rows;

    std::size_t row_count() const { return rows.size(); }
    std::size_t feature_count() const { return features.size(); }
};

inline FeatureMatrix assemble_matrix(const ink::Dataset& ds, int task,
                                     RegistryProfile profile = RegistryProfile::Full) {
    FeatureMatrix m;
    m.task = task;
    m.profile = profile;
    m.features = registry(task, profile);
    for (const ink::Recording& rec : ds.recordings) {
        if (rec.task != task) continue;
        const ink::SubjectMeta& meta = ds.subject(rec.subject_id);
        m.subject_ids.push_back(meta.id);
        m.labels.push_back(meta.label);
        m.sexes.push_back(meta.sex);
        m.ages.push_back(meta.age);
        m.rows.push_back(build_feature_vector(rec, profile));
    }
    if (m.rows.empty())
        throw ValidationError("assemble_matrix: no recordings for task " + std::to_string(task));
    return m;
}

// Row-major dense block carved out of a matrix, with missing cells filled by
// the column median over the selected rows (0 when a column has no observed
// value at all) and a mask remembering which cells were imputed.
struct DenseBlock {
    std::size_t n = 0, d = 0;
    std::vector<double> data;
    std::vector<std::uint8_t> imputed;
    std::vector<double> medians;

    double at(std::size_t i, std::size_t j) const { return data[i * d + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
};

inline DenseBlock impute(const FeatureMatrix& m, std::span<const std::size_t> row_idx,
                         std::span<const std::size_t> col_idx) {
    DenseBlock b;
    b.n = row_idx.size();
    b.d = col_idx.size();
    b.data.assign(b.n * b.d, 0.0);
    b.imputed.assign(b.n * b.d, 0);
    b.medians.assign(b.d, 0.0);
    std::vector<double> seen;
    for (std::size_t j = 0; j < b.d; ++j) {
        const std::size_t col = col_idx[j];
        seen.clear();
        for (std::size_t i : row_idx) {
            const auto& cell = m.rows[i][col];
            if (cell) seen.push_back(*cell);
        }
        double med = 0.0;
        if (!seen.empty()) {
            std::sort(seen.begin(), seen.end());
            const std::size_t k = seen.size();
            med = (k % 2) ? seen[k / 2] : 0.5 * (seen[k / 2 - 1] + seen[k / 2]);
        }
        b.medians[j] = med;
        for (std::size_t i = 0; i < b.n; ++i) {
            const auto& cell = m.rows[row_idx[i]][col];
            if (cell) {
                b.data[i * b.d + j] = *cell;
            } else {
                b.data[i * b.d + j] = med;
                b.imputed[i * b.d + j] = 1;
            }
        }
    }
    return b;
}

inline std::vector<std::size_t> all_rows(const FeatureMatrix& m) {
    std::vector<std::size_t> idx(m.row_count());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

inline std::vector<std::size_t> all_columns(const FeatureMatrix& m) {
    std::vector<std::size_t> idx(m.feature_count());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

// ------------------------------------------------------------- matrix i/o --

// Tab-separated; header = id/label/sex/age + rendered feature keys; missing
// cells spelled NA.  Values round-trip exactly.
inline std::string serialize_matrix(const FeatureMatrix& m) {
    std::string out = "# pendown feature matrix v1\n# task " + std::to_string(m.task) +
                      " profile " + std::string(profile_name(m.profile)) + "\n";
    for (const auto& [key, value] : m.annotations) out += "# @" + key + " " + value + "\n";
    out += "id\tlabel\tsex\tage";
    for (const FeatureId& f : m.features) out += "\t" + f.render();
    out += "\n";
    for (std::size_t i = 0; i < m.row_count(); ++i) {
        out += m.subject_ids[i] + "\t" + ink::label_name(m.labels[i]) + "\t" +
               std::string(1, m.sexes[i]) + "\t" + std::to_string(m.ages[i]);
        for (const auto& cell : m.rows[i]) out += "\t" + (cell ? format_double(*cell) : std::string("NA"));
        out += "\n";
    }
    return out;
}

inline FeatureMatrix parse_matrix(std::string_view text, const std::string& source) {
    FeatureMatrix m;
    bool saw_header = false;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;
        const std::string where = ink::detail::at_line(source, lineno);

        if (!line.empty() && line[0] == '#') {
            // Profile note is advisory but keeps round-trips exact;
            // "@key value" comments are annotations and round-trip too.
            auto f = ink::detail::split_ws(line.substr(1));
            if (f.size() == 4 && f[0] == "task") {
                m.task = static_cast<int>(parse_long(f[1], where));
                m.profile = profile_from(f[3]);
            } else if (f.size() >= 2 && f[0].size() > 1 && f[0][0] == '@') {
                std::string value(f[1]);
                for (std::size_t i = 2; i < f.size(); ++i) value += " " + std::string(f[i]);
                m.annotations[std::string(f[0].substr(1))] = value;
            }
            continue;
        }
        auto f = ink::detail::split_ws(line);
        // Tabs are the delimiter but split_ws treats them as whitespace,
        // which is what we want; empty fields cannot occur (NA is explicit).
        if (f.empty()) continue;
        if (!saw_header) {
            if (f.size() < 5 || f[0] != "id" || f[1] != "label" || f[2] != "sex" || f[3] != "age")
                throw ParseError(where + ": bad matrix header");
            for (std::size_t i = 4; i < f.size(); ++i) m.features.push_back(parse_feature_id(f[i]));
            saw_header = true;
            continue;
        }
        if (f.size() != m.features.size() + 4)
            throw ParseError(where + ": expected " + std::to_string(m.features.size() + 4) + " fields");
        m.subject_ids.emplace_back(f[0]);
        m.labels.push_back(ink::label_code(f[1]));
        if (f[2].size() != 1 || (f[2][0] != 'M' && f[2][0] != 'F'))
            throw ParseError(where + ": sex must be M or F");
        m.sexes.push_back(f[2][0]);
        m.ages.push_back(static_cast<int>(parse_long(f[3], where)));
        std::vector<std::optional<double>> row;
        row.reserve(m.features.size());
        for (std::size_t i = 4; i < f.size(); ++i) {
            if (f[i] == "NA")
                row.emplace_back(std::nullopt);
            else
                row.emplace_back(parse_double(f[i], where));
        }
        m.rows.push_back(std::move(row));
    }
    if (!saw_header) throw ParseError(source + ": empty matrix file");
    if (m.task == 0 && !m.features.empty()) m.task = m.features.front().task;
    return m;
}

}  // namespace pendown::feat
