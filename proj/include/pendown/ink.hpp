#pragma once

// pendown/ink.hpp
//
// Digitizer ink: the sample/stroke/recording data model, the recording file
// format, stroke segmentation, the dataset manifest, and dataset loading.
//
// Recording files are plain text: one sample per line, seven
// whitespace-separated numeric columns, '#' starts a comment.  The column
// order is declared by the manifest, which also declares the timestamp unit;
// timestamps are converted to seconds at parse time so everything downstream
// works in seconds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pendown/common.hpp"

namespace pendown::ink {

// -------------------------------------------------------------- data model

struct SamplePoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;  // seconds
    int button = 0;  // 1 = pen on surface, 0 = in air
    double pressure = 0.0;
    double tilt = 0.0;       // carried, not interpreted
    double elevation = 0.0;  // carried, not interpreted
};

// Half-open sample range [begin, end) of constant pen state.
struct Stroke {
    bool on_surface = false;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

constexpr int kLabelPd = +1;
constexpr int kLabelHc = -1;

struct SubjectMeta {
    std::string id;
    int age = 0;
    char sex = '?';  // 'M' or 'F'
    int label = 0;   // kLabelPd / kLabelHc
    std::optional<double> updrs;
};

struct Recording {
    std::string subject_id;
    int task = 0;  // 1..7
    std::vector<SamplePoint> samples;
    std::vector<Stroke> strokes;
};

inline std::string label_name(int label) {
    if (label == kLabelPd) return "PD";
    if (label == kLabelHc) return "HC";
    throw ValidationError("label_name: unknown label code");
}

inline int label_code(std::string_view name) {
    if (name == "PD") return kLabelPd;
    if (name == "HC") return kLabelHc;
    throw ParseError("unknown label '" + std::string(name) + "' (want PD or HC)");
}

// ------------------------------------------------------------ column order

// Position of each channel within a sample line.  Must be a permutation of
// 0..6; the default matches the order this library writes.
struct ColumnMap {
    int x = 0;
    int y = 1;
    int t = 2;
    int button = 3;
    int pressure = 4;
    int tilt = 5;
    int elevation = 6;

    void validate() const {
        const int idx[7] = {x, y, t, button, pressure, tilt, elevation};
        bool seen[7] = {};
        for (int i : idx) {
            if (i < 0 || i > 6 || seen[i])
                throw ValidationError("ColumnMap: channel positions must be a permutation of 0..6");
            seen[i] = true;
        }
    }
};

struct TimeSpec {
    enum class Unit { Seconds, Ticks };
    Unit unit = Unit::Ticks;          // raw device ticks unless declared otherwise
    double tick_seconds = 0.0;        // required when unit == Ticks

    double to_seconds(double raw) const {
        if (unit == Unit::Seconds) return raw;
        return raw * tick_seconds;
    }

    void validate() const {
        if (unit == Unit::Ticks && !(tick_seconds > 0.0))
            throw ConfigError("TimeSpec: tick_seconds must be declared positive for tick timestamps");
    }
};

// ------------------------------------------------------------ segmentation

// Maximal runs of constant pen state, in order.  Covers every sample exactly
// once; applying it to an already-segmented recording yields the same cuts.
inline std::vector<Stroke> segment_strokes(const std::vector<SamplePoint>& samples) {
    std::vector<Stroke> strokes;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= samples.size(); ++i) {
        if (i == samples.size() || samples[i].button != samples[begin].button) {
            strokes.push_back(Stroke{samples[begin].button == 1, begin, i});
            begin = i;
        }
    }
    return strokes;
}

// ----------------------------------------------------------------- parsing

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string at_line(const std::string& source, std::size_t lineno) {
    return source + ":" + std::to_string(lineno);
}

}  // namespace detail

// Parses one recording body.  `header_lines` leading non-comment lines are
// skipped (some device exports prepend a sample count).  Subject id and task
// are the caller's business.
inline Recording parse_recording(std::string_view text, const ColumnMap& columns,
                                 const TimeSpec& time, const std::string& source,
                                 int header_lines = 0) {
    columns.validate();
    time.validate();

    Recording rec;
    std::size_t lineno = 0;
    int to_skip = header_lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;

        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        if (to_skip > 0) {
            --to_skip;
            continue;
        }
        if (fields.size() != 7)
            throw ParseError(detail::at_line(source, lineno) + ": expected 7 columns, got " +
                             std::to_string(fields.size()));

        double raw[7];
        for (std::size_t i = 0; i < 7; ++i) {
            raw[i] = parse_double(fields[i], detail::at_line(source, lineno));
            if (!std::isfinite(raw[i]))
                throw ParseError(detail::at_line(source, lineno) + ": non-finite value");
        }

        SamplePoint p;
        p.x = raw[columns.x];
        p.y = raw[columns.y];
        p.t = time.to_seconds(raw[columns.t]);
        p.pressure = raw[columns.pressure];
        p.tilt = raw[columns.tilt];
        p.elevation = raw[columns.elevation];
        const double b = raw[columns.button];
        if (b != 0.0 && b != 1.0)
            throw ParseError(detail::at_line(source, lineno) + ": button must be 0 or 1");
        p.button = static_cast<int>(b);
        if (p.pressure < 0.0)
            throw ParseError(detail::at_line(source, lineno) + ": negative pressure");
        if (!rec.samples.empty() && !(p.t > rec.samples.back().t))
            throw ParseError(detail::at_line(source, lineno) + ": timestamps must be strictly increasing");
        rec.samples.push_back(p);
    }

    if (rec.samples.empty()) throw ParseError(source + ": no samples");
    rec.strokes = segment_strokes(rec.samples);
    return rec;
}

// Writes timestamps in seconds, in the given column order.  parse_recording
// with the same column map and a seconds TimeSpec restores the recording
// bit-for-bit (shortest round-trip double formatting).
inline std::string serialize_recording(const Recording& rec, const ColumnMap& columns = {}) {
    columns.validate();
    std::string out;
    out.reserve(rec.samples.size() * 48);
    for (const SamplePoint& p : rec.samples) {
        std::string field[7];
        field[static_cast<std::size_t>(columns.x)] = format_double(p.x);
        field[static_cast<std::size_t>(columns.y)] = format_double(p.y);
        field[static_cast<std::size_t>(columns.t)] = format_double(p.t);
        field[static_cast<std::size_t>(columns.button)] = std::to_string(p.button);
        field[static_cast<std::size_t>(columns.pressure)] = format_double(p.pressure);
        field[static_cast<std::size_t>(columns.tilt)] = format_double(p.tilt);
        field[static_cast<std::size_t>(columns.elevation)] = format_double(p.elevation);
        for (std::size_t i = 0; i < 7; ++i) {
            if (i) out += ' ';
            out += field[i];
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------- manifest

// Plain-text dataset manifest.  Example:
//
//   version 1
//   columns x y t button pressure tilt elevation
//   time_unit seconds
//   header_lines 0
//   base_dir recordings
//   subject S001 age 67 sex F label PD updrs 2.5
//   task 1 S001_t1.txt
//   subject S002 age 54 sex M label HC
//   task 1 S002_t1.txt
//
// `time_unit ticks` requires a `tick_seconds <dt>` line.  Paths are relative
// to the manifest's directory joined with base_dir.
struct ManifestEntry {
    std::string subject_id;
    int task = 0;
    std::string path;
};

struct Manifest {
    ColumnMap columns;
    TimeSpec time;
    int header_lines = 0;
    std::string base_dir;
    std::vector<SubjectMeta> subjects;
    std::vector<ManifestEntry> entries;

    const SubjectMeta& subject(const std::string& id) const {
        for (const auto& s : subjects)
            if (s.id == id) return s;
        throw ValidationError("manifest: unknown subject '" + id + "'");
    }
};

inline Manifest parse_manifest(std::string_view text, const std::string& source) {
    Manifest m;
    bool saw_version = false;
    bool saw_columns = false;
    bool saw_time_unit = false;
    bool saw_tick_seconds = false;
    std::set<std::string> subject_ids;
    std::set<std::pair<std::string, int>> entry_keys;

    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;

        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        auto f = detail::split_ws(line);
        if (f.empty()) continue;
        const std::string where = detail::at_line(source, lineno);
        const std::string_view key = f[0];

        if (key == "version") {
            if (f.size() != 2 || f[1] != "1") throw ParseError(where + ": unsupported manifest version");
            saw_version = true;
        } else if (key == "columns") {
            if (f.size() != 8) throw ParseError(where + ": columns wants 7 channel names");
            std::map<std::string_view, int> at;
            for (int i = 0; i < 7; ++i) {
                if (!at.emplace(f[static_cast<std::size_t>(i) + 1], i).second)
                    throw ParseError(where + ": duplicate channel in columns");
            }
            auto need = [&](std::string_view name) {
                auto it = at.find(name);
                if (it == at.end()) throw ParseError(where + ": columns missing channel '" + std::string(name) + "'");
                return it->second;
            };
            m.columns.x = need("x");
            m.columns.y = need("y");
            m.columns.t = need("t");
            m.columns.button = need("button");
            m.columns.pressure = need("pressure");
            m.columns.tilt = need("tilt");
            m.columns.elevation = need("elevation");
            saw_columns = true;
        } else if (key == "time_unit") {
            if (f.size() != 2) throw ParseError(where + ": time_unit wants one value");
            if (f[1] == "seconds")
                m.time.unit = TimeSpec::Unit::Seconds;
            else if (f[1] == "ticks")
                m.time.unit = TimeSpec::Unit::Ticks;
            else
                throw ParseError(where + ": time_unit must be seconds or ticks");
            saw_time_unit = true;
        } else if (key == "tick_seconds") {
            if (f.size() != 2) throw ParseError(where + ": tick_seconds wants one value");
            m.time.tick_seconds = parse_double(f[1], where);
            saw_tick_seconds = true;
        } else if (key == "header_lines") {
            if (f.size() != 2) throw ParseError(where + ": header_lines wants one value");
            m.header_lines = static_cast<int>(parse_long(f[1], where));
            if (m.header_lines < 0) throw ParseError(where + ": header_lines must be >= 0");
        } else if (key == "base_dir") {
            if (f.size() != 2) throw ParseError(where + ": base_dir wants one value");
            m.base_dir = std::string(f[1]);
        } else if (key == "subject") {
            // subject <id> age <n> sex <M|F> label <PD|HC> [updrs <x>]
            if (f.size() != 8 && f.size() != 10) throw ParseError(where + ": malformed subject line");
            SubjectMeta s;
            s.id = std::string(f[1]);
            std::map<std::string_view, std::string_view> kv;
            for (std::size_t i = 2; i + 1 < f.size(); i += 2) kv[f[i]] = f[i + 1];
            if (!kv.count("age") || !kv.count("sex") || !kv.count("label"))
                throw ParseError(where + ": subject wants age, sex and label");
            s.age = static_cast<int>(parse_long(kv["age"], where));
            if (s.age <= 0 || s.age > 130) throw ParseError(where + ": implausible age");
            if (kv["sex"] == "M")
                s.sex = 'M';
            else if (kv["sex"] == "F")
                s.sex = 'F';
            else
                throw ParseError(where + ": sex must be M or F");
            s.label = label_code(kv["label"]);
            if (kv.count("updrs")) s.updrs = parse_double(kv["updrs"], where);
            if (!subject_ids.insert(s.id).second)
                throw ParseError(where + ": duplicate subject '" + s.id + "'");
            m.subjects.push_back(std::move(s));
        } else if (key == "task") {
            if (f.size() != 3) throw ParseError(where + ": task wants <number> <path>");
            if (m.subjects.empty()) throw ParseError(where + ": task line before any subject");
            ManifestEntry e;
            e.subject_id = m.subjects.back().id;
            e.task = static_cast<int>(parse_long(f[1], where));
            if (e.task < 1 || e.task > 7) throw ParseError(where + ": task must be 1..7");
            e.path = std::string(f[2]);
            if (!entry_keys.emplace(e.subject_id, e.task).second)
                throw ParseError(where + ": duplicate task " + std::to_string(e.task) +
                                 " for subject '" + e.subject_id + "'");
            m.entries.push_back(std::move(e));
        } else {
            throw ParseError(where + ": unknown manifest key '" + std::string(key) + "'");
        }
    }

    if (!saw_version) throw ParseError(source + ": missing version line");
    if (!saw_columns) throw ParseError(source + ": missing columns line");
    if (m.time.unit == TimeSpec::Unit::Ticks) {
        if (!saw_tick_seconds)
            throw ParseError(source + ": tick timestamps need a tick_seconds line" +
                             std::string(saw_time_unit ? "" : " (time_unit defaults to ticks)"));
        m.time.validate();
    }
    return m;
}

inline std::string serialize_manifest(const Manifest& m) {
    std::string out = "version 1\n";
    const ColumnMap& c = m.columns;
    std::string names[7];
    names[static_cast<std::size_t>(c.x)] = "x";
    names[static_cast<std::size_t>(c.y)] = "y";
    names[static_cast<std::size_t>(c.t)] = "t";
    names[static_cast<std::size_t>(c.button)] = "button";
    names[static_cast<std::size_t>(c.pressure)] = "pressure";
    names[static_cast<std::size_t>(c.tilt)] = "tilt";
    names[static_cast<std::size_t>(c.elevation)] = "elevation";
    out += "columns";
    for (const auto& n : names) out += " " + n;
    out += "\n";
    if (m.time.unit == TimeSpec::Unit::Seconds) {
        out += "time_unit seconds\n";
    } else {
        out += "time_unit ticks\ntick_seconds " + format_double(m.time.tick_seconds) + "\n";
    }
    if (m.header_lines != 0) out += "header_lines " + std::to_string(m.header_lines) + "\n";
    if (!m.base_dir.empty()) out += "base_dir " + m.base_dir + "\n";
    for (const SubjectMeta& s : m.subjects) {
        out += "subject " + s.id + " age " + std::to_string(s.age) + " sex " + std::string(1, s.sex) +
               " label " + label_name(s.label);
        if (s.updrs) out += " updrs " + format_double(*s.updrs);
        out += "\n";
        for (const ManifestEntry& e : m.entries) {
            if (e.subject_id != s.id) continue;
            out += "task " + std::to_string(e.task) + " " + e.path + "\n";
        }
    }
    return out;
}

// ----------------------------------------------------------------- dataset

struct Dataset {
    std::vector<SubjectMeta> subjects;   // sorted by id
    std::vector<Recording> recordings;   // sorted by (subject id, task)

    std::size_t count_label(int label) const {
        std::size_t n = 0;
        for (const auto& s : subjects) n += (s.label == label) ? 1 : 0;
        return n;
    }

    const SubjectMeta& subject(const std::string& id) const {
        auto it = std::lower_bound(subjects.begin(), subjects.end(), id,
                                   [](const SubjectMeta& s, const std::string& v) { return s.id < v; });
        if (it == subjects.end() || it->id != id)
            throw ValidationError("dataset: unknown subject '" + id + "'");
        return *it;
    }
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("cannot read " + path.string());
    return std::move(ss).str();
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const std::string text = read_file(manifest_path);
    Manifest m = parse_manifest(text, manifest_path.string());

    Dataset ds;
    ds.subjects = m.subjects;
    std::sort(ds.subjects.begin(), ds.subjects.end(),
              [](const SubjectMeta& a, const SubjectMeta& b) { return a.id < b.id; });

    std::filesystem::path root = manifest_path.parent_path();
    if (!m.base_dir.empty()) root /= m.base_dir;

    std::vector<ManifestEntry> entries = m.entries;
    std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        return std::tie(a.subject_id, a.task) < std::tie(b.subject_id, b.task);
    });

    for (const ManifestEntry& e : entries) {
        const std::filesystem::path p = root / e.path;
        const std::string context = "subject " + e.subject_id + " task " + std::to_string(e.task);
        try {
            Recording rec = parse_recording(read_file(p), m.columns, m.time, p.string(), m.header_lines);
            rec.subject_id = e.subject_id;
            rec.task = e.task;
            ds.recordings.push_back(std::move(rec));
        } catch (const Error& err) {
            throw ParseError(context + ": " + err.what());
        }
    }
    return ds;
}

}  // namespace pendown::ink
