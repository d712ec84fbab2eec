#pragma once

// Small deterministic fixtures shared across test files.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/features.hpp"
#include "pendown/ink.hpp"

namespace fixtures {

// A two-stroke recording (on-surface, then in-air) with smooth sinusoidal
// channels; enough samples for every feature battery to be defined.
inline pendown::ink::Recording make_recording(const std::string& subject, int task,
                                              std::size_t samples_per_stroke = 120,
                                              double amplitude = 1.0) {
    pendown::ink::Recording rec;
    rec.subject_id = subject;
    rec.task = task;
    const std::size_t n = 2 * samples_per_stroke;
    for (std::size_t i = 0; i < n; ++i) {
        pendown::ink::SamplePoint p;
        const double t = static_cast<double>(i) / 100.0;
        p.t = t;
        p.x = amplitude * std::sin(2.0 * 3.14159265358979 * 1.3 * t) + 0.2 * t;
        p.y = amplitude * std::cos(2.0 * 3.14159265358979 * 0.9 * t);
        p.button = i < samples_per_stroke ? 1 : 0;
        p.pressure = p.button == 1 ? 400.0 + 50.0 * std::sin(t) : 0.0;
        p.tilt = 30.0 + std::sin(0.5 * t);
        p.elevation = 55.0 + std::cos(0.4 * t);
        rec.samples.push_back(p);
    }
    rec.strokes = pendown::ink::segment_strokes(rec.samples);
    return rec;
}

// A dense hand-filled feature matrix: `per_label` PD then `per_label` HC
// rows, d columns named f0..f(d-1).  PD rows get +shift on column 0 so the
// first feature separates the classes; remaining columns are low-variance
// noise from the seeded generator.
inline pendown::feat::FeatureMatrix make_matrix(std::size_t per_label, std::size_t d,
                                                double shift = 3.0, std::uint64_t seed = 7) {
    pendown::feat::FeatureMatrix m;
    m.task = 1;
    m.profile = pendown::feat::RegistryProfile::Compact;
    for (std::size_t j = 0; j < d; ++j) {
        pendown::feat::FeatureId id;
        id.task = 1;
        id.stream = pendown::feat::Stream::Global;
        id.base = "f" + std::to_string(j);
        id.functional = "mean";
        m.features.push_back(id);
    }
    pendown::Rng rng(seed);
    for (std::size_t i = 0; i < 2 * per_label; ++i) {
        const bool pd = i < per_label;
        m.subject_ids.push_back((pd ? "pd" : "hc") + std::to_string(i));
        m.labels.push_back(pd ? pendown::ink::kLabelPd : pendown::ink::kLabelHc);
        m.sexes.push_back(i % 2 == 0 ? 'M' : 'F');
        m.ages.push_back(static_cast<int>(45 + (i * 7) % 40));
        std::vector<std::optional<double>> row;
        for (std::size_t j = 0; j < d; ++j) {
            double v = rng.normal();
            if (j == 0 && pd) v += shift;
            row.push_back(v);
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace fixtures
