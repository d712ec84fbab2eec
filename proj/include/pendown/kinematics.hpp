#pragma once

// pendown/kinematics.hpp
//
// Kinematic series derived from ink.  Derivatives are forward differences on
// the (possibly nonuniform) timestamps, stamped at interval midpoints.  All
// differencing happens inside a stroke; per-stream series are concatenations
// of per-stroke chains, so no difference ever spans a pen-up/pen-down cut.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/ink.hpp"

namespace pendown::kin {

// Values on timestamps; both strictly parallel.
struct ChannelSeries {
    std::vector<double> t;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
};

inline void check_series(const ChannelSeries& s, const char* what) {
    if (s.t.size() != s.v.size()) throw ValidationError(std::string(what) + ": t/v size mismatch");
    for (std::size_t i = 1; i < s.t.size(); ++i)
        if (!(s.t[i] > s.t[i - 1]))
            throw ValidationError(std::string(what) + ": timestamps must be strictly increasing");
}

// d[i] = (v[i+1] - v[i]) / (t[i+1] - t[i]) at t = (t[i] + t[i+1]) / 2.
inline ChannelSeries derivative(const ChannelSeries& s) {
    check_series(s, "derivative");
    if (s.size() < 2) throw ValidationError("derivative: need at least 2 samples");
    ChannelSeries d;
    d.t.resize(s.size() - 1);
    d.v.resize(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        d.v[i] = (s.v[i + 1] - s.v[i]) / (s.t[i + 1] - s.t[i]);
        d.t[i] = 0.5 * (s.t[i] + s.t[i + 1]);
    }
    return d;
}

// Pointwise sqrt(vx^2 + vy^2); inputs must share timestamps exactly.
inline ChannelSeries trajectory_speed(const ChannelSeries& vx, const ChannelSeries& vy) {
    check_series(vx, "trajectory_speed");
    check_series(vy, "trajectory_speed");
    if (vx.t != vy.t) throw ValidationError("trajectory_speed: component series not aligned");
    ChannelSeries sp;
    sp.t = vx.t;
    sp.v.resize(vx.size());
    for (std::size_t i = 0; i < vx.size(); ++i) sp.v[i] = std::hypot(vx.v[i], vy.v[i]);
    return sp;
}

// Sign changes of the first difference, with exact zeros skipped: a zero
// between a rise and a fall still counts as one change.
inline int count_direction_changes(std::span<const double> v) {
    int changes = 0;
    int last = 0;  // -1, 0, +1; 0 = nothing seen yet
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        if (d == 0.0) continue;
        const int s = d > 0.0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

struct DirectionCounts {
    int ncv = 0;        // direction changes of the velocity series
    int nca = 0;        // direction changes of the acceleration series
    double rel_ncv = 0; // per second
    double rel_nca = 0; // per second
};

inline DirectionCounts direction_counts(std::span<const double> vel, std::span<const double> acc,
                                        double duration_s) {
    if (!(duration_s > 0.0)) throw ValidationError("direction_counts: duration must be positive");
    DirectionCounts c;
    c.ncv = count_direction_changes(vel);
    c.nca = count_direction_changes(acc);
    c.rel_ncv = static_cast<double>(c.ncv) / duration_s;
    c.rel_nca = static_cast<double>(c.nca) / duration_s;
    return c;
}

// ------------------------------------------------------- per-stream chains

// Everything derivable from one pen state (on-surface or in-air) of one
// recording.  A series is empty when no stroke is long enough for it.
struct StreamKinematics {
    ChannelSeries vel_x, vel_y, speed;      // strokes with >= 2 samples
    ChannelSeries acc_x, acc_y, accel;      // >= 3
    ChannelSeries jerk_x, jerk_y, jerk;     // >= 4
    ChannelSeries pressure_rate;            // on-surface only, >= 2
    double duration_s = 0.0;                // summed stroke spans
    std::size_t sample_count = 0;
};

namespace detail {

inline void append(ChannelSeries& dst, const ChannelSeries& src) {
    dst.t.insert(dst.t.end(), src.t.begin(), src.t.end());
    dst.v.insert(dst.v.end(), src.v.begin(), src.v.end());
}

}  // namespace detail

inline StreamKinematics stream_kinematics(const ink::Recording& rec, bool on_surface) {
    StreamKinematics out;
    for (const ink::Stroke& st : rec.strokes) {
        if (st.on_surface != on_surface) continue;
        const std::size_t n = st.size();
        out.sample_count += n;
        if (n >= 1)
            out.duration_s += rec.samples[st.end - 1].t - rec.samples[st.begin].t;
        if (n < 2) continue;

        ChannelSeries x, y, p;
        x.t.reserve(n);
        for (std::size_t i = st.begin; i < st.end; ++i) {
            const ink::SamplePoint& s = rec.samples[i];
            x.t.push_back(s.t);
            x.v.push_back(s.x);
            y.v.push_back(s.y);
            p.v.push_back(s.pressure);
        }
        y.t = x.t;
        p.t = x.t;

        const ChannelSeries vx = derivative(x);
        const ChannelSeries vy = derivative(y);
        const ChannelSeries sp = trajectory_speed(vx, vy);
        detail::append(out.vel_x, vx);
        detail::append(out.vel_y, vy);
        detail::append(out.speed, sp);
        if (on_surface) detail::append(out.pressure_rate, derivative(p));

        if (n >= 3) {
            const ChannelSeries ax = derivative(vx);
            const ChannelSeries ay = derivative(vy);
            const ChannelSeries ac = derivative(sp);
            detail::append(out.acc_x, ax);
            detail::append(out.acc_y, ay);
            detail::append(out.accel, ac);
            if (n >= 4) {
                detail::append(out.jerk_x, derivative(ax));
                detail::append(out.jerk_y, derivative(ay));
                detail::append(out.jerk, derivative(ac));
            }
        }
    }
    return out;
}

// Concatenated per-stroke coordinate stream (index-based; EMD and the
// entropy/energy measures operate on sample order, not wall time).
inline std::vector<double> coordinate_stream(const ink::Recording& rec, bool on_surface, char axis) {
    std::vector<double> v;
    for (const ink::Stroke& st : rec.strokes) {
        if (st.on_surface != on_surface) continue;
        for (std::size_t i = st.begin; i < st.end; ++i)
            v.push_back(axis == 'x' ? rec.samples[i].x : rec.samples[i].y);
    }
    return v;
}

}  // namespace pendown::kin
