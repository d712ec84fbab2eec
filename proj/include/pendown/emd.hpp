#pragma once

// pendown/emd.hpp
//
// Empirical mode decomposition.  sift() peels one intrinsic mode function
// off a signal by repeatedly subtracting the mean of the upper/lower extrema
// envelopes; decompose() iterates until the leftover has fewer than two
// maxima or two minima, which makes it the residual by definition.  The
// residual is whatever is left after subtracting every IMF, so the
// reconstruction identity  signal == sum(imfs) + residual  holds to float
// round-off by construction.
//
// Envelopes are natural cubic splines through the extrema.  To keep the ends
// from whipping, the two extrema nearest each end are mirrored across it
// before fitting; with exactly two extrema the envelope degenerates to the
// line through them.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pendown/common.hpp"

namespace pendown::emd {

constexpr int kMaxImfs = 10;
constexpr int kMaxSiftIterations = 10;
constexpr double kCauchyThreshold = 0.2;

struct Extrema {
    std::vector<std::size_t> maxima;
    std::vector<std::size_t> minima;
};

// Strict interior extrema.  A flat run that rises into and falls out of a
// plateau counts as one maximum at the plateau's midpoint index (and the
// mirror case as one minimum).  Endpoints are never extrema.
inline Extrema find_extrema(std::span<const double> s) {
    Extrema ex;
    const std::size_t n = s.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (s[i] == s[i - 1]) {
            ++i;
            continue;
        }
        // s[i] != s[i-1]; find the plateau [i, j] of equal values.
        std::size_t j = i;
        while (j + 1 < n && s[j + 1] == s[j]) ++j;
        if (j + 1 >= n) break;  // plateau runs into the right edge
        const bool rise_in = s[i] > s[i - 1];
        const bool fall_out = s[j] > s[j + 1];
        if (rise_in && fall_out)
            ex.maxima.push_back(i + (j - i) / 2);
        else if (!rise_in && !fall_out)
            ex.minima.push_back(i + (j - i) / 2);
        i = j + 1;
    }
    return ex;
}

namespace detail {

// Natural cubic spline on strictly increasing knots; evaluated via the
// standard second-derivative (M) form, tridiagonal system solved in place.
struct CubicSpline {
    std::vector<double> x, y, m;

    CubicSpline(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
        const std::size_t k = x.size();
        m.assign(k, 0.0);
        if (k < 3) return;  // natural spline through 2 points is the chord
        std::vector<double> diag(k, 0.0), rhs(k, 0.0), upper(k, 0.0);
        for (std::size_t i = 1; i + 1 < k; ++i) {
            const double h0 = x[i] - x[i - 1];
            const double h1 = x[i + 1] - x[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        // Thomas algorithm over the interior unknowns; m[0] = m[k-1] = 0.
        for (std::size_t i = 2; i + 1 < k; ++i) {
            const double w = (x[i] - x[i - 1]) / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = k - 2; i >= 1; --i) {
            m[i] = (rhs[i] - upper[i] * (i + 2 < k ? m[i + 1] : 0.0)) / diag[i];
            if (i == 1) break;
        }
    }

    double eval(double xv) const {
        const std::size_t k = x.size();
        if (k == 2) {
            const double slope = (y[1] - y[0]) / (x[1] - x[0]);
            return y[0] + slope * (xv - x[0]);
        }
        std::size_t lo = 0, hi = k - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (x[mid] <= xv)
                lo = mid;
            else
                hi = mid;
        }
        const double h = x[hi] - x[lo];
        const double t = xv - x[lo];
        const double b = (y[hi] - y[lo]) / h - h * (2.0 * m[lo] + m[hi]) / 6.0;
        const double c = m[lo] / 2.0;
        const double d = (m[hi] - m[lo]) / (6.0 * h);
        return y[lo] + t * (b + t * (c + t * d));
    }
};

}  // namespace detail

// Envelope through the given extrema of s, sampled at every index.  With
// three or more extrema the two nearest each end are mirrored across the
// signal ends before the natural-spline fit; with exactly two the envelope
// is the straight line through them.
inline std::vector<double> envelope(std::span<const double> s, std::span<const std::size_t> extrema) {
    const std::size_t n = s.size();
    const std::size_t m = extrema.size();
    if (m < 2) throw ValidationError("envelope: need at least 2 extrema");

    std::vector<double> kx, ky;
    if (m >= 3) {
        const double last = static_cast<double>(n - 1);
        kx.push_back(-static_cast<double>(extrema[1]));
        ky.push_back(s[extrema[1]]);
        kx.push_back(-static_cast<double>(extrema[0]));
        ky.push_back(s[extrema[0]]);
        for (std::size_t idx : extrema) {
            kx.push_back(static_cast<double>(idx));
            ky.push_back(s[idx]);
        }
        kx.push_back(2.0 * last - static_cast<double>(extrema[m - 1]));
        ky.push_back(s[extrema[m - 1]]);
        kx.push_back(2.0 * last - static_cast<double>(extrema[m - 2]));
        ky.push_back(s[extrema[m - 2]]);
    } else {
        for (std::size_t idx : extrema) {
            kx.push_back(static_cast<double>(idx));
            ky.push_back(s[idx]);
        }
    }

    detail::CubicSpline spline(std::move(kx), std::move(ky));
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = spline.eval(static_cast<double>(i));
    return env;
}

inline bool is_residual(std::span<const double> s) {
    const Extrema ex = find_extrema(s);
    return ex.maxima.size() < 2 || ex.minima.size() < 2;
}

enum class SiftStop {
    Cauchy,            // successive-iterate criterion fired
    MaxIterations,     // iteration cap reached
    ExtremaExhausted,  // envelopes became undefined mid-sift
    Residual,          // input was already a residual; no IMF produced
};

struct SiftResult {
    std::vector<double> imf;
    SiftStop stop = SiftStop::Residual;
    int iterations = 0;
};

// One IMF.  h_{k+1} = h_k - mean(upper, lower); stop when
// sum((h_k - h_{k+1})^2) / sum(h_k^2) < threshold or after max_iter passes.
inline SiftResult sift(std::span<const double> s, int max_iter = kMaxSiftIterations,
                       double threshold = kCauchyThreshold) {
    SiftResult r;
    r.imf.assign(s.begin(), s.end());
    for (int iter = 1; iter <= max_iter; ++iter) {
        const Extrema ex = find_extrema(r.imf);
        if (ex.maxima.size() < 2 || ex.minima.size() < 2) {
            r.stop = (iter == 1) ? SiftStop::Residual : SiftStop::ExtremaExhausted;
            r.iterations = iter - 1;
            return r;
        }
        const std::vector<double> upper = envelope(r.imf, ex.maxima);
        const std::vector<double> lower = envelope(r.imf, ex.minima);

        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < r.imf.size(); ++i) {
            const double m = 0.5 * (upper[i] + lower[i]);
            num += m * m;  // (h_prev - h_next) == envelope mean
            den += r.imf[i] * r.imf[i];
            r.imf[i] -= m;
        }
        r.iterations = iter;
        if (den == 0.0 || num / den < threshold) {
            r.stop = SiftStop::Cauchy;
            return r;
        }
    }
    r.stop = SiftStop::MaxIterations;
    return r;
}

struct ImfSet {
    std::vector<std::vector<double>> imfs;  // fastest oscillation first
    std::vector<double> residual;

    std::size_t count() const { return imfs.size(); }
};

inline ImfSet decompose(std::span<const double> s, int max_imfs = kMaxImfs,
                        int max_sift_iter = kMaxSiftIterations, double threshold = kCauchyThreshold) {
    if (s.size() < 4) throw ValidationError("decompose: need at least 4 samples");
    for (double v : s)
        if (!std::isfinite(v)) throw ValidationError("decompose: non-finite sample");

    ImfSet out;
    std::vector<double> rem(s.begin(), s.end());
    while (static_cast<int>(out.imfs.size()) < max_imfs && !is_residual(rem)) {
        SiftResult sr = sift(rem, max_sift_iter, threshold);
        for (std::size_t i = 0; i < rem.size(); ++i) rem[i] -= sr.imf[i];
        out.imfs.push_back(std::move(sr.imf));
    }
    out.residual = std::move(rem);
    return out;
}

// Sign flips of the values themselves (exact zeros skipped); IMF ordering
// checks use this as an oscillation-rate proxy.
inline int zero_crossing_count(std::span<const double> s) {
    int count = 0;
    int last = 0;
    for (double v : s) {
        if (v == 0.0) continue;
        const int sign = v > 0.0 ? 1 : -1;
        if (last != 0 && sign != last) ++count;
        last = sign;
    }
    return count;
}

}  // namespace pendown::emd
