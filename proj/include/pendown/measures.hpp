#pragma once

// pendown/measures.hpp
//
// Entropic and energetic signal measures.  Entropies are computed from a
// 16-bin equal-width histogram spanning the sample min..max, in bits.
// Energies come in two flavours: conventional (sum of squares) and
// Teager-Kaiser (sum of the TK operator over interior samples).  SNR splits
// a signal into IMF-1 (noise estimate) and the rest (signal estimate).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/emd.hpp"

namespace pendown::measures {

constexpr int kDefaultBins = 16;
constexpr double kSnrCapDb = 300.0;

struct HistogramEstimate {
    std::vector<double> p;  // bin probabilities, sums to 1
    double lo = 0.0;
    double hi = 0.0;

    int bins() const { return static_cast<int>(p.size()); }
};

inline HistogramEstimate histogram(std::span<const double> s, int bins = kDefaultBins) {
    if (s.empty()) throw ValidationError("histogram: empty input");
    if (bins < 1) throw ConfigError("histogram: bins must be positive");
    HistogramEstimate h;
    h.p.assign(static_cast<std::size_t>(bins), 0.0);
    h.lo = s[0];
    h.hi = s[0];
    for (double v : s) {
        if (!std::isfinite(v)) throw ValidationError("histogram: non-finite sample");
        h.lo = std::min(h.lo, v);
        h.hi = std::max(h.hi, v);
    }
    const double span = h.hi - h.lo;
    const double w = 1.0 / static_cast<double>(s.size());
    for (double v : s) {
        std::size_t idx = 0;
        if (span > 0.0) {
            idx = static_cast<std::size_t>((v - h.lo) / span * bins);
            if (idx >= static_cast<std::size_t>(bins)) idx = static_cast<std::size_t>(bins) - 1;
        }
        h.p[idx] += w;
    }
    return h;
}

// -Sum p log2 p over occupied bins.  A single-valued sample lands in one bin
// and scores 0 bits.
inline double shannon_entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

inline double shannon_entropy(const HistogramEstimate& h) { return shannon_entropy(h.p); }

inline double shannon_entropy_of(std::span<const double> s, int bins = kDefaultBins) {
    return shannon_entropy(histogram(s, bins));
}

// Renyi entropy of integer order 2 or 3: (1 / (1 - a)) * log2(sum p^a).
inline double renyi_entropy(std::span<const double> probs, int order) {
    if (order != 2 && order != 3) throw ConfigError("renyi_entropy: order must be 2 or 3");
    double sum = 0.0;
    for (double p : probs) sum += (order == 2) ? p * p : p * p * p;
    return std::log2(sum) / (1.0 - static_cast<double>(order));
}

inline double renyi_entropy(const HistogramEstimate& h, int order) { return renyi_entropy(h.p, order); }

inline double renyi_entropy_of(std::span<const double> s, int order, int bins = kDefaultBins) {
    return renyi_entropy(histogram(s, bins), order);
}

// ---------------------------------------------------------------- energies

inline double conventional_energy(std::span<const double> s) {
    double e = 0.0;
    for (double v : s) e += v * v;
    return e;
}

// psi[n] = s[n]^2 - s[n-1] * s[n+1] over interior samples; length n - 2.
inline std::vector<double> teager_kaiser(std::span<const double> s) {
    if (s.size() < 3) throw ValidationError("teager_kaiser: need at least 3 samples");
    std::vector<double> psi(s.size() - 2);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) psi[i - 1] = s[i] * s[i] - s[i - 1] * s[i + 1];
    return psi;
}

inline double teager_kaiser_total(std::span<const double> s) {
    double e = 0.0;
    for (double v : teager_kaiser(s)) e += v;
    return e;
}

enum class EnergyKind { Conventional, TeagerKaiser };

struct EnergyPair {
    double signal = 0.0;  // >= 0
    double noise = 0.0;   // >= 0
};

namespace detail {

// TK totals can come out negative on adversarial inputs; energies in a ratio
// must not, so they are floored at zero (the cap rule then applies).
inline double nonneg_energy(std::span<const double> s, EnergyKind kind) {
    if (kind == EnergyKind::Conventional) return conventional_energy(s);
    if (s.size() < 3) return 0.0;
    return std::max(0.0, teager_kaiser_total(s));
}

}  // namespace detail

struct SnrResult {
    EnergyPair energies;
    double snr_db = 0.0;
};

// 10 log10(Es / En), capped at +/-300 dB; zero/zero is 0 dB by convention.
inline double snr_db(const EnergyPair& e) {
    if (e.noise == 0.0 && e.signal == 0.0) return 0.0;
    if (e.noise == 0.0) return kSnrCapDb;
    if (e.signal == 0.0) return -kSnrCapDb;
    const double v = 10.0 * std::log10(e.signal / e.noise);
    return std::clamp(v, -kSnrCapDb, kSnrCapDb);
}

// Noise = IMF 1; signal = s - IMF 1 (everything slower, residual included).
inline SnrResult energy_snr(std::span<const double> s, const emd::ImfSet& imfs, EnergyKind kind) {
    if (imfs.count() < 1) throw ValidationError("energy_snr: need at least one IMF");
    const std::vector<double>& noise = imfs.imfs[0];
    if (noise.size() != s.size()) throw ValidationError("energy_snr: IMF/signal length mismatch");
    std::vector<double> signal(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) signal[i] = s[i] - noise[i];
    SnrResult r;
    r.energies.signal = detail::nonneg_energy(signal, kind);
    r.energies.noise = detail::nonneg_energy(noise, kind);
    r.snr_db = snr_db(r.energies);
    return r;
}

// Intrinsic variant: signal = sum of IMFs 2..K (residual excluded).
inline SnrResult intrinsic_energy_snr(const emd::ImfSet& imfs, EnergyKind kind) {
    if (imfs.count() < 1) throw ValidationError("intrinsic_energy_snr: need at least one IMF");
    const std::vector<double>& noise = imfs.imfs[0];
    std::vector<double> signal(noise.size(), 0.0);
    for (std::size_t k = 1; k < imfs.count(); ++k)
        for (std::size_t i = 0; i < signal.size(); ++i) signal[i] += imfs.imfs[k][i];
    SnrResult r;
    r.energies.signal = detail::nonneg_energy(signal, kind);
    r.energies.noise = detail::nonneg_energy(noise, kind);
    r.snr_db = snr_db(r.energies);
    return r;
}

}  // namespace pendown::measures
