#pragma once

// pendown/mannwhitney.hpp
//
// Two-sided Mann-Whitney U with midrank tie handling, and the p < alpha
// feature filter built on it.
//
// Small pooled samples (n1 + n2 <= 12) get the exact permutation p: the null
// distribution of the rank sum over all C(N, n1) group assignments, counted
// by dynamic programming over doubled midranks (doubling makes every rank an
// integer).  Larger samples use the normal approximation with tie-corrected
// variance and a 0.5 continuity correction.  Samples identical across both
// groups have zero rank variance and score p = 1 by convention.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "pendown/common.hpp"
#include "pendown/features.hpp"

namespace pendown::mw {

constexpr std::size_t kExactLimit = 12;  // pooled size at or below which p is exact

struct RankSumResult {
    double u = 0.0;   // min(U1, U2)
    double z = 0.0;   // continuity-corrected |z| of the normal approximation
    double p = 1.0;   // two-sided
    std::size_t n1 = 0, n2 = 0;
    bool exact = false;
};

namespace detail {

// Midranks (1-based, ties averaged) of the pooled sample, first n1 entries
// for sample a; plus the tie term sum(t^3 - t).
struct PooledRanks {
    std::vector<double> ranks;
    double tie_sum = 0.0;
};

inline PooledRanks midranks(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size() + b.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto value = [&](std::size_t i) { return i < a.size() ? a[i] : b[i - a.size()]; };
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return value(i) < value(j); });

    PooledRanks pr;
    pr.ranks.assign(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && value(order[j + 1]) == value(order[i])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1 .. j+1
        for (std::size_t k = i; k <= j; ++k) pr.ranks[order[k]] = avg;
        const double t = static_cast<double>(j - i + 1);
        pr.tie_sum += t * t * t - t;
        i = j + 1;
    }
    return pr;
}

// Exact two-sided p for rank sum R1 given the pooled doubled midranks.
// p = P(U1 <= u_lo) + P(U1 >= u_hi), capped at 1, with u_lo/u_hi the
// observed min/max of (U1, U2).
inline double exact_two_sided_p(const std::vector<int>& rank2, std::size_t n1, double u1) {
    const std::size_t n = rank2.size();
    const std::size_t n2 = n - n1;
    const int total2 = std::accumulate(rank2.begin(), rank2.end(), 0);

    // ways[k][s]: subsets of size k with doubled-rank sum s.
    std::vector<std::vector<std::uint64_t>> ways(n1 + 1,
                                                 std::vector<std::uint64_t>(static_cast<std::size_t>(total2) + 1, 0));
    ways[0][0] = 1;
    for (int r : rank2)
        for (std::size_t k = std::min(n1, static_cast<std::size_t>(n)); k >= 1; --k)
            for (int s = total2; s >= r; --s)
                if (ways[k - 1][static_cast<std::size_t>(s - r)])
                    ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - r)];

    const long long off2 = static_cast<long long>(n1) * static_cast<long long>(n1 + 1);  // 2 * n1(n1+1)/2
    const long long u1_2 = std::llround(2.0 * u1);
    const long long nn2 = 2LL * static_cast<long long>(n1) * static_cast<long long>(n2);
    const long long lo2 = std::min(u1_2, nn2 - u1_2);
    const long long hi2 = nn2 - lo2;

    std::uint64_t count_total = 0, count_tail = 0;
    for (int s = 0; s <= total2; ++s) {
        const std::uint64_t c = ways[n1][static_cast<std::size_t>(s)];
        if (!c) continue;
        count_total += c;
        const long long u2x = static_cast<long long>(s) - off2;  // doubled U1 for this rank sum
        if (u2x <= lo2 || u2x >= hi2) count_tail += c;
    }
    double p = static_cast<double>(count_tail) / static_cast<double>(count_total);
    // When lo2 == hi2 the centre bin is counted twice; the cap absorbs it.
    return std::min(1.0, p);
}

}  // namespace detail

// Exact two-sided p for a tie-free comparison, as a function of U alone.
inline double exact_p_tie_free(double u, std::size_t n1, std::size_t n2) {
    std::vector<int> rank2(n1 + n2);
    for (std::size_t i = 0; i < rank2.size(); ++i) rank2[i] = 2 * static_cast<int>(i + 1);
    return detail::exact_two_sided_p(rank2, n1, u);
}

// Normal-approximation two-sided p with tie-corrected variance and 0.5
// continuity correction; degenerate variance gives p = 1.
inline double normal_two_sided_p(double u, std::size_t n1, std::size_t n2, double tie_sum,
                                 double* z_out = nullptr) {
    const double nn = static_cast<double>(n1) * static_cast<double>(n2);
    const double big_n = static_cast<double>(n1 + n2);
    const double mu = nn / 2.0;
    double var = nn / 12.0 * ((big_n + 1.0) - tie_sum / (big_n * (big_n - 1.0)));
    if (!(var > 0.0)) {
        if (z_out) *z_out = 0.0;
        return 1.0;
    }
    const double z = std::max(0.0, (std::abs(u - mu) - 0.5) / std::sqrt(var));
    if (z_out) *z_out = z;
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

inline RankSumResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ValidationError("mann_whitney_u: both samples must be nonempty");
    for (double v : a)
        if (!std::isfinite(v)) throw ValidationError("mann_whitney_u: non-finite value");
    for (double v : b)
        if (!std::isfinite(v)) throw ValidationError("mann_whitney_u: non-finite value");

    const detail::PooledRanks pr = detail::midranks(a, b);
    double r1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r1 += pr.ranks[i];

    RankSumResult res;
    res.n1 = a.size();
    res.n2 = b.size();
    const double nn = static_cast<double>(res.n1) * static_cast<double>(res.n2);
    const double u1 = r1 - static_cast<double>(res.n1) * static_cast<double>(res.n1 + 1) / 2.0;
    const double u2 = nn - u1;
    res.u = std::min(u1, u2);

    normal_two_sided_p(res.u, res.n1, res.n2, pr.tie_sum, &res.z);
    if (res.n1 + res.n2 <= kExactLimit) {
        std::vector<int> rank2(pr.ranks.size());
        for (std::size_t i = 0; i < rank2.size(); ++i) rank2[i] = static_cast<int>(std::llround(2.0 * pr.ranks[i]));
        res.p = detail::exact_two_sided_p(rank2, res.n1, u1);
        res.exact = true;
    } else {
        res.p = normal_two_sided_p(res.u, res.n1, res.n2, pr.tie_sum, &res.z);
    }
    return res;
}

// ----------------------------------------------------------------- filter --

struct FeatureTest {
    std::size_t column = 0;
    RankSumResult stat;
    bool passed = false;
};

struct FilterResult {
    std::vector<FeatureTest> tests;      // one per column, registry order
    std::vector<std::size_t> kept;       // columns with p < alpha
    std::size_t n_pd = 0, n_hc = 0;
};

// Tests every column of a dense block (labels aligned with block rows) and
// keeps those with p strictly below alpha.  Column indices in the result are
// block-local.
inline FilterResult filter_dense(const feat::DenseBlock& block, std::span<const int> labels,
                                 double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("filter: alpha must be in (0, 1)");
    if (labels.size() != block.n) throw ValidationError("filter: label/row count mismatch");
    std::vector<std::size_t> pd_rows, hc_rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == ink::kLabelPd)
            pd_rows.push_back(i);
        else
            hc_rows.push_back(i);
    }
    if (pd_rows.empty() || hc_rows.empty())
        throw ValidationError("filter: need both labels in scope");

    FilterResult out;
    out.n_pd = pd_rows.size();
    out.n_hc = hc_rows.size();
    std::vector<double> a(pd_rows.size()), b(hc_rows.size());
    for (std::size_t j = 0; j < block.d; ++j) {
        for (std::size_t i = 0; i < pd_rows.size(); ++i) a[i] = block.at(pd_rows[i], j);
        for (std::size_t i = 0; i < hc_rows.size(); ++i) b[i] = block.at(hc_rows[i], j);
        FeatureTest t;
        t.column = j;
        t.stat = mann_whitney_u(a, b);
        t.passed = t.stat.p < alpha;
        if (t.passed) out.kept.push_back(j);
        out.tests.push_back(std::move(t));
    }
    return out;
}

// Whole-scope variant: imputes every column over the given rows, then tests.
inline FilterResult filter_features(const feat::FeatureMatrix& m, std::span<const std::size_t> rows,
                                    double alpha) {
    const std::vector<std::size_t> cols = feat::all_columns(m);
    const feat::DenseBlock block = feat::impute(m, rows, cols);
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = m.labels[rows[i]];
    return filter_dense(block, labels, alpha);
}

}  // namespace pendown::mw
