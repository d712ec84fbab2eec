#pragma once

// pendown/svm.hpp
//
// Soft-margin RBF SVM trained by sequential minimal optimization, plus the
// pieces around it: per-column standardization, stratified k-fold, the
// (C, z) grid search, confusion metrics and model (de)serialization.
//
// The dual solved is  max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
//               s.t.  0 <= a_i <= C,  sum_i a_i y_i = 0,
// K(u, v) = exp(-|u - v|^2 / (2 z^2)).  The working-pair loop follows
// Platt: first-choice via KKT violation scan, second-choice via the max
// |E1 - E2| heuristic with seeded random fallbacks, so a given seed always
// replays the same optimization path.  Decision values use
// f(x) = sum_i a_i y_i K(x_i, x) + b, and f = 0 classifies as +1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pendown/common.hpp"

namespace pendown::svm {

constexpr double kDefaultTolerance = 1e-3;

// Row-major dense matrix, the training currency of this module.
struct Matrix {
    std::size_t n = 0, d = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : n(rows), d(cols), a(rows * cols, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return a[i * d + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * d + j]; }
    std::span<const double> row(std::size_t i) const { return {a.data() + i * d, d}; }
};

// ----------------------------------------------------------- standardizer --

// Per-column zero-mean unit-variance transform with the population (1/n)
// standard deviation.  Zero-variance columns map to zero rather than NaN.
struct Standardizer {
    std::vector<double> mean, stddev;

    static Standardizer fit(const Matrix& x) {
        if (x.n == 0) throw ValidationError("Standardizer::fit: empty matrix");
        Standardizer s;
        s.mean.assign(x.d, 0.0);
        s.stddev.assign(x.d, 0.0);
        for (std::size_t j = 0; j < x.d; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < x.n; ++i) m += x.at(i, j);
            m /= static_cast<double>(x.n);
            double v = 0.0;
            for (std::size_t i = 0; i < x.n; ++i) {
                const double dev = x.at(i, j) - m;
                v += dev * dev;
            }
            s.mean[j] = m;
            s.stddev[j] = std::sqrt(v / static_cast<double>(x.n));
        }
        return s;
    }

    void transform(Matrix& x) const {
        if (x.d != mean.size()) throw ValidationError("Standardizer: dimension mismatch");
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t j = 0; j < x.d; ++j) {
                double& v = x.at(i, j);
                v = stddev[j] > 0.0 ? (v - mean[j]) / stddev[j] : 0.0;
            }
    }

    std::vector<double> transform_row(std::span<const double> row) const {
        if (row.size() != mean.size()) throw ValidationError("Standardizer: dimension mismatch");
        std::vector<double> out(row.size());
        for (std::size_t j = 0; j < row.size(); ++j)
            out[j] = stddev[j] > 0.0 ? (row[j] - mean[j]) / stddev[j] : 0.0;
        return out;
    }
};

// ----------------------------------------------------------------- kernel --

inline double rbf_kernel(std::span<const double> u, std::span<const double> v, double z) {
    if (u.size() != v.size()) throw ValidationError("rbf_kernel: dimension mismatch");
    if (!(z > 0.0)) throw ValidationError("rbf_kernel: width must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        d2 += d * d;
    }
    return std::exp(-d2 / (2.0 * z * z));
}

inline std::vector<double> kernel_matrix(const Matrix& x, double z) {
    std::vector<double> k(x.n * x.n);
    for (std::size_t i = 0; i < x.n; ++i) {
        k[i * x.n + i] = 1.0;
        for (std::size_t j = i + 1; j < x.n; ++j) {
            const double v = rbf_kernel(x.row(i), x.row(j), z);
            k[i * x.n + j] = v;
            k[j * x.n + i] = v;
        }
    }
    return k;
}

// rows of `a` against rows of `b`; result is a.n x b.n, row-major.
inline std::vector<double> cross_kernel(const Matrix& a, const Matrix& b, double z) {
    std::vector<double> k(a.n * b.n);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t j = 0; j < b.n; ++j) k[i * b.n + j] = rbf_kernel(a.row(i), b.row(j), z);
    return k;
}

// -------------------------------------------------------------------- smo --

struct SmoOptions {
    double c = 1.0;
    double tol = kDefaultTolerance;  // KKT tolerance
    std::uint64_t seed = 0;          // working-pair fallback scans
    int max_stall_passes = 0;        // 0: default 10 * n
};

struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    bool converged = false;
    int passes = 0;
    long steps = 0;
};

namespace detail {

struct SmoState {
    const std::vector<double>& k;
    std::span<const int> y;
    std::size_t n;
    double c, tol, eps;
    Rng rng;
    std::vector<double> alpha, err;  // err[i] = f(i) - y[i]
    double b = 0.0;
    long steps = 0;

    SmoState(const std::vector<double>& kern, std::span<const int> labels, const SmoOptions& opt)
        : k(kern),
          y(labels),
          n(labels.size()),
          c(opt.c),
          tol(opt.tol),
          eps(std::clamp(opt.tol * 1e-3, 1e-15, 1e-6)),
          rng(opt.seed),
          alpha(labels.size(), 0.0),
          err(labels.size(), 0.0) {
        for (std::size_t i = 0; i < n; ++i) err[i] = -static_cast<double>(y[i]);
    }

    double kat(std::size_t i, std::size_t j) const { return k[i * n + j]; }
    bool non_bound(std::size_t i) const { return alpha[i] > 0.0 && alpha[i] < c; }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        const double a1 = alpha[i1], a2 = alpha[i2];
        const double y1 = y[i1], y2 = y[i2];
        const double e1 = err[i1], e2 = err[i2];
        const double s = y1 * y2;

        double lo, hi;
        if (s < 0.0) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c, c + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c);
            hi = std::min(c, a1 + a2);
        }
        if (lo >= hi) return false;

        const double k11 = kat(i1, i1), k22 = kat(i2, i2), k12 = kat(i1, i2);
        const double eta = k11 + k22 - 2.0 * k12;
        double a2new;
        if (eta > 0.0) {
            a2new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
        } else {
            // Flat or concave direction: compare the dual objective gain at
            // the two segment endpoints and move to the better one.
            auto gain = [&](double t2) {
                const double d2 = t2 - a2;
                const double d1 = -s * d2;
                return -y1 * d1 * (e1 - b) - y2 * d2 * (e2 - b) -
                       0.5 * (k11 * d1 * d1 + k22 * d2 * d2) - s * k12 * d1 * d2;
            };
            const double gl = gain(lo), gh = gain(hi);
            if (gl > gh + eps)
                a2new = lo;
            else if (gh > gl + eps)
                a2new = hi;
            else
                return false;
        }
        if (std::abs(a2new - a2) < eps * (a2new + a2 + eps)) return false;

        double a1new = a1 + s * (a2 - a2new);
        // Snap round-off back onto the box.
        if (a1new < 0.0) a1new = 0.0;
        if (a1new > c) a1new = c;
        const double snap = 1e-10 * c;
        if (a1new < snap) a1new = 0.0;
        if (a1new > c - snap) a1new = c;
        double a2snap = a2new;
        if (a2snap < snap) a2snap = 0.0;
        if (a2snap > c - snap) a2snap = c;
        a2new = a2snap;

        const double d1 = a1new - a1, d2 = a2new - a2;
        const double b1 = b - err[i1] - y1 * d1 * k11 - y2 * d2 * k12;
        const double b2 = b - err[i2] - y1 * d1 * k12 - y2 * d2 * k22;
        double bnew;
        const bool in1 = a1new > 0.0 && a1new < c;
        const bool in2 = a2new > 0.0 && a2new < c;
        if (in1)
            bnew = b1;
        else if (in2)
            bnew = b2;
        else
            bnew = 0.5 * (b1 + b2);

        for (std::size_t i = 0; i < n; ++i)
            err[i] += y1 * d1 * kat(i1, i) + y2 * d2 * kat(i2, i) + (bnew - b);
        alpha[i1] = a1new;
        alpha[i2] = a2new;
        b = bnew;
        ++steps;
        return true;
    }

    bool examine(std::size_t i2) {
        const double y2 = y[i2], a2 = alpha[i2], e2 = err[i2];
        const double r2 = e2 * y2;
        if (!((r2 < -tol && a2 < c) || (r2 > tol && a2 > 0.0))) return false;

        // Second choice 1: largest |E1 - E2| among non-bound points.
        std::size_t best = n;
        double best_gap = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!non_bound(i)) continue;
            const double gap = std::abs(err[i] - e2);
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (best < n && take_step(best, i2)) return true;

        // Second choice 2/3: non-bound then full scans from a seeded start.
        const std::size_t start1 = static_cast<std::size_t>(rng.below(n));
        for (std::size_t off = 0; off < n; ++off) {
            const std::size_t i = (start1 + off) % n;
            if (non_bound(i) && take_step(i, i2)) return true;
        }
        const std::size_t start2 = static_cast<std::size_t>(rng.below(n));
        for (std::size_t off = 0; off < n; ++off) {
            const std::size_t i = (start2 + off) % n;
            if (take_step(i, i2)) return true;
        }
        return false;
    }
};

}  // namespace detail

// K is the n x n kernel of the training rows; y holds +/-1.
inline SmoResult smo_solve(const std::vector<double>& k, std::span<const int> y, const SmoOptions& opt) {
    const std::size_t n = y.size();
    if (n < 2) throw ValidationError("smo_solve: need at least 2 samples");
    if (k.size() != n * n) throw ValidationError("smo_solve: kernel size mismatch");
    if (!(opt.c > 0.0)) throw ValidationError("smo_solve: C must be positive");
    bool pos = false, neg = false;
    for (int label : y) {
        if (label == 1) pos = true;
        else if (label == -1) neg = true;
        else throw ValidationError("smo_solve: labels must be +/-1");
    }
    if (!pos || !neg) throw ValidationError("smo_solve: need both classes");

    detail::SmoState st(k, y, opt);
    const int stall_cap = opt.max_stall_passes > 0 ? opt.max_stall_passes : 10 * static_cast<int>(n);

    SmoResult res;
    bool examine_all = true;
    int stalled = 0;
    while (true) {
        std::size_t changed = 0;
        for (std::size_t i = 0; i < st.n; ++i) {
            if (!examine_all && !st.non_bound(i)) continue;
            changed += st.examine(i) ? 1 : 0;
        }
        ++res.passes;
        if (examine_all) {
            if (changed == 0) {
                res.converged = true;
                break;
            }
            examine_all = false;
        } else if (changed == 0) {
            examine_all = true;
        }
        stalled = (changed == 0) ? stalled + 1 : 0;
        if (stalled >= stall_cap) break;  // safety net; flags non-convergence
    }
    res.alpha = std::move(st.alpha);
    res.bias = st.b;
    res.steps = st.steps;
    return res;
}

// Reference dual objective; recomputed from scratch (no reliance on the
// solver's error cache).
inline double dual_objective(const std::vector<double>& k, std::span<const int> y,
                             std::span<const double> alpha) {
    const std::size_t n = y.size();
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lin += alpha[i];
        if (alpha[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j)
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
    }
    return lin - 0.5 * quad;
}

// Largest KKT violation of a solution (0 at an exact optimum).
inline double kkt_residual(const std::vector<double>& k, std::span<const int> y,
                           std::span<const double> alpha, double bias, double c) {
    const std::size_t n = y.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = bias;
        for (std::size_t j = 0; j < n; ++j) f += alpha[j] * y[j] * k[i * n + j];
        const double margin = y[i] * f;
        double viol = 0.0;
        if (alpha[i] <= 0.0)
            viol = std::max(0.0, 1.0 - margin);
        else if (alpha[i] >= c)
            viol = std::max(0.0, margin - 1.0);
        else
            viol = std::abs(margin - 1.0);
        worst = std::max(worst, viol);
    }
    return worst;
}

// ------------------------------------------------------------------ model --

struct SvmModel {
    double c = 0.0, z = 0.0, bias = 0.0;
    Standardizer standardizer;
    Matrix support_vectors;            // standardized rows
    std::vector<double> alpha_signed;  // a_i * y_i

    double decision(std::span<const double> raw_row) const {
        const std::vector<double> row = standardizer.transform_row(raw_row);
        double f = bias;
        for (std::size_t i = 0; i < support_vectors.n; ++i)
            f += alpha_signed[i] * rbf_kernel(support_vectors.row(i), row, z);
        return f;
    }

    int predict(std::span<const double> raw_row) const { return decision(raw_row) >= 0.0 ? 1 : -1; }
};

struct TrainOutcome {
    SvmModel model;
    SmoResult smo;           // full-length alpha (pre-pruning)
    double kkt = 0.0;
    double objective = 0.0;
};

inline TrainOutcome train_model(const Matrix& x_raw, std::span<const int> y, double c, double z,
                                double tol = kDefaultTolerance, std::uint64_t seed = 0) {
    if (x_raw.n != y.size()) throw ValidationError("train_model: row/label count mismatch");
    Matrix xs = x_raw;
    Standardizer st = Standardizer::fit(xs);
    st.transform(xs);
    const std::vector<double> k = kernel_matrix(xs, z);

    SmoOptions opt;
    opt.c = c;
    opt.tol = tol;
    opt.seed = seed;
    SmoResult smo = smo_solve(k, y, opt);

    TrainOutcome out;
    out.kkt = kkt_residual(k, y, smo.alpha, smo.bias, c);
    out.objective = dual_objective(k, y, smo.alpha);
    out.model.c = c;
    out.model.z = z;
    out.model.bias = smo.bias;
    out.model.standardizer = std::move(st);
    std::size_t sv = 0;
    for (double a : smo.alpha) sv += (a > 0.0) ? 1 : 0;
    out.model.support_vectors = Matrix(sv, x_raw.d);
    out.model.alpha_signed.reserve(sv);
    std::size_t at = 0;
    for (std::size_t i = 0; i < xs.n; ++i) {
        if (smo.alpha[i] <= 0.0) continue;
        for (std::size_t j = 0; j < xs.d; ++j) out.model.support_vectors.at(at, j) = xs.at(i, j);
        out.model.alpha_signed.push_back(smo.alpha[i] * y[i]);
        ++at;
    }
    out.smo = std::move(smo);
    return out;
}

// ---------------------------------------------------------------- metrics --

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long total() const { return tp + fp + tn + fn; }
    void add(int truth, int predicted) {
        if (truth == 1)
            (predicted == 1 ? tp : fn) += 1;
        else
            (predicted == 1 ? fp : tn) += 1;
    }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

struct Metrics {
    double accuracy = 0.0;                // percent
    std::optional<double> precision;      // percent; absent when TP + FP == 0
    std::optional<double> recall;         // percent; absent when TP + FN == 0
};

inline Metrics compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw ValidationError("compute_metrics: empty confusion");
    Metrics m;
    m.accuracy = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) m.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return m;
}

// ----------------------------------------------------------- k-fold, grid --

// Lowers k to the minority class count when needed.  A lone minority sample
// cannot be held out, so the result degrades to 1: a single resubstitution
// pass where the validation block equals the training block.
inline int effective_folds(std::span<const int> y, int k) {
    std::size_t pos = 0, neg = 0;
    for (int label : y) (label == 1 ? pos : neg) += 1;
    const std::size_t minority = std::min(pos, neg);
    if (minority < 2) return 1;
    return std::min<int>(k, static_cast<int>(minority));
}

// Per-class shuffled round-robin assignment: each fold's class counts are
// within one of every other fold's.
inline std::vector<int> stratified_kfold(std::span<const int> y, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("stratified_kfold: k must be >= 2");
    std::vector<int> fold(y.size(), -1);
    Rng rng(seed);
    for (int cls : {1, -1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        if (!idx.empty() && idx.size() < static_cast<std::size_t>(k))
            throw ValidationError("stratified_kfold: class smaller than k");
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return fold;
}

struct GridSpec {
    std::vector<double> c_values = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1, 3, 10, 30, 100, 300, 1000};
    std::vector<double> z_values = {0.03, 0.06, 0.12, 0.25, 0.5, 1, 2, 4, 8, 16, 32};

    std::size_t cells() const { return c_values.size() * z_values.size(); }
};

struct GridResult {
    double best_c = 0.0, best_z = 0.0;
    double best_accuracy = -1.0;             // fold-averaged CV accuracy, percent
    std::vector<double> table;               // c-major accuracy table
    int folds_used = 0;
    std::size_t cells_evaluated = 0;
};

// Stratified k-fold CV over every (C, z) cell.  Standardization is fit on
// each fold's training part only.  Ties prefer smaller C, then smaller z
// (iteration order does it).  Each cell's solver draws from seed ^ cell
// index, so results do not depend on evaluation order.
inline GridResult grid_search(const Matrix& x, std::span<const int> y, const GridSpec& spec,
                              int folds, std::uint64_t seed, double tol = kDefaultTolerance) {
    if (spec.c_values.empty() || spec.z_values.empty()) throw ConfigError("grid_search: empty grid");
    GridResult res;
    res.folds_used = effective_folds(y, folds);
    res.table.assign(spec.cells(), 0.0);
    const std::vector<int> fold = res.folds_used >= 2
                                      ? stratified_kfold(y, res.folds_used, seed)
                                      : std::vector<int>(y.size(), -1);

    for (int f = 0; f < res.folds_used; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
        if (res.folds_used < 2) va = tr;  // resubstitution: nothing can be held out

        Matrix xtr(tr.size(), x.d), xva(va.size(), x.d);
        std::vector<int> ytr(tr.size()), yva(va.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
            for (std::size_t j = 0; j < x.d; ++j) xtr.at(i, j) = x.at(tr[i], j);
            ytr[i] = y[tr[i]];
        }
        for (std::size_t i = 0; i < va.size(); ++i) {
            for (std::size_t j = 0; j < x.d; ++j) xva.at(i, j) = x.at(va[i], j);
            yva[i] = y[va[i]];
        }
        const Standardizer st = Standardizer::fit(xtr);
        st.transform(xtr);
        st.transform(xva);

        for (std::size_t zi = 0; zi < spec.z_values.size(); ++zi) {
            const double z = spec.z_values[zi];
            const std::vector<double> ktr = kernel_matrix(xtr, z);
            const std::vector<double> kcross = cross_kernel(xva, xtr, z);
            for (std::size_t ci = 0; ci < spec.c_values.size(); ++ci) {
                const std::size_t cell = ci * spec.z_values.size() + zi;
                SmoOptions opt;
                opt.c = spec.c_values[ci];
                opt.tol = tol;
                opt.seed = seed ^ static_cast<std::uint64_t>(cell);
                const SmoResult sol = smo_solve(ktr, ytr, opt);

                std::size_t correct = 0;
                for (std::size_t i = 0; i < va.size(); ++i) {
                    double dec = sol.bias;
                    for (std::size_t j = 0; j < tr.size(); ++j)
                        if (sol.alpha[j] > 0.0) dec += sol.alpha[j] * ytr[j] * kcross[i * tr.size() + j];
                    const int pred = dec >= 0.0 ? 1 : -1;
                    correct += (pred == yva[i]) ? 1 : 0;
                }
                res.table[cell] +=
                    100.0 * static_cast<double>(correct) / static_cast<double>(va.size()) /
                    static_cast<double>(res.folds_used);
            }
        }
    }
    res.cells_evaluated = spec.cells();

    for (std::size_t ci = 0; ci < spec.c_values.size(); ++ci)
        for (std::size_t zi = 0; zi < spec.z_values.size(); ++zi) {
            const std::size_t cell = ci * spec.z_values.size() + zi;
            if (res.table[cell] > res.best_accuracy) {
                res.best_accuracy = res.table[cell];
                res.best_c = spec.c_values[ci];
                res.best_z = spec.z_values[zi];
            }
        }
    return res;
}

// -------------------------------------------------------------- model i/o --

inline std::string serialize_model(const SvmModel& m) {
    std::string out = "# pendown svm model v1\nkernel rbf\n";
    out += "c " + format_double(m.c) + "\n";
    out += "z " + format_double(m.z) + "\n";
    out += "bias " + format_double(m.bias) + "\n";
    out += "dim " + std::to_string(m.support_vectors.d) + "\n";
    out += "mean";
    for (double v : m.standardizer.mean) out += " " + format_double(v);
    out += "\nstd";
    for (double v : m.standardizer.stddev) out += " " + format_double(v);
    out += "\nsv_count " + std::to_string(m.support_vectors.n) + "\n";
    for (std::size_t i = 0; i < m.support_vectors.n; ++i) {
        out += "sv " + format_double(m.alpha_signed[i]);
        for (double v : m.support_vectors.row(i)) out += " " + format_double(v);
        out += "\n";
    }
    return out;
}

inline SvmModel parse_model(std::string_view text, const std::string& source) {
    SvmModel m;
    std::size_t dim = 0, sv_count = 0, sv_seen = 0;
    bool have_dim = false;
    std::size_t lineno = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (!line.empty() && line[0] == '#') continue;
        std::vector<std::string_view> f;
        {
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
                std::size_t j = i;
                while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
                if (j > i) f.push_back(line.substr(i, j - i));
                i = j;
            }
        }
        if (f.empty()) continue;
        const std::string_view key = f[0];
        if (key == "kernel") {
            if (f.size() != 2 || f[1] != "rbf") throw ParseError(where + ": unsupported kernel");
        } else if (key == "c") {
            m.c = parse_double(f[1], where);
        } else if (key == "z") {
            m.z = parse_double(f[1], where);
        } else if (key == "bias") {
            m.bias = parse_double(f[1], where);
        } else if (key == "dim") {
            dim = static_cast<std::size_t>(parse_long(f[1], where));
            have_dim = true;
        } else if (key == "mean" || key == "std") {
            if (!have_dim || f.size() != dim + 1) throw ParseError(where + ": bad " + std::string(key) + " line");
            std::vector<double>& dst = (key == "mean") ? m.standardizer.mean : m.standardizer.stddev;
            for (std::size_t i = 1; i < f.size(); ++i) dst.push_back(parse_double(f[i], where));
        } else if (key == "sv_count") {
            sv_count = static_cast<std::size_t>(parse_long(f[1], where));
            m.support_vectors = Matrix(sv_count, dim);
        } else if (key == "sv") {
            if (f.size() != dim + 2) throw ParseError(where + ": bad sv line");
            if (sv_seen >= sv_count) throw ParseError(where + ": more sv lines than sv_count");
            m.alpha_signed.push_back(parse_double(f[1], where));
            for (std::size_t j = 0; j < dim; ++j)
                m.support_vectors.at(sv_seen, j) = parse_double(f[j + 2], where);
            ++sv_seen;
        } else {
            throw ParseError(where + ": unknown model key '" + std::string(key) + "'");
        }
    }
    if (sv_seen != sv_count) throw ParseError(source + ": sv_count mismatch");
    if (m.standardizer.mean.size() != dim || m.standardizer.stddev.size() != dim)
        throw ParseError(source + ": missing mean/std lines");
    return m;
}

}  // namespace pendown::svm
