#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "pendown/svm.hpp"
#include "support/oracles.hpp"

using namespace pendown;

namespace {

svm::Matrix random_points(Rng& rng, std::size_t n, std::size_t d) {
    svm::Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x.at(i, j) = rng.normal();
    return x;
}

svm::Matrix as_square(const std::vector<double>& k, std::size_t n) {
    svm::Matrix m(n, n);
    m.a = k;
    return m;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
    std::vector<int> y;
    while (true) {
        y.clear();
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int label = rng.unit() < 0.5 ? 1 : -1;
            y.push_back(label);
            (label == 1 ? pos : neg) = true;
        }
        if (pos && neg) return y;
    }
}

}  // namespace

TEST_CASE("standardizer centres and scales with population std", "[svm]") {
    svm::Matrix x(3, 2);
    x.at(0, 0) = 1;
    x.at(1, 0) = 2;
    x.at(2, 0) = 3;
    for (std::size_t i = 0; i < 3; ++i) x.at(i, 1) = 7.0;  // zero variance
    const svm::Standardizer st = svm::Standardizer::fit(x);
    REQUIRE(st.mean[0] == Catch::Approx(2.0));
    REQUIRE(st.stddev[0] == Catch::Approx(std::sqrt(2.0 / 3.0)));
    svm::Matrix t = x;
    st.transform(t);
    REQUIRE(t.at(0, 0) == Catch::Approx(-1.224744871).epsilon(1e-9));
    REQUIRE(t.at(2, 0) == Catch::Approx(+1.224744871).epsilon(1e-9));
    REQUIRE(t.at(1, 1) == 0.0);  // zero-variance column maps to zero
    const std::vector<double> r = st.transform_row(std::vector<double>{2.0, 7.0});
    REQUIRE(r[0] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("rbf kernel closed forms", "[svm]") {
    const std::vector<double> u = {0.0, 0.0}, v = {2.0, 0.0};
    // squared distance 4 with 2 z^2 = 4 gives exp(-1)
    REQUIRE(svm::rbf_kernel(u, v, std::sqrt(2.0)) == Catch::Approx(std::exp(-1.0)));
    REQUIRE(svm::rbf_kernel(u, u, 0.5) == 1.0);
    REQUIRE_THROWS_AS(svm::rbf_kernel(u, std::vector<double>{1.0}, 1.0), ValidationError);
    REQUIRE_THROWS_AS(svm::rbf_kernel(u, v, 0.0), ValidationError);

    svm::Matrix x(2, 2);
    x.at(1, 0) = 2.0;
    const std::vector<double> k = svm::kernel_matrix(x, std::sqrt(2.0));
    REQUIRE(k[0] == 1.0);
    REQUIRE(k[3] == 1.0);
    REQUIRE(k[1] == Catch::Approx(std::exp(-1.0)));
    REQUIRE(k[1] == k[2]);
}

TEST_CASE("smo separates xor with an rbf kernel", "[svm]") {
    svm::Matrix x(4, 2);
    const double pts[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) x.at(i, j) = pts[i][j];
    const std::vector<int> y = {1, 1, -1, -1};
    const svm::TrainOutcome fit = svm::train_model(x, y, 10.0, 1.0);
    REQUIRE(fit.smo.converged);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(fit.model.predict(x.row(i)) == y[i]);
    REQUIRE(fit.kkt <= 1e-3);
}

TEST_CASE("smo matches the exhaustive active-set solution", "[svm]") {
    Rng rng(77);
    for (int probe = 0; probe < 12; ++probe) {
        const std::size_t n = 3 + rng.below(5);
        const svm::Matrix x = random_points(rng, n, 2);
        const std::vector<int> y = random_labels(rng, n);
        const std::vector<double> k = svm::kernel_matrix(x, 1.0);
        for (double c : {0.1, 10.0}) {
            svm::SmoOptions opt;
            opt.c = c;
            opt.tol = 1e-10;
            const svm::SmoResult res = svm::smo_solve(k, y, opt);
            const std::vector<double> ref = oracle::qp_active_set(as_square(k, n), y, c);
            const double w_ref = oracle::qp_objective(as_square(k, n), y, ref);
            const double w_smo = svm::dual_objective(k, y, res.alpha);
            REQUIRE(w_smo == Catch::Approx(w_ref).margin(1e-6 * std::max(1.0, std::abs(w_ref))));
            REQUIRE(svm::kkt_residual(k, y, res.alpha, res.bias, c) <= 1e-3);
        }
    }
}

TEST_CASE("projected-gradient and active-set oracles agree", "[svm]") {
    Rng rng(123);
    for (int probe = 0; probe < 8; ++probe) {
        const std::size_t n = 3 + rng.below(4);
        const svm::Matrix x = random_points(rng, n, 3);
        const std::vector<int> y = random_labels(rng, n);
        const svm::Matrix k = as_square(svm::kernel_matrix(x, 1.2), n);
        for (double c : {0.05, 50.0}) {
            const double w_pg = oracle::qp_objective(k, y, oracle::qp_projected_gradient(k, y, c));
            const double w_as = oracle::qp_objective(k, y, oracle::qp_active_set(k, y, c));
            REQUIRE(w_pg == Catch::Approx(w_as).margin(1e-7 * std::max(1.0, std::abs(w_as))));
        }
    }
}

TEST_CASE("dual feasibility of smo solutions", "[svm]") {
    Rng rng(31);
    const svm::Matrix x = random_points(rng, 12, 3);
    const std::vector<int> y = random_labels(rng, 12);
    const std::vector<double> k = svm::kernel_matrix(x, 0.8);
    svm::SmoOptions opt;
    opt.c = 2.5;
    const svm::SmoResult res = svm::smo_solve(k, y, opt);
    double balance = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(res.alpha[i] >= 0.0);
        REQUIRE(res.alpha[i] <= opt.c);
        balance += res.alpha[i] * y[i];
    }
    REQUIRE(std::abs(balance) < 1e-9);
}

TEST_CASE("smo input validation", "[svm]") {
    const std::vector<double> k = {1.0, 0.0, 0.0, 1.0};
    svm::SmoOptions opt;
    REQUIRE_THROWS_AS(svm::smo_solve(k, std::vector<int>{1}, opt), ValidationError);
    REQUIRE_THROWS_AS(svm::smo_solve(k, std::vector<int>{1, 1}, opt), ValidationError);
    REQUIRE_THROWS_AS(svm::smo_solve(k, std::vector<int>{1, 2}, opt), ValidationError);
    REQUIRE_THROWS_AS(svm::smo_solve(std::vector<double>{1.0}, std::vector<int>{1, -1}, opt),
                      ValidationError);
    svm::SmoOptions bad;
    bad.c = 0.0;
    REQUIRE_THROWS_AS(svm::smo_solve(k, std::vector<int>{1, -1}, bad), ValidationError);
}

TEST_CASE("confusion metrics on the worked example", "[svm]") {
    svm::ConfusionCounts c;
    c.tp = 9;
    c.fp = 1;
    c.tn = 8;
    c.fn = 2;
    const svm::Metrics m = svm::compute_metrics(c);
    REQUIRE(m.accuracy == Catch::Approx(85.0).margin(1e-12));
    REQUIRE(*m.precision == Catch::Approx(90.0).margin(1e-12));
    REQUIRE(*m.recall == Catch::Approx(100.0 * 9.0 / 11.0).margin(1e-12));

    svm::ConfusionCounts none;
    none.tn = 5;
    const svm::Metrics m2 = svm::compute_metrics(none);
    REQUIRE(m2.accuracy == 100.0);
    REQUIRE_FALSE(m2.precision.has_value());
    REQUIRE_FALSE(m2.recall.has_value());
    REQUIRE_THROWS_AS(svm::compute_metrics(svm::ConfusionCounts{}), ValidationError);

    svm::ConfusionCounts add;
    add.add(1, 1);
    add.add(1, -1);
    add.add(-1, 1);
    add.add(-1, -1);
    REQUIRE(add.tp == 1);
    REQUIRE(add.fn == 1);
    REQUIRE(add.fp == 1);
    REQUIRE(add.tn == 1);
}

TEST_CASE("stratified folds balance both classes", "[svm]") {
    std::vector<int> y;
    for (int i = 0; i < 23; ++i) y.push_back(1);
    for (int i = 0; i < 17; ++i) y.push_back(-1);
    const int k = svm::effective_folds(y, 10);
    REQUIRE(k == 10);
    const std::vector<int> fold = svm::stratified_kfold(y, k, 42);
    REQUIRE(fold.size() == y.size());
    std::map<int, std::pair<int, int>> counts;
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(fold[i] >= 0);
        REQUIRE(fold[i] < k);
        auto& [pos, neg] = counts[fold[i]];
        (y[i] == 1 ? pos : neg) += 1;
    }
    REQUIRE(counts.size() == static_cast<std::size_t>(k));
    int lo_pos = 1 << 20, hi_pos = 0, lo_neg = 1 << 20, hi_neg = 0;
    for (const auto& [f, pn] : counts) {
        lo_pos = std::min(lo_pos, pn.first);
        hi_pos = std::max(hi_pos, pn.first);
        lo_neg = std::min(lo_neg, pn.second);
        hi_neg = std::max(hi_neg, pn.second);
    }
    REQUIRE(hi_pos - lo_pos <= 1);
    REQUIRE(hi_neg - lo_neg <= 1);
    REQUIRE(svm::stratified_kfold(y, k, 42) == fold);       // seed-stable
    REQUIRE(svm::stratified_kfold(y, k, 43) != fold);       // seed-sensitive

    // minority cap
    std::vector<int> tiny = {1, 1, 1, 1, -1, -1, -1};
    REQUIRE(svm::effective_folds(tiny, 10) == 3);
    // a lone minority sample cannot be held out: single resubstitution pass
    REQUIRE(svm::effective_folds(std::vector<int>{1, 1, -1}, 5) == 1);
}

TEST_CASE("grid search degrades to resubstitution for a lone minority sample", "[svm]") {
    svm::Matrix x(3, 1);
    x.at(0, 0) = 1.0;
    x.at(1, 0) = 1.2;
    x.at(2, 0) = -1.0;
    const std::vector<int> y = {1, 1, -1};
    svm::GridSpec spec;
    spec.c_values = {1.0, 10.0};
    spec.z_values = {1.0};
    const svm::GridResult res = svm::grid_search(x, y, spec, 5, 9);
    REQUIRE(res.folds_used == 1);
    REQUIRE(res.cells_evaluated == 2);
    REQUIRE(res.best_accuracy == 100.0);  // separable, scored on its own rows
}

TEST_CASE("grid search covers every cell and breaks ties toward small knobs", "[svm]") {
    Rng rng(8);
    svm::Matrix x(14, 2);
    std::vector<int> y;
    for (std::size_t i = 0; i < 14; ++i) {
        const int label = i < 7 ? 1 : -1;
        y.push_back(label);
        x.at(i, 0) = rng.normal() + (label == 1 ? 2.5 : -2.5);
        x.at(i, 1) = rng.normal();
    }
    const svm::GridSpec spec;
    REQUIRE(spec.cells() == 143);
    const svm::GridResult res = svm::grid_search(x, y, spec, 5, 42);
    REQUIRE(res.cells_evaluated == 143);
    REQUIRE(res.table.size() == 143);
    REQUIRE(res.folds_used == 5);
    REQUIRE(res.best_accuracy >= 50.0);

    // the reported winner really is the argmax with c-major tie-breaking
    double best = -1.0;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i < res.table.size(); ++i) {
        if (res.table[i] > best) {
            best = res.table[i];
            best_at = i;
        }
    }
    REQUIRE(res.best_accuracy == Catch::Approx(best));
    REQUIRE(res.best_c == spec.c_values[best_at / spec.z_values.size()]);
    REQUIRE(res.best_z == spec.z_values[best_at % spec.z_values.size()]);
}

TEST_CASE("model serialization round-trips decisions bit-for-bit", "[svm]") {
    Rng rng(55);
    svm::Matrix x(10, 3);
    std::vector<int> y;
    for (std::size_t i = 0; i < 10; ++i) {
        const int label = i % 2 == 0 ? 1 : -1;
        y.push_back(label);
        for (std::size_t j = 0; j < 3; ++j) x.at(i, j) = rng.normal() + label;
    }
    const svm::TrainOutcome fit = svm::train_model(x, y, 3.0, 1.5);
    const std::string text = svm::serialize_model(fit.model);
    const svm::SvmModel back = svm::parse_model(text, "mem");
    REQUIRE(back.c == fit.model.c);
    REQUIRE(back.z == fit.model.z);
    REQUIRE(back.bias == fit.model.bias);
    REQUIRE(back.support_vectors.n == fit.model.support_vectors.n);
    for (std::size_t i = 0; i < 10; ++i)
        REQUIRE(back.decision(x.row(i)) == fit.model.decision(x.row(i)));
    REQUIRE(svm::serialize_model(back) == text);
    REQUIRE_THROWS_AS(svm::parse_model("not a model", "mem"), ParseError);
}
