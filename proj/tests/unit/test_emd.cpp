#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pendown/common.hpp"
#include "pendown/emd.hpp"

using namespace pendown;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> tone_mix(std::size_t n, double rate_hz, double f1, double a1, double f2,
                             double a2) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate_hz;
        s[i] = a1 * std::sin(2.0 * kPi * f1 * t) + a2 * std::sin(2.0 * kPi * f2 * t);
    }
    return s;
}

double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("extrema detection on a hand signal", "[emd]") {
    const std::vector<double> s = {0.0, 1.0, 0.0, -1.0, 0.0};
    const emd::Extrema ex = emd::find_extrema(s);
    REQUIRE(ex.maxima == std::vector<std::size_t>{1});
    REQUIRE(ex.minima == std::vector<std::size_t>{3});
}

TEST_CASE("plateau counts once at its midpoint", "[emd]") {
    const std::vector<double> s = {0, 2, 2, 2, 0, -1, -1, 0};
    const emd::Extrema ex = emd::find_extrema(s);
    REQUIRE(ex.maxima == std::vector<std::size_t>{2});
    REQUIRE(ex.minima == std::vector<std::size_t>{5});

    // monotone and constant signals have no interior extrema
    REQUIRE(emd::find_extrema(std::vector<double>{0, 1, 2, 3}).maxima.empty());
    REQUIRE(emd::find_extrema(std::vector<double>{1, 1, 1, 1}).minima.empty());
    // plateau running into the edge is not an extremum
    const emd::Extrema edge = emd::find_extrema(std::vector<double>{0, 1, 1});
    REQUIRE(edge.maxima.empty());
}

TEST_CASE("natural spline interpolates its knots and straightens two points", "[emd]") {
    std::vector<double> xs = {0.0, 1.0, 3.0, 4.0, 6.0};
    std::vector<double> ys = {1.0, -2.0, 0.5, 3.0, -1.0};
    emd::detail::CubicSpline sp(xs, ys);
    for (std::size_t i = 0; i < xs.size(); ++i) REQUIRE(sp.eval(xs[i]) == Catch::Approx(ys[i]));

    emd::detail::CubicSpline line({0.0, 2.0}, {1.0, 5.0});
    REQUIRE(line.eval(1.0) == Catch::Approx(3.0));
    REQUIRE(line.eval(3.0) == Catch::Approx(7.0));  // extrapolates the chord
}

TEST_CASE("spline reproduces straight data exactly", "[emd]") {
    std::vector<double> xs = {0.0, 1.0, 2.0, 3.0, 4.0};
    std::vector<double> ys = {1.0, 1.5, 2.0, 2.5, 3.0};
    emd::detail::CubicSpline sp(xs, ys);
    for (double xv = 0.0; xv <= 4.0; xv += 0.25)
        REQUIRE(sp.eval(xv) == Catch::Approx(1.0 + 0.5 * xv).margin(1e-12));
}

TEST_CASE("envelope of a pure tone hugs its amplitude", "[emd]") {
    const std::vector<double> s = tone_mix(512, 256.0, 8.0, 1.0, 0.0, 0.0);
    const emd::Extrema ex = emd::find_extrema(s);
    REQUIRE(ex.maxima.size() >= 4);
    const std::vector<double> upper = emd::envelope(s, ex.maxima);
    REQUIRE(upper.size() == s.size());
    // away from the ends the upper envelope stays near +1
    for (std::size_t i = 64; i + 64 < s.size(); ++i) {
        REQUIRE(upper[i] > 0.8);
        REQUIRE(upper[i] < 1.2);
    }
    REQUIRE_THROWS_AS(emd::envelope(s, std::vector<std::size_t>{3}), ValidationError);
}

TEST_CASE("sift stops on the successive-iterate criterion", "[emd]") {
    const std::vector<double> s = tone_mix(400, 200.0, 10.0, 1.0, 1.0, 0.7);
    const emd::SiftResult r = emd::sift(s);
    REQUIRE((r.stop == emd::SiftStop::Cauchy || r.stop == emd::SiftStop::MaxIterations));
    REQUIRE(r.iterations >= 1);
    REQUIRE(r.imf.size() == s.size());

    const std::vector<double> line = {0.0, 1.0, 2.0, 3.0, 4.0};
    const emd::SiftResult none = emd::sift(line);
    REQUIRE(none.stop == emd::SiftStop::Residual);
    REQUIRE(none.iterations == 0);
}

TEST_CASE("decomposition reconstructs the input to round-off", "[emd]") {
    Rng rng(2024);
    for (int probe = 0; probe < 20; ++probe) {
        std::vector<double> s(256);
        for (double& v : s) v = rng.normal();
        const emd::ImfSet set = emd::decompose(s);
        REQUIRE(set.count() >= 1);
        for (std::size_t i = 0; i < s.size(); ++i) {
            double sum = set.residual[i];
            for (const auto& imf : set.imfs) sum += imf[i];
            REQUIRE(std::abs(sum - s[i]) < 1e-9);
        }
    }
}

TEST_CASE("decomposition separates a fast tone from a slow one", "[emd]") {
    // 50 Hz + 5 Hz at 1 kHz for 1 s: the first mode should carry the fast tone
    std::vector<double> fast(1000), slow(1000), s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = static_cast<double>(i) / 1000.0;
        fast[i] = std::sin(2.0 * kPi * 50.0 * t);
        slow[i] = 0.8 * std::sin(2.0 * kPi * 5.0 * t);
        s[i] = fast[i] + slow[i];
    }
    const emd::ImfSet set = emd::decompose(s);
    REQUIRE(set.count() >= 2);
    REQUIRE(correlation(set.imfs[0], fast) > 0.95);

    // modes come out fastest first
    REQUIRE(emd::zero_crossing_count(set.imfs[0]) > emd::zero_crossing_count(set.imfs[1]));
}

TEST_CASE("residual ends the decomposition", "[emd]") {
    const emd::ImfSet set = emd::decompose(tone_mix(300, 100.0, 4.0, 1.0, 0.0, 0.0));
    REQUIRE(emd::is_residual(set.residual));
    REQUIRE(emd::decompose(std::vector<double>{1, 2, 3, 4}).count() == 0);
    REQUIRE_THROWS_AS(emd::decompose(std::vector<double>{1, 2, 3}), ValidationError);
    REQUIRE_THROWS_AS(emd::decompose(std::vector<double>{1, 2, 3, std::nan("")}),
                      ValidationError);
}

TEST_CASE("zero crossings skip exact zeros", "[emd]") {
    REQUIRE(emd::zero_crossing_count(std::vector<double>{1, -1, 1, -1}) == 3);
    REQUIRE(emd::zero_crossing_count(std::vector<double>{1, 0, -1}) == 1);
    REQUIRE(emd::zero_crossing_count(std::vector<double>{0, 0, 0}) == 0);
    REQUIRE(emd::zero_crossing_count(std::vector<double>{2, 3, 1}) == 0);
}
