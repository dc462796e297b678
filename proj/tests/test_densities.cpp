#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "kgan/densities.hpp"
#include "oracles.hpp"

using namespace kgan;

TEST_CASE("pdf matches closed forms") {
    const Density std1d = Density::gaussian1d(0.0, 1.0);
    CHECK(std1d.pdf(0.0) == Catch::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));

    // equal mixture of N(-1,1), N(1,1) at 0 equals a single N(1,1) at 0
    Density mix = Density::mixture({{0.5, Vector::Constant(1, -1.0), Matrix::Identity(1, 1)},
                                    {0.5, Vector::Constant(1, 1.0), Matrix::Identity(1, 1)}});
    const Density n11 = Density::gaussian1d(1.0, 1.0);
    CHECK(mix.pdf(0.0) == Catch::Approx(n11.pdf(0.0)).epsilon(1e-12));
    CHECK(mix.pdf(0.0) == Catch::Approx(0.2419707).epsilon(1e-6));

    const Density std2d = Density::gaussian(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK(std2d.pdf(Vector::Zero(2)) ==
          Catch::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("pdf rejects dimension mismatch") {
    const Density std2d = Density::gaussian(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK_THROWS_AS(std2d.pdf(Vector::Zero(3)), invalid_input);
}

TEST_CASE("construction invariants") {
    CHECK_THROWS_AS(Density::mixture({{0.6, Vector::Zero(1), Matrix::Identity(1, 1)},
                                      {0.5, Vector::Zero(1), Matrix::Identity(1, 1)}}),
                    invalid_input);
    Matrix bad(1, 1);
    bad << -1.0;
    CHECK_THROWS_AS(Density::gaussian(Vector::Zero(1), bad), invalid_input);
    Matrix asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(Density::gaussian(Vector::Zero(2), asym), invalid_input);
}

TEST_CASE("sampler behaves under the law of large numbers") {
    const Density std1d = Density::gaussian1d(0.0, 1.0);
    std::mt19937_64 rng(20240101);
    const auto draws = std1d.sample(rng, 100000);
    double mean = 0.0;
    for (const auto& x : draws) mean += x[0];
    mean /= static_cast<double>(draws.size());
    CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("sampler degenerate cases") {
    const Density point = Density::gaussian1d(5.0, 1e-12);
    std::mt19937_64 rng(7);
    for (const auto& x : point.sample(rng, 3)) CHECK(std::abs(x[0] - 5.0) < 1e-5);

    Density first_only =
        Density::mixture({{1.0, Vector::Constant(1, -3.0), Matrix::Identity(1, 1)},
                          {0.0, Vector::Constant(1, 40.0), Matrix::Identity(1, 1)}});
    std::mt19937_64 rng2(8);
    for (const auto& x : first_only.sample(rng2, 50)) CHECK(x[0] < 10.0);

    CHECK_THROWS_AS(point.sample(rng, 0), invalid_input);
}

TEST_CASE("sampler histogram agrees with the pdf (chi-square)") {
    const Density std1d = Density::gaussian1d(0.0, 1.0);
    std::mt19937_64 rng(555);
    const auto draws = std1d.sample(rng, 100000);
    const int bins = 50;
    const double lo = -5.0, hi = 5.0, w = (hi - lo) / bins;
    std::vector<double> counts(bins, 0.0);
    for (const auto& x : draws) {
        if (x[0] < lo || x[0] >= hi) continue;  // ~6e-7 expected mass
        counts[static_cast<std::size_t>((x[0] - lo) / w)] += 1.0;
    }
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double expect =
            100000.0 * (oracles::normal_cdf(lo + (b + 1) * w) - oracles::normal_cdf(lo + b * w));
        chi2 += (counts[b] - expect) * (counts[b] - expect) / expect;
    }
    CHECK(chi2 < oracles::chi2_crit_49_999);
}

TEST_CASE("simpson quadrature") {
    const Density std1d = Density::gaussian1d(0.0, 1.0);
    const auto grid = QuadratureGrid::line(-10.0, 10.0, 2001);

    const double mass = integrate(std::function<double(double)>(
                                      [&](double x) { return std1d.pdf(x); }),
                                  grid);
    CHECK(mass == Catch::Approx(1.0).margin(1e-9));

    const double first_moment = integrate(std::function<double(double)>(
                                              [&](double x) { return x * std1d.pdf(x); }),
                                          grid);
    CHECK(std::abs(first_moment) < 1e-12);

    // min(p_d, p_g) integrates to 1 - TV
    const Density n11 = Density::gaussian1d(1.0, 1.0);
    const auto wide = QuadratureGrid::line(-10.0, 11.0, 4201);
    const double overlap =
        integrate(std::function<double(double)>(
                      [&](double x) { return std::min(std1d.pdf(x), n11.pdf(x)); }),
                  wide);
    CHECK(overlap == Catch::Approx(1.0 - oracles::tv_unit_gaussians(1.0)).margin(2e-7));
}

TEST_CASE("quadrature of 2D gaussian normalizes") {
    const Density std2d = Density::gaussian(Vector::Zero(2), Matrix::Identity(2, 2));
    const auto grid = QuadratureGrid::plane(-8.0, 8.0, -8.0, 8.0, 401);
    const double mass = integrate(
        std::function<double(const Vector&)>([&](const Vector& x) { return std2d.pdf(x); }),
        grid);
    CHECK(mass == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("normalization holds for constructed mixtures") {
    Density mix = Density::mixture({{0.3, Vector::Constant(1, -2.0), 0.25 * Matrix::Identity(1, 1)},
                                    {0.7, Vector::Constant(1, 2.0), 0.5 * Matrix::Identity(1, 1)}});
    auto [lo, hi] = mix.truncation_box();
    const auto grid = QuadratureGrid::line(lo[0], hi[0], 4001);
    const double mass = integrate(
        std::function<double(double)>([&](double x) { return mix.pdf(x); }), grid);
    CHECK(mass == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("simpson error drops by at least 8x when nodes double") {
    const Density std1d = Density::gaussian1d(0.0, 1.0);
    auto mass_err = [&](int nodes) {
        const auto grid = QuadratureGrid::line(-8.0, 8.0, nodes);
        const double mass = integrate(
            std::function<double(double)>([&](double x) { return std1d.pdf(x); }), grid);
        return std::abs(mass - 1.0);
    };
    const double coarse = mass_err(21);
    const double fine = mass_err(41);
    CHECK(coarse / fine >= 8.0);
}

TEST_CASE("integrate reports the offending node") {
    const auto grid = QuadratureGrid::line(-1.0, 1.0, 5);
    CHECK_THROWS_MATCHES(
        integrate(std::function<double(double)>([](double x) { return 1.0 / x; }), grid),
        numeric_error, Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("0")));
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(QuadratureGrid::line(0.0, 1.0, 4), invalid_input);   // even
    CHECK_THROWS_AS(QuadratureGrid::line(1.0, 0.0, 5), invalid_input);   // reversed
    CHECK_THROWS_AS(QuadratureGrid::line(0.0, std::numeric_limits<double>::infinity(), 5),
                    invalid_input);
}
