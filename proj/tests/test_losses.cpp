#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "kgan/losses.hpp"

using namespace kgan;

namespace {

const std::vector<LossSpec> convex_losses{LossSpec::logistic(), LossSpec::hinge(),
                                          LossSpec::exponential(), LossSpec::least_square()};
const std::vector<LossSpec> smooth_losses{LossSpec::logistic(), LossSpec::exponential(),
                                          LossSpec::least_square()};

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
    return out;
}

/// Interior grid over the effective conjugate domain used by tests.
std::vector<double> interior_domain_grid(const LossSpec& loss, int n) {
    const auto dom = loss.conjugate_domain();
    const double lo = std::isinf(dom.lo) ? -10.0 : dom.lo;
    const double hi = std::isinf(dom.hi) ? 10.0 : dom.hi;
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * (i + 1) / (n + 1);
    return out;
}

}  // namespace

TEST_CASE("loss values match the formulas") {
    CHECK(LossSpec::logistic().value(0.0) == Catch::Approx(std::numbers::ln2).epsilon(1e-12));
    CHECK(LossSpec::hinge().value(2.0) == 0.0);
    CHECK(LossSpec::least_square().value(3.0) == 4.0);
    CHECK(LossSpec::zero_one().value(0.0) == 1.0);
    CHECK(LossSpec::zero_one().value(1e-9) == 0.0);
    // stability far out
    CHECK(std::isfinite(LossSpec::logistic().value(-1000.0)));
    CHECK(LossSpec::logistic().value(-1000.0) == Catch::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("losses are decreasing, convex ones pass the midpoint test") {
    for (const auto& loss :
         {LossSpec::logistic(), LossSpec::hinge(), LossSpec::exponential(),
          LossSpec::least_square(), LossSpec::zero_one()}) {
        const auto grid = linspace(-6.0, 6.0, 241);
        for (std::size_t i = 1; i < grid.size(); ++i)
            CHECK(loss.value(grid[i - 1]) >= loss.value(grid[i]) - 1e-12);
        if (loss.is_convex()) {
            for (std::size_t i = 2; i < grid.size(); ++i) {
                const double mid = loss.value(0.5 * (grid[i - 2] + grid[i]));
                CHECK(mid <= 0.5 * (loss.value(grid[i - 2]) + loss.value(grid[i])) + 1e-12);
            }
        }
    }
}

TEST_CASE("closed-form conjugates at pinned points") {
    CHECK(LossSpec::exponential().conjugate(-1.0) == Catch::Approx(-1.0).epsilon(1e-12));
    CHECK(LossSpec::least_square().conjugate(0.0) == 0.0);
    CHECK(LossSpec::logistic().conjugate(-0.5) ==
          Catch::Approx(-std::numbers::ln2).epsilon(1e-12));
    CHECK(LossSpec::hinge().conjugate(-0.5) == -0.5);
    // +infinity outside the domain
    CHECK(std::isinf(LossSpec::logistic().conjugate(0.5)));
    CHECK(std::isinf(LossSpec::hinge().conjugate(-1.5)));
    CHECK(std::isinf(LossSpec::exponential().conjugate(0.1)));
    // endpoints use 0 log 0 = 0
    CHECK(LossSpec::logistic().conjugate(0.0) == 0.0);
    CHECK(LossSpec::logistic().conjugate(-1.0) == 0.0);
    CHECK(LossSpec::exponential().conjugate(0.0) == 0.0);
}

TEST_CASE("zero-one loss has no conjugate") {
    CHECK_THROWS_AS(LossSpec::zero_one().conjugate(-0.5), unsupported_operation);
    CHECK_THROWS_AS(LossSpec::zero_one().conjugate_domain(), unsupported_operation);
}

TEST_CASE("numeric conjugate oracle") {
    CHECK(conjugate_numeric(LossSpec::logistic(), -0.5).value ==
          Catch::Approx(-std::numbers::ln2).margin(1e-6));
    CHECK(conjugate_numeric(LossSpec::least_square(), 2.0).value ==
          Catch::Approx(3.0).margin(1e-6));
    const auto diverging = conjugate_numeric(LossSpec::exponential(), 0.5);
    CHECK(diverging.boundary_warning);
    CHECK_THROWS_AS(conjugate_numeric(LossSpec::logistic(), -0.5, 50.0, 100), invalid_input);
}

TEST_CASE("boundary warning for every t > 0 on the bounded-slope losses") {
    for (const auto& loss : {LossSpec::logistic(), LossSpec::hinge(), LossSpec::exponential()}) {
        for (double t : linspace(0.01, 5.0, 25))
            CHECK(conjugate_numeric(loss, t).boundary_warning);
    }
}

TEST_CASE("closed form agrees with the numeric oracle on interior points") {
    for (const auto& loss : convex_losses) {
        for (double t : interior_domain_grid(loss, 101)) {
            const auto est = conjugate_numeric(loss, t);
            CHECK(!est.boundary_warning);
            CHECK(loss.conjugate(t) == Catch::Approx(est.value).margin(1e-5));
        }
    }
}

TEST_CASE("biconjugate reproduces each convex loss") {
    for (const auto& loss : convex_losses) {
        for (double a : linspace(-5.0, 5.0, 41)) {
            // sup_t (a t - l*_num(t)) over a t-grid with golden refinement
            auto conj_num = [&](double t) { return conjugate_numeric(loss, t).value; };
            const int grid_size = 2001;
            const double bound = 50.0;
            const double h = 2.0 * bound / (grid_size - 1);
            int best = 0;
            double best_val = a * (-bound) - conj_num(-bound);
            for (int i = 1; i < grid_size; ++i) {
                const double t = -bound + i * h;
                const double v = a * t - conj_num(t);
                if (v > best_val) {
                    best_val = v;
                    best = i;
                }
            }
            double recovered = best_val;
            if (best > 0 && best < grid_size - 1) {
                recovered = golden_section_max(
                                [&](double t) { return a * t - conj_num(t); },
                                -bound + (best - 1) * h, -bound + (best + 1) * h, 80)
                                .value;
            }
            CHECK(recovered == Catch::Approx(loss.value(a)).margin(1e-3));
        }
    }
}

TEST_CASE("young inequality residuals") {
    CHECK(check_young(LossSpec::logistic(), 0.0, -0.5) == Catch::Approx(0.0).margin(1e-10));
    CHECK(check_young(LossSpec::hinge(), 2.0, -1.0) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(check_young(LossSpec::least_square(), 1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(check_young(LossSpec::logistic(), 0.0, 0.5), invalid_input);

    for (const auto& loss : convex_losses) {
        for (double s : linspace(-5.0, 5.0, 101))
            for (double t : interior_domain_grid(loss, 101))
                CHECK(check_young(loss, s, t) >= -1e-10);
    }
}

TEST_CASE("young equality at t = derivative(s)") {
    for (const auto& loss : smooth_losses) {
        for (double s : linspace(-2.0, 2.0, 9)) {
            const double t = loss.derivative(s);
            if (!loss.conjugate_domain().contains(t)) continue;
            CHECK(check_young(loss, s, t) <= 1e-8);
        }
    }
}

TEST_CASE("legendre identity") {
    CHECK(check_legendre(LossSpec::least_square(), 0.3) <= 1e-9);
    CHECK(check_legendre(LossSpec::logistic(), 1.5) <= 1e-6);
    CHECK(check_legendre(LossSpec::exponential(), -2.0) <= 1e-6);
    CHECK_THROWS_AS(check_legendre(LossSpec::hinge(), 0.5), unsupported_operation);
    CHECK_THROWS_AS(check_legendre(LossSpec::zero_one(), 0.5), unsupported_operation);
}

TEST_CASE("legendre identity against the finite-difference numeric conjugate") {
    for (const auto& loss : smooth_losses) {
        for (double s : {-1.5, -0.25, 0.75, 1.5}) {
            const double t = loss.derivative(s);
            const double eps = 1e-6 * std::max(1.0, std::abs(t));
            const double fd = (conjugate_numeric(loss, t + eps).value -
                               conjugate_numeric(loss, t - eps).value) /
                              (2.0 * eps);
            CHECK(fd == Catch::Approx(s).margin(2e-4));
        }
    }
}

TEST_CASE("argmax of u*a - l*(u) recovers the derivative") {
    for (const auto& loss : smooth_losses) {
        for (double a : {-1.0, -0.2, 0.4, 1.3}) {
            const auto dom = loss.conjugate_domain();
            const double lo = std::isinf(dom.lo) ? -40.0 : dom.lo + 1e-12;
            const double hi = std::isinf(dom.hi) ? 40.0 : dom.hi - 1e-12;
            const auto best = golden_section_max(
                [&](double u) { return u * a - loss.conjugate(u); }, lo, hi, 300);
            CHECK(best.arg == Catch::Approx(loss.derivative(a)).margin(1e-5));
        }
    }
}

TEST_CASE("loss names round-trip") {
    for (const char* name : {"logistic", "hinge", "exp", "lsq", "zeroone"})
        CHECK(LossSpec::from_name(name).name() == name);
    CHECK_THROWS_AS(LossSpec::from_name("huber"), invalid_input);
}
