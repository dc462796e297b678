#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kgan/densities.hpp"
#include "kgan/errors.hpp"
#include "kgan/losses.hpp"

namespace kgan {

enum class DivergenceName {
    total_variation,
    hellinger_squared,
    triangular,
    jensen_shannon,
    zero_one_tv
};

inline std::string divergence_name_string(DivergenceName d) {
    switch (d) {
        case DivergenceName::total_variation: return "total-variation";
        case DivergenceName::hellinger_squared: return "hellinger-squared";
        case DivergenceName::triangular: return "triangular";
        case DivergenceName::jensen_shannon: return "jensen-shannon";
        case DivergenceName::zero_one_tv: return "zero-one-tv";
    }
    return "?";
}

namespace detail {

/// Density ratio kept inside double range. Truncation at +/-10 sigma keeps
/// genuine values far from these bounds, so the clamp changes integrals by
/// less than 1e-12.
inline double clamped_ratio(double pd, double pg) {
    const double num = std::clamp(pd, 1e-300, 1e300);
    const double den = std::clamp(pg, 1e-300, 1e300);
    return std::clamp(num / den, 1e-300, 1e300);
}

}  // namespace detail

/// A convex loss with the f-function it induces through
/// f(t) = -inf_a [l(a) t + l(-a)], in closed form, plus the optimal
/// discriminator of the corresponding classification problem.
struct DivergencePair {
    LossSpec loss;
    DivergenceName divergence;

    static DivergencePair for_loss(const LossSpec& loss) {
        switch (loss.kind()) {
            case LossKind::logistic: return {loss, DivergenceName::jensen_shannon};
            case LossKind::hinge: return {loss, DivergenceName::total_variation};
            case LossKind::exponential: return {loss, DivergenceName::hellinger_squared};
            case LossKind::least_square: return {loss, DivergenceName::triangular};
            case LossKind::zero_one: return {loss, DivergenceName::zero_one_tv};
        }
        return {loss, DivergenceName::zero_one_tv};
    }

    /// Closed-form f on t >= 0. Decreasing and convex.
    double f(double t) const {
        switch (loss.kind()) {
            case LossKind::logistic:
                // t*log(t) - (1+t)*log(1+t), the stable form of
                // -t*log((t+1)/t) - log(t+1)
                return xlogx(t) - (1.0 + t) * std::log1p(t);
            case LossKind::hinge: return -2.0 * std::min(1.0, t);
            case LossKind::exponential: return -2.0 * std::sqrt(t);
            case LossKind::least_square: return -4.0 * t / (t + 1.0);
            case LossKind::zero_one: return -std::min(1.0, t);
        }
        return 0.0;
    }

    /// The table form of the pointwise optimal discriminator, as a function
    /// of the two density values.
    double optimal_discriminator(double pd_value, double pg_value) const {
        if (!(pd_value > 0.0) || !(pg_value > 0.0))
            throw invalid_input("optimal_discriminator: density values must be positive");
        switch (loss.kind()) {
            case LossKind::logistic: return std::log(pd_value / pg_value);
            case LossKind::exponential: return 0.5 * std::log(pd_value / pg_value);
            case LossKind::least_square:
                return (pd_value - pg_value) / (pd_value + pg_value);
            case LossKind::hinge:
            case LossKind::zero_one:
                return pg_value > pd_value ? 1.0 : (pd_value > pg_value ? -1.0 : 0.0);
        }
        return 0.0;
    }
};

/// Numeric route to the induced f: golden section on the convex objective
/// l(a) t + l(-a); the zero-one case reduces to min(1, t) directly.
inline double f_from_loss(const LossSpec& loss, double t,
                          double bracket = 60.0, int max_iter = 200) {
    if (!(t >= 0.0)) throw invalid_input("f_from_loss: t must be nonnegative");
    if (loss.kind() == LossKind::zero_one) return -std::min(1.0, t);
    auto objective = [&](double a) { return loss.value(a) * t + loss.value(-a); };
    return -golden_section_min(objective, -bracket, bracket, max_iter).value;
}

/// Tensor box quadrature grid covering the truncation boxes of both
/// densities.
inline QuadratureGrid joint_grid(const Density& a, const Density& b,
                                 int nodes_per_axis = 4001, double k_sigma = 10.0) {
    if (a.dim() != b.dim()) throw invalid_input("joint_grid: densities differ in dimension");
    auto [alo, ahi] = a.truncation_box(k_sigma);
    auto [blo, bhi] = b.truncation_box(k_sigma);
    if (a.dim() == 1)
        return QuadratureGrid::line(std::min(alo[0], blo[0]), std::max(ahi[0], bhi[0]),
                                    nodes_per_axis);
    return QuadratureGrid::plane(std::min(alo[0], blo[0]), std::max(ahi[0], bhi[0]),
                                 std::min(alo[1], blo[1]), std::max(ahi[1], bhi[1]),
                                 nodes_per_axis);
}

/// I_f(P_d || P_g) = integral of f(p_d/p_g) p_g, with the ratio clamped
/// before f is evaluated.
inline double f_divergence(const DivergencePair& pair, const Density& pd, const Density& pg,
                           const QuadratureGrid& grid) {
    if (pd.dim() != pg.dim())
        throw invalid_input("f_divergence: densities differ in dimension");
    return integrate(std::function<double(const Vector&)>([&](const Vector& x) {
                         const double qg = pg.pdf(x);
                         return pair.f(detail::clamped_ratio(pd.pdf(x), qg)) * qg;
                     }),
                     grid);
}

/// The general classification loss over an unrestricted discriminator
/// family: (1/2) * integral of inf_a [l(a) p_d/p_g + l(-a)] p_g. The
/// infimum is solved per node, independently of the closed-form f route.
inline double general_loss_infimum(const LossSpec& loss, const Density& pd, const Density& pg,
                                   const QuadratureGrid& grid) {
    if (pd.dim() != pg.dim())
        throw invalid_input("general_loss_infimum: densities differ in dimension");
    auto pointwise = [&](const Vector& x) {
        const double qg = pg.pdf(x);
        const double t = detail::clamped_ratio(pd.pdf(x), qg);
        double inf_value;
        if (loss.kind() == LossKind::zero_one) {
            inf_value = std::min(1.0, t);
        } else {
            auto objective = [&](double a) { return loss.value(a) * t + loss.value(-a); };
            inf_value = golden_section_min(objective, -60.0, 60.0).value;
        }
        return inf_value * qg;
    };
    return 0.5 * integrate(std::function<double(const Vector&)>(pointwise), grid);
}

/// Total variation (1/2) * integral |p_d - p_g|; in [0, 1].
inline double total_variation(const Density& pd, const Density& pg, const QuadratureGrid& grid) {
    return 0.5 * integrate(std::function<double(const Vector&)>([&](const Vector& x) {
                               return std::abs(pd.pdf(x) - pg.pdf(x));
                           }),
                           grid);
}

/// Jensen-Shannon divergence via its two KL-to-midpoint integrals; in
/// [0, log 2].
inline double jensen_shannon(const Density& pd, const Density& pg, const QuadratureGrid& grid) {
    auto term = [](double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; };
    return 0.5 * integrate(std::function<double(const Vector&)>([&](const Vector& x) {
                               const double p = pd.pdf(x);
                               const double q = pg.pdf(x);
                               const double m = 0.5 * (p + q);
                               return m > 0.0 ? term(p, m) + term(q, m) : 0.0;
                           }),
                           grid);
}

/// Squared Hellinger distance as 1 minus the Bhattacharyya integral; in
/// [0, 1].
inline double hellinger_squared(const Density& pd, const Density& pg,
                                const QuadratureGrid& grid) {
    const double bc = integrate(std::function<double(const Vector&)>([&](const Vector& x) {
                                    return std::sqrt(pd.pdf(x) * pg.pdf(x));
                                }),
                                grid);
    return 1.0 - bc;
}

/// Triangular discrimination, integral of (p_d - p_g)^2 / (p_d + p_g); in
/// [0, 2].
inline double triangular_discrimination(const Density& pd, const Density& pg,
                                        const QuadratureGrid& grid) {
    return integrate(std::function<double(const Vector&)>([&](const Vector& x) {
                         const double p = pd.pdf(x);
                         const double q = pg.pdf(x);
                         const double s = p + q;
                         return s > 0.0 ? (p - q) * (p - q) / s : 0.0;
                     }),
                     grid);
}

/// The named-divergence form of the general loss, computed from the
/// divergence's own defining integral rather than from f or the pointwise
/// infimum.
inline double closed_form_risk(const DivergencePair& pair, const Density& pd, const Density& pg,
                               const QuadratureGrid& grid) {
    switch (pair.divergence) {
        case DivergenceName::zero_one_tv:
            return 0.5 * (1.0 - total_variation(pd, pg, grid));
        case DivergenceName::total_variation:
            return 1.0 - total_variation(pd, pg, grid);
        case DivergenceName::hellinger_squared:
            return 1.0 - hellinger_squared(pd, pg, grid);
        case DivergenceName::triangular:
            return 1.0 - 0.5 * triangular_discrimination(pd, pg, grid);
        case DivergenceName::jensen_shannon:
            return std::numbers::ln2 - jensen_shannon(pd, pg, grid);
    }
    return 0.0;
}

}  // namespace kgan
