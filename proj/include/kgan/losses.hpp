#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "kgan/errors.hpp"
#include "kgan/numeric.hpp"

namespace kgan {

enum class LossKind { logistic, hinge, exponential, least_square, zero_one };

/// Closed interval, possibly unbounded on either side.
struct ConjugateDomain {
    double lo;
    double hi;
    bool contains(double t) const { return t >= lo && t <= hi; }
};

/// A decreasing classification loss together with its derivative and, for
/// the convex members, the closed-form Fenchel conjugate
/// l*(t) = sup_a (t*a - l(a)).
///
/// Conjugates follow the supremum convention throughout, which places the
/// logistic and hinge conjugate domains at [-1, 0]; the convention
/// 0*log(0) = 0 applies.
class LossSpec {
  public:
    static LossSpec logistic() { return LossSpec(LossKind::logistic); }
    static LossSpec hinge() { return LossSpec(LossKind::hinge); }
    static LossSpec exponential() { return LossSpec(LossKind::exponential); }
    static LossSpec least_square() { return LossSpec(LossKind::least_square); }
    static LossSpec zero_one() { return LossSpec(LossKind::zero_one); }

    /// Accepts the CLI/config names: logistic, hinge, exp, lsq, zeroone.
    static LossSpec from_name(std::string_view name) {
        if (name == "logistic") return logistic();
        if (name == "hinge") return hinge();
        if (name == "exp" || name == "exponential") return exponential();
        if (name == "lsq" || name == "least-square") return least_square();
        if (name == "zeroone" || name == "zero-one") return zero_one();
        throw invalid_input("unknown loss name '" + std::string(name) + "'");
    }

    LossKind kind() const { return kind_; }

    std::string name() const {
        switch (kind_) {
            case LossKind::logistic: return "logistic";
            case LossKind::hinge: return "hinge";
            case LossKind::exponential: return "exp";
            case LossKind::least_square: return "lsq";
            case LossKind::zero_one: return "zeroone";
        }
        return "?";
    }

    bool is_convex() const { return kind_ != LossKind::zero_one; }

    /// Differentiable everywhere (excludes hinge and zero-one).
    bool is_smooth() const {
        return kind_ == LossKind::logistic || kind_ == LossKind::exponential ||
               kind_ == LossKind::least_square;
    }

    double value(double a) const {
        switch (kind_) {
            case LossKind::logistic:
                // log(1 + exp(-a)) without overflow for large |a|
                return a < 0.0 ? -a + std::log1p(std::exp(a)) : std::log1p(std::exp(-a));
            case LossKind::hinge: return std::max(0.0, 1.0 - a);
            case LossKind::exponential: return std::exp(-a);
            case LossKind::least_square: return (1.0 - a) * (1.0 - a);
            case LossKind::zero_one: return a <= 0.0 ? 1.0 : 0.0;
        }
        return 0.0;
    }

    /// Derivative; at the hinge kink the subgradient 0 is chosen so the
    /// gradient vanishes on correctly classified margin points. Zero-one
    /// returns its a.e. derivative 0.
    double derivative(double a) const {
        switch (kind_) {
            case LossKind::logistic: return -1.0 / (1.0 + std::exp(a));
            case LossKind::hinge: return a < 1.0 ? -1.0 : 0.0;
            case LossKind::exponential: return -std::exp(-a);
            case LossKind::least_square: return 2.0 * a - 2.0;
            case LossKind::zero_one: return 0.0;
        }
        return 0.0;
    }

    ConjugateDomain conjugate_domain() const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (kind_) {
            case LossKind::logistic: return {-1.0, 0.0};
            case LossKind::hinge: return {-1.0, 0.0};
            case LossKind::exponential: return {-inf, 0.0};
            case LossKind::least_square: return {-inf, inf};
            case LossKind::zero_one:
                throw unsupported_operation("zero-one loss has no convex conjugate");
        }
        return {0.0, 0.0};
    }

    /// Closed-form l*(t); +infinity outside the conjugate domain.
    double conjugate(double t) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (kind_) {
            case LossKind::logistic:
                if (t < -1.0 || t > 0.0) return inf;
                return xlogx(1.0 + t) + xlogx(-t);
            case LossKind::hinge:
                if (t < -1.0 || t > 0.0) return inf;
                return t;
            case LossKind::exponential:
                if (t > 0.0) return inf;
                return -xlogx(-t) + t;
            case LossKind::least_square:
                return 0.25 * t * t + t;
            case LossKind::zero_one:
                throw unsupported_operation("zero-one loss has no convex conjugate");
        }
        return 0.0;
    }

    /// d/dt l*(t) on the interior of the conjugate domain.
    double conjugate_derivative(double t) const {
        switch (kind_) {
            case LossKind::logistic:
                if (t <= -1.0 || t >= 0.0)
                    throw invalid_input("logistic conjugate derivative needs t in (-1, 0)");
                return std::log1p(t) - std::log(-t);
            case LossKind::hinge:
                if (t < -1.0 || t > 0.0)
                    throw invalid_input("hinge conjugate derivative needs t in [-1, 0]");
                return 1.0;
            case LossKind::exponential:
                if (t >= 0.0)
                    throw invalid_input("exponential conjugate derivative needs t < 0");
                return -std::log(-t);
            case LossKind::least_square:
                return 1.0 + 0.5 * t;
            case LossKind::zero_one:
                throw unsupported_operation("zero-one loss has no convex conjugate");
        }
        return 0.0;
    }

  private:
    explicit LossSpec(LossKind k) : kind_(k) {}
    LossKind kind_;
};

struct ConjugateEstimate {
    double value;
    /// The supremum was attained at the search boundary: t is outside the
    /// effective conjugate domain and the true supremum diverges.
    bool boundary_warning;
};

/// Grid supremum of t*a - l(a) on [-search_bound, search_bound], refined by
/// golden section around the best node. Oracle for the closed forms.
inline ConjugateEstimate conjugate_numeric(const LossSpec& loss, double t,
                                           double search_bound = 50.0, int grid_size = 4001) {
    if (grid_size < 1001) throw invalid_input("conjugate_numeric: grid_size must be >= 1001");
    if (!(search_bound > 0.0)) throw invalid_input("conjugate_numeric: bound must be positive");
    auto objective = [&](double a) { return t * a - loss.value(a); };
    const double h = 2.0 * search_bound / (grid_size - 1);
    int best = 0;
    double best_val = objective(-search_bound);
    for (int i = 1; i < grid_size; ++i) {
        const double v = objective(-search_bound + i * h);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best == 0 || best == grid_size - 1) return {best_val, true};
    const double lo = -search_bound + (best - 1) * h;
    const double hi = -search_bound + (best + 1) * h;
    return {golden_section_max(objective, lo, hi).value, false};
}

/// Young inequality residual l(s) + l*(t) - s*t. Nonnegative for t in the
/// conjugate domain; zero exactly when t is the derivative at s.
inline double check_young(const LossSpec& loss, double s, double t) {
    if (!loss.conjugate_domain().contains(t))
        throw invalid_input("check_young: t = " + format_double(t) +
                            " is outside the conjugate domain");
    return loss.value(s) + loss.conjugate(t) - s * t;
}

/// |d l*(dl(s)) - s|, the Legendre transform identity residual. Defined for
/// the strictly convex differentiable losses only.
inline double check_legendre(const LossSpec& loss, double s) {
    if (!loss.is_smooth())
        throw unsupported_operation("check_legendre: loss must be strictly convex and smooth");
    return std::abs(loss.conjugate_derivative(loss.derivative(s)) - s);
}

}  // namespace kgan
