#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "kgan/errors.hpp"
#include "kgan/numeric.hpp"

namespace kgan {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct GaussianComponent {
    double weight;
    Vector mean;
    Matrix cov;
};

/// Finite Gaussian mixture with exact pdf, a seeded sampler, and a
/// conservative truncation box. Serves as the analytic ground truth the
/// divergence checks integrate against.
class Density {
  public:
    static Density gaussian(Vector mean, Matrix cov) {
        std::vector<GaussianComponent> comps;
        comps.push_back({1.0, std::move(mean), std::move(cov)});
        return Density(std::move(comps));
    }

    static Density gaussian1d(double mean, double variance) {
        Vector m(1);
        m << mean;
        Matrix c(1, 1);
        c << variance;
        return gaussian(std::move(m), std::move(c));
    }

    static Density mixture(std::vector<GaussianComponent> components) {
        return Density(std::move(components));
    }

    int dim() const { return dim_; }
    const std::vector<GaussianComponent>& components() const { return components_; }

    double pdf(const Vector& x) const {
        if (x.size() != dim_)
            throw invalid_input("pdf: point has dimension " + std::to_string(x.size()) +
                                ", density has dimension " + std::to_string(dim_));
        double total = 0.0;
        for (std::size_t k = 0; k < components_.size(); ++k) {
            const Vector d = x - components_[k].mean;
            const Vector half = prepared_[k].chol.matrixL().solve(d);
            total += components_[k].weight *
                     std::exp(-0.5 * half.squaredNorm() - prepared_[k].log_norm);
        }
        return total;
    }

    double pdf(double x) const {
        Vector v(1);
        v << x;
        return pdf(v);
    }

    /// n i.i.d. draws; component by weight, then Gaussian via the Cholesky
    /// factor. Deterministic for a fixed generator state.
    std::vector<Vector> sample(std::mt19937_64& rng, int n) const {
        if (n < 1) throw invalid_input("sample: n must be >= 1");
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<Vector> out;
        out.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double r = unif(rng);
            std::size_t k = 0;
            double acc = components_[0].weight;
            while (k + 1 < components_.size() && r > acc) {
                ++k;
                acc += components_[k].weight;
            }
            Vector z(dim_);
            for (int j = 0; j < dim_; ++j) z[j] = normal(rng);
            out.push_back(components_[k].mean +
                          prepared_[k].chol.matrixL() * z);
        }
        return out;
    }

    /// Axis-aligned box of mean +/- k standard deviations, unioned over
    /// components. Gaussian mass outside k = 10 is below 1e-22 per axis,
    /// negligible at the tolerances used here.
    std::pair<Vector, Vector> truncation_box(double k = 10.0) const {
        Vector lo = Vector::Constant(dim_, std::numeric_limits<double>::infinity());
        Vector hi = -lo;
        for (const auto& c : components_) {
            for (int j = 0; j < dim_; ++j) {
                const double sd = std::sqrt(c.cov(j, j));
                lo[j] = std::min(lo[j], c.mean[j] - k * sd);
                hi[j] = std::max(hi[j], c.mean[j] + k * sd);
            }
        }
        return {lo, hi};
    }

  private:
    struct Prepared {
        Eigen::LLT<Matrix> chol;
        double log_norm;  // log((2*pi)^{d/2} |Sigma|^{1/2})
    };

    explicit Density(std::vector<GaussianComponent> comps)
        : components_(std::move(comps)) {
        if (components_.empty()) throw invalid_input("density: no components");
        dim_ = static_cast<int>(components_.front().mean.size());
        double wsum = 0.0;
        for (const auto& c : components_) {
            if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_)
                throw invalid_input("density: component dimensions disagree");
            if (c.weight < 0.0) throw invalid_input("density: negative weight");
            wsum += c.weight;
            const double scale = c.cov.cwiseAbs().maxCoeff();
            if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
                throw invalid_input("density: covariance not symmetric");
            Eigen::LLT<Matrix> chol(c.cov);
            if (chol.info() != Eigen::Success)
                throw invalid_input("density: covariance not positive-definite");
            double logdet = 0.0;
            for (int j = 0; j < dim_; ++j) logdet += std::log(chol.matrixL()(j, j));
            prepared_.push_back(
                {std::move(chol), 0.5 * dim_ * std::log(2.0 * std::numbers::pi) + logdet});
        }
        if (std::abs(wsum - 1.0) > 1e-12)
            throw invalid_input("density: weights sum to " + std::to_string(wsum));
    }

    std::vector<GaussianComponent> components_;
    std::vector<Prepared> prepared_;
    int dim_;
};

/// Composite Simpson rule on a 1D interval or a 2D tensor-product box.
struct QuadratureGrid {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    int nodes_per_axis = 0;  // odd, >= 3

    static QuadratureGrid line(double lo, double hi, int nodes) {
        QuadratureGrid g;
        g.dim = 1;
        g.lo[0] = lo;
        g.hi[0] = hi;
        g.nodes_per_axis = nodes;
        g.validate();
        return g;
    }

    static QuadratureGrid plane(double lox, double hix, double loy, double hiy, int nodes) {
        QuadratureGrid g;
        g.dim = 2;
        g.lo = {lox, loy};
        g.hi = {hix, hiy};
        g.nodes_per_axis = nodes;
        g.validate();
        return g;
    }

    void validate() const {
        if (dim != 1 && dim != 2) throw invalid_input("grid: dimension must be 1 or 2");
        if (nodes_per_axis < 3 || nodes_per_axis % 2 == 0)
            throw invalid_input("grid: nodes per axis must be odd and >= 3 (Simpson)");
        for (int a = 0; a < dim; ++a) {
            if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || !(lo[a] < hi[a]))
                throw invalid_input("grid: bounds must be finite and ordered");
        }
    }
};

namespace detail {

inline double simpson_weight(int i, int n) {
    if (i == 0 || i == n - 1) return 1.0;
    return (i % 2 == 1) ? 4.0 : 2.0;
}

}  // namespace detail

/// Composite Simpson estimate of the integral of g over the grid.
/// Error is O(h^4) for smooth integrands.
inline double integrate(const std::function<double(const Vector&)>& g,
                        const QuadratureGrid& grid) {
    grid.validate();
    const int n = grid.nodes_per_axis;
    double total = 0.0;
    if (grid.dim == 1) {
        const double h = (grid.hi[0] - grid.lo[0]) / (n - 1);
        Vector x(1);
        for (int i = 0; i < n; ++i) {
            x[0] = grid.lo[0] + i * h;
            const double v = g(x);
            if (!std::isfinite(v))
                throw numeric_error("integrate: non-finite value at node x = " +
                                    format_double(x[0]));
            total += detail::simpson_weight(i, n) * v;
        }
        return total * h / 3.0;
    }
    const double hx = (grid.hi[0] - grid.lo[0]) / (n - 1);
    const double hy = (grid.hi[1] - grid.lo[1]) / (n - 1);
    Vector x(2);
    for (int i = 0; i < n; ++i) {
        x[0] = grid.lo[0] + i * hx;
        const double wi = detail::simpson_weight(i, n);
        for (int j = 0; j < n; ++j) {
            x[1] = grid.lo[1] + j * hy;
            const double v = g(x);
            if (!std::isfinite(v))
                throw numeric_error("integrate: non-finite value at node (" +
                                    format_double(x[0]) + ", " + format_double(x[1]) + ")");
            total += wi * detail::simpson_weight(j, n) * v;
        }
    }
    return total * hx * hy / 9.0;
}

inline double integrate(const std::function<double(double)>& g, const QuadratureGrid& grid) {
    if (grid.dim != 1) throw invalid_input("integrate: scalar integrand needs a 1D grid");
    return integrate(std::function<double(const Vector&)>(
                         [&](const Vector& x) { return g(x[0]); }),
                     grid);
}

}  // namespace kgan
