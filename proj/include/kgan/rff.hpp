#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "kgan/densities.hpp"
#include "kgan/errors.hpp"

namespace kgan {

/// Random Fourier feature map for the Gaussian kernel
/// K(x, x') = exp(-0.5 (x-x')^T Sigma (x-x')), Sigma = S^T S for the given
/// square root S. Frequencies are w_i = S e_i with e_i standard normal, so
/// w_i ~ N(0, Sigma) when S is symmetric.
///
/// Output layout: the D cosine coordinates first, then the D sine
/// coordinates, each scaled by 1/sqrt(D). The layout is fixed; the kernel
/// value is invariant to it.
class FeatureMap {
  public:
    FeatureMap(int input_dim, int feature_count, Matrix sigma_half, std::mt19937_64& rng)
        : sigma_half_(std::move(sigma_half)) {
        if (sigma_half_.rows() != sigma_half_.cols())
            throw invalid_input("feature map: sigma half must be square");
        if (input_dim < 1 || sigma_half_.rows() != input_dim)
            throw invalid_input("feature map: sigma half does not match input dimension");
        if (feature_count < 1) throw invalid_input("feature map: feature count must be >= 1");
        std::normal_distribution<double> normal(0.0, 1.0);
        base_draws_.resize(feature_count, input_dim);
        for (int i = 0; i < feature_count; ++i)
            for (int j = 0; j < input_dim; ++j) base_draws_(i, j) = normal(rng);
        frequencies_ = base_draws_ * sigma_half_.transpose();
    }

    int input_dim() const { return static_cast<int>(frequencies_.cols()); }
    int feature_count() const { return static_cast<int>(frequencies_.rows()); }
    int output_dim() const { return 2 * feature_count(); }

    const Matrix& sigma_half() const { return sigma_half_; }
    /// Standard-normal draws e_i, one per row.
    const Matrix& base_draws() const { return base_draws_; }
    /// Frequencies w_i = S e_i, one per row.
    const Matrix& frequencies() const { return frequencies_; }

    Vector features(const Vector& x) const {
        check_dim(x);
        const Vector t = frequencies_ * x;
        const double scale = 1.0 / std::sqrt(static_cast<double>(feature_count()));
        Vector out(output_dim());
        out.head(feature_count()) = t.array().cos() * scale;
        out.tail(feature_count()) = t.array().sin() * scale;
        return out;
    }

    /// Feature rows for a batch of points (rows of x).
    Matrix features_batch(const Matrix& x) const {
        if (x.cols() != input_dim())
            throw invalid_input("feature map: batch has wrong point dimension");
        const Matrix t = x * frequencies_.transpose();
        const double scale = 1.0 / std::sqrt(static_cast<double>(feature_count()));
        Matrix out(x.rows(), output_dim());
        out.leftCols(feature_count()) = t.array().cos() * scale;
        out.rightCols(feature_count()) = t.array().sin() * scale;
        return out;
    }

    double approx_kernel(const Vector& x, const Vector& y) const {
        return features(x).dot(features(y));
    }

    /// Gradient of w . features(x) with respect to x.
    Vector input_gradient(const Vector& x, const Vector& w) const {
        check_dim(x);
        if (w.size() != output_dim())
            throw invalid_input("feature map: weight vector has wrong dimension");
        const Vector t = frequencies_ * x;
        const double scale = 1.0 / std::sqrt(static_cast<double>(feature_count()));
        const Vector coef = (-w.head(feature_count()).array() * t.array().sin() +
                             w.tail(feature_count()).array() * t.array().cos()) *
                            scale;
        return frequencies_.transpose() * coef;
    }

    /// Row r holds the gradient of w . features(x_r) for the batch rows x_r.
    Matrix input_gradient_batch(const Matrix& x, const Vector& w) const {
        if (x.cols() != input_dim())
            throw invalid_input("feature map: batch has wrong point dimension");
        if (w.size() != output_dim())
            throw invalid_input("feature map: weight vector has wrong dimension");
        const Matrix t = x * frequencies_.transpose();
        const double scale = 1.0 / std::sqrt(static_cast<double>(feature_count()));
        const int D = feature_count();
        const Matrix sin_t = t.array().sin();
        const Matrix cos_t = t.array().cos();
        const Matrix coef = ((cos_t.array().rowwise() * w.tail(D).transpose().array()) -
                             (sin_t.array().rowwise() * w.head(D).transpose().array())) *
                            scale;
        return coef * frequencies_;
    }

  private:
    void check_dim(const Vector& x) const {
        if (x.size() != input_dim())
            throw invalid_input("feature map: point has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(input_dim()));
    }

    Matrix sigma_half_;
    Matrix base_draws_;
    Matrix frequencies_;
};

/// Exact Gaussian kernel with Sigma = S^T S.
inline double exact_kernel(const Matrix& sigma_half, const Vector& x, const Vector& y) {
    if (x.size() != y.size() || sigma_half.cols() != x.size())
        throw invalid_input("exact_kernel: dimension mismatch");
    const Vector u = sigma_half * (x - y);
    return std::exp(-0.5 * u.squaredNorm());
}

struct ApproxError {
    double max_abs;
    double mean_abs;
};

/// Absolute kernel approximation error statistics over the given pairs.
inline ApproxError approx_error(const FeatureMap& map,
                                const std::vector<std::pair<Vector, Vector>>& pairs) {
    if (pairs.empty()) throw invalid_input("approx_error: no pairs");
    double worst = 0.0, total = 0.0;
    for (const auto& [x, y] : pairs) {
        const double err = std::abs(map.approx_kernel(x, y) - exact_kernel(map.sigma_half(), x, y));
        worst = std::max(worst, err);
        total += err;
    }
    return {worst, total / static_cast<double>(pairs.size())};
}

/// One-to-one certificate for the feature map restricted to a set of the
/// given diameter: full rank of the base draws and
/// ||S||_F * diam * max_i ||e_i|| < 2*pi.
struct InjectivityCertificate {
    bool rank_ok;
    double norm_product;
    double threshold;  // 2*pi
    bool certified;
};

inline InjectivityCertificate certify_injectivity(const FeatureMap& map, double diameter) {
    if (!(diameter > 0.0)) throw invalid_input("certify_injectivity: diameter must be positive");
    const Matrix& e = map.base_draws();
    Eigen::JacobiSVD<Matrix> svd(e);
    const auto& sv = svd.singularValues();
    // rank {e_1..e_D} = d, with a relative singular-value cutoff
    bool rank_ok = sv.size() >= map.input_dim() &&
                   sv(map.input_dim() - 1) > 1e-10 * sv(0);
    double max_row = 0.0;
    for (int i = 0; i < e.rows(); ++i) max_row = std::max(max_row, e.row(i).norm());
    const double product = map.sigma_half().norm() * diameter * max_row;
    const double threshold = 2.0 * std::numbers::pi;
    return {rank_ok, product, threshold, rank_ok && product < threshold};
}

/// Searches for x != x' with identical features: a null-space direction of
/// the frequency matrix when it is rank deficient, otherwise directions d
/// solving W d = 2*pi*e_i in least squares (commensurate candidates). Every
/// candidate is verified against the map before being returned.
inline std::optional<std::pair<Vector, Vector>> construct_collision(const FeatureMap& map) {
    const Matrix& freq = map.frequencies();
    const int d = map.input_dim();
    const Vector origin = Vector::Zero(d);
    auto collides = [&](const Vector& delta) {
        return delta.norm() > 1e-8 &&
               (map.features(origin) - map.features(delta)).norm() <= 1e-9;
    };

    Eigen::JacobiSVD<Matrix> svd(freq, Eigen::ComputeFullV | Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;

    if (rank < d) {
        Vector delta = svd.matrixV().col(d - 1);  // null direction
        delta /= delta.norm();
        if (collides(delta)) return std::make_pair(origin, delta);
    }

    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < map.feature_count(); ++i) {
        Vector rhs = Vector::Zero(map.feature_count());
        rhs[i] = two_pi;
        const Vector delta = svd.solve(rhs);
        if (collides(delta)) return std::make_pair(origin, delta);
    }
    return std::nullopt;
}

}  // namespace kgan
