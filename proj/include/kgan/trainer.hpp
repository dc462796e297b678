#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "kgan/errors.hpp"
#include "kgan/generator.hpp"
#include "kgan/losses.hpp"
#include "kgan/rff.hpp"

namespace kgan {

/// Discriminator-weight regularizer: the norm ball {||w|| <= C} or the
/// squared l2 penalty (lambda/2)||w||^2. Conjugates: C||theta|| (dual norm
/// of the Euclidean ball) and ||theta||^2/(2 lambda).
class Regularizer {
  public:
    enum class Kind { norm_ball, l2 };

    static Regularizer norm_ball(double radius) {
        if (!(radius > 0.0)) throw invalid_input("regularizer: ball radius must be positive");
        return Regularizer(Kind::norm_ball, radius);
    }

    static Regularizer l2(double lambda) {
        if (!(lambda > 0.0)) throw invalid_input("regularizer: lambda must be positive");
        return Regularizer(Kind::l2, lambda);
    }

    Kind kind() const { return kind_; }
    double radius() const { return param_; }
    double strength() const { return param_; }

    bool feasible(const Vector& w, double tol = 1e-9) const {
        return kind_ == Kind::l2 || w.norm() <= param_ * (1.0 + tol);
    }

    /// Finite part of the penalty; the ball contributes 0 on feasible w.
    double value(const Vector& w) const {
        return kind_ == Kind::l2 ? 0.5 * param_ * w.squaredNorm() : 0.0;
    }

    Vector gradient(const Vector& w) const {
        return kind_ == Kind::l2 ? Vector(param_ * w) : Vector(Vector::Zero(w.size()));
    }

    Vector project(const Vector& w) const {
        if (kind_ == Kind::l2) return w;
        const double n = w.norm();
        return n <= param_ ? w : Vector(w * (param_ / n));
    }

    double conjugate(const Vector& theta) const {
        return kind_ == Kind::l2 ? theta.squaredNorm() / (2.0 * param_)
                                 : param_ * theta.norm();
    }

    /// Gradient of the conjugate; for the ball the subgradient 0 is used at
    /// theta = 0.
    Vector conjugate_gradient(const Vector& theta) const {
        if (kind_ == Kind::l2) return theta / param_;
        const double n = theta.norm();
        return n > 0.0 ? Vector(theta * (param_ / n)) : Vector(Vector::Zero(theta.size()));
    }

  private:
    Regularizer(Kind k, double p) : kind_(k), param_(p) {}
    Kind kind_;
    double param_;
};

/// Dual variables of the max-max problem: one u entry per real sample, one
/// v entry per noise atom, both kept inside the conjugate domain of the
/// active loss.
struct DualState {
    Vector u;
    Vector v;
    double step_u = 0.05;
    double step_v = 0.05;
    std::int64_t iteration = 0;
};

struct PrimalState {
    Vector w;
    double step = 0.05;
};

struct MetricsRow {
    std::int64_t iter;
    double h;
    double g_recovered;
    double gap;
    double div_estimate;
};

/// A fixed finite training instance: real points with cached features, a
/// noise source, the feature map, the loss and the regularizer. The
/// generator is passed separately since training mutates it.
class TrainingProblem {
  public:
    TrainingProblem(Matrix real_points, NoiseSource noise, FeatureMap map, LossSpec loss,
                    Regularizer reg)
        : real_points_(std::move(real_points)),
          noise_(std::move(noise)),
          map_(std::move(map)),
          loss_(loss),
          reg_(reg) {
        if (real_points_.rows() < 1) throw invalid_input("training: need real samples");
        if (real_points_.cols() != map_.input_dim())
            throw invalid_input("training: real points do not match the feature map dimension");
        real_features_ = map_.features_batch(real_points_);
    }

    int sample_count() const { return static_cast<int>(real_points_.rows()); }
    const Matrix& real_points() const { return real_points_; }
    const Matrix& real_features() const { return real_features_; }
    const NoiseSource& noise() const { return noise_; }
    const FeatureMap& map() const { return map_; }
    const LossSpec& loss() const { return loss_; }
    const Regularizer& regularizer() const { return reg_; }

  private:
    Matrix real_points_;
    Matrix real_features_;
    NoiseSource noise_;
    FeatureMap map_;
    LossSpec loss_;
    Regularizer reg_;
};

namespace detail {

inline void require_discrete(const TrainingProblem& p, const char* who) {
    if (!p.noise().is_discrete())
        throw invalid_input(std::string(who) + ": needs a discrete noise source");
}

inline Vector loss_values(const LossSpec& loss, const Vector& m, double sign) {
    Vector out(m.size());
    for (int i = 0; i < m.size(); ++i) out[i] = loss.value(sign * m[i]);
    return out;
}

inline Vector loss_derivatives(const LossSpec& loss, const Vector& m, double sign) {
    Vector out(m.size());
    for (int i = 0; i < m.size(); ++i) out[i] = loss.derivative(sign * m[i]);
    return out;
}

inline Vector conjugate_values(const LossSpec& loss, const Vector& t) {
    Vector out(t.size());
    for (int i = 0; i < t.size(); ++i) out[i] = loss.conjugate(t[i]);
    return out;
}

inline Vector conjugate_derivatives(const LossSpec& loss, const Vector& t) {
    Vector out(t.size());
    for (int i = 0; i < t.size(); ++i) out[i] = loss.conjugate_derivative(t[i]);
    return out;
}

/// Clamp to the conjugate domain. Where the conjugate derivative is
/// unbounded at an endpoint (logistic, exponential) a tiny interior inset
/// keeps it evaluable; the inset points are still domain members.
inline double project_dual_scalar(const LossSpec& loss, double x) {
    switch (loss.kind()) {
        case LossKind::logistic: return std::clamp(x, -1.0 + 1e-9, -1e-9);
        case LossKind::hinge: return std::clamp(x, -1.0, 0.0);
        case LossKind::exponential: return std::min(x, -1e-12);
        case LossKind::least_square: return x;
        case LossKind::zero_one:
            throw unsupported_operation("zero-one loss has no conjugate domain");
    }
    return x;
}

inline Vector project_dual(const LossSpec& loss, Vector x) {
    for (int i = 0; i < x.size(); ++i) x[i] = project_dual_scalar(loss, x[i]);
    return x;
}

inline void check_dual_domain(const LossSpec& loss, const Vector& x, const char* name) {
    const ConjugateDomain dom = loss.conjugate_domain();
    for (int i = 0; i < x.size(); ++i)
        if (!dom.contains(x[i]))
            throw invalid_input(std::string("dual variable ") + name + "[" +
                                std::to_string(i) + "] = " + format_double(x[i]) +
                                " is outside the conjugate domain");
}

/// Fake batch pushed through generator and feature map; the tape is kept
/// for the generator gradient.
struct FakeBatch {
    Matrix points;
    Matrix features;
    Generator::BatchTape tape;
};

inline FakeBatch make_fake_batch(const TrainingProblem& p, const Generator& gen,
                                 const Matrix& atoms) {
    FakeBatch fb;
    fb.points = gen.forward(atoms, fb.tape);
    if (fb.points.cols() != p.map().input_dim())
        throw invalid_input("training: generator output does not match the feature map");
    fb.features = p.map().features_batch(fb.points);
    return fb;
}

inline Vector dual_moment(const TrainingProblem& p, const Matrix& fake_features,
                          const Vector& probs, const Vector& u, const Vector& v) {
    const double n = static_cast<double>(p.sample_count());
    return Vector(-(p.real_features().transpose() * u) / n +
                  fake_features.transpose() * probs.cwiseProduct(v));
}

}  // namespace detail

/// g_psi(w): regularizer plus the empirical real and fake loss terms. Under
/// the norm ball an infeasible w is an error, not +infinity.
inline double primal_objective(const TrainingProblem& p, const Generator& gen, const Vector& w) {
    detail::require_discrete(p, "primal_objective");
    if (w.size() != p.map().output_dim())
        throw invalid_input("primal_objective: w has wrong dimension");
    if (!p.regularizer().feasible(w))
        throw infeasible_point("primal_objective: w lies outside the norm ball");
    Generator::BatchTape tape;
    const Matrix fake = gen.forward(p.noise().atom_rows(), tape);
    const Matrix fake_features = p.map().features_batch(fake);
    const Vector real_margins = p.real_features() * w;
    const Vector fake_margins = fake_features * w;
    const double real_term =
        detail::loss_values(p.loss(), real_margins, 1.0).mean();
    const double fake_term =
        p.noise().probabilities().dot(detail::loss_values(p.loss(), fake_margins, -1.0));
    return p.regularizer().value(w) + real_term + fake_term;
}

/// h_psi(u, v): the Fenchel dual of the inner discriminator problem.
inline double dual_objective(const TrainingProblem& p, const Generator& gen, const Vector& u,
                             const Vector& v) {
    detail::require_discrete(p, "dual_objective");
    if (u.size() != p.sample_count()) throw invalid_input("dual_objective: u has wrong length");
    if (v.size() != p.noise().atom_count())
        throw invalid_input("dual_objective: v has wrong length");
    detail::check_dual_domain(p.loss(), u, "u");
    detail::check_dual_domain(p.loss(), v, "v");
    Generator::BatchTape tape;
    const Matrix fake = gen.forward(p.noise().atom_rows(), tape);
    const Matrix fake_features = p.map().features_batch(fake);
    const Vector theta =
        detail::dual_moment(p, fake_features, p.noise().probabilities(), u, v);
    const double conj_real = detail::conjugate_values(p.loss(), u).mean();
    const double conj_fake =
        p.noise().probabilities().dot(detail::conjugate_values(p.loss(), v));
    return -p.regularizer().conjugate(theta) - conj_real - conj_fake;
}

/// Primal weights induced by the dual pair: the maximizer of
/// -Omega(w) - w.theta. Unique under l2; on the ball the boundary point is
/// returned and theta = 0 has no distinguished maximizer.
inline Vector recover_primal(const TrainingProblem& p, const Generator& gen, const Vector& u,
                             const Vector& v) {
    detail::require_discrete(p, "recover_primal");
    Generator::BatchTape tape;
    const Matrix fake = gen.forward(p.noise().atom_rows(), tape);
    const Matrix fake_features = p.map().features_batch(fake);
    const Vector theta =
        detail::dual_moment(p, fake_features, p.noise().probabilities(), u, v);
    if (p.regularizer().kind() == Regularizer::Kind::norm_ball && theta.norm() == 0.0)
        throw unsupported_operation(
            "recover_primal: ball maximizer is not unique at theta = 0");
    return p.regularizer().conjugate_gradient(theta);
}

struct TrainOptions {
    std::int64_t steps = 1000;
    double step_u = 0.05;
    double step_v = 0.05;
    double step_psi = 0.01;
    std::int64_t log_interval = 100;
    int batch_atoms = 256;      // fresh atoms per step under Gaussian noise
    int inner_steps = 5;        // primal baseline: w steps per psi step
    double step_w = 0.05;
    std::uint64_t seed = 1;     // batch draws under Gaussian noise
    std::optional<Vector> w0;   // primal baseline start
    std::function<void(const MetricsRow&, const Generator&)> on_metrics;

    void validate() const {
        if (steps < 0) throw invalid_config("train: steps must be >= 0");
        if (!(step_u > 0.0) || !(step_v > 0.0) || !(step_psi > 0.0) || !(step_w > 0.0))
            throw invalid_config("train: step sizes must be positive");
        if (log_interval < 1) throw invalid_config("train: log interval must be >= 1");
        if (batch_atoms < 1) throw invalid_config("train: batch atoms must be >= 1");
        if (inner_steps < 0) throw invalid_config("train: inner steps must be >= 0");
    }
};

struct TrainResult {
    Generator generator;
    DualState dual;
    PrimalState primal;
    std::vector<MetricsRow> trace;
};

namespace detail {

struct StepEval {
    Vector theta;
    Vector w_tilde;
    Vector real_margins;
    Vector fake_margins;
};

inline StepEval evaluate_step(const TrainingProblem& p, const FakeBatch& fb,
                              const Vector& probs, const Vector& u, const Vector& v) {
    StepEval e;
    e.theta = dual_moment(p, fb.features, probs, u, v);
    e.w_tilde = p.regularizer().conjugate_gradient(e.theta);
    e.real_margins = p.real_features() * e.w_tilde;
    e.fake_margins = fb.features * e.w_tilde;
    return e;
}

inline double dual_value(const TrainingProblem& p, const Vector& theta, const Vector& probs,
                         const Vector& u, const Vector& v) {
    return -p.regularizer().conjugate(theta) -
           conjugate_values(p.loss(), u).mean() -
           probs.dot(conjugate_values(p.loss(), v));
}

/// Empirical divergence estimate from the current discriminator:
/// -2 * empirical general loss shifted by f(1) = -2 l(0), nonnegative once
/// the recovered discriminator beats w = 0.
inline double divergence_estimate(const TrainingProblem& p, const Vector& real_margins,
                                  const Vector& fake_margins, const Vector& probs) {
    const double risk = 0.5 * (loss_values(p.loss(), real_margins, 1.0).mean() +
                               probs.dot(loss_values(p.loss(), fake_margins, -1.0)));
    return 2.0 * p.loss().value(0.0) - 2.0 * risk;
}

inline MetricsRow make_metrics(const TrainingProblem& p, const FakeBatch& fb,
                               const Vector& probs, const Vector& u, const Vector& v,
                               std::int64_t iter) {
    const StepEval e = evaluate_step(p, fb, probs, u, v);
    const double h = dual_value(p, e.theta, probs, u, v);
    const double reg_term = p.regularizer().value(e.w_tilde);
    const double g = reg_term + loss_values(p.loss(), e.real_margins, 1.0).mean() +
                     probs.dot(loss_values(p.loss(), e.fake_margins, -1.0));
    return {iter, h, g, g - h, divergence_estimate(p, e.real_margins, e.fake_margins, probs)};
}

}  // namespace detail

/// Simultaneous ascent on the max-max objective: every step moves u and v
/// (projected back into the conjugate domain) and psi from the same
/// snapshot. Dual gradients are taken per sample, i.e. without the 1/N and
/// pi_j weights, so the step sizes are instance-size independent.
///
/// With discrete noise the atoms are fixed and (u, v) persist (the setting
/// where the max-max and max-min problems coincide). Under Gaussian noise a
/// fresh batch is drawn each step and v is warm-started at l' of the
/// current margins.
inline TrainResult train_dual(const TrainingProblem& p, Generator gen,
                              const TrainOptions& opt) {
    opt.validate();
    if (!p.loss().is_convex()) throw invalid_config("train_dual: loss must be convex");
    if (p.noise().dim() != gen.noise_dim())
        throw invalid_config("train_dual: noise source does not match the generator");

    const bool discrete = p.noise().is_discrete();
    std::mt19937_64 rng(opt.seed);

    const double u_init = detail::project_dual_scalar(p.loss(), p.loss().derivative(0.0));
    DualState dual;
    dual.step_u = opt.step_u;
    dual.step_v = opt.step_v;
    dual.u = Vector::Constant(p.sample_count(), u_init);
    const int atom_count = discrete ? p.noise().atom_count() : opt.batch_atoms;
    dual.v = Vector::Constant(atom_count, u_init);
    Vector probs = discrete ? p.noise().probabilities()
                            : Vector::Constant(atom_count, 1.0 / atom_count);

    std::vector<MetricsRow> trace;
    Vector last_w = Vector::Zero(p.map().output_dim());

    for (std::int64_t step = 0; step < opt.steps; ++step) {
        Matrix atoms = discrete ? p.noise().atom_rows() : p.noise().draw(rng, atom_count);
        detail::FakeBatch fb = detail::make_fake_batch(p, gen, atoms);
        if (!discrete) {
            // warm start at the Fenchel argmax for the current margins
            dual.v = detail::project_dual(
                p.loss(), detail::loss_derivatives(p.loss(), fb.features * last_w, -1.0));
        }

        const detail::StepEval e = detail::evaluate_step(p, fb, probs, dual.u, dual.v);
        last_w = e.w_tilde;

        const Vector gu =
            e.real_margins - detail::conjugate_derivatives(p.loss(), dual.u);
        const Vector gv =
            -e.fake_margins - detail::conjugate_derivatives(p.loss(), dual.v);

        // generator ascent direction from the same snapshot
        const Matrix gx = p.map().input_gradient_batch(fb.points, e.w_tilde);
        Generator::Gradients grads = gen.zero_gradients();
        gen.accumulate_backward(fb.tape, gx, Vector(-probs.cwiseProduct(dual.v)), grads);

        dual.u = detail::project_dual(p.loss(), Vector(dual.u + opt.step_u * gu));
        dual.v = detail::project_dual(p.loss(), Vector(dual.v + opt.step_v * gv));
        gen.apply_ascent(grads, opt.step_psi);
        dual.iteration = step + 1;

        if ((step + 1) % opt.log_interval == 0 || step + 1 == opt.steps) {
            detail::FakeBatch now = detail::make_fake_batch(p, gen, atoms);
            MetricsRow row = detail::make_metrics(p, now, probs, dual.u, dual.v, step + 1);
            if (!std::isfinite(row.h) || !std::isfinite(row.g_recovered))
                throw diverged_error("train_dual: objective became non-finite", step + 1);
            trace.push_back(row);
            if (opt.on_metrics) opt.on_metrics(row, gen);
        }
    }
    PrimalState primal{last_w, opt.step_w};
    return {std::move(gen), std::move(dual), std::move(primal), std::move(trace)};
}

/// Alternating baseline on the max-min form: inner_steps projected descent
/// steps on w, then one ascent step on psi, per outer iteration. The trace
/// reports the same schema, with h taken at the Fenchel argmax duals
/// implied by the current w.
inline TrainResult train_primal_baseline(const TrainingProblem& p, Generator gen,
                                         const TrainOptions& opt) {
    opt.validate();
    if (!p.loss().is_convex())
        throw invalid_config("train_primal_baseline: loss must be convex");
    if (p.noise().dim() != gen.noise_dim())
        throw invalid_config("train_primal_baseline: noise source does not match the generator");

    const bool discrete = p.noise().is_discrete();
    std::mt19937_64 rng(opt.seed);
    const double n = static_cast<double>(p.sample_count());
    const int atom_count = discrete ? p.noise().atom_count() : opt.batch_atoms;
    Vector probs = discrete ? p.noise().probabilities()
                            : Vector::Constant(atom_count, 1.0 / atom_count);

    Vector w = opt.w0 ? *opt.w0 : Vector(Vector::Zero(p.map().output_dim()));
    if (w.size() != p.map().output_dim())
        throw invalid_config("train_primal_baseline: w0 has wrong dimension");
    w = p.regularizer().project(w);

    std::vector<MetricsRow> trace;
    for (std::int64_t step = 0; step < opt.steps; ++step) {
        Matrix atoms = discrete ? p.noise().atom_rows() : p.noise().draw(rng, atom_count);
        detail::FakeBatch fb = detail::make_fake_batch(p, gen, atoms);

        for (int k = 0; k < opt.inner_steps; ++k) {
            const Vector real_margins = p.real_features() * w;
            const Vector fake_margins = fb.features * w;
            const Vector grad =
                p.regularizer().gradient(w) +
                p.real_features().transpose() *
                    detail::loss_derivatives(p.loss(), real_margins, 1.0) / n -
                fb.features.transpose() *
                    probs.cwiseProduct(detail::loss_derivatives(p.loss(), fake_margins, -1.0));
            w = p.regularizer().project(Vector(w - opt.step_w * grad));
        }

        const Vector fake_margins = fb.features * w;
        Generator::Gradients grads = gen.zero_gradients();
        const Matrix gx = p.map().input_gradient_batch(fb.points, w);
        const Vector scales =
            -probs.cwiseProduct(detail::loss_derivatives(p.loss(), fake_margins, -1.0));
        gen.accumulate_backward(fb.tape, gx, scales, grads);
        gen.apply_ascent(grads, opt.step_psi);

        if ((step + 1) % opt.log_interval == 0 || step + 1 == opt.steps) {
            detail::FakeBatch now = detail::make_fake_batch(p, gen, atoms);
            const Vector u = detail::project_dual(
                p.loss(), detail::loss_derivatives(p.loss(), p.real_features() * w, 1.0));
            const Vector v = detail::project_dual(
                p.loss(), detail::loss_derivatives(p.loss(), now.features * w, -1.0));
            MetricsRow row = detail::make_metrics(p, now, probs, u, v, step + 1);
            if (!std::isfinite(row.h) || !std::isfinite(row.g_recovered))
                throw diverged_error("train_primal_baseline: objective became non-finite",
                                     step + 1);
            trace.push_back(row);
            if (opt.on_metrics) opt.on_metrics(row, gen);
        }
    }
    DualState dual;
    dual.u = detail::project_dual(
        p.loss(), detail::loss_derivatives(p.loss(), p.real_features() * w, 1.0));
    {
        detail::FakeBatch fb = detail::make_fake_batch(
            p, gen, discrete ? p.noise().atom_rows() : p.noise().draw(rng, atom_count));
        dual.v = detail::project_dual(
            p.loss(), detail::loss_derivatives(p.loss(), fb.features * w, -1.0));
    }
    dual.iteration = opt.steps;
    PrimalState primal{w, opt.step_w};
    return {std::move(gen), std::move(dual), std::move(primal), std::move(trace)};
}

/// Gradient of h with respect to the generator parameters, for gradient
/// checks: the chain conjugate-gradient of Omega -> feature Jacobian ->
/// generator backward.
inline Generator::Gradients dual_generator_gradient(const TrainingProblem& p,
                                                    const Generator& gen, const Vector& u,
                                                    const Vector& v) {
    detail::require_discrete(p, "dual_generator_gradient");
    detail::FakeBatch fb = detail::make_fake_batch(p, gen, p.noise().atom_rows());
    const Vector probs = p.noise().probabilities();
    const detail::StepEval e = detail::evaluate_step(p, fb, probs, u, v);
    const Matrix gx = p.map().input_gradient_batch(fb.points, e.w_tilde);
    Generator::Gradients grads = gen.zero_gradients();
    gen.accumulate_backward(fb.tape, gx, Vector(-probs.cwiseProduct(v)), grads);
    return grads;
}

struct GapAudit {
    double primal_opt;
    double dual_opt;
    double gap;
    Vector w;
    Vector u;
    Vector v;
    std::int64_t primal_iterations;
    std::int64_t dual_iterations;
};

struct AuditOptions {
    double gradient_tol = 1e-8;
    std::int64_t max_iterations = 500000;
};

namespace detail {

/// min_w g(w) by projected gradient descent with a backtracking step. For
/// the hinge loss g is piecewise quadratic under l2, so the minimizer is
/// refined by an active-set fixed point that lands in the interior of a
/// smooth piece.
inline std::pair<Vector, std::int64_t> minimize_primal(const TrainingProblem& p,
                                                       const Matrix& fake_features,
                                                       const Vector& probs,
                                                       const AuditOptions& opt) {
    const double n = static_cast<double>(p.sample_count());
    auto objective = [&](const Vector& w) {
        return p.regularizer().value(w) + loss_values(p.loss(), p.real_features() * w, 1.0).mean() +
               probs.dot(loss_values(p.loss(), fake_features * w, -1.0));
    };
    auto gradient = [&](const Vector& w) {
        return Vector(p.regularizer().gradient(w) +
                      p.real_features().transpose() *
                          loss_derivatives(p.loss(), p.real_features() * w, 1.0) / n -
                      fake_features.transpose() *
                          probs.cwiseProduct(loss_derivatives(p.loss(), fake_features * w, -1.0)));
    };

    Vector w = Vector::Zero(p.map().output_dim());

    if (p.loss().kind() == LossKind::hinge &&
        p.regularizer().kind() == Regularizer::Kind::l2) {
        // active-set fixed point: on a fixed piece the gradient is
        // lambda * w + const, so the piece minimizer is closed form
        const double lambda = p.regularizer().strength();
        std::int64_t it = 0;
        for (; it < opt.max_iterations; ++it) {
            const Vector real_margins = p.real_features() * w;
            const Vector fake_margins = fake_features * w;
            Vector target = Vector::Zero(w.size());
            for (int i = 0; i < real_margins.size(); ++i)
                if (real_margins[i] < 1.0) target += p.real_features().row(i).transpose() / n;
            for (int j = 0; j < fake_margins.size(); ++j)
                if (-fake_margins[j] < 1.0)
                    target -= probs[j] * fake_features.row(j).transpose();
            target /= lambda;
            if ((target - w).norm() <= 1e-14 * (1.0 + w.norm())) {
                w = target;
                break;
            }
            // damp toward the piece minimizer when a full jump overshoots
            double theta = 1.0;
            Vector cand = target;
            const double g0 = objective(w);
            while (theta > 1e-12 && objective(cand) > g0) {
                theta *= 0.5;
                cand = w + theta * (target - w);
            }
            if (theta <= 1e-12) break;  // pinned at a kink, no descent left
            w = cand;
        }
        return {w, it};
    }

    double step = 1.0;
    std::int64_t it = 0;
    double g0 = objective(w);
    for (; it < opt.max_iterations; ++it) {
        const Vector grad = gradient(w);
        const Vector probe = p.regularizer().project(Vector(w - grad));
        if ((w - probe).norm() <= opt.gradient_tol) break;
        Vector cand = p.regularizer().project(Vector(w - step * grad));
        double gc = objective(cand);
        // backtracking on the projected step
        while (step > 1e-16 &&
               gc > g0 + grad.dot(cand - w) + (cand - w).squaredNorm() / (2.0 * step)) {
            step *= 0.5;
            cand = p.regularizer().project(Vector(w - step * grad));
            gc = objective(cand);
        }
        w = cand;
        g0 = gc;
        step = std::min(step * 1.5, 1e6);
    }
    return {w, it};
}

/// max_{u,v} h by projected gradient ascent with backtracking.
inline std::tuple<Vector, Vector, std::int64_t> maximize_dual(const TrainingProblem& p,
                                                              const Matrix& fake_features,
                                                              const Vector& probs,
                                                              const AuditOptions& opt) {
    const double n = static_cast<double>(p.sample_count());
    const int nn = p.sample_count();
    const int m = static_cast<int>(probs.size());

    auto value = [&](const Vector& u, const Vector& v) {
        const Vector theta = Vector(-(p.real_features().transpose() * u) / n +
                                    fake_features.transpose() * probs.cwiseProduct(v));
        return dual_value(p, theta, probs, u, v);
    };
    auto gradients = [&](const Vector& u, const Vector& v) {
        const Vector theta = Vector(-(p.real_features().transpose() * u) / n +
                                    fake_features.transpose() * probs.cwiseProduct(v));
        const Vector w = p.regularizer().conjugate_gradient(theta);
        const Vector gu =
            (p.real_features() * w - conjugate_derivatives(p.loss(), u)) / n;
        const Vector gv = probs.cwiseProduct(
            Vector(-(fake_features * w) - conjugate_derivatives(p.loss(), v)));
        return std::make_pair(gu, gv);
    };

    const double init = project_dual_scalar(p.loss(), p.loss().derivative(0.0));
    Vector u = Vector::Constant(nn, init);
    Vector v = Vector::Constant(m, init);
    double step = 1.0;
    double h0 = value(u, v);
    std::int64_t it = 0;
    for (; it < opt.max_iterations; ++it) {
        auto [gu, gv] = gradients(u, v);
        const Vector pu = project_dual(p.loss(), Vector(u + gu));
        const Vector pv = project_dual(p.loss(), Vector(v + gv));
        const double residual =
            std::sqrt((u - pu).squaredNorm() + (v - pv).squaredNorm());
        if (residual <= opt.gradient_tol) break;
        Vector cu = project_dual(p.loss(), Vector(u + step * gu));
        Vector cv = project_dual(p.loss(), Vector(v + step * gv));
        double hc = value(cu, cv);
        while (step > 1e-16 &&
               hc < h0 + gu.dot(cu - u) + gv.dot(cv - v) -
                        ((cu - u).squaredNorm() + (cv - v).squaredNorm()) / (2.0 * step)) {
            step *= 0.5;
            cu = project_dual(p.loss(), Vector(u + step * gu));
            cv = project_dual(p.loss(), Vector(v + step * gv));
            hc = value(cu, cv);
        }
        u = cu;
        v = cv;
        h0 = hc;
        step = std::min(step * 1.5, 1e6);
    }
    return {u, v, it};
}

}  // namespace detail

/// Freezes the generator and solves both sides of the inner problem to the
/// requested tolerance: the convex primal minimum over w and the concave
/// dual maximum over (u, v). The gap certifies (or refutes) strong duality
/// for the instance.
inline GapAudit duality_gap_audit(const TrainingProblem& p, const Generator& gen,
                                  const AuditOptions& opt = {}) {
    detail::require_discrete(p, "duality_gap_audit");
    if (!p.loss().is_convex()) throw invalid_config("duality_gap_audit: loss must be convex");
    detail::FakeBatch fb = detail::make_fake_batch(p, gen, p.noise().atom_rows());
    const Vector probs = p.noise().probabilities();

    auto [w, primal_iters] = detail::minimize_primal(p, fb.features, probs, opt);
    auto [u, v, dual_iters] = detail::maximize_dual(p, fb.features, probs, opt);

    const double primal_opt = primal_objective(p, gen, w);
    const double dual_opt = dual_objective(p, gen, u, v);
    if (primal_iters >= opt.max_iterations || dual_iters >= opt.max_iterations)
        throw budget_exceeded("duality_gap_audit: iteration budget exhausted", primal_opt,
                              dual_opt);
    return {primal_opt, dual_opt, primal_opt - dual_opt, w, u, v, primal_iters, dual_iters};
}

}  // namespace kgan
