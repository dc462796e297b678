#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgan/config.hpp"
#include "kgan/divergences.hpp"
#include "kgan/errors.hpp"
#include "kgan/trainer.hpp"

namespace kgan {

enum class TrainMode { dual, primal };

// Exit codes shared with the CLI.
inline constexpr int exit_ok = 0;
inline constexpr int exit_check_failure = 1;
inline constexpr int exit_invalid_input = 2;
inline constexpr int exit_diverged = 3;

/// Independent generator stream per purpose, all derived from one seed.
inline std::mt19937_64 sub_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{seed, stream};
    return std::mt19937_64(seq);
}

inline Density density_from_config(const ExperimentConfig& cfg) {
    std::vector<GaussianComponent> comps;
    const int k = cfg.mixture_components();
    const int d = cfg.data_dim;
    for (int c = 0; c < k; ++c) {
        Vector mean(d);
        for (int j = 0; j < d; ++j) mean[j] = cfg.means[c * d + j];
        Matrix cov(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) cov(i, j) = cfg.covs[c * d * d + i * d + j];
        comps.push_back({cfg.weights[c], std::move(mean), std::move(cov)});
    }
    return Density::mixture(std::move(comps));
}

inline Matrix load_points_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw invalid_input("data csv: cannot open '" + path + "'");
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int got = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++got;
        }
        if (got != dim) throw invalid_input("data csv: row with wrong dimension in " + path);
    }
    if (values.empty()) throw invalid_input("data csv: no rows in " + path);
    const int n = static_cast<int>(values.size()) / dim;
    Matrix pts(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) pts(i, j) = values[i * dim + j];
    return pts;
}

/// Hand-rolled scatter snapshot; real and generated points in two colors.
/// 1D data is spread across two horizontal bands with index-based jitter so
/// the file is byte-stable.
inline std::string scatter_svg(const Matrix& real_pts, const Matrix& gen_pts) {
    const int width = 640, height = 480, pad = 40;
    const bool one_d = real_pts.cols() == 1;
    double lox = std::numeric_limits<double>::infinity(), hix = -lox;
    double loy = lox, hiy = -lox;
    auto scan = [&](const Matrix& m) {
        for (int i = 0; i < m.rows(); ++i) {
            lox = std::min(lox, m(i, 0));
            hix = std::max(hix, m(i, 0));
            if (!one_d) {
                loy = std::min(loy, m(i, 1));
                hiy = std::max(hiy, m(i, 1));
            }
        }
    };
    scan(real_pts);
    scan(gen_pts);
    if (one_d) {
        loy = 0.0;
        hiy = 1.0;
    }
    const double spanx = hix > lox ? hix - lox : 1.0;
    const double spany = hiy > loy ? hiy - loy : 1.0;
    auto sx = [&](double x) { return pad + (x - lox) / spanx * (width - 2 * pad); };
    auto sy = [&](double y) { return height - pad - (y - loy) / spany * (height - 2 * pad); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << width - 2 * pad
       << "\" height=\"" << height - 2 * pad << "\" fill=\"none\" stroke=\"#999\"/>\n";
    auto draw = [&](const Matrix& m, const char* color, double band) {
        for (int i = 0; i < m.rows(); ++i) {
            const double x = m(i, 0);
            const double y =
                one_d ? band + 0.18 * std::fmod(0.6180339887498949 * (i + 1), 1.0) : m(i, 1);
            os << "<circle cx=\"" << format_double(sx(x)) << "\" cy=\""
               << format_double(sy(y)) << "\" r=\"3\" fill=\"" << color
               << "\" fill-opacity=\"0.5\"/>\n";
        }
    };
    draw(real_pts, "#1f77b4", 0.62);
    draw(gen_pts, "#d62728", 0.2);
    os << "</svg>\n";
    return os.str();
}

/// Total variation between the sample histogram and the target density on
/// equal-width bins over [lo, hi]; mass outside the range is compared in a
/// separate bucket. Target bin masses are exact per-component normal CDFs.
inline double histogram_tv(const std::vector<double>& samples, const Density& target, int bins,
                           double lo, double hi) {
    if (target.dim() != 1) throw invalid_input("histogram_tv: needs a 1D density");
    if (bins < 1 || !(hi > lo)) throw invalid_input("histogram_tv: bad binning");
    auto cdf = [&](double x) {
        double acc = 0.0;
        for (const auto& c : target.components())
            acc += c.weight *
                   0.5 * (1.0 + std::erf((x - c.mean[0]) / std::sqrt(2.0 * c.cov(0, 0))));
        return acc;
    };
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    double outside = 0.0;
    const double w = (hi - lo) / bins;
    for (double s : samples) {
        if (s < lo || s >= hi) {
            outside += 1.0;
            continue;
        }
        counts[static_cast<std::size_t>((s - lo) / w)] += 1.0;
    }
    const double n = static_cast<double>(samples.size());
    double tv = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double target_mass = cdf(lo + (b + 1) * w) - cdf(lo + b * w);
        tv += std::abs(counts[static_cast<std::size_t>(b)] / n - target_mass);
    }
    tv += std::abs(outside / n - (1.0 - (cdf(hi) - cdf(lo))));
    return 0.5 * tv;
}

namespace detail {

inline void write_metrics_header(std::ostream& os) {
    os << "iter,h,g_recovered,gap,div_estimate,wall_ms\n";
}

/// wall_ms is written as 0 so that metrics files are byte-identical across
/// reruns of the same seed and build; live timing goes to the console.
inline void write_metrics_row(std::ostream& os, const MetricsRow& row) {
    os << row.iter << ',' << format_double(row.h) << ',' << format_double(row.g_recovered)
       << ',' << format_double(row.gap) << ',' << format_double(row.div_estimate) << ",0\n";
}

inline void write_samples_csv(const std::string& path, const Matrix& real_pts,
                              const Matrix& gen_pts) {
    std::ofstream os(path);
    os << "label,x0";
    if (real_pts.cols() > 1) os << ",x1";
    os << "\n";
    auto rows = [&](const Matrix& m, const char* label) {
        for (int i = 0; i < m.rows(); ++i) {
            os << label << ',' << format_double(m(i, 0));
            if (m.cols() > 1) os << ',' << format_double(m(i, 1));
            os << "\n";
        }
    };
    rows(real_pts, "real");
    rows(gen_pts, "gen");
}

}  // namespace detail

/// Assembles the problem from a config, runs the selected trainer, and
/// writes metrics.csv, samples.csv, checkpoint.txt and optional SVG
/// snapshots under cfg.out. Nothing is written outside cfg.out. Returns a
/// CLI exit code; on trainer divergence partial artifacts are kept and the
/// divergence code is returned.
inline int run_experiment(const ExperimentConfig& cfg, TrainMode mode,
                          std::ostream* log = nullptr) {
    cfg.validate();
    const Density target = density_from_config(cfg);
    auto data_rng = sub_rng(cfg.seed, 1);
    Matrix real_pts;
    if (!cfg.data_csv.empty()) {
        real_pts = load_points_csv(cfg.data_csv, cfg.data_dim);
    } else {
        const auto pts = target.sample(data_rng, cfg.n_real);
        real_pts.resize(cfg.n_real, cfg.data_dim);
        for (int i = 0; i < cfg.n_real; ++i) real_pts.row(i) = pts[i].transpose();
    }

    auto noise_rng = sub_rng(cfg.seed, 2);
    NoiseSource noise = NoiseSource::gaussian(cfg.noise_dim);
    if (cfg.noise_kind == "atoms")
        noise = NoiseSource::uniform_atoms(noise.draw(noise_rng, cfg.noise_atoms));

    auto map_rng = sub_rng(cfg.seed, 3);
    FeatureMap map(cfg.data_dim, cfg.features,
                   Matrix(cfg.sigma * Matrix::Identity(cfg.data_dim, cfg.data_dim)), map_rng);
    auto gen_rng = sub_rng(cfg.seed, 4);
    Generator gen(cfg.arch, gen_rng);

    const LossSpec loss = LossSpec::from_name(cfg.loss);
    const Regularizer reg = cfg.reg == "l2" ? Regularizer::l2(cfg.lambda)
                                            : Regularizer::norm_ball(cfg.radius);
    TrainingProblem problem(real_pts, noise, map, loss, reg);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out);
    std::ofstream metrics(fs::path(cfg.out) / "metrics.csv");
    detail::write_metrics_header(metrics);

    TrainOptions opt;
    opt.steps = cfg.iters;
    opt.step_u = cfg.step_u;
    opt.step_v = cfg.step_v;
    opt.step_psi = cfg.step_psi;
    opt.step_w = cfg.step_w;
    opt.inner_steps = cfg.inner_steps;
    opt.log_interval = cfg.log_interval;
    opt.batch_atoms = cfg.noise_atoms;
    opt.seed = cfg.seed + 101;

    std::optional<Generator> last_logged = gen;
    const auto t0 = std::chrono::steady_clock::now();
    int snapshot_id = 0;
    opt.on_metrics = [&](const MetricsRow& row, const Generator& g) {
        detail::write_metrics_row(metrics, row);
        metrics.flush();
        last_logged = g;
        if (log) {
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
            *log << "iter " << row.iter << " h " << row.h << " gap " << row.gap << " div "
                 << row.div_estimate << " (" << ms << " ms)\n";
        }
        if (cfg.snapshot_svg) {
            auto eval_rng = sub_rng(cfg.seed, 900 + static_cast<std::uint64_t>(snapshot_id));
            Generator::BatchTape tape;
            const Matrix fake =
                g.forward(noise.draw(eval_rng, std::min(cfg.eval_samples, 2000)), tape);
            std::ofstream svg(fs::path(cfg.out) /
                              ("snapshot_" + std::to_string(row.iter) + ".svg"));
            svg << scatter_svg(real_pts, fake);
            ++snapshot_id;
        }
    };

    int code = exit_ok;
    TrainResult result{gen, DualState{}, PrimalState{}, {}};
    try {
        result = mode == TrainMode::dual ? train_dual(problem, gen, opt)
                                         : train_primal_baseline(problem, gen, opt);
    } catch (const diverged_error& e) {
        if (log) *log << "diverged at iteration " << e.iteration << ": " << e.what() << "\n";
        result.generator = last_logged ? *last_logged : gen;
        code = exit_diverged;
    }

    {
        std::ofstream ckpt(fs::path(cfg.out) / "checkpoint.txt");
        result.generator.save(ckpt);
        if (result.dual.u.size() > 0) {
            ckpt << "DUALSTATE\n" << result.dual.u.size() << ' ' << result.dual.v.size() << "\n";
            ckpt.precision(17);
            for (int i = 0; i < result.dual.u.size(); ++i)
                ckpt << (i ? " " : "") << result.dual.u[i];
            ckpt << "\n";
            for (int i = 0; i < result.dual.v.size(); ++i)
                ckpt << (i ? " " : "") << result.dual.v[i];
            ckpt << "\n";
        }
    }

    auto eval_rng = sub_rng(cfg.seed, 5);
    Generator::BatchTape tape;
    const Matrix fake = result.generator.forward(noise.draw(eval_rng, cfg.eval_samples), tape);
    detail::write_samples_csv((fs::path(cfg.out) / "samples.csv").string(), real_pts, fake);
    return code;
}

/// The loss/divergence identity table: for every loss and separation the
/// general-loss route and the named-divergence route, as a CSV. Returns
/// true when every row agrees within the tolerance.
inline bool verify_pairs(std::ostream& os, double tolerance = 1e-4, int nodes = 4001) {
    os << "loss,mu,lhs_general_loss,rhs_closed_form,abs_diff\n";
    const Density pd = Density::gaussian1d(0.0, 1.0);
    bool all_ok = true;
    for (const char* name : {"zeroone", "hinge", "exp", "lsq", "logistic"}) {
        const LossSpec loss = LossSpec::from_name(name);
        const DivergencePair pair = DivergencePair::for_loss(loss);
        for (double mu : {0.0, 0.5, 1.0, 2.0}) {
            const Density pg = Density::gaussian1d(mu, 1.0);
            const QuadratureGrid grid = joint_grid(pd, pg, nodes);
            const double lhs = general_loss_infimum(loss, pd, pg, grid);
            const double rhs = closed_form_risk(pair, pd, pg, grid);
            const double diff = std::abs(lhs - rhs);
            all_ok = all_ok && diff <= tolerance;
            os << loss.name() << ',' << format_double(mu) << ',' << format_double(lhs) << ','
               << format_double(rhs) << ',' << format_double(diff) << "\n";
        }
    }
    return all_ok;
}

struct KernelTestOptions {
    int dim = 2;
    int features = 2048;
    double sigma = 1.0;
    std::uint64_t seed = 7;
    int pairs = 1000;
    double ball_radius = 3.0;
};

struct KernelTestResult {
    ApproxError error;
    InjectivityCertificate certificate;
};

inline std::vector<std::pair<Vector, Vector>> sample_pairs_in_ball(int dim, int count,
                                                                   double radius,
                                                                   std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-radius, radius);
    auto draw_point = [&]() {
        Vector x(dim);
        do {
            for (int j = 0; j < dim; ++j) x[j] = unif(rng);
        } while (x.norm() > radius);
        return x;
    };
    std::vector<std::pair<Vector, Vector>> pairs;
    pairs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pairs.emplace_back(draw_point(), draw_point());
    return pairs;
}

/// Kernel approximation table: exact vs. random-feature kernel values over
/// seeded pairs in a ball, with the injectivity certificate appended as a
/// trailing comment line.
inline KernelTestResult kernel_test(std::ostream& os, const KernelTestOptions& opt) {
    auto rng = sub_rng(opt.seed, 11);
    FeatureMap map(opt.dim, opt.features,
                   Matrix(opt.sigma * Matrix::Identity(opt.dim, opt.dim)), rng);
    auto pair_rng = sub_rng(opt.seed, 12);
    const auto pairs = sample_pairs_in_ball(opt.dim, opt.pairs, opt.ball_radius, pair_rng);
    os << "pair_id,exact,approx,abs_err\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double exact = exact_kernel(map.sigma_half(), pairs[i].first, pairs[i].second);
        const double approx = map.approx_kernel(pairs[i].first, pairs[i].second);
        os << i << ',' << format_double(exact) << ',' << format_double(approx) << ','
           << format_double(std::abs(exact - approx)) << "\n";
    }
    const ApproxError err = approx_error(map, pairs);
    const InjectivityCertificate cert = certify_injectivity(map, 2.0 * opt.ball_radius);
    os << "# certificate rank_ok=" << (cert.rank_ok ? 1 : 0)
       << " norm_product=" << format_double(cert.norm_product)
       << " threshold=" << format_double(cert.threshold)
       << " certified=" << (cert.certified ? 1 : 0) << "\n";
    return {err, cert};
}

/// Aggregated verification: the 20 identity rows plus the kernel rows, one
/// line per check with pass flags. Writes <out_dir>/report.csv and returns
/// true when everything passes.
inline bool write_report(const std::string& out_dir, double identity_tolerance = 1e-4) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "report.csv");
    os << "check,lhs,rhs,tolerance,pass\n";
    bool all_ok = true;
    auto row = [&](const std::string& check, double lhs, double rhs, double tol, bool pass) {
        os << check << ',' << format_double(lhs) << ',' << format_double(rhs) << ','
           << format_double(tol) << ',' << (pass ? 1 : 0) << "\n";
        all_ok = all_ok && pass;
    };

    const Density pd = Density::gaussian1d(0.0, 1.0);
    for (const char* name : {"zeroone", "hinge", "exp", "lsq", "logistic"}) {
        const LossSpec loss = LossSpec::from_name(name);
        const DivergencePair pair = DivergencePair::for_loss(loss);
        for (double mu : {0.0, 0.5, 1.0, 2.0}) {
            const Density pg = Density::gaussian1d(mu, 1.0);
            const QuadratureGrid grid = joint_grid(pd, pg, 4001);
            const double lhs = general_loss_infimum(loss, pd, pg, grid);
            const double rhs = closed_form_risk(pair, pd, pg, grid);
            row("identity_" + loss.name() + "_mu" + format_double(mu), lhs, rhs,
                identity_tolerance, std::abs(lhs - rhs) <= identity_tolerance);
        }
    }

    KernelTestOptions kopt;
    std::ostringstream sink;
    const KernelTestResult base = kernel_test(sink, kopt);
    KernelTestOptions doubled = kopt;
    doubled.features = 2 * kopt.features;
    const KernelTestResult twice = kernel_test(sink, doubled);
    const double ratio = twice.error.mean_abs / base.error.mean_abs;
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    row("kernel_mean_abs", base.error.mean_abs, 0.0, 0.02, base.error.mean_abs <= 0.02);
    row("kernel_max_abs", base.error.max_abs, 0.0, 0.08, base.error.max_abs <= 0.08);
    row("kernel_doubling_ratio", ratio, inv_sqrt2, 0.3 * inv_sqrt2,
        std::abs(ratio - inv_sqrt2) <= 0.3 * inv_sqrt2);
    // small narrow-bandwidth map on a unit-diameter set, which the
    // certificate condition does cover
    auto cert_rng = sub_rng(17, 1);
    FeatureMap small(2, 16, Matrix(0.05 * Matrix::Identity(2, 2)), cert_rng);
    const InjectivityCertificate cert = certify_injectivity(small, 1.0);
    row("kernel_injectivity", cert.norm_product, cert.threshold, 0.0, cert.certified);
    return all_ok;
}

}  // namespace kgan
