// Command-line front end: train, verify-pairs, kernel-test, duality-gap,
// report. Exit codes: 0 ok, 1 check failure, 2 invalid input, 3 numeric
// divergence.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "kgan/experiment.hpp"

namespace {

kgan::ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                                   const std::string& out_override,
                                   const std::string& loss_override) {
    kgan::ExperimentConfig cfg;
    if (!path.empty()) cfg = kgan::parse_config(path);
    if (seed_override != 0) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out = out_override;
    if (!loss_override.empty()) cfg.loss = loss_override;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel-discriminator generative training toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string loss_override;
    std::uint64_t seed_override = 0;
    app.add_option("--config", config_path, "experiment config file")->capture_default_str();
    app.add_option("--seed", seed_override, "override the config seed (0 keeps it)");
    app.add_option("--out", out_override, "override the output directory");

    auto* train = app.add_subcommand("train", "run one experiment");
    std::string mode = "dual";
    train->add_option("--mode", mode, "dual | primal")
        ->check(CLI::IsMember({"dual", "primal"}));
    train->add_option("--loss", loss_override,
                      "override the loss {logistic|hinge|exp|lsq|zeroone}");

    auto* verify = app.add_subcommand("verify-pairs", "loss/divergence identity table (CSV)");
    double tolerance = 1e-4;
    verify->add_option("--tolerance", tolerance, "identity tolerance")->capture_default_str();

    auto* kernel = app.add_subcommand("kernel-test", "kernel approximation table (CSV)");
    kgan::KernelTestOptions kopt;
    kernel->add_option("--dim", kopt.dim, "input dimension")->capture_default_str();
    kernel->add_option("--features", kopt.features, "feature count D")->capture_default_str();
    kernel->add_option("--sigma", kopt.sigma, "kernel scale")->capture_default_str();
    kernel->add_option("--seed", kopt.seed, "draw seed")->capture_default_str();
    kernel->add_option("--pairs", kopt.pairs, "number of test pairs")->capture_default_str();

    auto* gap = app.add_subcommand("duality-gap", "audit the frozen-generator inner problem");
    gap->add_option("--loss", loss_override,
                    "override the loss {logistic|hinge|exp|lsq|zeroone}");

    auto* report = app.add_subcommand("report", "write report.csv with all checks");
    double report_tolerance = 1e-4;
    report->add_option("--tolerance", report_tolerance, "identity tolerance")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const auto cfg =
                load_config(config_path, seed_override, out_override, loss_override);
            return kgan::run_experiment(
                cfg, mode == "dual" ? kgan::TrainMode::dual : kgan::TrainMode::primal,
                &std::cerr);
        }
        if (verify->parsed()) {
            return kgan::verify_pairs(std::cout, tolerance) ? kgan::exit_ok
                                                            : kgan::exit_check_failure;
        }
        if (kernel->parsed()) {
            kgan::kernel_test(std::cout, kopt);
            return kgan::exit_ok;
        }
        if (gap->parsed()) {
            auto cfg = load_config(config_path, seed_override, out_override, loss_override);
            // the audit needs a finite instance, so atoms are materialized
            cfg.noise_kind = "atoms";
            const kgan::Density target = kgan::density_from_config(cfg);
            auto data_rng = kgan::sub_rng(cfg.seed, 1);
            const auto pts = target.sample(data_rng, cfg.n_real);
            kgan::Matrix real(cfg.n_real, cfg.data_dim);
            for (int i = 0; i < cfg.n_real; ++i) real.row(i) = pts[i].transpose();
            auto noise_rng = kgan::sub_rng(cfg.seed, 2);
            kgan::NoiseSource noise = kgan::NoiseSource::uniform_atoms(
                kgan::NoiseSource::gaussian(cfg.noise_dim).draw(noise_rng, cfg.noise_atoms));
            auto map_rng = kgan::sub_rng(cfg.seed, 3);
            kgan::FeatureMap map(
                cfg.data_dim, cfg.features,
                kgan::Matrix(cfg.sigma *
                             kgan::Matrix::Identity(cfg.data_dim, cfg.data_dim)),
                map_rng);
            auto gen_rng = kgan::sub_rng(cfg.seed, 4);
            kgan::Generator gen(cfg.arch, gen_rng);
            kgan::TrainingProblem problem(
                real, noise, map, kgan::LossSpec::from_name(cfg.loss),
                cfg.reg == "l2" ? kgan::Regularizer::l2(cfg.lambda)
                                : kgan::Regularizer::norm_ball(cfg.radius));
            const kgan::GapAudit audit = kgan::duality_gap_audit(problem, gen);
            std::cout << "primal_opt,dual_opt,gap\n"
                      << kgan::format_double(audit.primal_opt) << ','
                      << kgan::format_double(audit.dual_opt) << ','
                      << kgan::format_double(audit.gap) << "\n";
            return audit.gap >= -1e-8 ? kgan::exit_ok : kgan::exit_check_failure;
        }
        if (report->parsed()) {
            const std::string dir = out_override.empty() ? "." : out_override;
            return kgan::write_report(dir, report_tolerance) ? kgan::exit_ok
                                                             : kgan::exit_check_failure;
        }
    } catch (const kgan::diverged_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kgan::exit_diverged;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kgan::exit_invalid_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kgan::exit_check_failure;
    }
    return kgan::exit_ok;
}
