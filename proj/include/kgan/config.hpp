#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgan/errors.hpp"
#include "kgan/numeric.hpp"

namespace kgan {

/// Experiment description parsed from the plain-text key=value format with
/// `#` comments and the sections [data], [noise], [model], [train]. Every
/// key has a default; unknown keys are rejected with their line number.
struct ExperimentConfig {
    // [data] -- analytic Gaussian mixture (weights/means/covs flattened
    // row-major) or a CSV of points, plus the real-sample count
    int data_dim = 1;
    std::vector<double> weights{1.0};
    std::vector<double> means{0.0};
    std::vector<double> covs{1.0};
    std::string data_csv;
    int n_real = 256;
    // [noise]
    std::string noise_kind = "gaussian";  // gaussian | atoms
    int noise_dim = 2;
    int noise_atoms = 256;
    // [model]
    std::string loss = "logistic";  // logistic | hinge | exp | lsq | zeroone
    std::string reg = "l2";         // l2 | ball
    double lambda = 1.0;
    double radius = 1.0;
    int features = 128;   // D; the map has 2D outputs
    double sigma = 1.0;   // kernel scale: Sigma^{1/2} = sigma * I
    std::vector<int> arch{2, 16, 16, 1};
    // [train]
    std::uint64_t seed = 1;
    std::int64_t iters = 1000;
    double step_u = 0.05;
    double step_v = 0.05;
    double step_psi = 0.01;
    double step_w = 0.05;
    int inner_steps = 5;
    std::int64_t log_interval = 100;
    bool snapshot_svg = false;
    int eval_samples = 10000;
    std::string out = "out";

    bool operator==(const ExperimentConfig&) const = default;

    int mixture_components() const { return static_cast<int>(weights.size()); }

    void validate() const {
        if (data_dim != 1 && data_dim != 2)
            throw invalid_config("config: dim must be 1 or 2");
        const int k = mixture_components();
        if (k < 1) throw invalid_config("config: weights must be nonempty");
        if (static_cast<int>(means.size()) != k * data_dim)
            throw invalid_config("config: means needs " + std::to_string(k * data_dim) +
                                 " entries, got " + std::to_string(means.size()));
        if (static_cast<int>(covs.size()) != k * data_dim * data_dim)
            throw invalid_config("config: covs needs " +
                                 std::to_string(k * data_dim * data_dim) + " entries, got " +
                                 std::to_string(covs.size()));
        if (n_real < 1) throw invalid_config("config: n_real must be >= 1");
        if (noise_kind != "gaussian" && noise_kind != "atoms")
            throw invalid_config("config: noise kind must be gaussian or atoms");
        if (noise_dim < 1) throw invalid_config("config: noise dim must be >= 1");
        if (noise_atoms < 1) throw invalid_config("config: atoms must be >= 1");
        if (loss != "logistic" && loss != "hinge" && loss != "exp" && loss != "lsq" &&
            loss != "zeroone")
            throw invalid_config("config: unknown loss '" + loss + "'");
        if (reg != "l2" && reg != "ball")
            throw invalid_config("config: reg must be l2 or ball");
        if (!(lambda > 0.0) || !(radius > 0.0))
            throw invalid_config("config: lambda and radius must be positive");
        if (features < 1) throw invalid_config("config: features must be >= 1");
        if (!(sigma > 0.0)) throw invalid_config("config: sigma must be positive");
        if (arch.size() < 2) throw invalid_config("config: arch needs at least two sizes");
        for (int s : arch)
            if (s < 1) throw invalid_config("config: arch sizes must be positive");
        if (arch.front() != noise_dim)
            throw invalid_config("config: arch input must equal the noise dimension");
        if (arch.back() != data_dim)
            throw invalid_config("config: arch output must equal the data dimension");
        if (iters < 0) throw invalid_config("config: iters must be >= 0");
        if (log_interval < 1) throw invalid_config("config: log_interval must be >= 1");
        if (inner_steps < 0) throw invalid_config("config: inner_steps must be >= 0");
        if (eval_samples < 1) throw invalid_config("config: eval_samples must be >= 1");
        if (out.empty()) throw invalid_config("config: out must not be empty");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_double_or(const std::string& v, int line, const std::string& key) {
    double out;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw invalid_config("config line " + std::to_string(line) +
                             ": cannot parse value for '" + key + "'");
    return out;
}

template <typename Int>
Int parse_int_or(const std::string& v, int line, const std::string& key) {
    Int out;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw invalid_config("config line " + std::to_string(line) +
                             ": cannot parse value for '" + key + "'");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& v, int line,
                                             const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double_or(trim(item), line, key));
    if (out.empty())
        throw invalid_config("config line " + std::to_string(line) + ": empty list for '" +
                             key + "'");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& v, int line, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_int_or<int>(trim(item), line, key));
    if (out.empty())
        throw invalid_config("config line " + std::to_string(line) + ": empty list for '" +
                             key + "'");
    return out;
}

inline bool parse_bool_or(const std::string& v, int line, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw invalid_config("config line " + std::to_string(line) +
                         ": cannot parse value for '" + key + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config_text(std::string_view text) {
    ExperimentConfig cfg;
    std::string section;
    bool weights_set = false, means_set = false, covs_set = false;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw invalid_config("config line " + std::to_string(line_no) +
                                     ": malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "data" && section != "noise" && section != "model" &&
                section != "train")
                throw invalid_config("config line " + std::to_string(line_no) +
                                     ": unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_config("config line " + std::to_string(line_no) +
                                 ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto unknown = [&]() -> invalid_config {
            return invalid_config("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
        };
        using namespace detail;
        if (section == "data") {
            if (key == "dim") cfg.data_dim = parse_int_or<int>(value, line_no, key);
            else if (key == "weights") { cfg.weights = parse_double_list(value, line_no, key); weights_set = true; }
            else if (key == "means") { cfg.means = parse_double_list(value, line_no, key); means_set = true; }
            else if (key == "covs") { cfg.covs = parse_double_list(value, line_no, key); covs_set = true; }
            else if (key == "csv") cfg.data_csv = value;
            else if (key == "n_real") cfg.n_real = parse_int_or<int>(value, line_no, key);
            else throw unknown();
        } else if (section == "noise") {
            if (key == "kind") cfg.noise_kind = value;
            else if (key == "dim") cfg.noise_dim = parse_int_or<int>(value, line_no, key);
            else if (key == "atoms") cfg.noise_atoms = parse_int_or<int>(value, line_no, key);
            else throw unknown();
        } else if (section == "model") {
            if (key == "loss") cfg.loss = value;
            else if (key == "reg") cfg.reg = value;
            else if (key == "lambda") cfg.lambda = parse_double_or(value, line_no, key);
            else if (key == "radius") cfg.radius = parse_double_or(value, line_no, key);
            else if (key == "features") cfg.features = parse_int_or<int>(value, line_no, key);
            else if (key == "sigma") cfg.sigma = parse_double_or(value, line_no, key);
            else if (key == "arch") cfg.arch = parse_int_list(value, line_no, key);
            else throw unknown();
        } else if (section == "train") {
            if (key == "seed") cfg.seed = parse_int_or<std::uint64_t>(value, line_no, key);
            else if (key == "iters") cfg.iters = parse_int_or<std::int64_t>(value, line_no, key);
            else if (key == "step_u") cfg.step_u = parse_double_or(value, line_no, key);
            else if (key == "step_v") cfg.step_v = parse_double_or(value, line_no, key);
            else if (key == "step_psi") cfg.step_psi = parse_double_or(value, line_no, key);
            else if (key == "step_w") cfg.step_w = parse_double_or(value, line_no, key);
            else if (key == "inner_steps") cfg.inner_steps = parse_int_or<int>(value, line_no, key);
            else if (key == "log_interval") cfg.log_interval = parse_int_or<std::int64_t>(value, line_no, key);
            else if (key == "snapshot_svg") cfg.snapshot_svg = parse_bool_or(value, line_no, key);
            else if (key == "eval_samples") cfg.eval_samples = parse_int_or<int>(value, line_no, key);
            else if (key == "out") cfg.out = value;
            else throw unknown();
        } else {
            throw invalid_config("config line " + std::to_string(line_no) +
                                 ": key '" + key + "' appears before any section");
        }
    }
    // the analytic density is specified by the full triple
    if ((weights_set || means_set || covs_set) && !(weights_set && means_set && covs_set)) {
        std::string missing = !weights_set ? "weights" : (!means_set ? "means" : "covs");
        throw invalid_config("config: missing required key '" + missing +
                             "' ([data] weights/means/covs must be given together)");
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_config("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_same_v<T, double>)
            out += format_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

/// Canonical dump; parse_config_text(dump_config(c)) == c.
inline std::string dump_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[data]\n";
    os << "dim=" << c.data_dim << "\n";
    os << "weights=" << detail::join_list(c.weights) << "\n";
    os << "means=" << detail::join_list(c.means) << "\n";
    os << "covs=" << detail::join_list(c.covs) << "\n";
    if (!c.data_csv.empty()) os << "csv=" << c.data_csv << "\n";
    os << "n_real=" << c.n_real << "\n";
    os << "[noise]\n";
    os << "kind=" << c.noise_kind << "\n";
    os << "dim=" << c.noise_dim << "\n";
    os << "atoms=" << c.noise_atoms << "\n";
    os << "[model]\n";
    os << "loss=" << c.loss << "\n";
    os << "reg=" << c.reg << "\n";
    os << "lambda=" << format_double(c.lambda) << "\n";
    os << "radius=" << format_double(c.radius) << "\n";
    os << "features=" << c.features << "\n";
    os << "sigma=" << format_double(c.sigma) << "\n";
    os << "arch=" << detail::join_list(c.arch) << "\n";
    os << "[train]\n";
    os << "seed=" << c.seed << "\n";
    os << "iters=" << c.iters << "\n";
    os << "step_u=" << format_double(c.step_u) << "\n";
    os << "step_v=" << format_double(c.step_v) << "\n";
    os << "step_psi=" << format_double(c.step_psi) << "\n";
    os << "step_w=" << format_double(c.step_w) << "\n";
    os << "inner_steps=" << c.inner_steps << "\n";
    os << "log_interval=" << c.log_interval << "\n";
    os << "snapshot_svg=" << (c.snapshot_svg ? 1 : 0) << "\n";
    os << "eval_samples=" << c.eval_samples << "\n";
    os << "out=" << c.out << "\n";
    return os.str();
}

}  // namespace kgan
