#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kgan/densities.hpp"
#include "kgan/errors.hpp"
#include "kgan/numeric.hpp"

namespace kgan {

/// Small feedforward generator: affine layers with tanh hidden activations
/// and an identity output layer. Forward and backward passes are written
/// out by hand; backward consumes the activation tape of a matching forward
/// call.
class Generator {
  public:
    /// Scaled uniform init: weights in +/- sqrt(6/(fan_in+fan_out)), biases
    /// zero.
    Generator(std::vector<int> layer_sizes, std::mt19937_64& rng)
        : Generator(std::move(layer_sizes)) {
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            const double limit =
                std::sqrt(6.0 / (layer_sizes_[l] + layer_sizes_[l + 1]));
            std::uniform_real_distribution<double> unif(-limit, limit);
            for (int i = 0; i < weights_[l].rows(); ++i)
                for (int j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = unif(rng);
        }
    }

    static Generator zeros(std::vector<int> layer_sizes) {
        return Generator(std::move(layer_sizes));
    }

    int noise_dim() const { return layer_sizes_.front(); }
    int output_dim() const { return layer_sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    int layer_count() const { return static_cast<int>(weights_.size()); }
    const std::vector<Matrix>& weights() const { return weights_; }
    const std::vector<Vector>& biases() const { return biases_; }
    std::uint64_t revision() const { return revision_; }

    struct Tape {
        std::vector<Vector> activations;  // a_0 = z, a_1 .. a_L
        std::uint64_t revision = 0;
    };

    struct BatchTape {
        std::vector<Matrix> activations;  // rows are samples
        std::uint64_t revision = 0;
    };

    Vector forward(const Vector& z) const {
        Tape tape;
        return forward(z, tape);
    }

    Vector forward(const Vector& z, Tape& tape) const {
        if (z.size() != noise_dim())
            throw invalid_input("generator: noise has dimension " + std::to_string(z.size()) +
                                ", expected " + std::to_string(noise_dim()));
        tape.activations.assign(1, z);
        tape.revision = revision_;
        Vector a = z;
        for (int l = 0; l < layer_count(); ++l) {
            a = (weights_[l] * a + biases_[l]).eval();
            if (l + 1 < layer_count()) a = a.array().tanh().matrix();
            tape.activations.push_back(a);
        }
        return a;
    }

    /// Batched forward; rows of z are samples.
    Matrix forward(const Matrix& z, BatchTape& tape) const {
        if (z.cols() != noise_dim())
            throw invalid_input("generator: batch noise has wrong dimension");
        tape.activations.assign(1, z);
        tape.revision = revision_;
        Matrix a = z;
        for (int l = 0; l < layer_count(); ++l) {
            a = ((a * weights_[l].transpose()).rowwise() + biases_[l].transpose()).eval();
            if (l + 1 < layer_count()) a = a.array().tanh().matrix();
            tape.activations.push_back(a);
        }
        return a;
    }

    struct Gradients {
        std::vector<Matrix> weights;
        std::vector<Vector> biases;
        Vector input;

        void scale(double s) {
            for (auto& w : weights) w *= s;
            for (auto& b : biases) b *= s;
            input *= s;
        }
    };

    Gradients zero_gradients() const {
        Gradients g;
        for (int l = 0; l < layer_count(); ++l) {
            g.weights.push_back(Matrix::Zero(weights_[l].rows(), weights_[l].cols()));
            g.biases.push_back(Vector::Zero(biases_[l].size()));
        }
        g.input = Vector::Zero(noise_dim());
        return g;
    }

    /// Gradients of output_gradient . G(z) with respect to every parameter
    /// and to z. The tape must come from a forward call on the current
    /// parameters.
    Gradients backward(const Tape& tape, const Vector& output_gradient) const {
        check_tape(tape.revision, tape.activations.size());
        if (output_gradient.size() != output_dim())
            throw invalid_input("generator: output gradient has wrong dimension");
        Gradients g = zero_gradients();
        accumulate_backward(tape, output_gradient, 1.0, g);
        return g;
    }

    /// Adds scale * d(output_gradient . G(z))/d(params) into `into`.
    void accumulate_backward(const Tape& tape, const Vector& output_gradient, double scale,
                             Gradients& into) const {
        check_tape(tape.revision, tape.activations.size());
        Vector delta = output_gradient * scale;
        for (int l = layer_count() - 1; l >= 0; --l) {
            into.weights[l].noalias() += delta * tape.activations[l].transpose();
            into.biases[l] += delta;
            Vector prev = weights_[l].transpose() * delta;
            if (l > 0)
                prev.array() *= 1.0 - tape.activations[l].array().square();
            delta = std::move(prev);
        }
        into.input += delta;
    }

    /// Batched accumulation: row r of output_gradients is weighted by
    /// scales[r]. Equivalent to per-sample accumulate_backward over rows.
    void accumulate_backward(const BatchTape& tape, const Matrix& output_gradients,
                             const Vector& scales, Gradients& into) const {
        check_tape(tape.revision, tape.activations.size());
        if (output_gradients.rows() != tape.activations.front().rows() ||
            output_gradients.cols() != output_dim())
            throw invalid_input("generator: batch output gradient has wrong shape");
        Matrix delta = output_gradients.array().colwise() * scales.array();
        for (int l = layer_count() - 1; l >= 0; --l) {
            into.weights[l].noalias() += delta.transpose() * tape.activations[l];
            into.biases[l] += delta.colwise().sum().transpose();
            Matrix prev = delta * weights_[l];
            if (l > 0) prev.array() *= 1.0 - tape.activations[l].array().square();
            delta = std::move(prev);
        }
        into.input += delta.colwise().sum().transpose();
    }

    /// params += step * gradients. Invalidates existing tapes.
    void apply_ascent(const Gradients& g, double step) {
        for (int l = 0; l < layer_count(); ++l) {
            weights_[l] += step * g.weights[l];
            biases_[l] += step * g.biases[l];
        }
        ++revision_;
    }

    // Flat parameter view (weights row-major then bias, layer by layer),
    // used by finite-difference checks and the checkpoint format.
    int parameter_count() const {
        int n = 0;
        for (int l = 0; l < layer_count(); ++l)
            n += static_cast<int>(weights_[l].size() + biases_[l].size());
        return n;
    }

    double get_parameter(int index) const {
        auto [l, in_bias, pos] = locate(index);
        return in_bias ? biases_[l][pos]
                       : weights_[l](pos / weights_[l].cols(), pos % weights_[l].cols());
    }

    void set_parameter(int index, double value) {
        auto [l, in_bias, pos] = locate(index);
        if (in_bias)
            biases_[l][pos] = value;
        else
            weights_[l](pos / weights_[l].cols(), pos % weights_[l].cols()) = value;
        ++revision_;
    }

    static Vector flatten(const Gradients& g) {
        int n = 0;
        for (std::size_t l = 0; l < g.weights.size(); ++l)
            n += static_cast<int>(g.weights[l].size() + g.biases[l].size());
        Vector out(n);
        int at = 0;
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            for (int i = 0; i < g.weights[l].rows(); ++i)
                for (int j = 0; j < g.weights[l].cols(); ++j) out[at++] = g.weights[l](i, j);
            for (int i = 0; i < g.biases[l].size(); ++i) out[at++] = g.biases[l][i];
        }
        return out;
    }

    static constexpr const char* checkpoint_magic = "KGANCKPT1";

    /// Plain-text checkpoint: magic, layer sizes, then per layer the weight
    /// matrix row-major and the bias vector, full round-trip precision.
    void save(std::ostream& os) const {
        os << checkpoint_magic << "\n";
        os << "layers";
        for (int s : layer_sizes_) os << ' ' << s;
        os << "\n";
        os.precision(17);
        for (int l = 0; l < layer_count(); ++l) {
            for (int i = 0; i < weights_[l].rows(); ++i) {
                for (int j = 0; j < weights_[l].cols(); ++j)
                    os << (j ? " " : "") << weights_[l](i, j);
                os << "\n";
            }
            for (int i = 0; i < biases_[l].size(); ++i)
                os << (i ? " " : "") << biases_[l][i];
            os << "\n";
        }
    }

    static Generator load(std::istream& is) {
        std::string magic;
        is >> magic;
        if (magic != checkpoint_magic)
            throw invalid_input("checkpoint: bad magic '" + magic + "'");
        std::string tag;
        is >> tag;
        if (tag != "layers") throw invalid_input("checkpoint: missing layer sizes");
        std::string rest;
        std::getline(is, rest);
        std::istringstream sizes_in(rest);
        std::vector<int> sizes;
        for (int s; sizes_in >> s;) sizes.push_back(s);
        Generator gen(std::move(sizes));
        for (int l = 0; l < gen.layer_count(); ++l) {
            for (int i = 0; i < gen.weights_[l].rows(); ++i)
                for (int j = 0; j < gen.weights_[l].cols(); ++j)
                    if (!(is >> gen.weights_[l](i, j)))
                        throw invalid_input("checkpoint: truncated weights");
            for (int i = 0; i < gen.biases_[l].size(); ++i)
                if (!(is >> gen.biases_[l][i]))
                    throw invalid_input("checkpoint: truncated biases");
        }
        return gen;
    }

  private:
    explicit Generator(std::vector<int> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
        if (layer_sizes_.size() < 2)
            throw invalid_input("generator: need at least input and output sizes");
        for (int s : layer_sizes_)
            if (s < 1) throw invalid_input("generator: layer sizes must be positive");
        for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
            weights_.push_back(Matrix::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
            biases_.push_back(Vector::Zero(layer_sizes_[l + 1]));
        }
    }

    void check_tape(std::uint64_t tape_revision, std::size_t levels) const {
        if (tape_revision != revision_)
            throw invalid_state("generator: tape is stale, parameters changed since forward");
        if (levels != static_cast<std::size_t>(layer_count()) + 1)
            throw invalid_state("generator: tape does not match architecture");
    }

    std::tuple<int, bool, int> locate(int index) const {
        int at = index;
        for (int l = 0; l < layer_count(); ++l) {
            if (at < weights_[l].size()) return {l, false, at};
            at -= static_cast<int>(weights_[l].size());
            if (at < biases_[l].size()) return {l, true, at};
            at -= static_cast<int>(biases_[l].size());
        }
        throw invalid_input("generator: parameter index out of range");
    }

    std::vector<int> layer_sizes_;
    std::vector<Matrix> weights_;
    std::vector<Vector> biases_;
    std::uint64_t revision_ = 0;
};

/// Noise distribution feeding the generator: standard Gaussian or a fixed
/// list of atoms with probabilities.
class NoiseSource {
  public:
    static NoiseSource gaussian(int dim) {
        if (dim < 1) throw invalid_input("noise: dimension must be >= 1");
        NoiseSource n;
        n.dim_ = dim;
        return n;
    }

    static NoiseSource atoms(Matrix atom_rows, Vector probabilities) {
        if (atom_rows.rows() < 1) throw invalid_input("noise: need at least one atom");
        if (probabilities.size() != atom_rows.rows())
            throw invalid_input("noise: probabilities do not match atoms");
        double sum = 0.0;
        for (int i = 0; i < probabilities.size(); ++i) {
            if (probabilities[i] < 0.0) throw invalid_input("noise: negative probability");
            sum += probabilities[i];
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw invalid_input("noise: probabilities sum to " + format_double(sum));
        NoiseSource n;
        n.dim_ = static_cast<int>(atom_rows.cols());
        n.atoms_ = std::move(atom_rows);
        n.probs_ = std::move(probabilities);
        n.discrete_ = true;
        return n;
    }

    static NoiseSource uniform_atoms(Matrix atom_rows) {
        const auto m = atom_rows.rows();
        return atoms(std::move(atom_rows), Vector::Constant(m, 1.0 / static_cast<double>(m)));
    }

    bool is_discrete() const { return discrete_; }
    int dim() const { return dim_; }
    int atom_count() const { return static_cast<int>(atoms_.rows()); }
    const Matrix& atom_rows() const { return atoms_; }
    const Vector& probabilities() const { return probs_; }

    /// Gaussian: n i.i.d. standard normal rows. Discrete: the full atom
    /// list in order when n equals the atom count (training consumes every
    /// atom each step), otherwise n draws by probability.
    Matrix draw(std::mt19937_64& rng, int n) const {
        if (n < 1) throw invalid_input("noise: n must be >= 1");
        Matrix out(n, dim_);
        if (!discrete_) {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < dim_; ++j) out(i, j) = normal(rng);
            return out;
        }
        if (n == atom_count()) return atoms_;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            double r = unif(rng);
            int k = 0;
            double acc = probs_[0];
            while (k + 1 < atom_count() && r > acc) {
                ++k;
                acc += probs_[k];
            }
            out.row(i) = atoms_.row(k);
        }
        return out;
    }

  private:
    NoiseSource() = default;
    int dim_ = 0;
    Matrix atoms_;
    Vector probs_;
    bool discrete_ = false;
};

}  // namespace kgan
