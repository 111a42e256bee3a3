#include "spnn/nn.hpp"

#include "spnn/io.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spnn::nn {

std::string activation_name(Activation a) {
    return a == Activation::Softplus ? "softplus" : "identity";
}

std::vector<LayerSpec> mlp_layout(Eigen::Index in_dim, int hidden_layers, Eigen::Index width,
                                  Eigen::Index out_dim) {
    std::vector<LayerSpec> spec;
    Eigen::Index prev = in_dim;
    for (int i = 0; i < hidden_layers; ++i) {
        spec.push_back({prev, width, Activation::Softplus});
        prev = width;
    }
    spec.push_back({prev, out_dim, Activation::Identity});
    validate_layout(spec);
    return spec;
}

void validate_layout(std::span<const LayerSpec> spec) {
    if (spec.empty()) throw std::invalid_argument("network layout is empty");
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i].in_dim < 1 || spec[i].out_dim < 1) {
            throw std::invalid_argument("layer " + std::to_string(i) + " has a zero dimension");
        }
        if (i > 0 && spec[i].in_dim != spec[i - 1].out_dim) {
            throw std::invalid_argument("layer " + std::to_string(i) + " input " +
                                        std::to_string(spec[i].in_dim) + " != previous output " +
                                        std::to_string(spec[i - 1].out_dim));
        }
        if (i + 1 < spec.size() && spec[i].activation == Activation::Identity) {
            throw std::invalid_argument("only the output layer may be linear");
        }
    }
}

std::vector<LayerSpec> NetParams::layout() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) out.push_back({l.weight.cols(), l.weight.rows(), l.activation});
    return out;
}

std::size_t NetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool NetParams::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

NetParams NetParams::zeros_like() const {
    NetParams z = *this;
    for (auto& l : z.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return z;
}

NetParams init_kaiming(std::span<const LayerSpec> spec, std::uint64_t seed) {
    validate_layout(spec);
    std::mt19937_64 rng(seed);
    NetParams p;
    for (const auto& s : spec) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s.in_dim)));
        Layer l;
        l.weight.resize(s.out_dim, s.in_dim);
        // Row-major draw order so the stream maps to the checkpoint layout.
        for (Eigen::Index r = 0; r < s.out_dim; ++r) {
            for (Eigen::Index c = 0; c < s.in_dim; ++c) l.weight(r, c) = dist(rng);
        }
        l.bias = Vector::Zero(s.out_dim);
        l.activation = s.activation;
        p.layers.push_back(std::move(l));
    }
    return p;
}

std::vector<ad::Var> BoundNet::all() const {
    std::vector<ad::Var> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(weights[i]);
        out.push_back(biases[i]);
    }
    return out;
}

BoundNet bind(ad::Graph& g, const NetParams& params) {
    BoundNet net;
    for (const auto& l : params.layers) {
        net.weights.push_back(g.parameter(l.weight));
        net.biases.push_back(g.parameter(l.bias));
        net.activations.push_back(l.activation);
    }
    return net;
}

ad::Var forward(const BoundNet& net, ad::Var z) {
    ad::Graph& g = z.graph();
    const auto& first = net.weights.front().shape();
    if (z.shape().rank != 2 || z.shape().rows != first.cols) {
        throw ShapeError("forward: input " + z.shape().str() + " does not match network input " +
                         std::to_string(first.cols));
    }
    const ad::Var ones = g.constant_vector(Vector::Ones(z.shape().cols));
    ad::Var h = z;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        h = ad::matmul(net.weights[i], h) + ad::outer(net.biases[i], ones);
        if (net.activations[i] == Activation::Softplus) h = ad::softplus(h);
    }
    return h;
}

Vector forward(const NetParams& params, const Vector& z) {
    if (z.size() != params.in_dim()) {
        throw ShapeError("forward: state has " + std::to_string(z.size()) +
                         " entries, network expects " + std::to_string(params.in_dim()));
    }
    ad::Graph g;
    const BoundNet net = bind(g, params);
    const ad::Var out = forward(net, g.input(Matrix(z)));
    return out.value().col(0);
}

ad::Var weight_penalty(const BoundNet& net) {
    ad::Var total = ad::sum(ad::square(net.weights.front()));
    for (std::size_t i = 1; i < net.weights.size(); ++i) {
        total = total + ad::sum(ad::square(net.weights[i]));
    }
    return total;
}

NetParams collect_gradients(ad::Var scalar, const BoundNet& net, const NetParams& like) {
    const auto leaves = net.all();
    const auto grads = ad::gradient(scalar, leaves);
    NetParams out = like;
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        out.layers[i].weight = grads[2 * i].value();
        out.layers[i].bias = grads[2 * i + 1].value().col(0);
    }
    return out;
}

AdamState adam_init(const NetParams& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg) {
    if (grads.layers.size() != params.layers.size()) {
        throw ShapeError("adam_step: gradient has a different number of layers");
    }
    for (std::size_t i = 0; i < grads.layers.size(); ++i) {
        const auto& gl = grads.layers[i];
        const auto& pl = params.layers[i];
        if (gl.weight.rows() != pl.weight.rows() || gl.weight.cols() != pl.weight.cols() ||
            gl.bias.size() != pl.bias.size()) {
            throw ShapeError("adam_step: gradient shape mismatch in layer " + std::to_string(i));
        }
        if (!gl.weight.allFinite()) {
            throw NonFiniteError(i, "adam_step: non-finite gradient in layer " +
                                        std::to_string(i) + " weight");
        }
        if (!gl.bias.allFinite()) {
            throw NonFiniteError(i, "adam_step: non-finite gradient in layer " +
                                        std::to_string(i) + " bias");
        }
    }
    if (!(lr >= 0.0)) throw std::invalid_argument("adam_step: negative learning rate");

    state.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto update = [&](auto& theta, const auto& grad, auto& m, auto& v) {
        const auto g = (grad + weight_decay * theta).eval();
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
        theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        update(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight,
               state.v.layers[i].weight);
        update(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias,
               state.v.layers[i].bias);
    }
}

void SchedulerSpec::validate() const {
    if (!(base_lr >= 0.0)) throw std::invalid_argument("scheduler: base_lr must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("scheduler: gamma not in (0,1]");
    for (std::size_t i = 1; i < milestones.size(); ++i) {
        if (milestones[i] <= milestones[i - 1]) {
            throw std::invalid_argument("scheduler: milestones must be strictly increasing");
        }
    }
}

double scheduled_lr(const SchedulerSpec& spec, long long epoch) {
    if (epoch < 0) throw std::invalid_argument("scheduled_lr: negative epoch");
    int passed = 0;
    for (long long m : spec.milestones) {
        if (m <= epoch) ++passed;
    }
    return spec.base_lr * std::pow(spec.gamma, passed);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "spnn-checkpoint 1";

std::string layout_string(const NetParams& p) {
    std::ostringstream os;
    bool first = true;
    for (const auto& s : p.layout()) {
        if (!first) os << ',';
        first = false;
        os << s.in_dim << ':' << s.out_dim << ':' << activation_name(s.activation);
    }
    return os.str();
}
}  // namespace

void save_checkpoint(const std::string& path, const NetParams& params,
                     const std::map<std::string, std::string>& manifest) {
    std::vector<std::byte> payload;
    for (const auto& l : params.layers) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.weight;
        io::append_f64_le(payload, std::span<const double>(w.data(), w.size()));
        io::append_f64_le(payload, std::span<const double>(l.bias.data(), l.bias.size()));
    }
    std::map<std::string, std::string> kv = manifest;
    kv["layers"] = layout_string(params);
    kv["payload_bytes"] = std::to_string(payload.size());
    kv["payload_sha256"] = io::sha256_hex(std::span<const std::byte>(payload));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << kCheckpointMagic << '\n';
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    out << "end\n";
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::string magic;
    std::getline(in, magic);
    if (magic != kCheckpointMagic) {
        throw io::FormatError("'" + path + "' is not a version-1 checkpoint");
    }
    Checkpoint ck;
    ck.manifest = io::read_header(in, "end");
    const auto payload = io::read_rest(in);
    const auto expected_bytes = static_cast<std::size_t>(io::parse_int(ck.manifest.at("payload_bytes")));
    if (payload.size() != expected_bytes) throw io::FormatError("checkpoint payload truncated");
    if (io::sha256_hex(std::span<const std::byte>(payload)) != ck.manifest.at("payload_sha256")) {
        throw io::FormatError("checkpoint checksum mismatch");
    }
    const auto values = io::read_f64_le(payload);
    std::size_t pos = 0;
    for (const auto& item : io::split(ck.manifest.at("layers"), ',')) {
        const auto f = io::split(item, ':');
        if (f.size() != 3) throw io::FormatError("bad layer spec '" + item + "'");
        Layer l;
        const auto in_dim = io::parse_int(f[0]);
        const auto out_dim = io::parse_int(f[1]);
        l.activation = f[2] == "identity" ? Activation::Identity : Activation::Softplus;
        const auto need = static_cast<std::size_t>(in_dim * out_dim + out_dim);
        if (pos + need > values.size()) throw io::FormatError("checkpoint payload too short");
        l.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values.data() + pos, out_dim, in_dim);
        pos += static_cast<std::size_t>(in_dim * out_dim);
        l.bias = Eigen::Map<const Vector>(values.data() + pos, out_dim);
        pos += static_cast<std::size_t>(out_dim);
        ck.params.layers.push_back(std::move(l));
    }
    if (pos != values.size()) throw io::FormatError("checkpoint payload has trailing data");
    validate_layout(ck.params.layout());
    return ck;
}

}  // namespace spnn::nn
