#pragma once

// Softplus MLP on top of the autodiff graph, Kaiming initialization, Adam and
// a multistep learning-rate schedule.

#include "spnn/autodiff.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spnn::nn {

enum class Activation { Softplus, Identity };

struct LayerSpec {
    Eigen::Index in_dim = 1;
    Eigen::Index out_dim = 1;
    Activation activation = Activation::Softplus;
};

// `hidden_layers` softplus layers of `width` units followed by a linear head.
std::vector<LayerSpec> mlp_layout(Eigen::Index in_dim, int hidden_layers, Eigen::Index width,
                                  Eigen::Index out_dim);

// Throws std::invalid_argument if dims are not chained, any dim < 1, or a
// layer other than the last is linear.
void validate_layout(std::span<const LayerSpec> spec);

struct Layer {
    Matrix weight;  // out_dim x in_dim
    Vector bias;    // out_dim
    Activation activation = Activation::Softplus;
};

struct NetParams {
    std::vector<Layer> layers;

    Eigen::Index in_dim() const { return layers.front().weight.cols(); }
    Eigen::Index out_dim() const { return layers.back().weight.rows(); }
    std::vector<LayerSpec> layout() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
    // Same layers with every weight and bias set to zero.
    NetParams zeros_like() const;
};

// W ~ Normal(0, 2 / in_dim), b = 0.
NetParams init_kaiming(std::span<const LayerSpec> spec, std::uint64_t seed);

// Parameter leaves of one network inside a graph.
struct BoundNet {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
    std::vector<Activation> activations;

    std::vector<ad::Var> all() const;
};

BoundNet bind(ad::Graph& g, const NetParams& params);

// z holds one state per column (in_dim x N); returns out_dim x N.
ad::Var forward(const BoundNet& net, ad::Var z);

Vector forward(const NetParams& params, const Vector& z);

// Sum of squared weights (biases excluded).
ad::Var weight_penalty(const BoundNet& net);

// Gradient values of `scalar` wrt every bound parameter, packed like NetParams.
NetParams collect_gradients(ad::Var scalar, const BoundNet& net, const NetParams& like);

struct AdamState {
    NetParams m;
    NetParams v;
    long long t = 0;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState adam_init(const NetParams& params);

// Bias-corrected Adam. A non-finite gradient entry throws NonFiniteError
// naming the offending layer block; params and state are left untouched.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double lr,
               double weight_decay = 0.0, const AdamConfig& cfg = {});

struct SchedulerSpec {
    double base_lr = 1e-4;
    std::vector<long long> milestones;
    double gamma = 0.1;

    void validate() const;
};

double scheduled_lr(const SchedulerSpec& spec, long long epoch);

// Checkpoint file: "spnn-checkpoint 1" line, key=value manifest terminated by
// "end", then little-endian float64 blocks per layer (weights row-major, then
// bias). The manifest carries layer specs and a payload digest.
void save_checkpoint(const std::string& path, const NetParams& params,
                     const std::map<std::string, std::string>& manifest);

struct Checkpoint {
    NetParams params;
    std::map<std::string, std::string> manifest;
};

Checkpoint load_checkpoint(const std::string& path);

std::string activation_name(Activation a);

}  // namespace spnn::nn
