// Dense feed-forward networks with analytic reverse-mode gradients, AdamW,
// and a triangular cyclical learning-rate schedule. All arithmetic is in
// 64-bit floating point; evaluation is deterministic and batch-consistent.
#pragma once

#include "operon/linalg.hpp"
#include "operon/rng.hpp"

#include <cstdint>
#include <vector>

namespace operon {

enum class Activation : std::uint8_t { Tanh = 0, Linear = 1 };

/// tanh through the exponential form; stable at both tails.
inline double activate_tanh(double x) { return 1.0 - 2.0 / (1.0 + std::exp(2.0 * x)); }

struct DenseLayer {
    Matrix weight;             // out-by-in, row-major
    std::vector<double> bias;  // length out
    Activation activation = Activation::Tanh;

    std::size_t fan_in() const { return weight.cols(); }
    std::size_t fan_out() const { return weight.rows(); }
};

struct DenseNetwork {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.front().fan_in(); }
    std::size_t output_width() const { return layers.back().fan_out(); }
    std::size_t parameter_count() const;
    void validate() const;  // chained dimensions, finite parameters
};

/// Glorot-uniform weights, zero biases; hidden layers use `hidden`, the last
/// layer `output`. Deterministic in (widths, seed).
DenseNetwork init_network(std::span<const std::size_t> widths, Activation hidden,
                          Activation output, std::uint64_t seed);

struct ForwardCache {
    Matrix input;                     // batch-by-in
    std::vector<Matrix> affine;       // pre-activation per layer
    std::vector<Matrix> activations;  // post-activation per layer
};

/// Batched forward pass; rows are independent samples. With a cache the
/// per-layer intermediates needed by the backward pass are retained.
Matrix mlp_forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache = nullptr);

/// Flat parameter order: per layer, weight matrix row-major, then bias.
void pack_parameters(const DenseNetwork& net, std::span<double> out);
void unpack_parameters(DenseNetwork& net, std::span<const double> in);

/// Reverse-mode gradients. Accumulates (+=) parameter gradients into
/// `grad_flat`, which follows the pack_parameters layout, and returns the
/// gradient with respect to the input batch.
Matrix mlp_backward(const DenseNetwork& net, const ForwardCache& cache, const Matrix& out_grad,
                    std::span<double> grad_flat);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-8;
};

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
    AdamWConfig config;

    explicit OptimizerState(std::size_t n_params, const AdamWConfig& cfg = {})
        : first_moment(n_params, 0.0), second_moment(n_params, 0.0), config(cfg) {}
};

/// Decoupled weight decay followed by a bias-corrected Adam moment update.
void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                double lr);

/// Core AdamW update over a contiguous range; `step` is the already
/// incremented step counter. Lets callers update chunked parameter storage
/// against one flat moment/gradient layout.
void adamw_update_range(double* params, const double* grads, double* m1, double* m2,
                        std::size_t n, std::uint64_t step, const AdamWConfig& cfg, double lr);

struct LrSchedule {
    double lr_min = 1e-4;
    double lr_max = 1e-3;
    std::size_t cycle_length = 2000;  // optimizer steps per full triangle

    void validate() const;
};

/// Triangular wave: lr_min at cycle start, lr_max at half cycle, back down.
double cyclical_lr(std::size_t step, const LrSchedule& schedule);

}  // namespace operon
