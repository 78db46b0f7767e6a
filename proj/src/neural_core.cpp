#include "operon/neural_core.hpp"

#include <cmath>

namespace operon {

std::size_t DenseNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
    return n;
}

void DenseNetwork::validate() const {
    if (layers.empty()) throw ConfigError("network: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.fan_out())
            throw ConfigError("network: bias length does not match layer width");
        if (l > 0 && layer.fan_in() != layers[l - 1].fan_out())
            throw ConfigError("network: consecutive layer dimensions do not chain");
        if (!all_finite(layer.weight.data()) || !all_finite(layer.bias))
            throw NumericalError("network: non-finite parameters");
    }
}

DenseNetwork init_network(std::span<const std::size_t> widths, Activation hidden,
                          Activation output, std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("network: need at least input and output widths");
    for (std::size_t w : widths)
        if (w < 1) throw ConfigError("network: zero layer width");

    Rng rng(seed);
    DenseNetwork net;
    net.layers.resize(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        layer.weight.resize(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        layer.activation = (l + 2 == widths.size()) ? output : hidden;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
    }
    return net;
}

namespace {

void apply_activation(Activation act, const Matrix& h, Matrix& z) {
    z.resize(h.rows(), h.cols());
    const double* src = h.data().data();
    double* dst = z.data().data();
    const std::size_t n = h.size();
    if (act == Activation::Tanh) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = activate_tanh(src[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) dst[i] = src[i];
    }
}

void add_bias_rows(Matrix& h, std::span<const double> bias) {
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double* hr = h.row(r);
        for (std::size_t c = 0; c < h.cols(); ++c) hr[c] += bias[c];
    }
}

}  // namespace

Matrix mlp_forward(const DenseNetwork& net, const Matrix& x, ForwardCache* cache) {
    if (net.layers.empty()) throw ConfigError("forward: empty network");
    if (x.cols() != net.input_width())
        throw ConfigError("forward: input width does not match first layer");

    if (cache) {
        cache->input = x;
        cache->affine.assign(net.layers.size(), Matrix{});
        cache->activations.assign(net.layers.size(), Matrix{});
    }

    Matrix current = x;
    Matrix h;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        matmul_nt(current, layer.weight, h);
        add_bias_rows(h, layer.bias);
        Matrix z;
        apply_activation(layer.activation, h, z);
        if (cache) {
            cache->affine[l] = h;
            cache->activations[l] = z;
        }
        current = std::move(z);
    }
    return current;
}

void pack_parameters(const DenseNetwork& net, std::span<double> out) {
    std::size_t offset = 0;
    for (const auto& layer : net.layers) {
        std::copy(layer.weight.data().begin(), layer.weight.data().end(), out.begin() + offset);
        offset += layer.weight.size();
        std::copy(layer.bias.begin(), layer.bias.end(), out.begin() + offset);
        offset += layer.bias.size();
    }
    if (offset != out.size()) throw ConfigError("pack: buffer size mismatch");
}

void unpack_parameters(DenseNetwork& net, std::span<const double> in) {
    std::size_t offset = 0;
    for (auto& layer : net.layers) {
        std::copy(in.begin() + offset, in.begin() + offset + layer.weight.size(),
                  layer.weight.data().begin());
        offset += layer.weight.size();
        std::copy(in.begin() + offset, in.begin() + offset + layer.bias.size(),
                  layer.bias.begin());
        offset += layer.bias.size();
    }
    if (offset != in.size()) throw ConfigError("unpack: buffer size mismatch");
}

Matrix mlp_backward(const DenseNetwork& net, const ForwardCache& cache, const Matrix& out_grad,
                    std::span<double> grad_flat) {
    const std::size_t n_layers = net.layers.size();
    if (cache.activations.size() != n_layers || cache.affine.size() != n_layers)
        throw ConfigError("backward: cache does not match network");
    if (grad_flat.size() != net.parameter_count())
        throw ConfigError("backward: gradient buffer size mismatch");
    if (out_grad.rows() != cache.input.rows() || out_grad.cols() != net.output_width())
        throw ConfigError("backward: output gradient shape mismatch");

    // per-layer offsets into the flat gradient buffer
    std::vector<std::size_t> offsets(n_layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = offset;
        offset += net.layers[l].weight.size() + net.layers[l].bias.size();
    }

    Matrix delta = out_grad;
    Matrix delta_prev;
    for (std::size_t li = n_layers; li-- > 0;) {
        const DenseLayer& layer = net.layers[li];
        const Matrix& z = cache.activations[li];
        if (delta.rows() != z.rows() || delta.cols() != z.cols())
            throw ConfigError("backward: stale cache");

        if (layer.activation == Activation::Tanh) {
            // d/dh tanh(h) = 1 - z^2
            double* d = delta.data().data();
            const double* zp = z.data().data();
            for (std::size_t i = 0; i < delta.size(); ++i) d[i] *= 1.0 - zp[i] * zp[i];
        }

        const Matrix& layer_input = (li == 0) ? cache.input : cache.activations[li - 1];
        matmul_tn_acc(delta, layer_input, grad_flat.data() + offsets[li]);

        double* bias_grad = grad_flat.data() + offsets[li] + layer.weight.size();
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* dr = delta.row(r);
            for (std::size_t c = 0; c < delta.cols(); ++c) bias_grad[c] += dr[c];
        }

        matmul_nn(delta, layer.weight, delta_prev);
        delta = std::move(delta_prev);
    }
    return delta;  // gradient w.r.t. the input batch
}

void adamw_update_range(double* params, const double* grads, double* m1, double* m2,
                        std::size_t n, std::uint64_t step, const AdamWConfig& cfg, double lr) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const double decay = lr * cfg.weight_decay;
    for (std::size_t i = 0; i < n; ++i) {
        params[i] -= decay * params[i];
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grads[i];
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = m1[i] / bc1;
        const double v_hat = m2[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                double lr) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ConfigError("adamw: size mismatch");
    state.step += 1;
    adamw_update_range(params.data(), grads.data(), state.first_moment.data(),
                       state.second_moment.data(), params.size(), state.step, state.config, lr);
}

void LrSchedule::validate() const {
    if (!(lr_min > 0.0) || !(lr_max > lr_min))
        throw ConfigError("lr schedule: need 0 < lr_min < lr_max");
    if (cycle_length < 2) throw ConfigError("lr schedule: cycle too short");
}

double cyclical_lr(std::size_t step, const LrSchedule& schedule) {
    schedule.validate();
    const double cycle = static_cast<double>(schedule.cycle_length);
    const double phase = static_cast<double>(step % schedule.cycle_length);
    const double half = 0.5 * cycle;
    const double frac = phase <= half ? phase / half : (cycle - phase) / half;
    return schedule.lr_min + (schedule.lr_max - schedule.lr_min) * frac;
}

}  // namespace operon
