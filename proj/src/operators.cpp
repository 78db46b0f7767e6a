#include "operon/operators.hpp"

#include <cmath>

namespace operon {

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::VD: return "vd";
        case OperatorKind::ExD: return "exd";
        case OperatorKind::FExD: return "fexd";
    }
    throw ConfigError("operator kind: unknown tag");
}

OperatorKind operator_kind_from_string(const std::string& name) {
    if (name == "vd") return OperatorKind::VD;
    if (name == "exd") return OperatorKind::ExD;
    if (name == "fexd") return OperatorKind::FExD;
    throw ConfigError("operator kind: expected vd, exd, or fexd, got '" + name + "'");
}

std::size_t OperatorModel::parameter_count() const {
    return branch.parameter_count() + trunk.parameter_count() +
           (kind == OperatorKind::VD ? 1 : 0);
}

void OperatorModel::validate() const {
    branch.validate();
    trunk.validate();
    if (branch.input_width() != dims.n_t)
        throw ConfigError("operator: branch input width must equal N_t");
    if (trunk.input_width() != coord_width())
        throw ConfigError("operator: trunk input width does not match kind");

    if (kind == OperatorKind::VD) {
        if (branch.output_width() != dims.latent || trunk.output_width() != dims.latent)
            throw ConfigError("operator: VD requires branch and trunk output width p");
        return;
    }
    // extended variants: branch output feeds one modulation vector per trunk
    // hidden layer
    const std::size_t n_hidden = trunk.layers.size() - 1;
    if (n_hidden != dims.trunk_depth)
        throw ConfigError("operator: trunk depth does not match dims");
    for (std::size_t l = 0; l < n_hidden; ++l)
        if (trunk.layers[l].fan_out() != dims.trunk_width)
            throw ConfigError("operator: trunk hidden width does not match dims");
    if (branch.output_width() != dims.trunk_depth * dims.trunk_width)
        throw ConfigError("operator: branch output width must equal N_lt * N_w");
    if (trunk.layers.back().activation != Activation::Linear)
        throw ConfigError("operator: extended trunk output layer must be linear");
    const std::size_t expected_out = (kind == OperatorKind::ExD) ? 1 : dims.n_x;
    if (trunk.output_width() != expected_out)
        throw ConfigError("operator: trunk output width does not match kind");
}

OperatorModel make_operator(OperatorKind kind, std::size_t n_t, std::size_t n_x,
                            const OperatorSizes& sizes, std::uint64_t seed) {
    if (n_t < 1 || n_x < 1) throw ConfigError("operator: n_t and n_x must be positive");
    OperatorModel model;
    model.kind = kind;
    model.dims = {n_t, sizes.latent, n_x, sizes.trunk_depth, sizes.trunk_width};

    std::vector<std::size_t> branch_widths{n_t};
    for (std::size_t l = 0; l < sizes.branch_depth; ++l) branch_widths.push_back(sizes.branch_width);
    std::vector<std::size_t> trunk_widths{model.coord_width()};
    for (std::size_t l = 0; l < sizes.trunk_depth; ++l) trunk_widths.push_back(sizes.trunk_width);

    if (kind == OperatorKind::VD) {
        branch_widths.push_back(sizes.latent);
        trunk_widths.push_back(sizes.latent);
        model.branch = init_network(branch_widths, Activation::Tanh, Activation::Tanh,
                                    derive_stream(seed, "branch"));
        model.trunk = init_network(trunk_widths, Activation::Tanh, Activation::Tanh,
                                   derive_stream(seed, "trunk"));
    } else {
        // modulation coefficients and the trunk output are linear so the
        // branch can scale trunk layers without range restriction
        branch_widths.push_back(sizes.trunk_depth * sizes.trunk_width);
        trunk_widths.push_back(kind == OperatorKind::ExD ? 1 : n_x);
        model.branch = init_network(branch_widths, Activation::Tanh, Activation::Linear,
                                    derive_stream(seed, "branch"));
        model.trunk = init_network(trunk_widths, Activation::Tanh, Activation::Linear,
                                   derive_stream(seed, "trunk"));
    }
    model.bias0 = 0.0;
    model.validate();
    return model;
}

namespace {

void affine_rows(const DenseLayer& layer, const Matrix& x, Matrix& h) {
    matmul_nt(x, layer.weight, h);
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double* hr = h.row(r);
        for (std::size_t c = 0; c < h.cols(); ++c) hr[c] += layer.bias[c];
    }
}

// z = R[(h) . alpha_l] for the modulated hidden layers, plain R(h) otherwise
void trunk_forward(const OperatorModel& model, const Matrix& coords, const Matrix& modulation,
                   OperatorCache& cache) {
    const DenseNetwork& trunk = model.trunk;
    const bool modulated = model.kind != OperatorKind::VD;
    const std::size_t n_layers = trunk.layers.size();
    const std::size_t n_hidden = n_layers - 1;
    const std::size_t width = model.dims.trunk_width;

    cache.coords = coords;
    cache.trunk_affine.assign(n_layers, Matrix{});
    cache.trunk_post.assign(n_layers, Matrix{});

    const Matrix* current = &coords;
    Matrix h;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = trunk.layers[l];
        affine_rows(layer, *current, h);
        cache.trunk_affine[l] = h;
        Matrix z(h.rows(), h.cols());
        if (modulated && l < n_hidden) {
            for (std::size_t r = 0; r < h.rows(); ++r) {
                const double* alpha = modulation.row(r) + l * width;
                const double* hr = h.row(r);
                double* zr = z.row(r);
                for (std::size_t c = 0; c < h.cols(); ++c)
                    zr[c] = activate_tanh(hr[c] * alpha[c]);
            }
        } else if (layer.activation == Activation::Tanh) {
            const double* hr = h.data().data();
            double* zr = z.data().data();
            for (std::size_t i = 0; i < h.size(); ++i) zr[i] = activate_tanh(hr[i]);
        } else {
            z = h;
        }
        cache.trunk_post[l] = std::move(z);
        current = &cache.trunk_post[l];
    }
}

}  // namespace

Matrix operator_forward(const OperatorModel& model, const Matrix& u, const Matrix& coords,
                        OperatorCache* cache) {
    if (u.cols() != model.dims.n_t) throw ConfigError("operator forward: u width must be N_t");
    if (coords.cols() != model.coord_width())
        throw ConfigError("operator forward: coordinate width does not match kind");
    if (u.rows() != coords.rows())
        throw ConfigError("operator forward: batch sizes of u and coords differ");

    OperatorCache local;
    OperatorCache& c = cache ? *cache : local;

    const Matrix branch_out = mlp_forward(model.branch, u, &c.branch);
    if (model.kind == OperatorKind::VD) {
        c.modulation = Matrix{};
        trunk_forward(model, coords, c.modulation, c);
        const Matrix& psi = c.trunk_post.back();
        Matrix out(u.rows(), 1);
        for (std::size_t r = 0; r < u.rows(); ++r)
            out(r, 0) = model.bias0 + dot(branch_out.row(r), psi.row(r), model.dims.latent);
        return out;
    }

    c.modulation = branch_out;
    trunk_forward(model, coords, c.modulation, c);
    return c.trunk_post.back();
}

void operator_backward(const OperatorModel& model, const OperatorCache& cache,
                       const Matrix& out_grad, std::span<double> grad_flat) {
    if (grad_flat.size() != model.parameter_count())
        throw ConfigError("operator backward: gradient buffer size mismatch");
    const std::size_t branch_params = model.branch.parameter_count();
    const std::size_t trunk_params = model.trunk.parameter_count();
    std::span<double> branch_grad = grad_flat.subspan(0, branch_params);
    std::span<double> trunk_grad = grad_flat.subspan(branch_params, trunk_params);

    const DenseNetwork& trunk = model.trunk;
    const std::size_t n_layers = trunk.layers.size();
    const std::size_t n_hidden = n_layers - 1;
    const std::size_t width = model.dims.trunk_width;
    const std::size_t batch = out_grad.rows();
    const bool modulated = model.kind != OperatorKind::VD;

    if (cache.trunk_post.empty() || cache.trunk_post.back().rows() != batch)
        throw ConfigError("operator backward: cache does not match call");

    // trunk parameter offsets
    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += trunk.layers[l].weight.size() + trunk.layers[l].bias.size();
    }

    Matrix delta;  // gradient w.r.t. current layer output z_l
    Matrix branch_head;

    if (model.kind == OperatorKind::VD) {
        // out = b0 + <b, psi> rowwise
        const Matrix& b = cache.branch.activations.back();
        const Matrix& psi = cache.trunk_post.back();
        double db0 = 0.0;
        delta.resize(batch, model.dims.latent);
        branch_head.resize(batch, model.dims.latent);
        for (std::size_t r = 0; r < batch; ++r) {
            const double g = out_grad(r, 0);
            db0 += g;
            for (std::size_t k = 0; k < model.dims.latent; ++k) {
                delta(r, k) = g * b(r, k);        // d out / d psi
                branch_head(r, k) = g * psi(r, k);  // d out / d b
            }
        }
        grad_flat[branch_params + trunk_params] += db0;
    } else {
        delta = out_grad;
        branch_head.resize(batch, model.dims.trunk_depth * width);
    }

    Matrix delta_prev;
    for (std::size_t li = n_layers; li-- > 0;) {
        const DenseLayer& layer = trunk.layers[li];
        const Matrix& z = cache.trunk_post[li];
        const bool mod_layer = modulated && li < n_hidden;

        if (layer.activation == Activation::Tanh || mod_layer) {
            double* d = delta.data().data();
            const double* zp = z.data().data();
            for (std::size_t i = 0; i < delta.size(); ++i) d[i] *= 1.0 - zp[i] * zp[i];
        }
        if (mod_layer) {
            // delta currently holds dL/d(h . alpha); split into dL/dh and dL/dalpha
            const Matrix& h = cache.trunk_affine[li];
            for (std::size_t r = 0; r < batch; ++r) {
                double* dr = delta.row(r);
                const double* hr = h.row(r);
                const double* ar = cache.modulation.row(r) + li * width;
                double* mg = branch_head.row(r) + li * width;
                for (std::size_t cc = 0; cc < width; ++cc) {
                    mg[cc] = dr[cc] * hr[cc];
                    dr[cc] *= ar[cc];
                }
            }
        }

        const Matrix& layer_input = (li == 0) ? cache.coords : cache.trunk_post[li - 1];
        matmul_tn_acc(delta, layer_input, trunk_grad.data() + offsets[li]);
        double* bias_grad = trunk_grad.data() + offsets[li] + layer.weight.size();
        for (std::size_t r = 0; r < batch; ++r) {
            const double* dr = delta.row(r);
            for (std::size_t cc = 0; cc < delta.cols(); ++cc) bias_grad[cc] += dr[cc];
        }
        if (li > 0) {
            matmul_nn(delta, layer.weight, delta_prev);
            delta = std::move(delta_prev);
        }
    }

    mlp_backward(model.branch, cache.branch, branch_head, branch_grad);
}

void pack_parameters(const OperatorModel& model, std::span<double> out) {
    const std::size_t nb = model.branch.parameter_count();
    const std::size_t nt = model.trunk.parameter_count();
    pack_parameters(model.branch, out.subspan(0, nb));
    pack_parameters(model.trunk, out.subspan(nb, nt));
    if (model.kind == OperatorKind::VD) out[nb + nt] = model.bias0;
}

void unpack_parameters(OperatorModel& model, std::span<const double> in) {
    const std::size_t nb = model.branch.parameter_count();
    const std::size_t nt = model.trunk.parameter_count();
    unpack_parameters(model.branch, in.subspan(0, nb));
    unpack_parameters(model.trunk, in.subspan(nb, nt));
    if (model.kind == OperatorKind::VD) model.bias0 = in[nb + nt];
}

std::vector<std::span<double>> parameter_chunks(OperatorModel& model) {
    std::vector<std::span<double>> chunks;
    for (DenseNetwork* net : {&model.branch, &model.trunk})
        for (DenseLayer& layer : net->layers) {
            chunks.emplace_back(layer.weight.data());
            chunks.emplace_back(layer.bias);
        }
    if (model.kind == OperatorKind::VD) chunks.emplace_back(&model.bias0, 1);
    return chunks;
}

}  // namespace operon
