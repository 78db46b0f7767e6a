// The three operator architectures:
//
//   VD   -- vanilla DeepONet: branch and trunk meet in a dot product over a
//           shared latent width p, plus a scalar bias.
//   ExD  -- extended DeepONet: the branch output is reshaped into per-layer
//           modulation vectors that scale every trunk hidden layer
//           elementwise before its activation; the trunk ends in a linear
//           single-output layer.
//   FExD -- full-field extended DeepONet: same modulated trunk, but the
//           trunk input is time alone and the linear output layer spans all
//           spatial channels, so one evaluation yields the whole sensor
//           vector.
#pragma once

#include "operon/neural_core.hpp"

#include <cstdint>
#include <string>

namespace operon {

enum class OperatorKind : std::uint8_t { VD = 0, ExD = 1, FExD = 2 };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

struct OperatorDims {
    std::size_t n_t = 0;         // input-function sample count (branch input)
    std::size_t latent = 10;     // p for the VD dot product
    std::size_t n_x = 1;         // spatial channels
    std::size_t trunk_depth = 4; // hidden trunk layers (modulated for ExD/FExD)
    std::size_t trunk_width = 64;
};

/// View of the branch output as the per-layer trunk modulation vectors:
/// column l of the N_w-by-N_lt matrix is the slice alpha_l. flatten() is the
/// exact inverse of the reshape.
struct ModulationMatrix {
    std::size_t width = 0;  // N_w
    std::size_t depth = 0;  // N_lt
    std::span<const double> flat;

    std::span<const double> layer(std::size_t l) const {
        return flat.subspan(l * width, width);
    }
    std::span<const double> flatten() const { return flat; }
};

struct OperatorModel {
    OperatorKind kind = OperatorKind::VD;
    OperatorDims dims;
    DenseNetwork branch;
    DenseNetwork trunk;
    double bias0 = 0.0;  // VD only

    std::size_t coord_width() const { return kind == OperatorKind::FExD ? 1 : 2; }
    std::size_t output_width() const {
        return kind == OperatorKind::FExD ? dims.n_x : 1;
    }
    std::size_t parameter_count() const;
    void validate() const;
};

struct OperatorSizes {
    std::size_t branch_depth = 4;
    std::size_t branch_width = 64;
    std::size_t trunk_depth = 4;
    std::size_t trunk_width = 64;
    std::size_t latent = 10;  // VD only
};

/// Builds an initialized operator. Branch/trunk output widths follow the
/// architecture: p / p for VD, (N_lt N_w) / 1 for ExD, (N_lt N_w) / N_x for
/// FExD. VD passes its subnetwork outputs through the activation; the
/// extended variants end the trunk with a linear layer.
OperatorModel make_operator(OperatorKind kind, std::size_t n_t, std::size_t n_x,
                            const OperatorSizes& sizes, std::uint64_t seed);

struct OperatorCache {
    ForwardCache branch;
    Matrix coords;                     // trunk input batch
    std::vector<Matrix> trunk_affine;  // h_l = W z + B before modulation
    std::vector<Matrix> trunk_post;    // z_l after modulation and activation
    Matrix modulation;                 // batch-by-(N_lt N_w); empty for VD
};

/// Batched forward pass. `u` is batch-by-N_t, `coords` batch-by-2 (VD/ExD:
/// normalized t and x) or batch-by-1 (FExD: normalized t). Returns
/// batch-by-1 (VD/ExD) or batch-by-N_x (FExD).
Matrix operator_forward(const OperatorModel& model, const Matrix& u, const Matrix& coords,
                        OperatorCache* cache = nullptr);

/// Reverse-mode gradients for every parameter, accumulated into `grad_flat`
/// laid out as [branch pack | trunk pack | b0 (VD)]. The extended variants
/// route trunk-layer modulation gradients back through the branch.
void operator_backward(const OperatorModel& model, const OperatorCache& cache,
                       const Matrix& out_grad, std::span<double> grad_flat);

/// Parameter pack order shared by the optimizer and checkpoints.
void pack_parameters(const OperatorModel& model, std::span<double> out);
void unpack_parameters(OperatorModel& model, std::span<const double> in);

/// Mutable views over the model's parameters in pack order, so the optimizer
/// can update in place against a flat gradient/moment layout.
std::vector<std::span<double>> parameter_chunks(OperatorModel& model);

}  // namespace operon
