#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "seng/matrix.hpp"

namespace seng::net {

struct DenseSpec {
    int in_features = 0;   // n_A
    int out_features = 0;  // n_G
};

struct Conv2dSpec {
    int in_channels = 0;
    int in_h = 0;
    int in_w = 0;
    int out_channels = 0;  // n_G
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;

    int out_h() const { return (in_h + 2 * padding - kernel_h) / stride + 1; }
    int out_w() const { return (in_w + 2 * padding - kernel_w) / stride + 1; }
    int patch_rows() const { return in_channels * kernel_h * kernel_w; }  // n_A
    int kappa() const { return out_h() * out_w(); }
};

struct ReluSpec {};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, ReluSpec>;

// Per-sample factor pair: the layer's per-sample parameter gradient is
// vec(g_hat · a_hatᵀ). g_hat comes from the backward signal (n_G × κ),
// a_hat from forward activations or im2col patches (n_A × κ).
struct GradientFactors {
    Matrix g_hat;
    Matrix a_hat;
};

std::vector<double> materialize_gradient(const GradientFactors& f);

struct LayerCache {
    Matrix dense_input;           // dense: batch × n_A
    std::vector<Matrix> patches;  // conv: per sample, n_A × κ
    Matrix relu_mask;             // relu: batch × dim, {0,1}
};

struct ForwardCache {
    Matrix outputs;  // batch × output_dim
    std::vector<LayerCache> layers;
    std::uint64_t params_version = 0;
};

struct BackwardResult {
    // factors[param_layer][sample]
    std::vector<std::vector<GradientFactors>> factors;
    // mean_gradient[param_layer] = (1/batch) Σ_i vec(Ĝ_i Â_iᵀ)
    std::vector<std::vector<double>> mean_gradient;
};

class Network {
public:
    // He-normal init on parametric layers, one RNG stream per layer derived
    // from the seed.
    Network(std::vector<LayerSpec> layers, std::uint64_t init_seed);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    int num_layers() const { return int(layers_.size()); }
    int num_param_layers() const { return int(param_layer_.size()); }
    const LayerSpec& layer(int i) const { return layers_[i]; }

    // n_G, n_A and κ of a parametric layer.
    int param_rows(int pl) const;
    int param_cols(int pl) const;
    int param_kappa(int pl) const;
    int param_count(int pl) const { return param_rows(pl) * param_cols(pl); }

    const Matrix& param(int pl) const { return params_[pl]; }
    void set_param(int pl, Matrix w);
    // W += alpha * mat(d); d is the flat row-major parameter vector.
    void apply_update(int pl, std::span<const double> d, double alpha);

    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> theta);
    int total_params() const;

    std::uint64_t params_version() const { return version_; }

    ForwardCache forward(const Matrix& batch) const;
    BackwardResult backward_factors(const ForwardCache& cache, const Matrix& out_grads) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<Matrix> params_;      // one per parametric layer
    std::vector<int> param_layer_;    // param index -> layer index
    std::vector<int> layer_in_dim_;
    std::vector<int> layer_out_dim_;
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::uint64_t version_ = 1;
};

enum class LossKind { Mse, CrossEntropy };
enum class Reduction { Mean, Sum };

struct LossResult {
    double loss = 0.0;
    // Per-sample gradients ∂ψ_i/∂f, one row per sample; never reduced.
    Matrix per_sample_grads;
};

// ψ_i = ½‖f_i − y_i‖²; loss is the mean or sum of ψ_i per `reduction`.
LossResult mse_loss(const Matrix& outputs, const Matrix& targets, Reduction reduction);

// ψ_i = −log softmax(f_i)[y_i]; labels are class indices.
LossResult cross_entropy_loss(const Matrix& outputs, std::span<const int> labels,
                              Reduction reduction);

LossResult loss_and_grad(const Matrix& outputs, const Matrix& targets,
                         std::span<const int> labels, LossKind kind, Reduction reduction);

}  // namespace seng::net
