#include "seng/net.hpp"

#include <algorithm>
#include <cmath>

#include "seng/rng.hpp"

namespace seng::net {

namespace {

int spec_in_dim(const LayerSpec& s, int prev_dim) {
    if (std::holds_alternative<DenseSpec>(s)) return std::get<DenseSpec>(s).in_features;
    if (std::holds_alternative<Conv2dSpec>(s)) {
        const auto& c = std::get<Conv2dSpec>(s);
        return c.in_channels * c.in_h * c.in_w;
    }
    return prev_dim;  // relu
}

int spec_out_dim(const LayerSpec& s, int in_dim) {
    if (std::holds_alternative<DenseSpec>(s)) return std::get<DenseSpec>(s).out_features;
    if (std::holds_alternative<Conv2dSpec>(s)) {
        const auto& c = std::get<Conv2dSpec>(s);
        return c.out_channels * c.kappa();
    }
    return in_dim;
}

// Unfolds one sample (channel-major image) into the n_A × κ patch matrix.
Matrix im2col(std::span<const double> x, const Conv2dSpec& c) {
    Matrix p(c.patch_rows(), c.kappa());
    const int out_h = c.out_h(), out_w = c.out_w();
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const int col = oy * out_w + ox;
            for (int ch = 0; ch < c.in_channels; ++ch) {
                for (int ky = 0; ky < c.kernel_h; ++ky) {
                    const int iy = oy * c.stride - c.padding + ky;
                    for (int kx = 0; kx < c.kernel_w; ++kx) {
                        const int ix = ox * c.stride - c.padding + kx;
                        const int row = (ch * c.kernel_h + ky) * c.kernel_w + kx;
                        double v = 0.0;
                        if (iy >= 0 && iy < c.in_h && ix >= 0 && ix < c.in_w)
                            v = x[(std::size_t(ch) * c.in_h + iy) * c.in_w + ix];
                        p(row, col) = v;
                    }
                }
            }
        }
    }
    return p;
}

// Scatter-add transpose of im2col: folds patch gradients back onto the input.
void col2im(const Matrix& pgrad, const Conv2dSpec& c, std::span<double> xgrad) {
    std::fill(xgrad.begin(), xgrad.end(), 0.0);
    const int out_h = c.out_h(), out_w = c.out_w();
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const int col = oy * out_w + ox;
            for (int ch = 0; ch < c.in_channels; ++ch) {
                for (int ky = 0; ky < c.kernel_h; ++ky) {
                    const int iy = oy * c.stride - c.padding + ky;
                    if (iy < 0 || iy >= c.in_h) continue;
                    for (int kx = 0; kx < c.kernel_w; ++kx) {
                        const int ix = ox * c.stride - c.padding + kx;
                        if (ix < 0 || ix >= c.in_w) continue;
                        const int row = (ch * c.kernel_h + ky) * c.kernel_w + kx;
                        xgrad[(std::size_t(ch) * c.in_h + iy) * c.in_w + ix] += pgrad(row, col);
                    }
                }
            }
        }
    }
}

}  // namespace

std::vector<double> materialize_gradient(const GradientFactors& f) {
    return mat_vec(matmul_nt(f.g_hat, f.a_hat));
}

Network::Network(std::vector<LayerSpec> layers, std::uint64_t init_seed)
    : layers_(std::move(layers)) {
    if (layers_.empty()) throw StructuralError("Network: no layers");

    int dim = spec_in_dim(layers_.front(), 0);
    if (dim <= 0) throw StructuralError("Network: first layer must fix the input dimension");
    input_dim_ = dim;
    for (int i = 0; i < int(layers_.size()); ++i) {
        const int expect = spec_in_dim(layers_[i], dim);
        if (expect != dim) {
            throw StructuralError("Network: layer " + std::to_string(i) + " expects input dim " +
                                  std::to_string(expect) + ", got " + std::to_string(dim));
        }
        layer_in_dim_.push_back(dim);
        dim = spec_out_dim(layers_[i], dim);
        layer_out_dim_.push_back(dim);
        if (!std::holds_alternative<ReluSpec>(layers_[i])) param_layer_.push_back(i);
    }
    output_dim_ = dim;

    for (int pl = 0; pl < int(param_layer_.size()); ++pl) {
        const int n_g = param_rows(pl);
        const int n_a = param_cols(pl);
        Matrix w(n_g, n_a);
        Rng rng(derive_seed(init_seed, std::uint64_t(pl)));
        const double std = std::sqrt(2.0 / double(n_a));
        for (int i = 0; i < n_g; ++i)
            for (int j = 0; j < n_a; ++j) w(i, j) = std * rng.normal();
        params_.push_back(std::move(w));
    }
}

int Network::param_rows(int pl) const {
    const LayerSpec& s = layers_[param_layer_[pl]];
    if (std::holds_alternative<DenseSpec>(s)) return std::get<DenseSpec>(s).out_features;
    return std::get<Conv2dSpec>(s).out_channels;
}

int Network::param_cols(int pl) const {
    const LayerSpec& s = layers_[param_layer_[pl]];
    if (std::holds_alternative<DenseSpec>(s)) return std::get<DenseSpec>(s).in_features;
    return std::get<Conv2dSpec>(s).patch_rows();
}

int Network::param_kappa(int pl) const {
    const LayerSpec& s = layers_[param_layer_[pl]];
    if (std::holds_alternative<DenseSpec>(s)) return 1;
    return std::get<Conv2dSpec>(s).kappa();
}

void Network::set_param(int pl, Matrix w) {
    if (w.rows() != param_rows(pl) || w.cols() != param_cols(pl))
        throw DimensionError("set_param: shape mismatch");
    params_[pl] = std::move(w);
    ++version_;
}

void Network::apply_update(int pl, std::span<const double> d, double alpha) {
    Matrix& w = params_[pl];
    if (d.size() != w.size()) throw DimensionError("apply_update: length mismatch");
    for (std::size_t k = 0; k < d.size(); ++k) w.data()[k] += alpha * d[k];
    ++version_;
}

std::vector<double> Network::flat_params() const {
    std::vector<double> theta;
    theta.reserve(total_params());
    for (const Matrix& w : params_) theta.insert(theta.end(), w.data(), w.data() + w.size());
    return theta;
}

void Network::set_flat_params(std::span<const double> theta) {
    if (int(theta.size()) != total_params()) throw DimensionError("set_flat_params: length mismatch");
    std::size_t off = 0;
    for (Matrix& w : params_) {
        std::copy(theta.begin() + off, theta.begin() + off + w.size(), w.data());
        off += w.size();
    }
    ++version_;
}

int Network::total_params() const {
    int n = 0;
    for (const Matrix& w : params_) n += int(w.size());
    return n;
}

ForwardCache Network::forward(const Matrix& batch) const {
    if (batch.rows() < 1) throw StructuralError("forward: empty batch");
    if (batch.cols() != input_dim_)
        throw StructuralError("forward: layer 0 expects input dim " + std::to_string(input_dim_) +
                              ", got " + std::to_string(batch.cols()));
    if (!batch.all_finite()) throw StructuralError("forward: non-finite input");

    const int b = batch.rows();
    ForwardCache cache;
    cache.layers.resize(layers_.size());
    cache.params_version = version_;

    Matrix cur = batch;
    int pl = 0;
    for (int li = 0; li < int(layers_.size()); ++li) {
        const LayerSpec& s = layers_[li];
        if (std::holds_alternative<DenseSpec>(s)) {
            cache.layers[li].dense_input = cur;
            cur = matmul_nt(cur, params_[pl]);  // (b × n_A)(n_A × n_G)ᵀ
            ++pl;
        } else if (std::holds_alternative<Conv2dSpec>(s)) {
            const auto& c = std::get<Conv2dSpec>(s);
            const Matrix& w = params_[pl];
            Matrix out(b, layer_out_dim_[li]);
            auto& patches = cache.layers[li].patches;
            patches.reserve(b);
            for (int i = 0; i < b; ++i) {
                Matrix p = im2col(cur.row(i), c);
                Matrix y = matmul(w, p);  // out_channels × κ
                std::copy(y.data(), y.data() + y.size(), out.row(i).begin());
                patches.push_back(std::move(p));
            }
            cur = std::move(out);
            ++pl;
        } else {
            Matrix mask(b, cur.cols());
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < cur.cols(); ++j) {
                    const bool on = cur(i, j) > 0.0;
                    mask(i, j) = on ? 1.0 : 0.0;
                    if (!on) cur(i, j) = 0.0;
                }
            cache.layers[li].relu_mask = std::move(mask);
        }
    }
    cache.outputs = std::move(cur);
    return cache;
}

BackwardResult Network::backward_factors(const ForwardCache& cache, const Matrix& out_grads) const {
    if (cache.params_version != version_)
        throw StructuralError("backward_factors: stale forward cache");
    if (out_grads.rows() != cache.outputs.rows() || out_grads.cols() != output_dim_)
        throw DimensionError("backward_factors: gradient shape mismatch");

    const int b = out_grads.rows();
    BackwardResult res;
    res.factors.resize(param_layer_.size());
    res.mean_gradient.resize(param_layer_.size());
    for (int pl = 0; pl < int(param_layer_.size()); ++pl) {
        res.factors[pl].reserve(b);
        res.mean_gradient[pl].assign(std::size_t(param_count(pl)), 0.0);
    }

    for (int i = 0; i < b; ++i) {
        std::vector<double> delta(out_grads.row(i).begin(), out_grads.row(i).end());
        int pl = int(param_layer_.size());
        for (int li = int(layers_.size()) - 1; li >= 0; --li) {
            const LayerSpec& s = layers_[li];
            if (std::holds_alternative<DenseSpec>(s)) {
                --pl;
                const Matrix& w = params_[pl];
                GradientFactors f;
                f.g_hat = Matrix(w.rows(), 1, std::vector<double>(delta.begin(), delta.end()));
                auto in_row = cache.layers[li].dense_input.row(i);
                f.a_hat = Matrix(w.cols(), 1, std::vector<double>(in_row.begin(), in_row.end()));
                axpy(1.0 / double(b), materialize_gradient(f), res.mean_gradient[pl]);
                res.factors[pl].push_back(std::move(f));
                delta = matvec_t(w, delta);
            } else if (std::holds_alternative<Conv2dSpec>(s)) {
                --pl;
                const auto& c = std::get<Conv2dSpec>(s);
                const Matrix& w = params_[pl];
                GradientFactors f;
                f.g_hat = Matrix(c.out_channels, c.kappa(),
                                 std::vector<double>(delta.begin(), delta.end()));
                f.a_hat = cache.layers[li].patches[i];
                axpy(1.0 / double(b), materialize_gradient(f), res.mean_gradient[pl]);
                const Matrix pgrad = matmul_tn(w, f.g_hat);  // n_A × κ
                delta.assign(std::size_t(layer_in_dim_[li]), 0.0);
                col2im(pgrad, c, delta);
                res.factors[pl].push_back(std::move(f));
            } else {
                const Matrix& mask = cache.layers[li].relu_mask;
                for (int j = 0; j < int(delta.size()); ++j) delta[j] *= mask(i, j);
            }
        }
    }
    return res;
}

LossResult mse_loss(const Matrix& outputs, const Matrix& targets, Reduction reduction) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
        throw DimensionError("mse_loss: shapes differ");
    LossResult r;
    r.per_sample_grads = Matrix(outputs.rows(), outputs.cols());
    double acc = 0.0;
    for (int i = 0; i < outputs.rows(); ++i) {
        for (int j = 0; j < outputs.cols(); ++j) {
            const double d = outputs(i, j) - targets(i, j);
            r.per_sample_grads(i, j) = d;
            acc += 0.5 * d * d;
        }
    }
    r.loss = reduction == Reduction::Mean ? acc / double(outputs.rows()) : acc;
    return r;
}

LossResult cross_entropy_loss(const Matrix& outputs, std::span<const int> labels,
                              Reduction reduction) {
    if (int(labels.size()) != outputs.rows())
        throw DimensionError("cross_entropy_loss: label count mismatch");
    LossResult r;
    r.per_sample_grads = Matrix(outputs.rows(), outputs.cols());
    double acc = 0.0;
    for (int i = 0; i < outputs.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= outputs.cols())
            throw DimensionError("cross_entropy_loss: class index " + std::to_string(y) +
                                 " out of range");
        double mx = outputs(i, 0);
        for (int j = 1; j < outputs.cols(); ++j) mx = std::max(mx, outputs(i, j));
        double z = 0.0;
        for (int j = 0; j < outputs.cols(); ++j) z += std::exp(outputs(i, j) - mx);
        const double logz = mx + std::log(z);
        acc += logz - outputs(i, y);
        for (int j = 0; j < outputs.cols(); ++j) {
            const double p = std::exp(outputs(i, j) - logz);
            r.per_sample_grads(i, j) = p - (j == y ? 1.0 : 0.0);
        }
    }
    r.loss = reduction == Reduction::Mean ? acc / double(outputs.rows()) : acc;
    return r;
}

LossResult loss_and_grad(const Matrix& outputs, const Matrix& targets,
                         std::span<const int> labels, LossKind kind, Reduction reduction) {
    if (kind == LossKind::Mse) return mse_loss(outputs, targets, reduction);
    return cross_entropy_loss(outputs, labels, reduction);
}

}  // namespace seng::net
