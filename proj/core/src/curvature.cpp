#include "seng/curvature.hpp"

#include <algorithm>
#include <cmath>

namespace seng::curvature {

namespace {

Matrix symmetrize(Matrix x) {
    for (int i = 0; i < x.rows(); ++i)
        for (int j = i + 1; j < x.cols(); ++j) {
            const double v = 0.5 * (x(i, j) + x(j, i));
            x(i, j) = v;
            x(j, i) = v;
        }
    return x;
}

// Rank-r factor pair with G Aᵀ ≈ Ĝ Âᵀ. The SVD runs on the factor with the
// larger leading dimension and the singular values are split √s onto each
// side.
void build_rank_pair(const net::GradientFactors& f, int rank, Matrix& g_out, Matrix& a_out) {
    const int n_g = f.g_hat.rows();
    const int n_a = f.a_hat.rows();
    if (n_g >= n_a) {
        TruncatedSvd svd = truncated_svd(f.g_hat, rank);  // Ĝ ≈ P S Qᵀ
        g_out = Matrix(n_g, rank);
        for (int j = 0; j < rank; ++j) {
            const double sq = std::sqrt(svd.s[j]);
            for (int i = 0; i < n_g; ++i) g_out(i, j) = svd.u(i, j) * sq;
        }
        Matrix aq = matmul(f.a_hat, svd.v);  // n_A × r
        a_out = Matrix(n_a, rank);
        for (int j = 0; j < rank; ++j) {
            const double sq = std::sqrt(svd.s[j]);
            for (int i = 0; i < n_a; ++i) a_out(i, j) = aq(i, j) * sq;
        }
    } else {
        TruncatedSvd svd = truncated_svd(f.a_hat, rank);  // Â ≈ P S Qᵀ
        a_out = Matrix(n_a, rank);
        for (int j = 0; j < rank; ++j) {
            const double sq = std::sqrt(svd.s[j]);
            for (int i = 0; i < n_a; ++i) a_out(i, j) = svd.u(i, j) * sq;
        }
        Matrix gq = matmul(f.g_hat, svd.v);  // n_G × r
        g_out = Matrix(n_g, rank);
        for (int j = 0; j < rank; ++j) {
            const double sq = std::sqrt(svd.s[j]);
            for (int i = 0; i < n_g; ++i) g_out(i, j) = gq(i, j) * sq;
        }
    }
}

std::vector<double> try_leverage(const Matrix& u) {
    try {
        return sketch::leverage_probs(u);
    } catch (const DegenerateInputError&) {
        return {};  // caller falls back to uniform
    }
}

std::vector<double> try_leverage(std::span<const Matrix> bank) {
    try {
        return sketch::leverage_probs(bank);
    } catch (const DegenerateInputError&) {
        return {};
    }
}

}  // namespace

CurvatureBlock route_and_refresh(CurvatureBlock prev, std::span<const net::GradientFactors> factors,
                                 long step, int period, long threshold, int rank,
                                 RoutingRule rule, int scale_samples) {
    if (period < 1) throw DimensionError("route_and_refresh: period must be >= 1");
    if (step % period != 0) return prev;  // between refreshes the block is untouched
    if (factors.empty()) {
        CurvatureBlock b;
        b.last_refresh_step = step;
        return b;
    }

    const int n_g = factors.front().g_hat.rows();
    const int kappa = factors.front().g_hat.cols();
    const int n_a = factors.front().a_hat.rows();
    const int rho = int(factors.size());
    const long n = long(n_g) * n_a;
    const double col_scale =
        1.0 / std::sqrt(double(scale_samples > 0 ? scale_samples : rho));

    CurvatureBlock b;
    b.n_g = n_g;
    b.n_a = n_a;
    b.kappa = kappa;
    b.samples = rho;
    b.last_refresh_step = step;

    const bool explicit_mode = rule == RoutingRule::ParamThreshold
                                   ? n < threshold
                                   : n <= long(n_g + n_a) * kappa;
    if (explicit_mode) {
        b.mode = Mode::Explicit;
        b.u = Matrix(int(n), rho);
        for (int i = 0; i < rho; ++i) {
            const std::vector<double> ui = net::materialize_gradient(factors[i]);
            for (long k = 0; k < n; ++k) b.u(int(k), i) = ui[k] * col_scale;
        }
        b.row_probs = try_leverage(b.u);
        return b;
    }

    b.mode = Mode::Implicit;
    int r = rank;
    if (r > kappa) {
        r = kappa;
        b.rank_clamped = true;
    }
    if (r < 1) r = 1;
    b.rank = r;
    b.g_bank.reserve(rho);
    b.a_bank.reserve(rho);
    for (int i = 0; i < rho; ++i) {
        Matrix g, a;
        build_rank_pair(factors[i], r, g, a);
        // fold the 1/√ϱ column scaling onto the G side
        for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] *= col_scale;
        b.g_bank.push_back(std::move(g));
        b.a_bank.push_back(std::move(a));
    }
    b.g_row_probs = try_leverage(std::span<const Matrix>(b.g_bank));
    b.a_row_probs = try_leverage(std::span<const Matrix>(b.a_bank));
    return b;
}

std::vector<double> ut_z(const CurvatureBlock& block, std::span<const double> z,
                         const FactorSketches* sketches) {
    if (block.empty()) return {};
    if (long(z.size()) != block.n()) throw DimensionError("ut_z: z length mismatch");

    if (block.mode == Mode::Explicit) return matvec_t(block.u, z);
    if (sketches != nullptr && sketch::is_identity(sketches->omega_g) &&
        sketch::is_identity(sketches->omega_a))
        sketches = nullptr;  // the full sketch is the unsketched computation

    const Matrix zmat = vec_mat(z, block.n_g, block.n_a);
    std::vector<double> out(block.samples, 0.0);
    if (sketches == nullptr) {
        for (int i = 0; i < block.samples; ++i) {
            // Σ_j g_ijᵀ mat(z) a_ij = elesum((G_iᵀ Z) ⊙ A_iᵀ)
            const Matrix gz = matmul_tn(block.g_bank[i], zmat);  // r × n_A
            double acc = 0.0;
            for (int j = 0; j < gz.rows(); ++j)
                for (int k = 0; k < gz.cols(); ++k) acc += gz(j, k) * block.a_bank[i](k, j);
            out[i] = acc;
        }
        return out;
    }

    // Ξ_z = Ω_G mat(z) Ω_Aᵀ, then elesum((Ξ_zᵀ Ξ_{G_i}) ⊙ Ξ_{A_i}) per sample.
    const Matrix zg = apply_sketch(sketches->omega_g, zmat);              // ζ_G × n_A
    const Matrix xi_z = transpose(apply_sketch(sketches->omega_a, transpose(zg)));  // ζ_G × ζ_A
    for (int i = 0; i < block.samples; ++i) {
        const Matrix xi_g = apply_sketch(sketches->omega_g, block.g_bank[i]);
        const Matrix xi_a = apply_sketch(sketches->omega_a, block.a_bank[i]);
        const Matrix m = matmul_tn(xi_z, xi_g);  // ζ_A × r
        out[i] = elesum(hadamard(m, xi_a));
    }
    return out;
}

Matrix utu(const CurvatureBlock& block, const FactorSketches* sketches) {
    if (block.empty()) return Matrix();
    const int rho = block.samples;
    if (block.mode == Mode::Explicit) return symmetrize(matmul_tn(block.u, block.u));
    if (sketches != nullptr && sketch::is_identity(sketches->omega_g) &&
        sketch::is_identity(sketches->omega_a))
        sketches = nullptr;

    Matrix out(rho, rho);
    if (sketches == nullptr) {
        for (int i = 0; i < rho; ++i) {
            for (int j = 0; j < rho; ++j) {
                const Matrix gg = matmul_tn(block.g_bank[i], block.g_bank[j]);
                const Matrix aa = matmul_tn(block.a_bank[i], block.a_bank[j]);
                out(i, j) = elesum(hadamard(aa, gg));
            }
        }
        return symmetrize(std::move(out));
    }

    std::vector<Matrix> xi_g, xi_a;
    xi_g.reserve(rho);
    xi_a.reserve(rho);
    for (int i = 0; i < rho; ++i) {
        xi_g.push_back(apply_sketch(sketches->omega_g, block.g_bank[i]));
        xi_a.push_back(apply_sketch(sketches->omega_a, block.a_bank[i]));
    }
    for (int i = 0; i < rho; ++i) {
        for (int j = 0; j < rho; ++j) {
            const Matrix gg = matmul_tn(xi_g[i], xi_g[j]);
            const Matrix aa = matmul_tn(xi_a[i], xi_a[j]);
            out(i, j) = elesum(hadamard(aa, gg));
        }
    }
    return symmetrize(std::move(out));
}

std::vector<double> u_times_c(const CurvatureBlock& block, std::span<const double> c, UcMode mode) {
    if (block.empty()) return {};
    if (int(c.size()) != block.samples) throw DimensionError("u_times_c: c length mismatch");

    if (block.mode == Mode::Explicit) return matvec(block.u, c);

    const std::size_t n = std::size_t(block.n());
    std::vector<double> out(n, 0.0);
    if (mode == UcMode::Exact) {
        for (int i = 0; i < block.samples; ++i) {
            const double ci = c[i];
            if (ci == 0.0) continue;
            const Matrix& g = block.g_bank[i];
            const Matrix& a = block.a_bank[i];
            for (int p = 0; p < g.rows(); ++p) {
                const double* gp = g.data() + std::size_t(p) * g.cols();
                double* op = out.data() + std::size_t(p) * a.rows();
                for (int q = 0; q < a.rows(); ++q) {
                    const double* aq = a.data() + std::size_t(q) * a.cols();
                    double acc = 0.0;
                    for (int k = 0; k < g.cols(); ++k) acc += gp[k] * aq[k];
                    op[q] += ci * acc;
                }
            }
        }
        return out;
    }

    double denom = 0.0;
    for (double ci : c) denom += std::sqrt(std::abs(ci));
    if (denom < 1e-30) return out;  // all-zero coefficients

    Matrix g_avg(block.n_g, block.rank);
    Matrix a_avg(block.n_a, block.rank);
    for (int i = 0; i < block.samples; ++i) {
        const double wg = std::sqrt(std::abs(c[i]));
        const double wa = c[i] / denom;
        axpy(wg, block.g_bank[i].flat(), g_avg.flat());
        axpy(wa, block.a_bank[i].flat(), a_avg.flat());
    }
    return mat_vec(matmul_nt(g_avg, a_avg));
}

}  // namespace seng::curvature
