#include "seng/sketch.hpp"

#include <algorithm>
#include <cmath>

#include "seng/rng.hpp"

namespace seng::sketch {

namespace {

// First index whose cumulative probability exceeds u; zero-probability rows
// can never be returned.
int draw_categorical(std::span<const double> cum, double total, double u) {
    const double target = u * total;
    int lo = 0, hi = int(cum.size()) - 1;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (cum[mid] > target)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

}  // namespace

SketchOperator identity_sketch(int n) {
    SketchOperator op;
    op.ambient = n;
    op.rows.resize(n);
    op.weights.assign(n, 1.0);
    for (int i = 0; i < n; ++i) op.rows[i] = i;
    return op;
}

bool is_identity(const SketchOperator& op) {
    if (op.q() != op.ambient) return false;
    for (int j = 0; j < op.q(); ++j)
        if (op.rows[j] != j || op.weights[j] != 1.0) return false;
    return true;
}

std::vector<double> leverage_probs(const Matrix& u) {
    std::vector<double> p(u.rows(), 0.0);
    double total = 0.0;
    for (int i = 0; i < u.rows(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < u.cols(); ++j) acc += u(i, j) * u(i, j);
        p[i] = acc;
        total += acc;
    }
    if (total <= 0.0) throw DegenerateInputError("leverage_probs: all rows are zero");
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> leverage_probs(std::span<const Matrix> bank) {
    if (bank.empty()) throw DegenerateInputError("leverage_probs: empty bank");
    const int n = bank.front().rows();
    std::vector<double> p(n, 0.0);
    double total = 0.0;
    for (const Matrix& m : bank) {
        if (m.rows() != n) throw DimensionError("leverage_probs: bank row counts differ");
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m.cols(); ++j) acc += m(i, j) * m(i, j);
            p[i] += acc;
            total += acc;
        }
    }
    if (total <= 0.0) throw DegenerateInputError("leverage_probs: all rows are zero");
    for (double& v : p) v /= total;
    return p;
}

SketchOperator build_sketch(const SketchSpec& spec, std::span<const double> p, int n) {
    if (n < 1) throw DimensionError("build_sketch: ambient dimension must be positive");
    const int q = spec.q;
    if (q < 1) throw DimensionError("build_sketch: q must be >= 1");
    if (!spec.with_replacement && q > n)
        throw DimensionError("build_sketch: q > n without replacement");

    const bool uniform = spec.kind == SketchKind::Uniform;
    if (!uniform && int(p.size()) != n)
        throw DimensionError("build_sketch: probability vector length mismatch");

    SketchOperator op;
    op.ambient = n;
    op.rows.reserve(q);
    op.weights.reserve(q);
    Rng rng(spec.seed);

    auto weight_for = [&](double pi) {
        if (spec.literal_scaling) return 1.0 / pi;
        return 1.0 / std::sqrt(double(q) * pi);
    };

    if (uniform) {
        const double pi = 1.0 / double(n);
        if (spec.with_replacement) {
            for (int j = 0; j < q; ++j) {
                op.rows.push_back(rng.uniform_int(n));
                op.weights.push_back(weight_for(pi));
            }
        } else {
            // Partial Fisher–Yates over 0..n-1.
            std::vector<int> idx(n);
            for (int i = 0; i < n; ++i) idx[i] = i;
            for (int j = 0; j < q; ++j) {
                const int pick = j + rng.uniform_int(n - j);
                std::swap(idx[j], idx[pick]);
                op.rows.push_back(idx[j]);
                op.weights.push_back(weight_for(pi));
            }
        }
        return op;
    }

    std::vector<double> cum(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (p[i] < 0.0) throw DimensionError("build_sketch: negative probability");
        total += p[i];
        cum[i] = total;
    }
    if (total <= 0.0) throw DegenerateInputError("build_sketch: zero probability mass");

    if (spec.with_replacement) {
        for (int j = 0; j < q; ++j) {
            const int i = draw_categorical(cum, total, rng.uniform());
            op.rows.push_back(i);
            op.weights.push_back(weight_for(p[i] / total));
        }
    } else {
        std::vector<double> rem(p.begin(), p.end());
        for (int j = 0; j < q; ++j) {
            double t = 0.0;
            for (int i = 0; i < n; ++i) {
                t += rem[i];
                cum[i] = t;
            }
            if (t <= 0.0)
                throw DegenerateInputError("build_sketch: probability mass exhausted before q draws");
            const int i = draw_categorical(cum, t, rng.uniform());
            op.rows.push_back(i);
            op.weights.push_back(weight_for(p[i] / total));
            rem[i] = 0.0;
        }
    }
    return op;
}

Matrix apply_sketch(const SketchOperator& op, const Matrix& m) {
    if (m.rows() != op.ambient) throw DimensionError("apply_sketch: ambient dimension mismatch");
    Matrix out(op.q(), m.cols());
    for (int j = 0; j < op.q(); ++j) {
        const double w = op.weights[j];
        const double* src = m.data() + std::size_t(op.rows[j]) * m.cols();
        double* dst = out.data() + std::size_t(j) * m.cols();
        for (int c = 0; c < m.cols(); ++c) dst[c] = w * src[c];
    }
    return out;
}

std::vector<double> apply_sketch(const SketchOperator& op, std::span<const double> v) {
    if (int(v.size()) != op.ambient) throw DimensionError("apply_sketch: ambient dimension mismatch");
    std::vector<double> out(op.q());
    for (int j = 0; j < op.q(); ++j) out[j] = op.weights[j] * v[op.rows[j]];
    return out;
}

SketchDiagnostics sketch_diagnostics(const SketchOperator& op, const Matrix& u,
                                     std::span<const double> v) {
    if (u.rows() != op.ambient) throw DimensionError("sketch_diagnostics: U row count mismatch");
    if (int(v.size()) != op.ambient) throw DimensionError("sketch_diagnostics: v length mismatch");

    // Orthonormal basis of span(U), numerical rank from the singular values.
    TruncatedSvd svd = truncated_svd(u, std::min(u.rows(), u.cols()));
    if (svd.s.empty() || svd.s[0] <= 0.0)
        throw DegenerateInputError("sketch_diagnostics: U is zero");
    int rank = 0;
    for (double s : svd.s)
        if (s > svd.s[0] * 1e-12) ++rank;
    Matrix basis(u.rows(), rank);
    for (int j = 0; j < rank; ++j)
        for (int i = 0; i < u.rows(); ++i) basis(i, j) = svd.u(i, j);

    const Matrix sketched = apply_sketch(op, basis);
    Matrix gram = matmul_tn(sketched, sketched);
    for (int i = 0; i < rank; ++i) gram(i, i) -= 1.0;

    SketchDiagnostics diag;
    diag.eta = spectral_norm_sym(gram);

    const double vnorm2 = dot(v, v);
    if (vnorm2 > 0.0) {
        const std::vector<double> sv = apply_sketch(op, v);
        const std::vector<double> lhs = matvec_t(sketched, sv);
        const std::vector<double> rhs = matvec_t(basis, v);
        double acc = 0.0;
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double d = lhs[i] - rhs[i];
            acc += d * d;
        }
        diag.eps = acc / vnorm2;
    }
    return diag;
}

}  // namespace seng::sketch
