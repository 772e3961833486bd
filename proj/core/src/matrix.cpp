#include "seng/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seng {

namespace {

thread_local ScopedAllocTracking* g_tracker = nullptr;

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shapes (" + std::to_string(a.rows()) + "," +
                             std::to_string(a.cols()) + ") and (" + std::to_string(b.rows()) + "," +
                             std::to_string(b.cols()) + ") differ");
    }
}

}  // namespace

ScopedAllocTracking::ScopedAllocTracking() : prev_(g_tracker) { g_tracker = this; }
ScopedAllocTracking::~ScopedAllocTracking() { g_tracker = prev_; }

void note_matrix_alloc(std::size_t elems) {
    if (g_tracker != nullptr) {
        g_tracker->stats_.max_block_elems = std::max(g_tracker->stats_.max_block_elems, elems);
        g_tracker->stats_.total_elems += elems;
        g_tracker->stats_.num_allocs += 1;
    }
}

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw DimensionError("Matrix: negative dimension");
    note_matrix_alloc(data_.size());
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != std::size_t(rows) * cols) {
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not equal rows*cols");
    }
    note_matrix_alloc(data_.size());
}

Matrix::Matrix(const Matrix& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    note_matrix_alloc(data_.size());
}

Matrix& Matrix::operator=(const Matrix& other) {
    if (this != &other) {
        rows_ = other.rows_;
        cols_ = other.cols_;
        data_ = other.data_;
        note_matrix_alloc(data_.size());
    }
    return *this;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    const int n = b.cols();
    for (int i = 0; i < a.rows(); ++i) {
        double* ci = c.data() + std::size_t(i) * n;
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.data() + std::size_t(k) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
    Matrix c(a.cols(), b.cols());
    const int n = b.cols();
    for (int k = 0; k < a.rows(); ++k) {
        const double* ak = a.data() + std::size_t(k) * a.cols();
        const double* bk = b.data() + std::size_t(k) * n;
        for (int i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.data() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double* ai = a.data() + std::size_t(i) * a.cols();
        for (int j = 0; j < b.rows(); ++j) {
            const double* bj = b.data() + std::size_t(j) * b.cols();
            double acc = 0.0;
            for (int k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.data()[k] = a.data()[k] * b.data()[k];
    return c;
}

double elesum(const Matrix& x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += x.data()[k];
    return acc;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (std::size_t(a.cols()) != x.size()) throw DimensionError("matvec: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        const double* ai = a.data() + std::size_t(i) * a.cols();
        double acc = 0.0;
        for (int k = 0; k < a.cols(); ++k) acc += ai[k] * x[k];
        y[i] = acc;
    }
    return y;
}

std::vector<double> matvec_t(const Matrix& a, std::span<const double> x) {
    if (std::size_t(a.rows()) != x.size()) throw DimensionError("matvec_t: dimension mismatch");
    std::vector<double> y(a.cols(), 0.0);
    for (int k = 0; k < a.rows(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* ak = a.data() + std::size_t(k) * a.cols();
        for (int j = 0; j < a.cols(); ++j) y[j] += xk * ak[j];
    }
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionError("axpy: lengths differ");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
    for (double& v : x) v *= alpha;
}

// ---------------------------------------------------------------------------
// Cholesky solve
// ---------------------------------------------------------------------------

Matrix spd_solve(const Matrix& a, const Matrix& b) {
    const int n = a.rows();
    if (a.cols() != n) throw DimensionError("spd_solve: A not square");
    if (b.rows() != n) throw DimensionError("spd_solve: B row count mismatch");

    double amax = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) amax = std::max(amax, std::abs(a.data()[k]));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-12 * std::max(1.0, amax))
                throw DimensionError("spd_solve: A not symmetric at (" + std::to_string(i) + "," +
                                     std::to_string(j) + ")");

    // Lower Cholesky factor, in place on a copy.
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (int k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (diag <= 0.0 || !std::isfinite(diag)) {
            throw NotPositiveDefiniteError(
                "spd_solve: not positive definite, pivot " + std::to_string(j), j);
        }
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (int k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / ljj;
        }
    }

    // L Y = B, then Lᵀ X = Y.
    Matrix x = b;
    const int m = b.cols();
    for (int c = 0; c < m; ++c) {
        for (int i = 0; i < n; ++i) {
            double v = x(i, c);
            for (int k = 0; k < i; ++k) v -= l(i, k) * x(k, c);
            x(i, c) = v / l(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double v = x(i, c);
            for (int k = i + 1; k < n; ++k) v -= l(k, i) * x(k, c);
            x(i, c) = v / l(i, i);
        }
    }
    return x;
}

std::vector<double> spd_solve(const Matrix& a, std::span<const double> b) {
    Matrix rhs(int(b.size()), 1, std::vector<double>(b.begin(), b.end()));
    Matrix x = spd_solve(a, rhs);
    return std::vector<double>(x.data(), x.data() + x.size());
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD
// ---------------------------------------------------------------------------

namespace {

// Orthogonalizes the columns of b in place; v accumulates the right rotations.
// On exit b = U * diag(s) with s[j] = ||b(:,j)||.
void jacobi_onesided(Matrix& b, Matrix& v) {
    const int m = b.rows();
    const int n = b.cols();
    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

// Replaces near-zero columns of u with unit vectors orthogonal to the rest so
// the returned basis is orthonormal even for rank-deficient input.
void complete_basis(Matrix& u, const std::vector<double>& s, double smax) {
    const int m = u.rows();
    const int n = u.cols();
    for (int j = 0; j < n; ++j) {
        if (s[j] > smax * 1e-13) continue;
        for (int trial = 0; trial < m; ++trial) {
            std::vector<double> cand(m, 0.0);
            cand[trial] = 1.0;
            for (int k = 0; k < n; ++k) {
                if (k == j) continue;
                double proj = 0.0;
                for (int i = 0; i < m; ++i) proj += cand[i] * u(i, k);
                for (int i = 0; i < m; ++i) cand[i] -= proj * u(i, k);
            }
            const double nrm = norm2(cand);
            if (nrm > 0.5) {
                for (int i = 0; i < m; ++i) u(i, j) = cand[i] / nrm;
                break;
            }
        }
    }
}

}  // namespace

TruncatedSvd truncated_svd(const Matrix& a, int rank) {
    const int p = a.rows();
    const int kappa = a.cols();
    const int kmin = std::min(p, kappa);
    if (rank < 1 || rank > kmin) {
        throw DimensionError("truncated_svd: rank " + std::to_string(rank) +
                             " out of range [1," + std::to_string(kmin) + "]");
    }

    // Work on the side with fewer columns so Jacobi rotates few column pairs.
    const bool flipped = p < kappa;
    Matrix b = flipped ? transpose(a) : a;
    Matrix v = Matrix::identity(b.cols());
    jacobi_onesided(b, v);

    const int n = b.cols();
    std::vector<double> s(n);
    double smax = 0.0;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < b.rows(); ++i) acc += b(i, j) * b(i, j);
        s[j] = std::sqrt(acc);
        smax = std::max(smax, s[j]);
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return s[x] > s[y]; });

    Matrix u_full(b.rows(), n);
    Matrix v_full(n, n);
    std::vector<double> s_sorted(n);
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        s_sorted[j] = s[src];
        const double inv = s[src] > 0.0 ? 1.0 / s[src] : 0.0;
        for (int i = 0; i < b.rows(); ++i) u_full(i, j) = b(i, src) * inv;
        for (int i = 0; i < n; ++i) v_full(i, j) = v(i, src);
    }
    complete_basis(u_full, s_sorted, smax);

    TruncatedSvd out;
    out.s.assign(s_sorted.begin(), s_sorted.begin() + rank);
    Matrix u_r(u_full.rows(), rank);
    Matrix v_r(n, rank);
    for (int j = 0; j < rank; ++j) {
        for (int i = 0; i < u_full.rows(); ++i) u_r(i, j) = u_full(i, j);
        for (int i = 0; i < n; ++i) v_r(i, j) = v_full(i, j);
    }
    if (flipped) {
        out.u = std::move(v_r);
        out.v = std::move(u_r);
    } else {
        out.u = std::move(u_r);
        out.v = std::move(v_r);
    }
    return out;
}

double spectral_norm_sym(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("spectral_norm_sym: not square");
    if (a.rows() == 0) return 0.0;
    return truncated_svd(a, 1).s[0];
}

Matrix vec_mat(std::span<const double> z, int n_g, int n_a) {
    if (z.size() != std::size_t(n_g) * n_a)
        throw DimensionError("vec_mat: length " + std::to_string(z.size()) + " != " +
                             std::to_string(n_g) + "*" + std::to_string(n_a));
    return Matrix(n_g, n_a, std::vector<double>(z.begin(), z.end()));
}

std::vector<double> mat_vec(const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace seng
