#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "seng/matrix.hpp"
#include "seng/rng.hpp"

// Test-only oracles. These deliberately use different algorithms than the
// library (Gaussian elimination, two-sided symmetric Jacobi) so the checks
// stay independent of the implementation path.
namespace oracle {

inline seng::Matrix random_matrix(int rows, int cols, seng::Rng& rng, double scale = 1.0) {
    seng::Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

inline std::vector<double> random_vector(int n, seng::Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Dense solve by Gaussian elimination with partial pivoting.
inline std::vector<double> ge_solve(seng::Matrix a, std::vector<double> b) {
    const int n = a.rows();
    if (a.cols() != n || int(b.size()) != n) throw std::runtime_error("ge_solve: bad shapes");
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) throw std::runtime_error("ge_solve: singular");
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            std::swap(b[col], b[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
        x[r] = acc / a(r, r);
    }
    return x;
}

// Eigenvalues of a symmetric matrix by the classical two-sided Jacobi
// iteration, descending order.
inline std::vector<double> sym_eigenvalues(seng::Matrix a) {
    const int n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-28) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

// Singular values via the Gram matrix eigenvalues.
inline std::vector<double> singular_values(const seng::Matrix& a) {
    const seng::Matrix gram = a.rows() >= a.cols() ? seng::matmul_tn(a, a)
                                                   : seng::matmul_nt(a, a);
    std::vector<double> ev = sym_eigenvalues(gram);
    for (double& v : ev) v = std::sqrt(std::max(0.0, v));
    return ev;
}

inline std::vector<double> kron(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out;
    out.reserve(a.size() * b.size());
    for (double av : a)
        for (double bv : b) out.push_back(av * bv);
    return out;
}

inline double frob(const seng::Matrix& m) { return seng::norm2(m.flat()); }

inline double frob_diff(const seng::Matrix& a, const seng::Matrix& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.data()[k] - b.data()[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double vec_diff(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace oracle
