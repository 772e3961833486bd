#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seng {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or parameter violations (mismatched dimensions, out-of-range ranks).
class DimensionError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    NotPositiveDefiniteError(const std::string& msg, int pivot)
        : Error(msg), pivot_(pivot) {}
    int pivot_index() const { return pivot_; }

private:
    int pivot_;
};

// Input that is structurally valid but numerically unusable (e.g. all-zero
// rows where a probability distribution is required).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class StructuralError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Allocation accounting
//
// Tests use this to verify which code paths materialize large buffers.
// Every fresh Matrix buffer reports its element count to the innermost
// active tracker on the current thread.
// ---------------------------------------------------------------------------

struct AllocStats {
    std::size_t max_block_elems = 0;
    std::size_t total_elems = 0;
    std::size_t num_allocs = 0;
};

class ScopedAllocTracking {
public:
    ScopedAllocTracking();
    ~ScopedAllocTracking();
    ScopedAllocTracking(const ScopedAllocTracking&) = delete;
    ScopedAllocTracking& operator=(const ScopedAllocTracking&) = delete;

    const AllocStats& stats() const { return stats_; }

private:
    friend void note_matrix_alloc(std::size_t);
    AllocStats stats_;
    ScopedAllocTracking* prev_;
};

void note_matrix_alloc(std::size_t elems);

// ---------------------------------------------------------------------------
// DenseMatrix: row-major, 64-bit floats.
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(int rows, int cols, std::vector<double> data);
    Matrix(const Matrix& other);
    Matrix& operator=(const Matrix& other);
    Matrix(Matrix&&) = default;
    Matrix& operator=(Matrix&&) = default;

    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(int i) { return {data_.data() + std::size_t(i) * cols_, std::size_t(cols_)}; }
    std::span<const double> row(int i) const { return {data_.data() + std::size_t(i) * cols_, std::size_t(cols_)}; }

    std::span<const double> flat() const { return {data_.data(), data_.size()}; }
    std::span<double> flat() { return {data_.data(), data_.size()}; }

    bool all_finite() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Primitive kernels. Summation order is fixed (ascending inner index) so a
// given build produces identical results run to run.
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);     // A * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // Aᵀ * B
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // A * Bᵀ
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
double elesum(const Matrix& x);

std::vector<double> matvec(const Matrix& a, std::span<const double> x);    // A x
std::vector<double> matvec_t(const Matrix& a, std::span<const double> x);  // Aᵀ x

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);

// Solves A X = B for symmetric positive-definite A via a Cholesky
// factor-and-solve. Throws NotPositiveDefiniteError with the failing pivot
// index if a pivot is not positive, DimensionError on asymmetric input.
Matrix spd_solve(const Matrix& a, const Matrix& b);
std::vector<double> spd_solve(const Matrix& a, std::span<const double> b);

struct TruncatedSvd {
    Matrix u;               // p × r, orthonormal columns
    std::vector<double> s;  // r singular values, nonincreasing
    Matrix v;               // κ × r, orthonormal columns
};

// Rank-r SVD truncation, A ≈ U diag(S) Vᵀ. One-sided Jacobi on the side with
// fewer columns; requires 1 ≤ r ≤ min(rows, cols).
TruncatedSvd truncated_svd(const Matrix& a, int rank);

// Spectral norm of a small symmetric matrix (largest singular value).
double spectral_norm_sym(const Matrix& a);

// vec/mat pair. vec(M) concatenates the rows of M; vec_mat is its inverse:
// vec_mat(z, n_g, n_a)(i, j) = z[i * n_a + j]. Both round trips are exact.
Matrix vec_mat(std::span<const double> z, int n_g, int n_a);
std::vector<double> mat_vec(const Matrix& m);

}  // namespace seng
