#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seng/matrix.hpp"

namespace seng::sketch {

enum class SketchKind { Uniform, Leverage };

struct SketchSpec {
    SketchKind kind = SketchKind::Uniform;
    int q = 0;
    bool with_replacement = true;
    // Scales rows by 1/p_i instead of 1/sqrt(q p_i). Kept for comparison
    // runs; the default scaling is the one that makes E[ΩᵀΩ] = I.
    bool literal_scaling = false;
    std::uint64_t seed = 0;
};

// Row-sampling operator: q selected row indices with per-row scale factors.
struct SketchOperator {
    int ambient = 0;
    std::vector<int> rows;
    std::vector<double> weights;

    int q() const { return int(rows.size()); }
};

// The q = n operator that selects every row in order with weight 1.
SketchOperator identity_sketch(int n);

// True when the operator is the full in-order unit-weight selection, i.e.
// applying it is the identity.
bool is_identity(const SketchOperator& op);

// p_i = ||U_{i,:}||² / Σ_j ||U_{j,:}||². Throws DegenerateInputError when
// every row is zero.
std::vector<double> leverage_probs(const Matrix& u);

// Row-norm probabilities accumulated over a bank of matrices with equal row
// counts (rows of the horizontal concatenation).
std::vector<double> leverage_probs(std::span<const Matrix> bank);

// Draws q rows from p (uniform kind ignores p and may pass it empty).
// With replacement: i.i.d. draws. Without: sequential weighted draws over the
// remaining rows. Row weight defaults to 1/sqrt(q·p_i).
SketchOperator build_sketch(const SketchSpec& spec, std::span<const double> p, int n);

Matrix apply_sketch(const SketchOperator& op, const Matrix& m);
std::vector<double> apply_sketch(const SketchOperator& op, std::span<const double> v);

struct SketchDiagnostics {
    double eta = 0.0;  // ‖NᵀΩᵀΩN − I‖₂ over an orthonormal basis N of span(U)
    double eps = 0.0;  // ‖NᵀΩᵀΩv − Nᵀv‖² / ‖v‖²
};

SketchDiagnostics sketch_diagnostics(const SketchOperator& op, const Matrix& u,
                                     std::span<const double> v);

}  // namespace seng::sketch
