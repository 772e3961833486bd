#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seng/curvature.hpp"
#include "seng/matrix.hpp"
#include "seng/sketch.hpp"

namespace seng::direction {

enum class Path { Exact, ExplicitSketched, Implicit };

struct DirectionResult {
    std::vector<double> d;       // length n, carries the minus sign
    std::vector<double> coeffs;  // b (or b̂), length ϱ
    double damping = 0.0;
    Path path = Path::Exact;
};

// d = −(U Uᵀ + λI)⁻¹ g realized as −g/λ + U b/λ with
// b = (λI + UᵀU)⁻¹ Uᵀ g. Requires λ > 0.
DirectionResult smw_exact(const Matrix& u, std::span<const double> g, double lambda);

// Ridge coefficients of the sketched least-squares problem:
// b̂ = (λI + ΞᵀΞ)⁻¹ Ξᵀ ξ.
std::vector<double> sketched_coeffs(const Matrix& xi_mat, std::span<const double> xi_vec,
                                    double lambda);

// Per-layer sketching policy for layer_direction. q / zeta counts of 0 mean
// "use the full dimension".
struct SketchPlan {
    sketch::SketchKind kind = sketch::SketchKind::Uniform;
    int q = 0;
    int zeta_g = 0;
    int zeta_a = 0;
    bool with_replacement = true;
    bool literal_scaling = false;
    std::uint64_t seed = 0;
    curvature::UcMode uc_mode = curvature::UcMode::Averaged;
};

int default_factor_sketch_size(int dim);

// The factor-bank sketch operators a plan implies for an implicit block.
curvature::FactorSketches make_factor_sketches(const curvature::CurvatureBlock& block,
                                               const SketchPlan& plan);

// Coefficient vector of the block's path: explicit blocks solve the sketched
// LS problem on ΩU, implicit blocks the factor-bank normal equations.
std::vector<double> layer_coeffs(const curvature::CurvatureBlock& block, std::span<const double> g,
                                 double lambda, const SketchPlan& plan);

// Direction for one layer from its refreshed curvature block. Explicit
// blocks go through the sketched LS path; implicit blocks through the
// factor-bank products. An empty block degrades to d = −g/λ. q (or ζ) at or
// above the ambient dimension short-circuits to the exact identity operator.
DirectionResult layer_direction(const curvature::CurvatureBlock& block, std::span<const double> g,
                                double lambda, const SketchPlan& plan);

}  // namespace seng::direction
