#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "seng/matrix.hpp"
#include "seng/net.hpp"
#include "seng/sketch.hpp"

namespace seng::curvature {

enum class Mode { Explicit, Implicit };

// Routing of a layer to explicit or implicit storage at refresh time.
enum class RoutingRule {
    ParamThreshold,    // explicit iff n < threshold
    FactorInequality,  // explicit iff n <= (n_G + n_A) * κ
};

// Pair of factor-bank sketches for the implicit products.
struct FactorSketches {
    sketch::SketchOperator omega_g;  // ζ_G × n_G
    sketch::SketchOperator omega_a;  // ζ_A × n_A
};

enum class UcMode { Exact, Averaged };

// Per-layer curvature state. Explicit mode stores U = 1/√ϱ [u_1 … u_ϱ];
// implicit mode stores per-sample factor banks (G_i, A_i) of rank r whose
// products reconstruct u_i/√ϱ up to the truncation tail.
struct CurvatureBlock {
    Mode mode = Mode::Explicit;
    int n_g = 0;
    int n_a = 0;
    int kappa = 0;
    int rank = 0;     // implicit bank rank
    int samples = 0;  // ϱ of the refresh batch

    Matrix u;  // explicit: n × ϱ

    std::vector<Matrix> g_bank;  // implicit: ϱ matrices, n_G × r (carry the 1/√ϱ)
    std::vector<Matrix> a_bank;  // implicit: ϱ matrices, n_A × r

    long last_refresh_step = -1;
    bool rank_clamped = false;

    // Leverage probabilities cached at refresh: explicit → rows of U;
    // implicit → rows of the G and A banks. Empty means fall back to uniform.
    std::vector<double> row_probs;
    std::vector<double> g_row_probs;
    std::vector<double> a_row_probs;

    long n() const { return long(n_g) * n_a; }
    bool empty() const { return samples == 0; }
};

// Algorithm-level refresh: a no-op unless step ≡ 0 (mod period); otherwise
// rebuilds the block from the refresh batch, routing to explicit or implicit
// storage. rank > κ is clamped to κ and flagged on the block. The column
// scaling is 1/√scale_samples (0 = number of factors); distributed workers
// pass the global batch size so shard blocks are exact column slices of the
// serial U.
CurvatureBlock route_and_refresh(CurvatureBlock prev, std::span<const net::GradientFactors> factors,
                                 long step, int period, long threshold, int rank,
                                 RoutingRule rule = RoutingRule::ParamThreshold,
                                 int scale_samples = 0);

// Uᵀz. Implicit blocks evaluate per-sample factor contractions; when
// sketches are present the factors and mat(z) are sketched first.
std::vector<double> ut_z(const CurvatureBlock& block, std::span<const double> z,
                         const FactorSketches* sketches = nullptr);

// UᵀU, symmetrized as (X + Xᵀ)/2 before returning.
Matrix utu(const CurvatureBlock& block, const FactorSketches* sketches = nullptr);

// U c. Averaged mode collapses the per-sample sum into a single product of
// weighted factor averages; it returns zero when Σ√|c_i| underflows.
std::vector<double> u_times_c(const CurvatureBlock& block, std::span<const double> c,
                              UcMode mode = UcMode::Exact);

}  // namespace seng::curvature
