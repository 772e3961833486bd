#pragma once

#include <cstdint>
#include <vector>

#include "seng/matrix.hpp"
#include "seng/sketch.hpp"

namespace seng::harness {

// Two-layer ReLU network f(x) = (1/√width) aᵀ relu(W x) with fixed signs a;
// only W is trained. Inputs live on the unit sphere and are pairwise
// distinct.
struct NtkProblem {
    Matrix inputs;                 // N × m₀, unit-norm rows
    std::vector<double> targets;   // y, |y_i| ≤ 10
    int width = 0;                 // m̂
    double init_scale = 1.0;       // ν
    std::vector<double> signs;     // a ∈ {−1,+1}^m̂
    Matrix hidden;                 // W, m̂ × m₀

    int n() const { return hidden.rows() * hidden.cols(); }
    int samples() const { return inputs.rows(); }
};

NtkProblem setup_ntk(int n_samples, int input_dim, int width, double init_scale,
                     std::uint64_t seed);

std::vector<double> ntk_outputs(const NtkProblem& p);

// Per-sample rows ∂f(x_i)/∂vec(W), N × n.
Matrix ntk_jacobian(const NtkProblem& p);

enum class NtkCurvature {
    Jacobian,  // U = Jᵀ, unscaled
    Efim,      // U = 1/√N [∇ψ_1 … ∇ψ_N]
};

struct NtkRunConfig {
    double alpha = 0.5;
    double lambda = 1e-3;
    int steps = 100;
    int sketch_q = 0;  // 0 = full sketch (exact)
    sketch::SketchKind sketch_kind = sketch::SketchKind::Uniform;
    bool with_replacement = false;
    std::uint64_t seed = 0;
    NtkCurvature curvature = NtkCurvature::Jacobian;
    double abort_factor = 10.0;  // abort when the residual exceeds this × initial
};

struct NtkResult {
    std::vector<double> residuals;   // ‖fᵏ − y‖², k = 0..steps
    std::vector<double> grad_norms;  // ‖Jᵀ(f−y)‖ per step
    double lambda_min_gram = -1.0;   // λ_min(J₀J₀ᵀ) when N ≤ 64, else -1
    bool aborted = false;
};

// Damped Gauss–Newton style iteration: each step rebuilds U from the current
// Jacobian, solves the sketched LS problem for the coefficients and applies
// θ ← θ + α(−g + U b̂)/λ. Aborts with `aborted` set if the residual blows up.
NtkResult run_ntk_experiment(NtkProblem& p, const NtkRunConfig& config);

}  // namespace seng::harness
