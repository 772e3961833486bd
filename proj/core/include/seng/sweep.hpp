#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "seng/sketch.hpp"

namespace seng::harness {

// One sweep cell solves a random layer problem exactly and through the
// sketched path, then measures errors and the embedding diagnostics.
struct SweepConfig {
    int n = 512;
    int rho = 16;
    double lambda = 1.0;
    std::vector<int> q_grid{64, 128, 256, 512};
    int seeds = 50;
    std::uint64_t base_seed = 0;
    sketch::SketchKind kind = sketch::SketchKind::Uniform;
    bool with_replacement = false;
};

struct SweepRow {
    int q = 0;
    double med_dir_err = 0.0;    // median ‖d̂−d‖/‖d‖
    double med_coeff_err = 0.0;  // median ‖b̂−b‖/‖b‖
    double med_eta = 0.0;
    double med_eps = 0.0;
    double med_bound = 0.0;  // median (1/√λ)((√ε̂+η̂)/(1−η̂))‖g‖
    int usable_cells = 0;    // cells with η̂ < 1
    int bound_violations = 0;
};

std::vector<SweepRow> oracle_error_sweep(const SweepConfig& config);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace seng::harness
