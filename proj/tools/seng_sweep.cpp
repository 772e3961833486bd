#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seng/sweep.hpp"

// Sketch-error sweep: exact SMW coefficients versus the sketched solve over
// a q grid, with the embedding diagnostics and the coefficient error bound.
int main(int argc, char** argv) {
    CLI::App app{"sketch error sweep"};
    seng::harness::SweepConfig config;
    std::string out = "sweep.csv";
    std::string kind = "uniform";
    bool with_replacement = false;

    app.add_option("--n", config.n);
    app.add_option("--rho", config.rho);
    app.add_option("--damping", config.lambda);
    app.add_option("--q", config.q_grid)->delimiter(',');
    app.add_option("--seeds", config.seeds);
    app.add_option("--seed", config.base_seed);
    app.add_option("--sketch", kind)->check(CLI::IsMember({"uniform", "leverage"}));
    app.add_flag("--with-replacement", with_replacement);
    app.add_option("--out", out);
    CLI11_PARSE(app, argc, argv);

    config.kind = kind == "leverage" ? seng::sketch::SketchKind::Leverage
                                     : seng::sketch::SketchKind::Uniform;
    config.with_replacement = with_replacement;

    try {
        const auto rows = seng::harness::oracle_error_sweep(config);
        std::ofstream file(out);
        seng::harness::write_sweep_csv(file, rows);
        seng::harness::write_sweep_csv(std::cout, rows);
        for (const auto& r : rows)
            if (r.bound_violations > 0) {
                std::cerr << "{\"error\":\"bound_violation\",\"q\":" << r.q << "}" << std::endl;
                return 1;
            }
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"runtime_error\",\"message\":\"" << e.what() << "\"}"
                  << std::endl;
        return 1;
    }
    return 0;
}
