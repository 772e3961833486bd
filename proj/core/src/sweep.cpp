#include "seng/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "seng/direction.hpp"
#include "seng/rng.hpp"

namespace seng::harness {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<SweepRow> oracle_error_sweep(const SweepConfig& config) {
    std::vector<SweepRow> rows;
    rows.reserve(config.q_grid.size());

    for (const int q : config.q_grid) {
        SweepRow row;
        row.q = q;
        std::vector<double> dir_errs, coeff_errs, etas, epss, bounds;

        for (int s = 0; s < config.seeds; ++s) {
            // Problem fixed per seed so the q axis varies only the sketch.
            Rng rng(derive_seed(config.base_seed, std::uint64_t(s), 0x5311));
            Matrix u(config.n, config.rho);
            for (int i = 0; i < config.n; ++i)
                for (int j = 0; j < config.rho; ++j) u(i, j) = rng.normal();
            std::vector<double> g(config.n);
            for (double& v : g) v = rng.normal();

            const direction::DirectionResult exact = direction::smw_exact(u, g, config.lambda);

            sketch::SketchSpec spec;
            spec.kind = config.kind;
            spec.q = q;
            spec.with_replacement = config.with_replacement;
            spec.seed = derive_seed(config.base_seed, std::uint64_t(s), std::uint64_t(q), 0xF00);
            std::vector<double> probs;
            if (spec.kind == sketch::SketchKind::Leverage) probs = sketch::leverage_probs(u);
            const sketch::SketchOperator op = sketch::build_sketch(spec, probs, config.n);

            const Matrix xi_mat = apply_sketch(op, u);
            const std::vector<double> xi_vec = apply_sketch(op, g);
            const std::vector<double> coeffs =
                direction::sketched_coeffs(xi_mat, xi_vec, config.lambda);

            std::vector<double> ub = matvec(u, coeffs);
            std::vector<double> d_hat(g.size());
            for (std::size_t k = 0; k < g.size(); ++k)
                d_hat[k] = (ub[k] - g[k]) / config.lambda;

            double coeff_diff2 = 0.0, coeff_ref2 = 0.0;
            for (std::size_t k = 0; k < coeffs.size(); ++k) {
                const double d = coeffs[k] - exact.coeffs[k];
                coeff_diff2 += d * d;
                coeff_ref2 += exact.coeffs[k] * exact.coeffs[k];
            }
            double dir_diff2 = 0.0, dir_ref2 = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double d = d_hat[k] - exact.d[k];
                dir_diff2 += d * d;
                dir_ref2 += exact.d[k] * exact.d[k];
            }
            coeff_errs.push_back(coeff_ref2 > 0.0 ? std::sqrt(coeff_diff2 / coeff_ref2) : 0.0);
            dir_errs.push_back(dir_ref2 > 0.0 ? std::sqrt(dir_diff2 / dir_ref2) : 0.0);

            // g⊥ = g − N Nᵀ g is the component the embedding must preserve.
            const TruncatedSvd svd = truncated_svd(u, std::min(config.n, config.rho));
            int rank = 0;
            for (double sv : svd.s)
                if (sv > svd.s[0] * 1e-12) ++rank;
            std::vector<double> g_perp = g;
            for (int c = 0; c < rank; ++c) {
                std::vector<double> col(config.n);
                for (int i = 0; i < config.n; ++i) col[i] = svd.u(i, c);
                const double proj = dot(col, g);
                axpy(-proj, col, g_perp);
            }
            const sketch::SketchDiagnostics diag = sketch::sketch_diagnostics(op, u, g_perp);
            etas.push_back(diag.eta);
            epss.push_back(diag.eps);
            if (diag.eta < 1.0) {
                ++row.usable_cells;
                const double bound = (1.0 / std::sqrt(config.lambda)) *
                                     ((std::sqrt(diag.eps) + diag.eta) / (1.0 - diag.eta)) *
                                     norm2(g);
                bounds.push_back(bound);
                if (std::sqrt(coeff_diff2) > bound * (1.0 + 1e-9)) ++row.bound_violations;
            }
        }

        row.med_dir_err = median(std::move(dir_errs));
        row.med_coeff_err = median(std::move(coeff_errs));
        row.med_eta = median(std::move(etas));
        row.med_eps = median(std::move(epss));
        row.med_bound = median(std::move(bounds));
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "q,med_dir_err,med_coeff_err,med_eta,med_eps,med_bound,usable_cells,bound_violations\n";
    char buf[256];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d", r.q,
                      r.med_dir_err, r.med_coeff_err, r.med_eta, r.med_eps, r.med_bound,
                      r.usable_cells, r.bound_violations);
        out << buf << '\n';
    }
}

}  // namespace seng::harness
