#include "seng/direction.hpp"

#include <algorithm>
#include <cmath>

namespace seng::direction {

namespace {

void validate_lambda(double lambda) {
    if (!(lambda > 0.0)) throw DimensionError("direction: damping must be positive");
}

std::vector<double> assemble(std::span<const double> g, std::span<const double> ub,
                             double lambda) {
    std::vector<double> d(g.size());
    const double a = 1.0 / lambda;
    for (std::size_t k = 0; k < g.size(); ++k) d[k] = a * (ub[k] - g[k]);
    return d;
}

sketch::SketchOperator make_row_sketch(const curvature::CurvatureBlock& block,
                                       const SketchPlan& plan, int n) {
    const int q = plan.q > 0 ? std::min(plan.q, n) : n;
    if (q >= n) return sketch::identity_sketch(n);
    sketch::SketchSpec spec;
    spec.kind = block.row_probs.empty() ? sketch::SketchKind::Uniform : plan.kind;
    spec.q = q;
    spec.with_replacement = plan.with_replacement;
    spec.literal_scaling = plan.literal_scaling;
    spec.seed = plan.seed;
    return sketch::build_sketch(spec, block.row_probs, n);
}

}  // namespace

DirectionResult smw_exact(const Matrix& u, std::span<const double> g, double lambda) {
    validate_lambda(lambda);
    if (u.rows() > 0 && u.rows() != int(g.size()))
        throw DimensionError("smw_exact: U/g dimension mismatch");

    DirectionResult res;
    res.damping = lambda;
    res.path = Path::Exact;
    if (u.cols() == 0) {
        res.d.assign(g.size(), 0.0);
        axpy(-1.0 / lambda, g, res.d);
        return res;
    }

    Matrix gram = matmul_tn(u, u);
    for (int i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    res.coeffs = spd_solve(gram, matvec_t(u, g));
    res.d = assemble(g, matvec(u, res.coeffs), lambda);
    return res;
}

std::vector<double> sketched_coeffs(const Matrix& xi_mat, std::span<const double> xi_vec,
                                    double lambda) {
    validate_lambda(lambda);
    if (xi_mat.rows() != int(xi_vec.size()))
        throw DimensionError("sketched_coeffs: Ξ/ξ dimension mismatch");
    Matrix gram = matmul_tn(xi_mat, xi_mat);
    for (int i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    return spd_solve(gram, matvec_t(xi_mat, xi_vec));
}

int default_factor_sketch_size(int dim) {
    return std::min(dim, std::max(32, dim / 4));
}

curvature::FactorSketches make_factor_sketches(const curvature::CurvatureBlock& block,
                                               const SketchPlan& plan) {
    const int zg = plan.zeta_g > 0 ? std::min(plan.zeta_g, block.n_g)
                                   : default_factor_sketch_size(block.n_g);
    const int za = plan.zeta_a > 0 ? std::min(plan.zeta_a, block.n_a)
                                   : default_factor_sketch_size(block.n_a);
    auto make_op = [&](int dim, int zeta, const std::vector<double>& probs, std::uint64_t salt) {
        if (zeta >= dim) return sketch::identity_sketch(dim);
        sketch::SketchSpec spec;
        spec.kind = probs.empty() ? sketch::SketchKind::Uniform : plan.kind;
        spec.q = zeta;
        spec.with_replacement = plan.with_replacement;
        spec.literal_scaling = plan.literal_scaling;
        spec.seed = plan.seed ^ salt;
        return sketch::build_sketch(spec, probs, dim);
    };
    curvature::FactorSketches sk;
    sk.omega_g = make_op(block.n_g, zg, block.g_row_probs, 0x47u);
    sk.omega_a = make_op(block.n_a, za, block.a_row_probs, 0xA1u);
    return sk;
}

std::vector<double> layer_coeffs(const curvature::CurvatureBlock& block, std::span<const double> g,
                                 double lambda, const SketchPlan& plan) {
    validate_lambda(lambda);
    if (block.empty()) return {};
    if (long(g.size()) != block.n()) throw DimensionError("layer_coeffs: g length mismatch");

    if (block.mode == curvature::Mode::Explicit) {
        const sketch::SketchOperator op = make_row_sketch(block, plan, int(g.size()));
        const Matrix xi_mat = apply_sketch(op, block.u);
        const std::vector<double> xi_vec = apply_sketch(op, g);
        return sketched_coeffs(xi_mat, xi_vec, lambda);
    }

    const curvature::FactorSketches sk = make_factor_sketches(block, plan);
    Matrix gram = utu(block, &sk);
    for (int i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    return spd_solve(gram, ut_z(block, g, &sk));
}

DirectionResult layer_direction(const curvature::CurvatureBlock& block, std::span<const double> g,
                                double lambda, const SketchPlan& plan) {
    validate_lambda(lambda);

    DirectionResult res;
    res.damping = lambda;
    if (block.empty()) {
        res.path = Path::Exact;
        res.d.assign(g.size(), 0.0);
        axpy(-1.0 / lambda, g, res.d);
        return res;
    }

    res.coeffs = layer_coeffs(block, g, lambda, plan);
    if (block.mode == curvature::Mode::Explicit) {
        res.path = Path::ExplicitSketched;
        res.d = assemble(g, matvec(block.u, res.coeffs), lambda);
    } else {
        res.path = Path::Implicit;
        res.d = assemble(g, u_times_c(block, res.coeffs, plan.uc_mode), lambda);
    }
    return res;
}

}  // namespace seng::direction
