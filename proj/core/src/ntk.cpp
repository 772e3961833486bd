#include "seng/ntk.hpp"

#include <cmath>

#include "seng/direction.hpp"
#include "seng/rng.hpp"

namespace seng::harness {

NtkProblem setup_ntk(int n_samples, int input_dim, int width, double init_scale,
                     std::uint64_t seed) {
    if (n_samples < 2) throw DimensionError("setup_ntk: need at least 2 samples");
    if (width < 1 || input_dim < 1) throw DimensionError("setup_ntk: bad width or input dim");

    NtkProblem p;
    p.width = width;
    p.init_scale = init_scale;
    p.inputs = Matrix(n_samples, input_dim);
    p.targets.resize(n_samples);
    Rng rng(derive_seed(seed, 0x17c));

    for (int i = 0; i < n_samples; ++i) {
        bool distinct = false;
        for (int attempt = 0; attempt < 100 && !distinct; ++attempt) {
            double nrm = 0.0;
            std::vector<double> x(input_dim);
            do {
                for (int j = 0; j < input_dim; ++j) x[j] = rng.normal();
                nrm = norm2(x);
            } while (nrm < 1e-12);
            for (int j = 0; j < input_dim; ++j) p.inputs(i, j) = x[j] / nrm;
            distinct = true;
            for (int k = 0; k < i && distinct; ++k) {
                double dist2 = 0.0;
                for (int j = 0; j < input_dim; ++j) {
                    const double d = p.inputs(i, j) - p.inputs(k, j);
                    dist2 += d * d;
                }
                if (dist2 < 1e-18) distinct = false;
            }
        }
        if (!distinct) throw DegenerateInputError("setup_ntk: could not draw distinct inputs");
        p.targets[i] = rng.uniform(-1.0, 1.0);
    }

    p.signs.resize(width);
    for (int i = 0; i < width; ++i) p.signs[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    p.hidden = Matrix(width, input_dim);
    for (int i = 0; i < width; ++i)
        for (int j = 0; j < input_dim; ++j) p.hidden(i, j) = init_scale * rng.normal();
    return p;
}

std::vector<double> ntk_outputs(const NtkProblem& p) {
    const double scale = 1.0 / std::sqrt(double(p.width));
    std::vector<double> f(p.samples(), 0.0);
    for (int s = 0; s < p.samples(); ++s) {
        const auto x = p.inputs.row(s);
        double acc = 0.0;
        for (int i = 0; i < p.width; ++i) {
            const double pre = dot(p.hidden.row(i), x);
            if (pre > 0.0) acc += p.signs[i] * pre;  // relu, subgradient 0 at the kink
        }
        f[s] = scale * acc;
    }
    return f;
}

Matrix ntk_jacobian(const NtkProblem& p) {
    const double scale = 1.0 / std::sqrt(double(p.width));
    const int m0 = p.inputs.cols();
    Matrix j(p.samples(), p.n());
    for (int s = 0; s < p.samples(); ++s) {
        const auto x = p.inputs.row(s);
        for (int i = 0; i < p.width; ++i) {
            if (dot(p.hidden.row(i), x) <= 0.0) continue;
            const double c = scale * p.signs[i];
            double* row = j.data() + std::size_t(s) * p.n() + std::size_t(i) * m0;
            for (int k = 0; k < m0; ++k) row[k] = c * x[k];
        }
    }
    return j;
}

NtkResult run_ntk_experiment(NtkProblem& p, const NtkRunConfig& config) {
    if (!(config.lambda > 0.0)) throw DimensionError("run_ntk_experiment: lambda must be positive");
    const int n_samples = p.samples();
    const int n = p.n();

    NtkResult result;
    {
        const Matrix j0 = ntk_jacobian(p);
        if (n_samples <= 64) {
            const Matrix gram = matmul_nt(j0, j0);
            result.lambda_min_gram = truncated_svd(gram, gram.rows()).s.back();
        }
    }

    double initial = -1.0;
    for (int step = 0; step <= config.steps; ++step) {
        const std::vector<double> f = ntk_outputs(p);
        std::vector<double> resid(n_samples);
        for (int i = 0; i < n_samples; ++i) resid[i] = f[i] - p.targets[i];
        const double r2 = dot(resid, resid);
        result.residuals.push_back(r2);
        if (initial < 0.0) initial = r2;
        if (r2 > config.abort_factor * initial && step > 0) {
            result.aborted = true;
            break;
        }
        if (step == config.steps) break;

        const Matrix jac = ntk_jacobian(p);
        const std::vector<double> g = matvec_t(jac, resid);  // ∇Ψ = Jᵀ(f−y)
        result.grad_norms.push_back(norm2(g));

        Matrix u;
        if (config.curvature == NtkCurvature::Jacobian) {
            u = transpose(jac);
        } else {
            u = transpose(jac);
            const double col = 1.0 / std::sqrt(double(n_samples));
            for (int c = 0; c < u.cols(); ++c)
                for (int rr = 0; rr < u.rows(); ++rr) u(rr, c) *= col * resid[c];
        }

        sketch::SketchOperator op;
        if (config.sketch_q <= 0 || config.sketch_q >= n) {
            op = sketch::identity_sketch(n);
        } else {
            sketch::SketchSpec spec;
            spec.kind = config.sketch_kind;
            spec.q = config.sketch_q;
            spec.with_replacement = config.with_replacement;
            spec.seed = derive_seed(config.seed, std::uint64_t(step));
            std::vector<double> probs;
            if (spec.kind == sketch::SketchKind::Leverage) probs = sketch::leverage_probs(u);
            op = sketch::build_sketch(spec, probs, n);
        }

        const Matrix xi_mat = apply_sketch(op, u);
        const std::vector<double> xi_vec = apply_sketch(op, g);
        const std::vector<double> coeffs = direction::sketched_coeffs(xi_mat, xi_vec, config.lambda);
        const std::vector<double> ub = matvec(u, coeffs);

        // θ ← θ + α (−g + U b̂)/λ on the hidden weights
        const double a = config.alpha / config.lambda;
        double* w = p.hidden.data();
        for (int k = 0; k < n; ++k) w[k] += a * (ub[k] - g[k]);
    }
    return result;
}

}  // namespace seng::harness
