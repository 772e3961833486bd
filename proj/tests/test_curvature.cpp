#include <doctest.h>

#include <cmath>

#include "seng/curvature.hpp"
#include "seng/rng.hpp"
#include "test_support.hpp"

using namespace seng;
using namespace seng::curvature;

namespace {

std::vector<net::GradientFactors> random_factors(int rho, int n_g, int n_a, int kappa,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<net::GradientFactors> factors;
    factors.reserve(rho);
    for (int i = 0; i < rho; ++i) {
        net::GradientFactors f;
        f.g_hat = oracle::random_matrix(n_g, kappa, rng);
        f.a_hat = oracle::random_matrix(n_a, kappa, rng);
        factors.push_back(std::move(f));
    }
    return factors;
}

// n × ϱ matrix of materialized, 1/√ϱ-scaled per-sample gradients.
Matrix materialize_u(std::span<const net::GradientFactors> factors) {
    const int rho = int(factors.size());
    const int n = factors[0].g_hat.rows() * factors[0].a_hat.rows();
    Matrix u(n, rho);
    const double s = 1.0 / std::sqrt(double(rho));
    for (int i = 0; i < rho; ++i) {
        const std::vector<double> ui = net::materialize_gradient(factors[i]);
        for (int k = 0; k < n; ++k) u(k, i) = ui[k] * s;
    }
    return u;
}

}  // namespace

TEST_CASE("routing follows the parameter threshold") {
    // 64·147 = 9408 parameters → explicit under a 1e5 threshold
    auto small = random_factors(2, 64, 147, 3, 1);
    CurvatureBlock b1 = route_and_refresh({}, small, 0, 1, 100000, 2);
    CHECK(b1.mode == Mode::Explicit);
    CHECK(b1.u.rows() == 9408);

    // 512·4608 = 2359296 → implicit
    auto big = random_factors(2, 512, 4608, 3, 2);
    CurvatureBlock b2 = route_and_refresh({}, big, 0, 1, 100000, 2);
    CHECK(b2.mode == Mode::Implicit);
    CHECK(b2.g_bank.size() == 2);
}

TEST_CASE("factor-inequality routing rule") {
    // n = 24 > (n_G+n_A)·κ = 10 → implicit under the factored rule
    auto f = random_factors(2, 4, 6, 1, 3);
    CurvatureBlock b = route_and_refresh({}, f, 0, 1, 1000000, 1, RoutingRule::FactorInequality);
    CHECK(b.mode == Mode::Implicit);
}

TEST_CASE("refresh gating keeps the block bitwise constant") {
    auto f0 = random_factors(3, 4, 5, 2, 4);
    CurvatureBlock b = route_and_refresh({}, f0, 0, 5, 1000, 2);
    const std::vector<double> before(b.u.data(), b.u.data() + b.u.size());

    auto f1 = random_factors(3, 4, 5, 2, 99);
    b = route_and_refresh(std::move(b), f1, 3, 5, 1000, 2);
    REQUIRE(std::size_t(b.u.size()) == before.size());
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(b.u.data()[k] == before[k]);
    CHECK(b.last_refresh_step == 0);

    b = route_and_refresh(std::move(b), f1, 5, 5, 1000, 2);
    CHECK(b.last_refresh_step == 5);
}

TEST_CASE("rank above kappa is clamped and flagged") {
    auto f = random_factors(2, 30, 40, 3, 5);
    CurvatureBlock b = route_and_refresh({}, f, 0, 1, 10, 16);  // implicit, r=16 > κ=3
    CHECK(b.mode == Mode::Implicit);
    CHECK(b.rank == 3);
    CHECK(b.rank_clamped);
}

TEST_CASE("implicit bank reconstructs u_i within the truncation tail") {
    Rng rng(6);
    const int rho = 3, n_g = 10, n_a = 6, kappa = 5;
    auto factors = random_factors(rho, n_g, n_a, kappa, 7);

    // full rank: exact reconstruction
    CurvatureBlock full = route_and_refresh({}, factors, 0, 1, 1, kappa);
    const double s = 1.0 / std::sqrt(double(rho));
    for (int i = 0; i < rho; ++i) {
        const Matrix prod = matmul_nt(full.g_bank[i], full.a_bank[i]);
        std::vector<double> want = net::materialize_gradient(factors[i]);
        scale(s, want);
        CHECK(oracle::vec_diff(mat_vec(prod), want) <= 1e-10 * (1.0 + norm2(want)));
    }

    // truncated: error bounded by tail(Ĝ)·‖Â‖₂ (SVD side is the larger factor)
    const int r = 2;
    CurvatureBlock trunc = route_and_refresh({}, factors, 0, 1, 1, r);
    for (int i = 0; i < rho; ++i) {
        const Matrix prod = matmul_nt(trunc.g_bank[i], trunc.a_bank[i]);
        std::vector<double> want = net::materialize_gradient(factors[i]);
        scale(s, want);
        const double err = oracle::vec_diff(mat_vec(prod), want);

        const std::vector<double> sv = oracle::singular_values(factors[i].g_hat);
        double tail2 = 0.0;
        for (std::size_t k = r; k < sv.size(); ++k) tail2 += sv[k] * sv[k];
        const std::vector<double> sva = oracle::singular_values(factors[i].a_hat);
        CHECK(err <= s * std::sqrt(tail2) * sva[0] * (1.0 + 1e-8));
    }
}

TEST_CASE("ut_z collapse chain at r = kappa") {
    const int rho = 4, n_g = 7, n_a = 5, kappa = 3;
    auto factors = random_factors(rho, n_g, n_a, kappa, 8);
    const Matrix u = materialize_u(factors);
    Rng rng(9);
    const std::vector<double> z = oracle::random_vector(n_g * n_a, rng);
    const std::vector<double> want = matvec_t(u, z);

    CurvatureBlock exp_block = route_and_refresh({}, factors, 0, 1, 1000000, kappa);
    REQUIRE(exp_block.mode == Mode::Explicit);
    CHECK(oracle::vec_diff(ut_z(exp_block, z), want) <= 1e-10 * (1.0 + norm2(want)));

    CurvatureBlock imp_block = route_and_refresh({}, factors, 0, 1, 1, kappa);
    REQUIRE(imp_block.mode == Mode::Implicit);
    CHECK(oracle::vec_diff(ut_z(imp_block, z), want) <= 1e-10 * (1.0 + norm2(want)));

    // identity factor sketches give the no-sketch values exactly
    FactorSketches ident;
    ident.omega_g = sketch::identity_sketch(n_g);
    ident.omega_a = sketch::identity_sketch(n_a);
    const std::vector<double> no_sketch = ut_z(imp_block, z);
    const std::vector<double> with_ident = ut_z(imp_block, z, &ident);
    for (int i = 0; i < rho; ++i) CHECK(with_ident[i] == no_sketch[i]);

    // zero input
    const std::vector<double> zero(n_g * n_a, 0.0);
    CHECK(norm2(ut_z(imp_block, zero)) == 0.0);
}

TEST_CASE("utu collapse chain and PSD") {
    const int rho = 5, n_g = 6, n_a = 4, kappa = 2;
    auto factors = random_factors(rho, n_g, n_a, kappa, 10);
    const Matrix u = materialize_u(factors);
    const Matrix want = matmul_tn(u, u);

    CurvatureBlock exp_block = route_and_refresh({}, factors, 0, 1, 1000000, kappa);
    CurvatureBlock imp_block = route_and_refresh({}, factors, 0, 1, 1, kappa);

    const Matrix exp_gram = utu(exp_block);
    const Matrix imp_gram = utu(imp_block);
    for (int i = 0; i < rho; ++i)
        for (int j = 0; j < rho; ++j) {
            CHECK(std::abs(exp_gram(i, j) - want(i, j)) <= 1e-10 * (1.0 + std::abs(want(i, j))));
            CHECK(std::abs(imp_gram(i, j) - want(i, j)) <= 1e-10 * (1.0 + std::abs(want(i, j))));
            CHECK(exp_gram(i, j) == exp_gram(j, i));
            CHECK(imp_gram(i, j) == imp_gram(j, i));
        }

    const std::vector<double> ev = oracle::sym_eigenvalues(imp_gram);
    CHECK(ev.back() >= -1e-10);

    FactorSketches ident;
    ident.omega_g = sketch::identity_sketch(n_g);
    ident.omega_a = sketch::identity_sketch(n_a);
    const Matrix with_ident = utu(imp_block, &ident);
    CHECK(oracle::frob_diff(with_ident, imp_gram) == 0.0);
}

TEST_CASE("utu single sample matches the materialized gradient norm") {
    auto factors = random_factors(1, 5, 4, 2, 11);
    CurvatureBlock b = route_and_refresh({}, factors, 0, 1, 1000000, 2);
    const std::vector<double> u1 = net::materialize_gradient(factors[0]);
    const Matrix gram = utu(b);
    CHECK(gram(0, 0) == doctest::Approx(dot(u1, u1) / 1.0).epsilon(1e-12));
}

TEST_CASE("utu off-diagonals vanish for orthogonal per-sample gradients") {
    // dense-layer factors with disjoint supports
    std::vector<net::GradientFactors> factors(2);
    factors[0].g_hat = Matrix(2, 1, {1.0, 0.0});
    factors[0].a_hat = Matrix(2, 1, {1.0, 1.0});
    factors[1].g_hat = Matrix(2, 1, {0.0, 1.0});
    factors[1].a_hat = Matrix(2, 1, {1.0, -1.0});
    CurvatureBlock b = route_and_refresh({}, factors, 0, 1, 1000000, 1);
    const Matrix gram = utu(b);
    CHECK(gram(0, 1) == 0.0);
}

TEST_CASE("u_times_c exact mode matches the materialized sum") {
    const int rho = 4, n_g = 6, n_a = 5, kappa = 3;
    auto factors = random_factors(rho, n_g, n_a, kappa, 12);
    Rng rng(13);
    std::vector<double> c = oracle::random_vector(rho, rng);

    CurvatureBlock b = route_and_refresh({}, factors, 0, 1, 1, kappa);
    const std::vector<double> got = u_times_c(b, c, UcMode::Exact);

    std::vector<double> want(std::size_t(n_g) * n_a, 0.0);
    const double s = 1.0 / std::sqrt(double(rho));
    for (int i = 0; i < rho; ++i)
        axpy(c[i] * s, net::materialize_gradient(factors[i]), want);
    CHECK(oracle::vec_diff(got, want) <= 1e-12 * (1.0 + norm2(want)));

    // averaged mode is an approximation; record its relative error
    const std::vector<double> avg = u_times_c(b, c, UcMode::Averaged);
    const double rel = oracle::vec_diff(avg, want) / norm2(want);
    CHECK(std::isfinite(rel));
    MESSAGE("averaged-mode relative error: ", rel);

    // c = 0 → zero in both modes
    std::vector<double> zero(rho, 0.0);
    CHECK(norm2(u_times_c(b, zero, UcMode::Exact)) == 0.0);
    CHECK(norm2(u_times_c(b, zero, UcMode::Averaged)) == 0.0);
}

TEST_CASE("u_times_c averaged collapses to exact for one sample") {
    auto factors = random_factors(1, 5, 7, 2, 14);
    CurvatureBlock b = route_and_refresh({}, factors, 0, 1, 1, 2);
    std::vector<double> c{0.37};
    const std::vector<double> exact = u_times_c(b, c, UcMode::Exact);
    const std::vector<double> avg = u_times_c(b, c, UcMode::Averaged);
    CHECK(oracle::vec_diff(exact, avg) <= 1e-12 * (1.0 + norm2(exact)));

    c[0] = -0.37;  // negative coefficient keeps the collapse
    const std::vector<double> exact_n = u_times_c(b, c, UcMode::Exact);
    const std::vector<double> avg_n = u_times_c(b, c, UcMode::Averaged);
    CHECK(oracle::vec_diff(exact_n, avg_n) <= 1e-12 * (1.0 + norm2(exact_n)));
}

TEST_CASE("implicit products never materialize an n x rho buffer") {
    const int rho = 8, n_g = 64, n_a = 96, kappa = 6;  // n = 6144
    auto factors = random_factors(rho, n_g, n_a, kappa, 15);
    CurvatureBlock b = route_and_refresh({}, factors, 0, 1, 1, 4);
    REQUIRE(b.mode == Mode::Implicit);

    Rng rng(16);
    const std::vector<double> z = oracle::random_vector(n_g * n_a, rng);
    const std::size_t limit = std::size_t(n_g) * n_a * rho;
    {
        ScopedAllocTracking track;
        (void)ut_z(b, z);
        (void)utu(b);
        (void)u_times_c(b, std::vector<double>(rho, 1.0), UcMode::Averaged);
        CHECK(track.stats().max_block_elems < limit);
    }
    {
        ScopedAllocTracking track;
        CurvatureBlock eb = route_and_refresh({}, factors, 0, 1, 1000000, 4);
        REQUIRE(eb.mode == Mode::Explicit);
        CHECK(track.stats().max_block_elems >= limit);
    }
}

TEST_CASE("empty refresh batch yields an empty block") {
    CurvatureBlock b = route_and_refresh({}, {}, 0, 1, 1000, 4);
    CHECK(b.empty());
    CHECK(b.last_refresh_step == 0);
}
