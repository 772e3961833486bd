#pragma once

#include <vector>

#include "seng/matrix.hpp"
#include "seng/net.hpp"
#include "seng/rng.hpp"

namespace bench {

inline seng::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
    seng::Rng rng(seed);
    seng::Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline std::vector<double> random_vector(int n, std::uint64_t seed) {
    seng::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

inline std::vector<seng::net::GradientFactors> random_factors(int rho, int n_g, int n_a,
                                                              int kappa, std::uint64_t seed) {
    std::vector<seng::net::GradientFactors> f(rho);
    for (int i = 0; i < rho; ++i) {
        f[i].g_hat = random_matrix(n_g, kappa, seed + 2 * i);
        f[i].a_hat = random_matrix(n_a, kappa, seed + 2 * i + 1);
    }
    return f;
}

}  // namespace bench
