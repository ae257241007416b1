#pragma once

// Brute-force oracles used to pin expected values. These are written from
// the definitions with plain loops over explicit cell lists and stay
// independent of the library code paths they are used to check.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "filtlab/finite_space.hpp"

namespace oracle {

// Weighted average over each explicit cell, assigned back per atom.
inline std::vector<double> naive_cond_exp(const std::vector<double>& x,
                                          const std::vector<double>& weights,
                                          const std::vector<std::vector<std::size_t>>& cells) {
    std::vector<double> out(x.size(), 0.0);
    for (const auto& cell : cells) {
        double num = 0.0, den = 0.0;
        for (std::size_t a : cell) {
            num += weights[a] * x[a];
            den += weights[a];
        }
        for (std::size_t a : cell) out[a] = num / den;
    }
    return out;
}

// Doob decomposition computed directly from its defining recursion.
struct NaiveDoob {
    std::vector<std::vector<double>> martingale, predictable;
};

inline NaiveDoob naive_doob(const filtlab::AdaptedProcess& x, const filtlab::Filtration& f,
                            const filtlab::Measure& mu) {
    int N = x.horizon();
    std::size_t n = x.atom_count();
    NaiveDoob d;
    d.martingale.assign(static_cast<std::size_t>(N) + 1, std::vector<double>(n, 0.0));
    d.predictable = d.martingale;
    for (int k = 1; k <= N; ++k) {
        auto cells = f.at(k - 1).cells();
        std::vector<double> xk(n), xk1(n);
        for (std::size_t a = 0; a < n; ++a) {
            xk[a] = x.at(k - 1, a);
            xk1[a] = x.at(k, a);
        }
        auto e = naive_cond_exp(xk1, mu.w, cells);
        for (std::size_t a = 0; a < n; ++a) {
            double dfv = e[a] - xk[a];
            d.predictable[static_cast<std::size_t>(k)][a] =
                d.predictable[static_cast<std::size_t>(k - 1)][a] + dfv;
            d.martingale[static_cast<std::size_t>(k)][a] =
                d.martingale[static_cast<std::size_t>(k - 1)][a] + (xk1[a] - xk[a]) - dfv;
        }
    }
    return d;
}

inline std::vector<std::vector<double>> naive_bracket(const filtlab::AdaptedProcess& x,
                                                      const filtlab::AdaptedProcess& y,
                                                      const filtlab::Filtration& f,
                                                      const filtlab::Measure& mu) {
    int N = x.horizon();
    std::size_t n = x.atom_count();
    std::vector<std::vector<double>> b(static_cast<std::size_t>(N) + 1,
                                       std::vector<double>(n, 0.0));
    for (int k = 1; k <= N; ++k) {
        std::vector<double> prod(n);
        for (std::size_t a = 0; a < n; ++a)
            prod[a] = (x.at(k, a) - x.at(k - 1, a)) * (y.at(k, a) - y.at(k - 1, a));
        auto e = naive_cond_exp(prod, mu.w, f.at(k - 1).cells());
        for (std::size_t a = 0; a < n; ++a)
            b[static_cast<std::size_t>(k)][a] = b[static_cast<std::size_t>(k - 1)][a] + e[a];
    }
    return b;
}

// Deterministic helpers for randomized cases.
inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64{seed}; }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline filtlab::BinaryTree random_tree(int n_steps, double horizon, std::uint64_t seed) {
    auto g = rng(seed);
    std::vector<std::vector<double>> probs(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k) {
        probs[static_cast<std::size_t>(k)].resize(std::size_t{1} << static_cast<unsigned>(k));
        for (auto& p : probs[static_cast<std::size_t>(k)]) p = uniform(g, 0.2, 0.8);
    }
    return filtlab::weighted_binary_tree(
        n_steps, horizon,
        [&probs](int k, std::size_t c) { return probs[static_cast<std::size_t>(k)][c]; });
}

}  // namespace oracle
