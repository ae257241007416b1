#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "filtlab/finite_space.hpp"
#include "filtlab/report.hpp"

namespace filtlab {

/// Discretized law of the random time: support points u_1 < ... < u_m with
/// strictly positive masses summing to 1. The support must extend beyond
/// the horizon of any space it is paired with, so the survival process
/// stays positive.
struct TauGrid {
    std::vector<double> u;
    std::vector<double> nu;

    std::size_t size() const { return u.size(); }
    void validate(double tol = 1e-14) const;
    double tail_mass(double t) const;  // nu-mass of (t, infinity)
};

/// Equal-mass discretization of Exp(rate) truncated to (0, 2*horizon],
/// using quantile midpoints. Support points are nudged off observation
/// times so diagonal evaluation never ties.
TauGrid exp_tau_grid(std::size_t m, double horizon, double rate = 1.0,
                     std::span<const double> avoid_times = {});

/// The conditional-density family p_k(a, u_i) together with the base
/// space, its filtration and the tau law. Invariants: p > 0, p_0 = 1,
/// each p(u_i) a martingale under the space's measure, and the pathwise
/// normalization sum_i nu_i p_k(a, u_i) = 1.
class DensityKernel {
  public:
    DensityKernel(FiniteSpace space, Filtration filt, TauGrid grid, std::vector<double> p);

    const FiniteSpace& space() const { return space_; }
    const Filtration& filtration() const { return filt_; }
    const TauGrid& grid() const { return grid_; }
    const Measure& measure() const { return space_.base; }

    int horizon() const { return space_.horizon(); }
    std::size_t atom_count() const { return space_.atom_count(); }
    std::size_t m() const { return grid_.size(); }

    double p(int k, std::size_t a, std::size_t i) const {
        return p_[(static_cast<std::size_t>(k) * atom_count() + a) * m() + i];
    }
    double& p(int k, std::size_t a, std::size_t i) {
        return p_[(static_cast<std::size_t>(k) * atom_count() + a) * m() + i];
    }
    const std::vector<double>& raw() const { return p_; }

    /// First step k with u_i <= t_k; horizon()+1 when u_i is past the grid.
    int kappa(std::size_t i) const { return kappa_[i]; }
    /// Largest i with u_i <= t_k, or -1 when there is none.
    int diag_index(int k) const { return diag_[static_cast<std::size_t>(k)]; }
    /// nu-mass of the band (t_{k-1}, t_k].
    double nu_band(int k) const;
    /// Diagonal value p_k(t_k): the kernel at the largest support point
    /// <= t_k, or the initial value 1 when no support point has elapsed.
    double diagonal(int k, std::size_t a) const;

    /// Per-u process as an AdaptedProcess over the base atoms.
    AdaptedProcess per_u(std::size_t i) const;

  private:
    FiniteSpace space_;
    Filtration filt_;
    TauGrid grid_;
    std::vector<double> p_;
    std::vector<int> kappa_;
    std::vector<int> diag_;
};

/// p == 1: the situation where the random time is independent of the base
/// information flow.
DensityKernel independent_kernel(const FiniteSpace& space, const Filtration& filt,
                                 const TauGrid& grid);

/// One-factor model on a binary tree: per-u positive martingales
/// q_k(u) with multiplicative increments 1 +- sigma(u)*sqrt(dt), normalized
/// pathwise by n_k = sum_j nu_j q_k(u_j). The returned kernel carries the
/// adjusted base measure (density n_N against the tree's weights), under
/// which every p(u) is an exact martingale.
DensityKernel factor_model_kernel(const BinaryTree& tree, const TauGrid& grid,
                                  const std::function<double(double)>& sigma);

/// Factor-style kernel with each p(u_i) frozen from the first step at or
/// after u_i on; the increments of the still-live components are projected
/// so the pathwise normalization is preserved. Built on a fair tree, whose
/// measure is kept.
DensityKernel frozen_factor_kernel(const BinaryTree& tree, const TauGrid& grid,
                                   const std::function<double(double)>& sigma);

/// Adversarial generator: random positive kernel satisfying all the
/// invariants, built forward with per-cell increments projected onto the
/// martingale and normalization constraints.
DensityKernel randomized_kernel(const FiniteSpace& space, const Filtration& filt,
                                const TauGrid& grid, std::uint64_t seed);

/// Checks positivity, the initial condition, the per-u martingale property
/// and the pathwise normalization; lists each violation with its location.
SuiteReport validate(const DensityKernel& kernel, double tol = 1e-12);

/// G_k = sum_{u_i > t_k} nu_i p_k(u_i) and its deterministic counterpart
/// G*(t_k) = sum_{u_i > t_k} nu_i.
struct SurvivalProcess {
    AdaptedProcess G;
    std::vector<double> G_star;
};
SurvivalProcess survival_G(const DensityKernel& kernel);

/// lambda_k = p_k(t_k) / G_k and lambda*(t_k) = 1 / G*(t_k).
struct IntensityProcess {
    AdaptedProcess lambda;
    std::vector<double> lambda_star;
};
IntensityProcess intensity(const DensityKernel& kernel);

nlohmann::ordered_json kernel_to_json(const DensityKernel& kernel);
DensityKernel kernel_from_json(const nlohmann::json& j);

}  // namespace filtlab
