#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace filtlab {

/// Strictly positive probability weights over the atoms of a finite space.
/// Every measure here is equivalent to every other one by construction.
struct Measure {
    std::vector<double> w;

    std::size_t size() const { return w.size(); }
    double total() const;
    void validate(double tol = 1e-14) const;  // throws on violation
};

/// A partition of the atom set, stored as a cell id per atom. Cell ids are
/// canonicalized to 0..cell_count()-1 in order of first appearance, so no
/// cell can be empty.
class Partition {
  public:
    static Partition trivial(std::size_t n_atoms);
    explicit Partition(std::vector<int> cell_of);

    int cell(std::size_t atom) const { return cell_of_[atom]; }
    int cell_count() const { return n_cells_; }
    std::size_t atom_count() const { return cell_of_.size(); }

    bool refines(const Partition& coarser) const;
    std::vector<std::vector<std::size_t>> cells() const;

    bool operator==(const Partition&) const = default;

  private:
    std::vector<int> cell_of_;
    int n_cells_ = 0;
};

/// A refining sequence of partitions, one per time step 0..horizon().
/// Base-space builders start from the trivial partition; enlarged
/// filtrations may carry information at step 0.
class Filtration {
  public:
    explicit Filtration(std::vector<Partition> steps);

    int horizon() const { return static_cast<int>(steps_.size()) - 1; }
    std::size_t atom_count() const { return steps_.front().atom_count(); }
    const Partition& at(int k) const { return steps_[static_cast<std::size_t>(k)]; }
    /// Partition of the strict past; at step 0 this is the step-0 partition.
    const Partition& before(int k) const { return steps_[static_cast<std::size_t>(k > 0 ? k - 1 : 0)]; }

  private:
    std::vector<Partition> steps_;
};

/// Atoms, base weights and observation times 0 = t_0 < ... < t_N.
struct FiniteSpace {
    Measure base;
    std::vector<double> time_grid;

    int horizon() const { return static_cast<int>(time_grid.size()) - 1; }
    std::size_t atom_count() const { return base.size(); }
    void validate() const;
};

/// Values per (step, atom). Whether the values are adapted or predictable
/// is a property relative to a filtration, checked with the helpers below.
class AdaptedProcess {
  public:
    AdaptedProcess() = default;
    AdaptedProcess(int horizon, std::size_t n_atoms, double init = 0.0);

    double& at(int k, std::size_t a) { return v_[idx(k, a)]; }
    double at(int k, std::size_t a) const { return v_[idx(k, a)]; }
    std::span<const double> step(int k) const { return {v_.data() + idx(k, 0), n_}; }
    std::span<double> step(int k) { return {v_.data() + idx(k, 0), n_}; }

    int horizon() const { return N_; }
    std::size_t atom_count() const { return n_; }

    AdaptedProcess& operator+=(const AdaptedProcess& other);
    AdaptedProcess& operator-=(const AdaptedProcess& other);

  private:
    std::size_t idx(int k, std::size_t a) const { return static_cast<std::size_t>(k) * n_ + a; }
    int N_ = -1;
    std::size_t n_ = 0;
    std::vector<double> v_;
};

bool is_adapted(const AdaptedProcess& x, const Filtration& f, double tol = 0.0);
bool is_predictable(const AdaptedProcess& x, const Filtration& f, double tol = 0.0);

/// E[x | pi] under mu, returned per atom (constant on cells).
std::vector<double> cond_exp(std::span<const double> x, const Measure& mu, const Partition& pi);

struct MartingaleCheck {
    bool ok = false;
    double max_residual = 0.0;
    int worst_step = -1;
    int worst_cell = -1;
};

/// Max over steps k in [from, to) and cells C of |E[X_{k+1}|C] - X_k(C)|.
MartingaleCheck is_martingale(const AdaptedProcess& x, const Filtration& f,
                              const Measure& mu, double tol,
                              int from_step = 0, int to_step = -1);

/// X = X_0 + martingale + predictable, both parts starting at zero; the
/// predictable part's step-k increment is measurable at step k-1.
struct DoobDecomposition {
    AdaptedProcess martingale;
    AdaptedProcess predictable;
};
DoobDecomposition doob_decomposition(const AdaptedProcess& x, const Filtration& f,
                                     const Measure& mu);

/// <X,Y>_k = sum_{j<=k} E[dX_j dY_j | F_{j-1}], a predictable process.
AdaptedProcess predictable_bracket(const AdaptedProcess& x, const AdaptedProcess& y,
                                   const Filtration& f, const Measure& mu);

/// Value at step k is E[Y_k | F_{k-1}] (F_0 at step 0). Y need not be adapted.
AdaptedProcess predictable_projection(const AdaptedProcess& y, const Filtration& f,
                                      const Measure& mu);

// --- full binary path trees ---------------------------------------------

/// Non-recombining binary tree with 2^n_steps path atoms. Atom bit
/// (n_steps-1-k) holds the step-(k+1) move, so the step-k information is
/// the atom index shifted right by (n_steps-k); cell c at step k has
/// children 2c (down) and 2c+1 (up) at step k+1.
struct BinaryTree {
    int n_steps = 0;
    FiniteSpace space;
    Filtration filtration;

    std::size_t cell_of(int k, std::size_t atom) const {
        return atom >> static_cast<unsigned>(n_steps - k);
    }
};

BinaryTree fair_binary_tree(int n_steps, double horizon);

/// Branch probabilities drawn per cell from `up_prob(step, cell)`.
BinaryTree weighted_binary_tree(int n_steps, double horizon,
                                const std::function<double(int, std::size_t)>& up_prob);

/// Conditional up-probability per (step, cell) implied by a measure on the
/// tree's atoms.
std::vector<std::vector<double>> branch_up_probs(const BinaryTree& tree, const Measure& mu);

/// The tree's fundamental martingale z under mu: increments +2*w_down on an
/// up move and -2*w_up on a down move (the +-1 walk on a fair tree). Every
/// (mu, F)-martingale is a predictable integral against z.
AdaptedProcess fundamental_martingale(const BinaryTree& tree, const Measure& mu);

/// Doob martingale of a terminal payoff: X_k = E[Z | F_k] under mu.
AdaptedProcess doob_martingale(std::span<const double> terminal, const Filtration& f,
                               const Measure& mu);

}  // namespace filtlab
