#include "filtlab/finite_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace filtlab {

double Measure::total() const {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
}

void Measure::validate(double tol) const {
    if (w.empty()) throw std::invalid_argument("measure: no atoms");
    for (std::size_t a = 0; a < w.size(); ++a)
        if (!(w[a] > 0.0))
            throw std::invalid_argument("measure: non-positive weight at atom " + std::to_string(a));
    if (std::abs(total() - 1.0) > tol)
        throw std::invalid_argument("measure: weights do not sum to 1");
}

Partition Partition::trivial(std::size_t n_atoms) {
    return Partition(std::vector<int>(n_atoms, 0));
}

Partition::Partition(std::vector<int> cell_of) : cell_of_(std::move(cell_of)) {
    if (cell_of_.empty()) throw std::invalid_argument("partition: no atoms");
    // Canonicalize labels in order of first appearance.
    std::vector<int> remap(cell_of_.size(), -1);
    int next = 0;
    for (int& c : cell_of_) {
        if (c < 0 || static_cast<std::size_t>(c) >= remap.size())
            throw std::invalid_argument("partition: cell label out of range");
        if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
        c = remap[static_cast<std::size_t>(c)];
    }
    n_cells_ = next;
}

bool Partition::refines(const Partition& coarser) const {
    if (atom_count() != coarser.atom_count()) return false;
    std::vector<int> coarse_of_fine(static_cast<std::size_t>(n_cells_), -1);
    for (std::size_t a = 0; a < cell_of_.size(); ++a) {
        int fine = cell_of_[a];
        int coarse = coarser.cell(a);
        int& slot = coarse_of_fine[static_cast<std::size_t>(fine)];
        if (slot < 0)
            slot = coarse;
        else if (slot != coarse)
            return false;
    }
    return true;
}

std::vector<std::vector<std::size_t>> Partition::cells() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_cells_));
    for (std::size_t a = 0; a < cell_of_.size(); ++a)
        out[static_cast<std::size_t>(cell_of_[a])].push_back(a);
    return out;
}

Filtration::Filtration(std::vector<Partition> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw std::invalid_argument("filtration: empty");
    for (std::size_t k = 0; k + 1 < steps_.size(); ++k) {
        if (steps_[k].atom_count() != steps_[k + 1].atom_count())
            throw std::invalid_argument("filtration: atom count mismatch");
        if (!steps_[k + 1].refines(steps_[k]))
            throw std::invalid_argument("filtration: step " + std::to_string(k + 1) +
                                        " does not refine step " + std::to_string(k));
    }
}

void FiniteSpace::validate() const {
    base.validate();
    if (time_grid.size() < 2) throw std::invalid_argument("space: need at least one step");
    if (time_grid.front() != 0.0) throw std::invalid_argument("space: time grid must start at 0");
    for (std::size_t k = 0; k + 1 < time_grid.size(); ++k)
        if (!(time_grid[k] < time_grid[k + 1]))
            throw std::invalid_argument("space: time grid not increasing");
}

AdaptedProcess::AdaptedProcess(int horizon, std::size_t n_atoms, double init)
    : N_(horizon), n_(n_atoms), v_(static_cast<std::size_t>(horizon + 1) * n_atoms, init) {
    if (horizon < 0) throw std::invalid_argument("process: negative horizon");
}

AdaptedProcess& AdaptedProcess::operator+=(const AdaptedProcess& other) {
    if (N_ != other.N_ || n_ != other.n_) throw std::invalid_argument("process: shape mismatch");
    for (std::size_t j = 0; j < v_.size(); ++j) v_[j] += other.v_[j];
    return *this;
}

AdaptedProcess& AdaptedProcess::operator-=(const AdaptedProcess& other) {
    if (N_ != other.N_ || n_ != other.n_) throw std::invalid_argument("process: shape mismatch");
    for (std::size_t j = 0; j < v_.size(); ++j) v_[j] -= other.v_[j];
    return *this;
}

namespace {

bool constant_on_cells(std::span<const double> x, const Partition& pi, double tol) {
    std::vector<double> first(static_cast<std::size_t>(pi.cell_count()),
                              std::numeric_limits<double>::quiet_NaN());
    for (std::size_t a = 0; a < x.size(); ++a) {
        double& v = first[static_cast<std::size_t>(pi.cell(a))];
        if (std::isnan(v))
            v = x[a];
        else if (std::abs(x[a] - v) > tol)
            return false;
    }
    return true;
}

}  // namespace

bool is_adapted(const AdaptedProcess& x, const Filtration& f, double tol) {
    if (x.horizon() != f.horizon() || x.atom_count() != f.atom_count()) return false;
    for (int k = 0; k <= x.horizon(); ++k)
        if (!constant_on_cells(x.step(k), f.at(k), tol)) return false;
    return true;
}

bool is_predictable(const AdaptedProcess& x, const Filtration& f, double tol) {
    if (x.horizon() != f.horizon() || x.atom_count() != f.atom_count()) return false;
    for (int k = 0; k <= x.horizon(); ++k)
        if (!constant_on_cells(x.step(k), f.before(k), tol)) return false;
    return true;
}

std::vector<double> cond_exp(std::span<const double> x, const Measure& mu, const Partition& pi) {
    if (x.size() != mu.size() || x.size() != pi.atom_count())
        throw std::invalid_argument("cond_exp: size mismatch");
    std::size_t nc = static_cast<std::size_t>(pi.cell_count());
    std::vector<double> num(nc, 0.0), den(nc, 0.0);
    for (std::size_t a = 0; a < x.size(); ++a) {
        double w = mu.w[a];
        if (!(w > 0.0)) throw std::invalid_argument("cond_exp: non-positive weight");
        std::size_t c = static_cast<std::size_t>(pi.cell(a));
        num[c] += w * x[a];
        den[c] += w;
    }
    std::vector<double> out(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) {
        std::size_t c = static_cast<std::size_t>(pi.cell(a));
        out[a] = num[c] / den[c];
    }
    return out;
}

MartingaleCheck is_martingale(const AdaptedProcess& x, const Filtration& f,
                              const Measure& mu, double tol, int from_step, int to_step) {
    if (!is_adapted(x, f, 1e-12))
        throw std::invalid_argument("is_martingale: process not adapted");
    if (to_step < 0) to_step = x.horizon();
    MartingaleCheck res;
    for (int k = from_step; k < to_step; ++k) {
        auto e = cond_exp(x.step(k + 1), mu, f.at(k));
        auto xk = x.step(k);
        for (std::size_t a = 0; a < e.size(); ++a) {
            double r = std::abs(e[a] - xk[a]);
            if (r > res.max_residual) {
                res.max_residual = r;
                res.worst_step = k;
                res.worst_cell = f.at(k).cell(a);
            }
        }
    }
    res.ok = res.max_residual <= tol;
    return res;
}

DoobDecomposition doob_decomposition(const AdaptedProcess& x, const Filtration& f,
                                     const Measure& mu) {
    if (!is_adapted(x, f, 1e-12))
        throw std::invalid_argument("doob_decomposition: process not adapted");
    int N = x.horizon();
    std::size_t n = x.atom_count();
    DoobDecomposition out{AdaptedProcess(N, n, 0.0), AdaptedProcess(N, n, 0.0)};
    for (int k = 1; k <= N; ++k) {
        auto drift = cond_exp(x.step(k), mu, f.at(k - 1));
        for (std::size_t a = 0; a < n; ++a) {
            double dfv = drift[a] - x.at(k - 1, a);
            out.predictable.at(k, a) = out.predictable.at(k - 1, a) + dfv;
            out.martingale.at(k, a) =
                out.martingale.at(k - 1, a) + (x.at(k, a) - x.at(k - 1, a)) - dfv;
        }
    }
    return out;
}

AdaptedProcess predictable_bracket(const AdaptedProcess& x, const AdaptedProcess& y,
                                   const Filtration& f, const Measure& mu) {
    if (x.horizon() != y.horizon() || x.atom_count() != y.atom_count())
        throw std::invalid_argument("bracket: shape mismatch");
    int N = x.horizon();
    std::size_t n = x.atom_count();
    AdaptedProcess out(N, n, 0.0);
    std::vector<double> prod(n);
    for (int k = 1; k <= N; ++k) {
        for (std::size_t a = 0; a < n; ++a)
            prod[a] = (x.at(k, a) - x.at(k - 1, a)) * (y.at(k, a) - y.at(k - 1, a));
        auto e = cond_exp(prod, mu, f.at(k - 1));
        for (std::size_t a = 0; a < n; ++a) out.at(k, a) = out.at(k - 1, a) + e[a];
    }
    return out;
}

AdaptedProcess predictable_projection(const AdaptedProcess& y, const Filtration& f,
                                      const Measure& mu) {
    int N = y.horizon();
    std::size_t n = y.atom_count();
    AdaptedProcess out(N, n, 0.0);
    for (int k = 0; k <= N; ++k) {
        auto e = cond_exp(y.step(k), mu, f.before(k));
        std::copy(e.begin(), e.end(), out.step(k).begin());
    }
    return out;
}

// --- binary path trees ---------------------------------------------------

namespace {

BinaryTree build_tree(int n_steps, double horizon,
                      const std::function<double(int, std::size_t)>& up_prob) {
    if (n_steps < 1 || n_steps > 24) throw std::invalid_argument("tree: bad step count");
    std::size_t n = std::size_t{1} << static_cast<unsigned>(n_steps);
    std::vector<double> w(n, 1.0);
    for (int k = 0; k < n_steps; ++k) {
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t cell = a >> static_cast<unsigned>(n_steps - k);
            bool up = (a >> static_cast<unsigned>(n_steps - 1 - k)) & 1u;
            double pu = up_prob(k, cell);
            if (!(pu > 0.0 && pu < 1.0)) throw std::invalid_argument("tree: branch prob not in (0,1)");
            w[a] *= up ? pu : 1.0 - pu;
        }
    }
    std::vector<Partition> parts;
    parts.reserve(static_cast<std::size_t>(n_steps) + 1);
    for (int k = 0; k <= n_steps; ++k) {
        std::vector<int> cell(n);
        for (std::size_t a = 0; a < n; ++a)
            cell[a] = static_cast<int>(a >> static_cast<unsigned>(n_steps - k));
        parts.emplace_back(std::move(cell));
    }
    std::vector<double> times(static_cast<std::size_t>(n_steps) + 1);
    for (int k = 0; k <= n_steps; ++k)
        times[static_cast<std::size_t>(k)] = horizon * k / n_steps;
    BinaryTree tree{n_steps, FiniteSpace{Measure{std::move(w)}, std::move(times)},
                    Filtration(std::move(parts))};
    tree.space.validate();
    return tree;
}

}  // namespace

BinaryTree fair_binary_tree(int n_steps, double horizon) {
    return build_tree(n_steps, horizon, [](int, std::size_t) { return 0.5; });
}

BinaryTree weighted_binary_tree(int n_steps, double horizon,
                                const std::function<double(int, std::size_t)>& up_prob) {
    return build_tree(n_steps, horizon, up_prob);
}

std::vector<std::vector<double>> branch_up_probs(const BinaryTree& tree, const Measure& mu) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(tree.n_steps));
    std::size_t n = tree.space.atom_count();
    for (int k = 0; k < tree.n_steps; ++k) {
        std::size_t nc = std::size_t{1} << static_cast<unsigned>(k);
        std::vector<double> up(nc, 0.0), all(nc, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t c = tree.cell_of(k, a);
            all[c] += mu.w[a];
            if ((a >> static_cast<unsigned>(tree.n_steps - 1 - k)) & 1u) up[c] += mu.w[a];
        }
        out[static_cast<std::size_t>(k)].resize(nc);
        for (std::size_t c = 0; c < nc; ++c) out[static_cast<std::size_t>(k)][c] = up[c] / all[c];
    }
    return out;
}

AdaptedProcess fundamental_martingale(const BinaryTree& tree, const Measure& mu) {
    auto probs = branch_up_probs(tree, mu);
    int N = tree.n_steps;
    std::size_t n = tree.space.atom_count();
    AdaptedProcess z(N, n, 0.0);
    for (int k = 1; k <= N; ++k) {
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t c = tree.cell_of(k - 1, a);
            bool up = (a >> static_cast<unsigned>(N - k)) & 1u;
            double wu = probs[static_cast<std::size_t>(k - 1)][c];
            double dz = up ? 2.0 * (1.0 - wu) : -2.0 * wu;
            z.at(k, a) = z.at(k - 1, a) + dz;
        }
    }
    return z;
}

AdaptedProcess doob_martingale(std::span<const double> terminal, const Filtration& f,
                               const Measure& mu) {
    int N = f.horizon();
    std::size_t n = f.atom_count();
    if (terminal.size() != n) throw std::invalid_argument("doob_martingale: size mismatch");
    AdaptedProcess x(N, n, 0.0);
    for (int k = 0; k <= N; ++k) {
        auto e = cond_exp(terminal, mu, f.at(k));
        std::copy(e.begin(), e.end(), x.step(k).begin());
    }
    return x;
}

}  // namespace filtlab
