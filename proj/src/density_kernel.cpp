#include "filtlab/density_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace filtlab {

void TauGrid::validate(double tol) const {
    if (u.empty() || u.size() != nu.size()) throw std::invalid_argument("tau grid: bad shape");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0)) throw std::invalid_argument("tau grid: support must be positive");
        if (i > 0 && !(u[i] > u[i - 1]))
            throw std::invalid_argument("tau grid: support not strictly increasing");
        if (!(nu[i] > 0.0)) throw std::invalid_argument("tau grid: non-positive mass");
        s += nu[i];
    }
    if (std::abs(s - 1.0) > tol) throw std::invalid_argument("tau grid: masses do not sum to 1");
}

double TauGrid::tail_mass(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u[i] > t) s += nu[i];
    return s;
}

TauGrid exp_tau_grid(std::size_t m, double horizon, double rate,
                     std::span<const double> avoid_times) {
    if (m == 0) throw std::invalid_argument("tau grid: m == 0");
    TauGrid g;
    g.u.resize(m);
    g.nu.assign(m, 1.0 / static_cast<double>(m));
    const double cap = 1.0 - std::exp(-rate * 2.0 * horizon);
    for (std::size_t i = 0; i < m; ++i) {
        double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m) * cap;
        double ui = -std::log(1.0 - q) / rate;
        for (double t : avoid_times)
            if (std::abs(ui - t) < 1e-9) ui += 1e-6 * horizon;
        g.u[i] = ui;
    }
    g.validate();
    return g;
}

DensityKernel::DensityKernel(FiniteSpace space, Filtration filt, TauGrid grid,
                             std::vector<double> p)
    : space_(std::move(space)), filt_(std::move(filt)), grid_(std::move(grid)), p_(std::move(p)) {
    space_.validate();
    grid_.validate();
    if (filt_.horizon() != space_.horizon() || filt_.atom_count() != space_.atom_count())
        throw std::invalid_argument("kernel: filtration does not match space");
    if (p_.size() != static_cast<std::size_t>(space_.horizon() + 1) * space_.atom_count() * grid_.size())
        throw std::invalid_argument("kernel: density array has wrong size");
    if (!(grid_.u.back() > space_.time_grid.back()))
        throw std::invalid_argument("kernel: tau support must extend beyond the horizon");

    int N = space_.horizon();
    kappa_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        int k = N + 1;
        for (int j = 0; j <= N; ++j)
            if (grid_.u[i] <= space_.time_grid[static_cast<std::size_t>(j)]) {
                k = j;
                break;
            }
        kappa_[i] = k;
    }
    diag_.resize(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k) {
        int d = -1;
        for (std::size_t i = 0; i < grid_.size(); ++i)
            if (grid_.u[i] <= space_.time_grid[static_cast<std::size_t>(k)])
                d = static_cast<int>(i);
        diag_[static_cast<std::size_t>(k)] = d;
    }
}

double DensityKernel::nu_band(int k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < m(); ++i)
        if (kappa_[i] == k) s += grid_.nu[i];
    return s;
}

double DensityKernel::diagonal(int k, std::size_t a) const {
    int d = diag_index(k);
    return d < 0 ? 1.0 : p(k, a, static_cast<std::size_t>(d));
}

AdaptedProcess DensityKernel::per_u(std::size_t i) const {
    AdaptedProcess out(horizon(), atom_count());
    for (int k = 0; k <= horizon(); ++k)
        for (std::size_t a = 0; a < atom_count(); ++a) out.at(k, a) = p(k, a, i);
    return out;
}

DensityKernel independent_kernel(const FiniteSpace& space, const Filtration& filt,
                                 const TauGrid& grid) {
    std::vector<double> p(static_cast<std::size_t>(space.horizon() + 1) * space.atom_count() *
                              grid.size(),
                          1.0);
    return DensityKernel(space, filt, grid, std::move(p));
}

DensityKernel factor_model_kernel(const BinaryTree& tree, const TauGrid& grid,
                                  const std::function<double(double)>& sigma) {
    const FiniteSpace& space = tree.space;
    int N = tree.n_steps;
    std::size_t n = space.atom_count();
    std::size_t m = grid.size();
    double T = space.time_grid.back();
    double dt = T / N;
    double sdt = std::sqrt(dt);

    std::vector<double> load(m);
    for (std::size_t i = 0; i < m; ++i) {
        load[i] = sigma(grid.u[i]) * sdt;
        if (!(1.0 - std::abs(load[i]) > 0.0))
            throw std::invalid_argument("factor model: volatility too large for positivity");
    }

    // q along each path, normalizer n_k per atom prefix.
    std::vector<double> q(static_cast<std::size_t>(N + 1) * n * m, 1.0);
    std::vector<double> norm(static_cast<std::size_t>(N + 1) * n, 1.0);
    auto qat = [&](int k, std::size_t a, std::size_t i) -> double& {
        return q[(static_cast<std::size_t>(k) * n + a) * m + i];
    };
    for (int k = 1; k <= N; ++k) {
        for (std::size_t a = 0; a < n; ++a) {
            bool up = (a >> static_cast<unsigned>(N - k)) & 1u;
            double nk = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double f = up ? 1.0 + load[i] : 1.0 - load[i];
                double v = qat(k - 1, a, i) * f;
                qat(k, a, i) = v;
                nk += grid.nu[i] * v;
            }
            norm[static_cast<std::size_t>(k) * n + a] = nk;
        }
    }

    std::vector<double> p(q.size());
    for (int k = 0; k <= N; ++k)
        for (std::size_t a = 0; a < n; ++a) {
            double nk = norm[static_cast<std::size_t>(k) * n + a];
            for (std::size_t i = 0; i < m; ++i)
                p[(static_cast<std::size_t>(k) * n + a) * m + i] = qat(k, a, i) / nk;
        }

    // Adjusted base measure with density n_N.
    FiniteSpace adjusted = space;
    for (std::size_t a = 0; a < n; ++a)
        adjusted.base.w[a] = space.base.w[a] * norm[static_cast<std::size_t>(N) * n + a];
    double total = adjusted.base.total();
    for (double& w : adjusted.base.w) w /= total;

    return DensityKernel(std::move(adjusted), tree.filtration, grid, std::move(p));
}

DensityKernel frozen_factor_kernel(const BinaryTree& tree, const TauGrid& grid,
                                   const std::function<double(double)>& sigma) {
    const FiniteSpace& space = tree.space;
    int N = tree.n_steps;
    std::size_t n = space.atom_count();
    std::size_t m = grid.size();
    double dt = space.time_grid.back() / N;
    double sdt = std::sqrt(dt);

    std::vector<double> p(static_cast<std::size_t>(N + 1) * n * m, 1.0);
    auto pat = [&](int k, std::size_t a, std::size_t i) -> double& {
        return p[(static_cast<std::size_t>(k) * n + a) * m + i];
    };

    for (int k = 0; k < N; ++k) {
        double t_next = space.time_grid[static_cast<std::size_t>(k + 1)];
        std::size_t n_cells = std::size_t{1} << static_cast<unsigned>(k);
        std::size_t stride = n >> static_cast<unsigned>(k);  // atoms per step-k cell
        for (std::size_t c = 0; c < n_cells; ++c) {
            std::size_t a0 = c * stride;  // representative atom of the cell
            // Live components still moving at step k+1, with the current
            // nu p weights that the normalization constraint uses.
            double live_w = 0.0, live_g = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                if (grid.u[i] > t_next) {
                    double w = grid.nu[i] * pat(k, a0, i);
                    live_w += w;
                    live_g += w * sigma(grid.u[i]) * sdt;
                }
            }
            double mean_g = live_g / live_w;
            for (std::size_t a = a0; a < a0 + stride; ++a) {
                bool up = (a >> static_cast<unsigned>(N - 1 - k)) & 1u;
                for (std::size_t i = 0; i < m; ++i) {
                    double prev = pat(k, a0, i);
                    double gamma = 0.0;
                    if (grid.u[i] > t_next) {
                        double g = sigma(grid.u[i]) * sdt - mean_g;
                        gamma = up ? g : -g;
                        if (!(1.0 + gamma > 0.0))
                            throw std::invalid_argument("frozen factor: volatility too large");
                    }
                    pat(k + 1, a, i) = prev * (1.0 + gamma);
                }
            }
        }
    }
    return DensityKernel(space, tree.filtration, grid, std::move(p));
}

DensityKernel randomized_kernel(const FiniteSpace& space, const Filtration& filt,
                                const TauGrid& grid, std::uint64_t seed) {
    int N = space.horizon();
    std::size_t n = space.atom_count();
    std::size_t m = grid.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    std::vector<double> p(static_cast<std::size_t>(N + 1) * n * m, 1.0);
    auto pat = [&](int k, std::size_t a, std::size_t i) -> double& {
        return p[(static_cast<std::size_t>(k) * n + a) * m + i];
    };

    for (int k = 0; k < N; ++k) {
        auto coarse_cells = filt.at(k).cells();
        const Partition& fine = filt.at(k + 1);
        for (const auto& cell : coarse_cells) {
            // Children of this cell in the next partition.
            std::vector<std::vector<std::size_t>> children;
            std::vector<int> seen(static_cast<std::size_t>(fine.cell_count()), -1);
            for (std::size_t a : cell) {
                int fc = fine.cell(a);
                if (seen[static_cast<std::size_t>(fc)] < 0) {
                    seen[static_cast<std::size_t>(fc)] = static_cast<int>(children.size());
                    children.emplace_back();
                }
                children[static_cast<std::size_t>(seen[static_cast<std::size_t>(fc)])].push_back(a);
            }
            std::size_t r = children.size();
            std::size_t rep = cell.front();

            std::vector<double> wb(r, 0.0);
            double wtot = 0.0;
            for (std::size_t b = 0; b < r; ++b) {
                for (std::size_t a : children[b]) wb[b] += space.base.w[a];
                wtot += wb[b];
            }
            for (double& w : wb) w /= wtot;

            // gamma(b, i): multiplicative increments, projected so that
            //   sum_b w_b gamma(b,i) = 0  (martingale per u) and
            //   sum_i nu_i p_k(u_i) gamma(b,i) = 0  (normalization per child).
            std::vector<double> gamma(r * m);
            bool ok = false;
            for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
                for (auto& gv : gamma) gv = 0.4 * unif(rng);
                if (r == 1) {
                    // Single child: martingale constraint forces zero.
                    std::fill(gamma.begin(), gamma.end(), 0.0);
                    ok = true;
                    break;
                }
                for (std::size_t i = 0; i < m; ++i) {
                    double mean = 0.0;
                    for (std::size_t b = 0; b < r; ++b) mean += wb[b] * gamma[b * m + i];
                    for (std::size_t b = 0; b < r; ++b) gamma[b * m + i] -= mean;
                }
                for (std::size_t b = 0; b < r; ++b) {
                    double c = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        c += grid.nu[i] * pat(k, rep, i) * gamma[b * m + i];
                    for (std::size_t i = 0; i < m; ++i) gamma[b * m + i] -= c;
                }
                double amax = 0.0;
                for (double gv : gamma) amax = std::max(amax, std::abs(gv));
                if (amax < 1e-12) continue;  // degenerate draw, retry
                if (amax > 0.9) {
                    double s = 0.9 / amax;
                    for (double& gv : gamma) gv *= s;
                }
                ok = true;
            }
            if (!ok && r > 1)
                throw std::runtime_error("randomized kernel: degenerate increments persisted");

            for (std::size_t b = 0; b < r; ++b)
                for (std::size_t a : children[b])
                    for (std::size_t i = 0; i < m; ++i)
                        pat(k + 1, a, i) = pat(k, rep, i) * (1.0 + gamma[b * m + i]);
        }
    }
    return DensityKernel(space, filt, grid, std::move(p));
}

SuiteReport validate(const DensityKernel& kernel, double tol) {
    SuiteReport rep;
    rep.name = "kernel_validate";
    rep.tolerance = tol;
    int N = kernel.horizon();
    std::size_t n = kernel.atom_count();
    std::size_t m = kernel.m();

    double worst_pos = 0.0;  // amount below zero
    for (int k = 0; k <= N; ++k)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t i = 0; i < m; ++i)
                if (!(kernel.p(k, a, i) > 0.0)) {
                    worst_pos = std::max(worst_pos, 1.0 - kernel.p(k, a, i));
                    rep.record(1.0, "positivity at (k=" + std::to_string(k) +
                                        ",a=" + std::to_string(a) + ",u=" + std::to_string(i) + ")");
                }
    rep.metric("positivity_violation", worst_pos);

    double init = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < m; ++i)
            init = std::max(init, std::abs(kernel.p(0, a, i) - 1.0));
    if (init > tol) rep.record(init, "initial condition p_0 != 1");
    rep.metric("initial_condition", init);

    double mart = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        auto res = is_martingale(kernel.per_u(i), kernel.filtration(), kernel.measure(), tol);
        if (res.max_residual > mart) mart = res.max_residual;
        if (!res.ok)
            rep.record(res.max_residual,
                       "martingale defect at (u=" + std::to_string(i) +
                           ",k=" + std::to_string(res.worst_step) + ")");
    }
    rep.metric("martingale_per_u", mart);

    double norm = 0.0;
    for (int k = 0; k <= N; ++k)
        for (std::size_t a = 0; a < n; ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += kernel.grid().nu[i] * kernel.p(k, a, i);
            double r = std::abs(s - 1.0);
            if (r > norm) norm = r;
            if (r > tol)
                rep.record(r, "normalization at (k=" + std::to_string(k) +
                                  ",a=" + std::to_string(a) + ")");
        }
    rep.metric("normalization", norm);

    rep.max_residual = std::max({init, mart, norm, worst_pos});
    rep.pass = worst_pos == 0.0 && init <= tol && mart <= tol && norm <= tol;
    return rep;
}

SurvivalProcess survival_G(const DensityKernel& kernel) {
    int N = kernel.horizon();
    std::size_t n = kernel.atom_count();
    SurvivalProcess out{AdaptedProcess(N, n), std::vector<double>(static_cast<std::size_t>(N) + 1)};
    for (int k = 0; k <= N; ++k) {
        double t = kernel.space().time_grid[static_cast<std::size_t>(k)];
        out.G_star[static_cast<std::size_t>(k)] = kernel.grid().tail_mass(t);
        for (std::size_t a = 0; a < n; ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < kernel.m(); ++i)
                if (kernel.grid().u[i] > t) s += kernel.grid().nu[i] * kernel.p(k, a, i);
            out.G.at(k, a) = s;
        }
    }
    return out;
}

IntensityProcess intensity(const DensityKernel& kernel) {
    auto surv = survival_G(kernel);
    int N = kernel.horizon();
    std::size_t n = kernel.atom_count();
    IntensityProcess out{AdaptedProcess(N, n),
                         std::vector<double>(static_cast<std::size_t>(N) + 1)};
    for (int k = 0; k <= N; ++k) {
        out.lambda_star[static_cast<std::size_t>(k)] = 1.0 / surv.G_star[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < n; ++a)
            out.lambda.at(k, a) = kernel.diagonal(k, a) / surv.G.at(k, a);
    }
    return out;
}

nlohmann::ordered_json kernel_to_json(const DensityKernel& kernel) {
    nlohmann::ordered_json j;
    j["time_grid"] = kernel.space().time_grid;
    j["atom_weights"] = kernel.space().base.w;
    auto parts = nlohmann::ordered_json::array();
    for (int k = 0; k <= kernel.horizon(); ++k) {
        std::vector<int> cells(kernel.atom_count());
        for (std::size_t a = 0; a < kernel.atom_count(); ++a)
            cells[a] = kernel.filtration().at(k).cell(a);
        parts.push_back(cells);
    }
    j["partitions"] = parts;
    j["tau_grid"] = {{"u", kernel.grid().u}, {"nu", kernel.grid().nu}};
    j["p"] = kernel.raw();  // row-major (step, atom, u)
    return j;
}

DensityKernel kernel_from_json(const nlohmann::json& j) {
    FiniteSpace space;
    space.time_grid = j.at("time_grid").get<std::vector<double>>();
    space.base.w = j.at("atom_weights").get<std::vector<double>>();
    std::vector<Partition> parts;
    for (const auto& cells : j.at("partitions"))
        parts.emplace_back(cells.get<std::vector<int>>());
    TauGrid grid;
    grid.u = j.at("tau_grid").at("u").get<std::vector<double>>();
    grid.nu = j.at("tau_grid").at("nu").get<std::vector<double>>();
    return DensityKernel(std::move(space), Filtration(std::move(parts)), std::move(grid),
                         j.at("p").get<std::vector<double>>());
}

}  // namespace filtlab
