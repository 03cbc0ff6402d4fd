#pragma once

#include "rootlab/diffusion.hpp"
#include "rootlab/error.hpp"
#include "rootlab/grid.hpp"
#include "rootlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rootlab {

/// Grid function u(t_m, x_i), stored row-major by time level.
class ValueSurface {
public:
    ValueSurface(std::shared_ptr<const Grid> grid, std::vector<double> values, int stage)
        : grid_(std::move(grid)), values_(std::move(values)), stage_(stage) {
        if (!grid_ || values_.size() != grid_->nx() * grid_->nt())
            throw Error(ErrorCode::GridMismatch, "surface values do not match the grid");
    }

    const Grid& grid() const noexcept { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
    int stage() const noexcept { return stage_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double at(std::size_t m, std::size_t i) const noexcept { return values_[m * grid_->nx() + i]; }
    std::span<const double> row(std::size_t m) const noexcept {
        return {values_.data() + m * grid_->nx(), grid_->nx()};
    }

    /// Bilinear interpolation inside the grid.
    double value(double t, double x) const {
        const Grid& g = *grid_;
        if (!(x >= g.x_min() && x <= g.x_max() && t >= 0.0 && t <= g.horizon()))
            throw Error(ErrorCode::ProbeOutsideGrid,
                        "probe (" + std::to_string(t) + ", " + std::to_string(x) + ") outside the grid");
        const std::size_t m = g.t_segment(t), i = g.x_segment(x);
        const double a = (t - g.t[m]) / (g.t[m + 1] - g.t[m]);
        const double b = (x - g.x[i]) / (g.x[i + 1] - g.x[i]);
        const double v0 = (1.0 - b) * at(m, i) + b * at(m, i + 1);
        const double v1 = (1.0 - b) * at(m + 1, i) + b * at(m + 1, i + 1);
        return (1.0 - a) * v0 + a * v1;
    }

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
    int stage_;
};

struct SolverConfig {
    double theta = 1.0;
    double omega = 1.5;
    int max_projection_iters = 10000;
    double projection_tol = 1e-9;
    HorizonRule horizon{};
};

/// Constant-in-time surface U^{mu0}.
inline ValueSurface initial_surface(std::shared_ptr<const Grid> grid, const ProbabilityMeasure& mu0) {
    const PotentialFunction U = mu0.potential_function();
    const std::size_t nx = grid->nx(), nt = grid->nt();
    std::vector<double> v(nx * nt);
    for (std::size_t i = 0; i < nx; ++i) v[i] = U(grid->x[i]);
    for (std::size_t m = 1; m < nt; ++m) std::copy_n(v.begin(), nx, v.begin() + static_cast<std::ptrdiff_t>(m * nx));
    return ValueSurface(std::move(grid), std::move(v), 0);
}

namespace detail {

/// Three-point operator 0.5 eta^2 D^2 on a non-uniform grid: (D^2 u)_i = L u_{i-1} - (L+R) u_i + R u_{i+1}.
struct Stencil {
    std::vector<double> L, R;

    Stencil(const Grid& g, const DiffusionSpec& d) : L(g.nx(), 0.0), R(g.nx(), 0.0) {
        for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
            const double hl = g.x[i] - g.x[i - 1], hr = g.x[i + 1] - g.x[i];
            const double e = d.eta_unchecked(g.x[i]);
            const double a = 0.5 * e * e * 2.0 / (hl + hr);
            L[i] = a / hl;
            R[i] = a / hr;
        }
    }

    double apply(std::span<const double> u, std::size_t i) const noexcept {
        return L[i] * u[i - 1] - (L[i] + R[i]) * u[i] + R[i] * u[i + 1];
    }
};

}  // namespace detail

/// Solves stage k: forward obstacle problem with obstacle u^{k-1} + delta_U,
/// initial level U^{mu0} and Dirichlet edges equal to the obstacle.
inline ValueSurface solve_stage(const ValueSurface& prev, const PotentialDifference& delta_U,
                                const DiffusionSpec& diffusion, const SolverConfig& config = {}) {
    const Grid& g = prev.grid();
    const std::size_t nx = g.nx(), nt = g.nt();
    if (delta_U.w.size() != nx) throw Error(ErrorCode::GridMismatch, "delta_U not sampled on the grid nodes");
    for (std::size_t i = 0; i < nx; ++i) {
        if (delta_U.nodes[i] != g.x[i]) throw Error(ErrorCode::GridMismatch, "delta_U nodes differ from grid");
        if (delta_U.w[i] > 0.0)
            throw Error(ErrorCode::ObstacleAboveInitial, "delta_U > 0 at x=" + std::to_string(g.x[i]));
    }
    if (!(config.projection_tol > 0.0))
        throw Error(ErrorCode::InvalidConfig, "projection_tol must be positive", "solver.projection_tol");
    if (delta_U.is_zero()) return ValueSurface(prev.grid_ptr(), prev.values(), prev.stage() + 1);

    const detail::Stencil op(g, diffusion);
    const double theta = config.theta, omega = config.omega;
    std::vector<double> v(nx * nt);
    std::copy(prev.row(0).begin(), prev.row(0).end(), v.begin());
    std::vector<double> psi(nx), rhs(nx), diag(nx);

    for (std::size_t m = 0; m + 1 < nt; ++m) {
        const double dt = g.t[m + 1] - g.t[m];
        const std::span<const double> b(v.data() + m * nx, nx);
        double* u = v.data() + (m + 1) * nx;
        const auto pn = prev.row(m + 1);
        for (std::size_t i = 0; i < nx; ++i) psi[i] = pn[i] + delta_U.w[i];
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            rhs[i] = b[i] / dt + (1.0 - theta) * op.apply(b, i);
            diag[i] = 1.0 / dt + theta * (op.L[i] + op.R[i]);
        }
        for (std::size_t i = 0; i < nx; ++i) u[i] = std::max(psi[i], b[i]);
        u[0] = psi[0];
        u[nx - 1] = psi[nx - 1];

        int iter = 0;
        for (;; ++iter) {
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const double gs = (rhs[i] + theta * (op.L[i] * u[i - 1] + op.R[i] * u[i + 1])) / diag[i];
                u[i] = std::max(psi[i], u[i] + omega * (gs - u[i]));
            }
            double res = 0.0;
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const double r = diag[i] * u[i] - theta * (op.L[i] * u[i - 1] + op.R[i] * u[i + 1]) - rhs[i];
                res = std::max(res, std::abs(std::min(r, u[i] - psi[i])));
            }
            if (res <= config.projection_tol) break;
            if (iter + 1 >= config.max_projection_iters)
                throw Error(ErrorCode::ProjectionDiverged,
                            "projected SOR hit the iteration cap at t=" + std::to_string(g.t[m + 1]));
        }
    }
    return ValueSurface(prev.grid_ptr(), std::move(v), prev.stage() + 1);
}

/// Max over interior nodes and levels of |min{PDE residual, u - obstacle}|.
inline double complementarity_residual(const ValueSurface& uk, const ValueSurface& prev,
                                       const PotentialDifference& delta_U, const DiffusionSpec& diffusion,
                                       double theta = 1.0) {
    const Grid& g = uk.grid();
    const detail::Stencil op(g, diffusion);
    double worst = 0.0;
    for (std::size_t m = 0; m + 1 < g.nt(); ++m) {
        const double dt = g.t[m + 1] - g.t[m];
        const auto b = uk.row(m), u = uk.row(m + 1), p = prev.row(m + 1);
        for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
            const double r = (u[i] - b[i]) / dt - theta * op.apply(u, i) - (1.0 - theta) * op.apply(b, i);
            worst = std::max(worst, std::abs(std::min(r, u[i] - p[i] - delta_U.w[i])));
        }
    }
    return worst;
}

inline void check_chain_order(const std::vector<ProbabilityMeasure>& chain) {
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const ConvexOrderReport rep = check_convex_order(chain[k - 1], chain[k]);
        if (!rep.ordered)
            throw Error(ErrorCode::NotConvexOrdered,
                        "mu_" + std::to_string(k - 1) + " is not below mu_" + std::to_string(k) +
                            " in convex order (x=" + std::to_string(rep.worst_x) + ")",
                        "chain[" + std::to_string(k) + "]");
    }
}

/// Solves u^0..u^n on a fixed grid.
inline std::vector<ValueSurface> solve_sequence(const std::vector<ProbabilityMeasure>& chain,
                                                const DiffusionSpec& diffusion, std::shared_ptr<const Grid> grid,
                                                const SolverConfig& config = {}) {
    if (chain.size() < 2) throw Error(ErrorCode::InvalidConfig, "chain needs mu_0 and at least one target", "chain");
    check_chain_order(chain);
    for (const auto& mu : chain)
        for (const Atom& a : mu.atoms())
            if (!grid->node_index(a.x))
                throw Error(ErrorCode::GridMismatch, "atom " + std::to_string(a.x) + " is not a grid node");
    std::vector<ValueSurface> out;
    out.push_back(initial_surface(grid, chain.front()));
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const PotentialDifference dU = potential_difference(chain[k - 1], chain[k], grid->x);
        out.push_back(solve_stage(out.back(), dU, diffusion, config));
    }
    return out;
}

/// max_x |u^n(T, x) - U^{mu_n}(x)|.
inline double tail_error(const ValueSurface& un, const ProbabilityMeasure& mun) {
    const PotentialFunction U = mun.potential_function();
    const Grid& g = un.grid();
    const auto last = un.row(g.nt() - 1);
    double e = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) e = std::max(e, std::abs(last[i] - U(g.x[i])));
    return e;
}

struct SolveResult {
    std::shared_ptr<const Grid> grid;
    std::vector<ValueSurface> surfaces;
    double tail_error = 0.0;
    int doublings = 0;
};

/// Builds the grid and solves the chain. With an adaptive horizon, nt is the
/// step count for the seed horizon; T doubles with dt held fixed.
inline SolveResult solve_chain(const std::vector<ProbabilityMeasure>& chain, const DiffusionSpec& diffusion,
                               std::size_t nx, std::size_t nt, const SolverConfig& config = {}) {
    const HorizonRule& rule = config.horizon;
    if (!rule.adaptive) {
        auto grid = std::make_shared<const Grid>(build_grid(chain, diffusion, nx, nt, rule.T));
        SolveResult r{grid, solve_sequence(chain, diffusion, grid, config), 0.0, 0};
        r.tail_error = tail_error(r.surfaces.back(), chain.back());
        return r;
    }
    const Grid probe = build_grid(chain, diffusion, nx, nt, 1.0);
    const ValidationReport vr = validate_spec(diffusion, probe.x_min(), probe.x_max());
    double T = seed_horizon(chain, vr.min_eta);
    for (int d = 0; d <= rule.max_doublings; ++d) {
        auto grid = std::make_shared<const Grid>(build_grid(chain, diffusion, nx, nt << d, T));
        SolveResult r{grid, solve_sequence(chain, diffusion, grid, config), 0.0, d};
        r.tail_error = tail_error(r.surfaces.back(), chain.back());
        if (r.tail_error <= rule.tail_tol) return r;
        T *= 2.0;
    }
    throw Error(ErrorCode::HorizonTooShort, "tail criterion not met after the maximum number of doublings",
                "grid.horizon");
}

/// Grid selected by the horizon rule (solves the chain when adaptive).
inline Grid build_grid(const std::vector<ProbabilityMeasure>& chain, const DiffusionSpec& diffusion,
                       std::size_t nx, std::size_t nt, const HorizonRule& horizon,
                       const SolverConfig& config = {}) {
    if (!horizon.adaptive) return build_grid(chain, diffusion, nx, nt, horizon.T);
    SolverConfig c = config;
    c.horizon = horizon;
    return *solve_chain(chain, diffusion, nx, nt, c).grid;
}

struct SurfaceCheckReport {
    double eps_c = 0.0;
    double initial_error = 0.0;        ///< max |u(0,x) - U^{mu0}(x)|
    double monotone_violation = 0.0;   ///< max of u(t_{m+1}) - u(t_m)
    double concavity_violation = 0.0;  ///< max interpolation deficit
    double lipschitz_violation = 0.0;  ///< max |u_j - u_i| - |x_j - x_i|
    double lower_violation = 0.0;      ///< max of U^{mu_k} - u
    double upper_violation = 0.0;      ///< max of u - u^{k-1}
    bool passed = false;
};

inline double default_eps_c(const Grid& g) {
    double dx = 0.0;
    for (std::size_t i = 1; i < g.nx(); ++i) dx = std::max(dx, g.x[i] - g.x[i - 1]);
    return 1e-6 + 2.0 * dx;
}

/// Sweeps the monotonicity, concavity, Lipschitz and sandwich invariants.
/// `prev` may be null for the stage-0 surface.
inline SurfaceCheckReport check_surface(const ValueSurface& u, const ValueSurface* prev,
                                        const ProbabilityMeasure& mu_k, const ProbabilityMeasure& mu0,
                                        double eps_c) {
    const Grid& g = u.grid();
    const std::size_t nx = g.nx();
    SurfaceCheckReport rep;
    rep.eps_c = eps_c;
    const PotentialFunction U0 = mu0.potential_function(), Uk = mu_k.potential_function();
    std::vector<double> uk_nodes(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        rep.initial_error = std::max(rep.initial_error, std::abs(u.at(0, i) - U0(g.x[i])));
        uk_nodes[i] = Uk(g.x[i]);
    }
    for (std::size_t m = 0; m < g.nt(); ++m) {
        const auto r = u.row(m);
        if (m > 0) {
            const auto q = u.row(m - 1);
            for (std::size_t i = 0; i < nx; ++i) rep.monotone_violation = std::max(rep.monotone_violation, r[i] - q[i]);
        }
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const double hl = g.x[i] - g.x[i - 1], hr = g.x[i + 1] - g.x[i];
            const double chord = (hr * r[i - 1] + hl * r[i + 1]) / (hl + hr);
            rep.concavity_violation = std::max(rep.concavity_violation, chord - r[i]);
        }
        double min_minus = std::numeric_limits<double>::infinity();
        double max_plus = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nx; ++j) {
            const double a = r[j] - g.x[j], b = r[j] + g.x[j];
            if (j > 0) {
                rep.lipschitz_violation = std::max(rep.lipschitz_violation, a - min_minus);
                rep.lipschitz_violation = std::max(rep.lipschitz_violation, max_plus - b);
            }
            min_minus = std::min(min_minus, a);
            max_plus = std::max(max_plus, b);
        }
        for (std::size_t i = 0; i < nx; ++i) {
            rep.lower_violation = std::max(rep.lower_violation, uk_nodes[i] - r[i]);
            if (prev) rep.upper_violation = std::max(rep.upper_violation, r[i] - prev->at(m, i));
        }
    }
    rep.passed = rep.initial_error <= eps_c && rep.monotone_violation <= eps_c &&
                 rep.concavity_violation <= eps_c && rep.lipschitz_violation <= eps_c &&
                 rep.lower_violation <= eps_c && rep.upper_violation <= eps_c;
    return rep;
}

}  // namespace rootlab
