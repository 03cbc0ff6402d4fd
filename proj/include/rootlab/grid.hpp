#pragma once

#include "rootlab/diffusion.hpp"
#include "rootlab/error.hpp"
#include "rootlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rootlab {

/// Space-time grid. x nodes contain every atom of the chain and the origin.
struct Grid {
    std::vector<double> x;
    std::vector<double> t;

    std::size_t nx() const noexcept { return x.size(); }
    std::size_t nt() const noexcept { return t.size(); }
    double horizon() const noexcept { return t.back(); }
    double dt() const noexcept { return t[1] - t[0]; }
    double x_min() const noexcept { return x.front(); }
    double x_max() const noexcept { return x.back(); }

    /// Index of the node equal to v (within 1e-12 relative), if any.
    std::optional<std::size_t> node_index(double v) const {
        const auto it = std::lower_bound(x.begin(), x.end(), v);
        const double tol = 1e-12 * (1.0 + std::abs(v));
        if (it != x.end() && std::abs(*it - v) <= tol) return static_cast<std::size_t>(it - x.begin());
        if (it != x.begin() && std::abs(*(it - 1) - v) <= tol)
            return static_cast<std::size_t>(it - x.begin() - 1);
        return std::nullopt;
    }

    /// Segment j with x[j] <= v <= x[j+1]; requires v inside the range.
    std::size_t x_segment(double v) const {
        if (v <= x.front()) return 0;
        if (v >= x.back()) return x.size() - 2;
        return static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), v) - x.begin()) - 1;
    }

    std::size_t t_segment(double s) const {
        if (s <= t.front()) return 0;
        if (s >= t.back()) return t.size() - 2;
        return static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), s) - t.begin()) - 1;
    }

    bool operator==(const Grid&) const = default;
};

/// Horizon selection: a fixed T, or doubling from a variance-based seed until
/// the terminal surface is within tail_tol of the final potential.
struct HorizonRule {
    bool adaptive = false;
    double T = 8.0;
    double tail_tol = 1e-3;
    int max_doublings = 8;
};

/// Seed horizon 4 (Var(mu_n) - Var(mu_0)) / min eta^2, floored at 1.
inline double seed_horizon(const std::vector<ProbabilityMeasure>& chain, double min_eta) {
    const double gap = chain.back().variance() - chain.front().variance();
    const double T0 = 4.0 * gap / (min_eta * min_eta);
    return std::max(T0, 1.0);
}

/// Uniform grid on the padded atom range, clipped to the interval, with the
/// nearest node snapped onto every atom and onto 0.
inline Grid build_grid(const std::vector<ProbabilityMeasure>& chain, const DiffusionSpec& diffusion,
                       std::size_t nx, std::size_t nt, double horizon) {
    if (chain.empty()) throw Error(ErrorCode::InvalidConfig, "empty chain", "chain");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw Error(ErrorCode::InvalidConfig, "horizon must be positive", "grid.horizon");
    std::vector<double> pins{0.0};
    double amax = 0.0, lo = 0.0, hi = 0.0;
    for (const auto& mu : chain) {
        for (const Atom& a : mu.atoms()) {
            pins.push_back(a.x);
            amax = std::max(amax, std::abs(a.x));
            lo = std::min(lo, a.x);
            hi = std::max(hi, a.x);
        }
    }
    std::sort(pins.begin(), pins.end());
    pins.erase(std::unique(pins.begin(), pins.end()), pins.end());
    if (nx < pins.size() + 2 || nx < 3)
        throw Error(ErrorCode::GridTooCoarse,
                    "nx=" + std::to_string(nx) + " below distinct atoms + 2", "grid.nx");
    if (nt < 2) throw Error(ErrorCode::GridTooCoarse, "need at least 2 time steps", "grid.nt");

    const double margin = 2.0 * (amax + 1.0);
    const Interval& I = diffusion.interval();
    const double x0 = std::max(lo - margin, I.lo);
    const double x1 = std::min(hi + margin, I.hi);
    for (double p : pins)
        if (p < x0 || p > x1)
            throw Error(ErrorCode::OutOfDomain, "atom " + std::to_string(p) + " outside the state interval",
                        "chain");

    Grid g;
    g.x.resize(nx);
    for (std::size_t i = 0; i < nx; ++i)
        g.x[i] = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(nx - 1);
    g.x.front() = x0;
    g.x.back() = x1;
    const double dx = (x1 - x0) / static_cast<double>(nx - 1);
    std::vector<std::size_t> used;
    for (double p : pins) {
        const double pos = (p - x0) / dx;
        const std::size_t i = static_cast<std::size_t>(std::clamp(std::llround(pos), 0LL,
                                                                  static_cast<long long>(nx - 1)));
        if (std::find(used.begin(), used.end(), i) != used.end())
            throw Error(ErrorCode::GridTooCoarse, "two atoms snap to the same node", "grid.nx");
        used.push_back(i);
        g.x[i] = p;
    }
    for (std::size_t i = 1; i < nx; ++i)
        if (!(g.x[i - 1] < g.x[i]))
            throw Error(ErrorCode::GridTooCoarse, "snapping broke node ordering", "grid.nx");

    g.t.resize(nt + 1);
    for (std::size_t m = 0; m <= nt; ++m)
        g.t[m] = horizon * static_cast<double>(m) / static_cast<double>(nt);
    return g;
}

}  // namespace rootlab
