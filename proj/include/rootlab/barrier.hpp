#pragma once

#include "rootlab/error.hpp"
#include "rootlab/measures.hpp"
#include "rootlab/ost_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace rootlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One end of a free interval. Fixed ends sit on a node; moving ends lie inside
/// a segment whose interpolated barrier time is crossing the current time.
struct FreeEdge {
    double x = 0.0;
    bool moving = false;
    double xa = 0.0, xb = 0.0, fa = 0.0, fb = 0.0;
    bool grid_end = false;  ///< end of the grid without an active node

    double at(double t) const noexcept {
        if (!moving) return x;
        const double s = std::clamp((t - fa) / (fb - fa), 0.0, 1.0);
        return xa + s * (xb - xa);
    }
};

/// Connected component of {x : t < tbar(x)} around a point, valid for times
/// strictly below valid_until.
struct FreeInterval {
    FreeEdge lo, hi;
    double valid_until = kInf;
};

/// Barrier function on nodes; the barrier is the closed epigraph t >= tbar(x).
class Barrier {
public:
    Barrier(std::vector<double> x, std::vector<double> tbar, int stage)
        : x_(std::move(x)), tbar_(std::move(tbar)), stage_(stage) {
        if (x_.size() < 2 || x_.size() != tbar_.size())
            throw Error(ErrorCode::GridMismatch, "barrier needs matching x/tbar with at least 2 nodes");
        for (std::size_t i = 0; i < x_.size(); ++i) {
            if (i > 0 && !(x_[i - 1] < x_[i]))
                throw Error(ErrorCode::GridMismatch, "barrier nodes must be strictly increasing");
            if (!(tbar_[i] >= 0.0))
                throw Error(ErrorCode::OutOfRange, "barrier times must be in [0, inf]");
        }
    }

    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<double>& tbar() const noexcept { return tbar_; }
    int stage() const noexcept { return stage_; }
    std::size_t size() const noexcept { return x_.size(); }
    double x_min() const noexcept { return x_.front(); }
    double x_max() const noexcept { return x_.back(); }

    /// Linear between consecutive finite node values, +inf next to an infinite node.
    double tbar_interp(double x) const {
        if (!(x >= x_.front() && x <= x_.back()))
            throw Error(ErrorCode::OutOfRange, "x=" + std::to_string(x) + " outside the barrier range");
        const auto it = std::lower_bound(x_.begin(), x_.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - x_.begin());
        if (x_[j] == x) return tbar_[j];
        const double f0 = tbar_[j - 1], f1 = tbar_[j];
        if (!std::isfinite(f0) || !std::isfinite(f1)) return kInf;
        const double s = (x - x_[j - 1]) / (x_[j] - x_[j - 1]);
        return f0 + s * (f1 - f0);
    }

    bool hit(double t, double x) const { return t >= tbar_interp(x); }

    /// Free component containing x at time t; requires t < tbar_interp(x).
    FreeInterval free_interval(double t, double x) const {
        FreeInterval fi;
        fi.valid_until = tbar_interp(x);
        const std::size_t n = x_.size();
        std::size_t j = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        j = j == 0 ? 0 : j - 1;
        const bool on_node = x_[j] == x;

        // Walk segment by segment; `near` is the node closest to x, `far` the next one.
        auto scan = [&](std::size_t near, std::size_t far, std::size_t first_far, bool step_right) {
            FreeEdge e;
            for (;;) {
                const double fn = tbar_[near], ff = tbar_[far];
                if (std::isfinite(fn) && std::isfinite(ff) && ff <= t && fn > t) {
                    e = {0.0, true, x_[near], x_[far], fn, ff, false};
                    e.x = e.at(t);
                    return e;
                }
                if (ff <= t) return FreeEdge{x_[far], false};
                fi.valid_until = std::min(fi.valid_until, ff);
                if (far == first_far) {
                    e = {x_[far], false};
                    e.grid_end = true;
                    return e;
                }
                near = far;
                far = step_right ? far + 1 : far - 1;
            }
        };
        if (on_node && j + 1 == n) {
            fi.hi = {x_.back(), false};
            fi.hi.grid_end = true;
        } else {
            fi.hi = scan(j, j + 1, n - 1, true);
        }
        if (on_node && j == 0) {
            fi.lo = {x_.front(), false};
            fi.lo.grid_end = true;
        } else if (on_node) {
            fi.lo = scan(j, j - 1, 0, false);
        } else {
            fi.lo = scan(j + 1, j, 0, false);
        }
        return fi;
    }

    bool operator==(const Barrier&) const = default;

private:
    std::vector<double> x_;
    std::vector<double> tbar_;
    int stage_;
};

inline bool hit_test(const Barrier& b, double t, double x) { return b.hit(t, x); }

inline constexpr double kDefaultEpsB = 1e-6;

/// tbar(x_i) = first t-node where u^k - u^{k-1} is within eps_b (1 + |delta_U|) of delta_U.
/// u^k >= u^{k-1} + delta_U holds everywhere, so contact is the one-sided test below.
/// With `support_only`, nodes inside (ell, r) that carry no target mass keep
/// tbar = inf: no barrier point can sit where the target puts no mass.
inline Barrier extract_barrier(const ValueSurface& uk, const ValueSurface& uprev, const PotentialDifference& delta_U,
                               double eps_b = kDefaultEpsB, bool support_only = true) {
    if (uk.grid_ptr() != uprev.grid_ptr() && !(uk.grid() == uprev.grid()))
        throw Error(ErrorCode::GridMismatch, "surfaces live on different grids");
    const Grid& g = uk.grid();
    if (delta_U.w.size() != g.nx()) throw Error(ErrorCode::GridMismatch, "delta_U not sampled on the grid");
    const bool masked = support_only && delta_U.target_mass.size() == g.nx();
    std::vector<double> tb(g.nx(), kInf);
    for (std::size_t i = 0; i < g.nx(); ++i) {
        const double w = delta_U.w[i];
        if (w == 0.0) {
            tb[i] = 0.0;
            continue;
        }
        if (masked && delta_U.target_mass[i] == 0.0) continue;
        const double thr = w + eps_b * (1.0 + std::abs(w));
        for (std::size_t m = 0; m < g.nt(); ++m) {
            if (uk.at(m, i) - uprev.at(m, i) <= thr) {
                tb[i] = g.t[m];
                break;
            }
        }
    }
    return Barrier(g.x, std::move(tb), uk.stage());
}

}  // namespace rootlab
