#pragma once

#include "rootlab/barrier.hpp"
#include "rootlab/diffusion.hpp"
#include "rootlab/error.hpp"
#include "rootlab/grid.hpp"
#include "rootlab/mc_engine.hpp"
#include "rootlab/measures.hpp"
#include "rootlab/ost_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rootlab {

/// Non-negative, non-decreasing running cost f(t).
class CostSpec {
public:
    enum class Kind { Constant, Linear, Power, Table };

    static CostSpec constant(double c = 1.0) { return CostSpec(Kind::Constant, c, 1.0, {}, {}); }
    /// f(t) = scale * t
    static CostSpec linear(double scale = 1.0) { return CostSpec(Kind::Linear, scale, 1.0, {}, {}); }
    /// f(t) = scale * t^p, p >= 1
    static CostSpec power(double p, double scale = 1.0) { return CostSpec(Kind::Power, scale, p, {}, {}); }
    /// Linear interpolation of (t, f) knots, constant outside.
    static CostSpec table(std::vector<double> ts, std::vector<double> fs) {
        return CostSpec(Kind::Table, 1.0, 1.0, std::move(ts), std::move(fs));
    }

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double exponent() const noexcept { return p_; }
    const std::vector<double>& ts() const noexcept { return ts_; }
    const std::vector<double>& fs() const noexcept { return fs_; }

    double f(double t) const noexcept {
        switch (kind_) {
        case Kind::Constant: return scale_;
        case Kind::Linear: return scale_ * t;
        case Kind::Power: return scale_ * std::pow(t, p_);
        case Kind::Table: break;
        }
        if (t <= ts_.front()) return fs_.front();
        if (t >= ts_.back()) return fs_.back();
        const std::size_t j = static_cast<std::size_t>(std::upper_bound(ts_.begin(), ts_.end(), t) - ts_.begin());
        const double s = (t - ts_[j - 1]) / (ts_[j] - ts_[j - 1]);
        return fs_[j - 1] + s * (fs_[j] - fs_[j - 1]);
    }

    /// Exact integral of f over [0, t].
    double integral(double t) const noexcept {
        switch (kind_) {
        case Kind::Constant: return scale_ * t;
        case Kind::Linear: return 0.5 * scale_ * t * t;
        case Kind::Power: return scale_ * std::pow(t, p_ + 1.0) / (p_ + 1.0);
        case Kind::Table: break;
        }
        // piecewise linear with constant extension; knots below 0 are clipped
        double acc = 0.0, prev_t = 0.0, prev_f = f(0.0);
        for (std::size_t j = 0; j < ts_.size() && ts_[j] < t; ++j) {
            if (ts_[j] <= 0.0) continue;
            acc += 0.5 * (prev_f + fs_[j]) * (ts_[j] - prev_t);
            prev_t = ts_[j];
            prev_f = fs_[j];
        }
        return acc + 0.5 * (prev_f + f(t)) * (t - prev_t);
    }

    /// The same cost with f(0) subtracted.
    CostSpec normalized() const {
        const double f0 = f(0.0);
        if (kind_ == Kind::Constant) return constant(0.0);
        if (kind_ != Kind::Table || f0 == 0.0) return *this;
        std::vector<double> fs = fs_;
        for (double& v : fs) v -= f0;
        return table(ts_, std::move(fs));
    }

private:
    CostSpec(Kind k, double scale, double p, std::vector<double> ts, std::vector<double> fs)
        : kind_(k), scale_(scale), p_(p), ts_(std::move(ts)), fs_(std::move(fs)) {
        if (!(scale_ >= 0.0) || !std::isfinite(scale_))
            throw Error(ErrorCode::InvalidCost, "cost scale must be finite and non-negative", "costs.scale");
        if (k == Kind::Power && !(p_ >= 1.0))
            throw Error(ErrorCode::InvalidCost, "power cost needs p >= 1", "costs.p");
        if (k == Kind::Table) {
            if (ts_.empty() || ts_.size() != fs_.size())
                throw Error(ErrorCode::InvalidCost, "table cost needs matching non-empty ts/fs", "costs.ts");
            for (std::size_t j = 0; j < ts_.size(); ++j) {
                if (!(fs_[j] >= 0.0)) throw Error(ErrorCode::InvalidCost, "cost must be non-negative", "costs.fs");
                if (j > 0 && !(ts_[j - 1] < ts_[j]))
                    throw Error(ErrorCode::InvalidCost, "table times must be strictly increasing", "costs.ts");
                if (j > 0 && fs_[j] < fs_[j - 1])
                    throw Error(ErrorCode::InvalidCost, "cost must be non-decreasing", "costs.fs");
            }
        }
    }

    Kind kind_;
    double scale_;
    double p_;
    std::vector<double> ts_;
    std::vector<double> fs_;
};

/// phi_k, h_k surfaces (k = 1..n+1, stored at index k-1), node functions
/// phi_hat_k, psi and lambda_k (k = 1..n).
struct CertificateBundle {
    std::shared_ptr<const Grid> grid;
    std::size_t n = 0;
    std::vector<ValueSurface> phi;
    std::vector<ValueSurface> h;
    std::vector<std::vector<double>> phi_hat;
    std::vector<double> psi;
    std::vector<std::vector<std::optional<double>>> lambda;
    std::vector<Barrier> barriers;
    double f0 = 0.0;

    /// h_k(s, x), extended past the horizon by phi_k(T, x) (s - T).
    double h_eval(std::size_t k, double s, double x) const {
        const Grid& g = *grid;
        const ValueSurface& hk = h[k - 1];
        if (s <= g.horizon()) return hk.value(s, x);
        return hk.value(g.horizon(), x) + phi[k - 1].value(g.horizon(), x) * (s - g.horizon());
    }

    double psi_eval(double x) const {
        const Grid& g = *grid;
        const std::size_t i = g.x_segment(x);
        const double b = (x - g.x[i]) / (g.x[i + 1] - g.x[i]);
        return (1.0 - b) * psi[i] + b * psi[i + 1];
    }

    /// lambda_k at x: node value, or interpolation between two defined nodes.
    std::optional<double> lambda_eval(std::size_t k, double x) const {
        const Grid& g = *grid;
        const auto& lk = lambda[k - 1];
        if (const auto i = g.node_index(x)) return lk[*i];
        const std::size_t i = g.x_segment(x);
        if (!lk[i] || !lk[i + 1]) return std::nullopt;
        const double b = (x - g.x[i]) / (g.x[i + 1] - g.x[i]);
        return (1.0 - b) * *lk[i] + b * *lk[i + 1];
    }
};

namespace detail {

/// Cumulative trapezoid of values on nodes, anchored to zero at node i0.
inline std::vector<double> cumulative_from(const std::vector<double>& x, const std::vector<double>& v,
                                           std::size_t i0) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = i0 + 1; i < x.size(); ++i) out[i] = out[i - 1] + 0.5 * (v[i] + v[i - 1]) * (x[i] - x[i - 1]);
    for (std::size_t i = i0; i-- > 0;) out[i] = out[i + 1] - 0.5 * (v[i] + v[i + 1]) * (x[i + 1] - x[i]);
    return out;
}

}  // namespace detail

/// Backward recursion phi_{n+1} = f, phi_k = E[phi_{k+1} at the hitting of R^k],
/// solved as a backward implicit heat equation with Dirichlet data phi_{k+1}
/// on barrier nodes. `stage_n` (optional) supplies the horizon check.
inline CertificateBundle compute_phi(const std::vector<Barrier>& barriers, const DiffusionSpec& diffusion,
                                     const CostSpec& f, std::shared_ptr<const Grid> grid,
                                     const StoppedSampleSet* stage_n = nullptr, double unhit_tol = 1e-3) {
    if (barriers.empty()) throw Error(ErrorCode::InvalidConfig, "need at least one barrier", "barriers");
    const Grid& g = *grid;
    const std::size_t nx = g.nx(), nt = g.nt(), n = barriers.size();
    for (const Barrier& b : barriers)
        if (b.x() != g.x) throw Error(ErrorCode::GridMismatch, "barrier nodes differ from the grid");
    const auto zero = g.node_index(0.0);
    if (!zero) throw Error(ErrorCode::GridMismatch, "grid has no node at 0");
    if (stage_n) {
        std::size_t late = 0;
        for (std::size_t p = 0; p < stage_n->n_paths; ++p)
            if (stage_n->censored[p] || stage_n->sigma(p, stage_n->n_stages) > g.horizon()) ++late;
        const double frac = static_cast<double>(late) / static_cast<double>(std::max<std::size_t>(1, stage_n->n_paths));
        if (frac > unhit_tol)
            throw Error(ErrorCode::HorizonTooShort,
                        "fraction " + std::to_string(frac) + " of paths not stopped by the horizon", "grid.horizon");
    }

    CertificateBundle cb;
    cb.grid = grid;
    cb.n = n;
    cb.barriers = barriers;
    cb.f0 = f.f(0.0);
    const detail::Stencil op(g, diffusion);

    std::vector<std::vector<double>> phi(n + 1, std::vector<double>(nx * nt));
    for (std::size_t m = 0; m < nt; ++m) std::fill_n(phi[n].begin() + static_cast<std::ptrdiff_t>(m * nx), nx, f.f(g.t[m]));
    std::vector<double> a(nx), bdiag(nx), c(nx), d(nx), cp(nx), dp(nx);
    for (std::size_t k = n; k-- > 0;) {
        const std::vector<double>& next = phi[k + 1];
        std::vector<double>& cur = phi[k];
        const std::vector<double>& tb = barriers[k].tbar();
        std::copy_n(next.begin() + static_cast<std::ptrdiff_t>((nt - 1) * nx), nx,
                    cur.begin() + static_cast<std::ptrdiff_t>((nt - 1) * nx));
        for (std::size_t m = nt - 1; m-- > 0;) {
            const double dt = g.t[m + 1] - g.t[m];
            const double* up = cur.data() + (m + 1) * nx;
            const double* bd = next.data() + m * nx;
            for (std::size_t i = 0; i < nx; ++i) {
                const bool fixed = i == 0 || i + 1 == nx || g.t[m] >= tb[i];
                if (fixed) {
                    a[i] = 0.0;
                    bdiag[i] = 1.0;
                    c[i] = 0.0;
                    d[i] = bd[i];
                } else {
                    a[i] = -dt * op.L[i];
                    bdiag[i] = 1.0 + dt * (op.L[i] + op.R[i]);
                    c[i] = -dt * op.R[i];
                    d[i] = up[i];
                }
            }
            cp[0] = c[0] / bdiag[0];
            dp[0] = d[0] / bdiag[0];
            for (std::size_t i = 1; i < nx; ++i) {
                const double den = bdiag[i] - a[i] * cp[i - 1];
                cp[i] = c[i] / den;
                dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
            }
            double* row = cur.data() + m * nx;
            row[nx - 1] = dp[nx - 1];
            for (std::size_t i = nx - 1; i-- > 0;) row[i] = dp[i] - cp[i] * row[i + 1];
        }
    }

    std::vector<double> inv_eta2(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        const double e = diffusion.eta_unchecked(g.x[i]);
        inv_eta2[i] = 1.0 / (e * e);
    }
    const std::vector<double> G = detail::cumulative_from(g.x, inv_eta2, *zero);
    cb.psi = detail::cumulative_from(g.x, G, *zero);
    for (double& v : cb.psi) v *= 2.0;

    for (std::size_t k = 0; k <= n; ++k) {
        std::vector<double> integrand(nx);
        for (std::size_t i = 0; i < nx; ++i) integrand[i] = phi[k][i] * inv_eta2[i];
        cb.phi_hat.push_back(detail::cumulative_from(g.x, integrand, *zero));
        const std::vector<double> space = detail::cumulative_from(g.x, cb.phi_hat.back(), *zero);
        std::vector<double> hv(nx * nt);
        for (std::size_t i = 0; i < nx; ++i) {
            double acc = 0.0;
            hv[i] = -2.0 * space[i];
            for (std::size_t m = 1; m < nt; ++m) {
                acc += 0.5 * (phi[k][(m - 1) * nx + i] + phi[k][m * nx + i]) * (g.t[m] - g.t[m - 1]);
                hv[m * nx + i] = acc - 2.0 * space[i];
            }
        }
        cb.h.emplace_back(grid, std::move(hv), static_cast<int>(k + 1));
    }
    for (std::size_t k = 0; k <= n; ++k) cb.phi.emplace_back(grid, std::move(phi[k]), static_cast<int>(k + 1));

    for (std::size_t k = 0; k < n; ++k) {
        std::vector<std::optional<double>> lk(nx);
        const std::vector<double>& tb = barriers[k].tbar();
        for (std::size_t i = 0; i < nx; ++i) {
            if (!std::isfinite(tb[i]) || tb[i] > g.horizon()) continue;
            lk[i] = cb.h[k + 1].value(tb[i], g.x[i]) - cb.h[k].value(tb[i], g.x[i]);
        }
        cb.lambda.push_back(std::move(lk));
    }
    return cb;
}

struct BundleCheckReport {
    double eps_cert = 0.0;
    double terminal_error = 0.0;          ///< max |phi_{n+1} - f|
    double ordering_violation = 0.0;      ///< max of phi_{k+1} - phi_k
    double barrier_equality_error = 0.0;  ///< max |phi_n - phi_{n+1}| on R^n
    double h_inequality_violation = 0.0;  ///< max of h_{k-1} + lambda_{k-1} - h_k
    double h_equality_error = 0.0;        ///< max |h_k - h_{k-1} - lambda_{k-1}| on R^{k-1}
    bool passed = false;
};

/// Grid sweeps of the certificate invariants with eps = 1e-3 (1 + max |h|).
inline BundleCheckReport check_bundle(const CertificateBundle& cb, const CostSpec& f) {
    const Grid& g = *cb.grid;
    BundleCheckReport rep;
    double hscale = 0.0;
    for (const auto& hk : cb.h)
        for (double v : hk.values()) hscale = std::max(hscale, std::abs(v));
    rep.eps_cert = 1e-3 * (1.0 + hscale);
    for (std::size_t m = 0; m < g.nt(); ++m)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            rep.terminal_error = std::max(rep.terminal_error, std::abs(cb.phi[cb.n].at(m, i) - f.f(g.t[m])));
            for (std::size_t k = 1; k <= cb.n; ++k)
                rep.ordering_violation = std::max(rep.ordering_violation, cb.phi[k].at(m, i) - cb.phi[k - 1].at(m, i));
            if (g.t[m] >= cb.barriers[cb.n - 1].tbar()[i])
                rep.barrier_equality_error =
                    std::max(rep.barrier_equality_error, std::abs(cb.phi[cb.n - 1].at(m, i) - cb.phi[cb.n].at(m, i)));
            for (std::size_t k = 2; k <= cb.n + 1; ++k) {
                const auto& lam = cb.lambda[k - 2][i];
                if (!lam) continue;
                const double d = cb.h[k - 1].at(m, i) - cb.h[k - 2].at(m, i) - *lam;
                if (g.t[m] <= cb.barriers[k - 2].tbar()[i])
                    rep.h_inequality_violation = std::max(rep.h_inequality_violation, -d);
                else
                    rep.h_equality_error = std::max(rep.h_equality_error, std::abs(d));
            }
        }
    rep.passed = rep.terminal_error <= rep.eps_cert && rep.ordering_violation <= rep.eps_cert &&
                 rep.barrier_equality_error <= rep.eps_cert && rep.h_inequality_violation <= rep.eps_cert &&
                 rep.h_equality_error <= rep.eps_cert;
    return rep;
}

struct CertificateReport {
    std::size_t n_paths = 0;
    double eps_cert = 0.0;
    double violation_fraction = 0.0;  ///< fraction with LHS - RHS < -eps_cert
    double equality_fraction = 0.0;   ///< fraction with |LHS - RHS| <= eps_cert
    double mean_gap = 0.0;
    double median_abs_gap = 0.0;
    double max_abs_gap = 0.0;
    double q001 = 0.0, q01 = 0.0, q50 = 0.0, q99 = 0.0;
    double mean_lhs = 0.0;
};

/// Evaluates int_0^{s_n} f >= sum lambda_i(x_i) + h_1(0, x_0)
///   + sum [h_i(s_i, x_i) - h_i(s_{i-1}, x_{i-1})] + psi(x_n) f(0)
/// on every uncensored path. eps_cert = 1e-3 (1 + mean over paths of max |h_i| terms).
inline CertificateReport pathwise_certificate_check(const StoppedSampleSet& s, const CertificateBundle& cb,
                                                    const CostSpec& f) {
    if (s.n_stages != cb.n) throw Error(ErrorCode::ChainMismatch, "sample stages differ from the bundle");
    const std::size_t n = cb.n;
    std::vector<double> gaps;
    double scale = 0.0, lhs_sum = 0.0;
    for (std::size_t p = 0; p < s.n_paths; ++p) {
        if (s.censored[p]) continue;
        const double lhs = f.integral(s.sigma(p, n));
        double rhs = cb.h_eval(1, 0.0, s.x0[p]);
        double hmax = std::abs(rhs);
        for (std::size_t i = 1; i <= n; ++i) {
            const double si = s.sigma(p, i), xi = s.xstop(p, i);
            const auto lam = cb.lambda_eval(i, xi);
            if (!lam)
                throw Error(ErrorCode::MissingLambda,
                            "stop at x=" + std::to_string(xi) + " has no finite barrier time at stage " + std::to_string(i));
            const double hi = cb.h_eval(i, si, xi);
            const double hp = cb.h_eval(i, s.sigma_or_zero(p, i - 1), s.xstop_or_start(p, i - 1));
            rhs += *lam + hi - hp;
            hmax = std::max({hmax, std::abs(hi), std::abs(hp)});
        }
        rhs += cb.psi_eval(s.xstop(p, n)) * cb.f0;
        gaps.push_back(lhs - rhs);
        scale += hmax;
        lhs_sum += lhs;
    }
    CertificateReport rep;
    rep.n_paths = gaps.size();
    if (gaps.empty()) return rep;
    const double N = static_cast<double>(gaps.size());
    rep.eps_cert = 1e-3 * (1.0 + scale / N);
    rep.mean_lhs = lhs_sum / N;
    std::vector<double> absg(gaps.size());
    std::size_t below = 0, equal = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        absg[i] = std::abs(gaps[i]);
        below += gaps[i] < -rep.eps_cert ? 1 : 0;
        equal += absg[i] <= rep.eps_cert ? 1 : 0;
        sum += gaps[i];
    }
    rep.violation_fraction = static_cast<double>(below) / N;
    rep.equality_fraction = static_cast<double>(equal) / N;
    rep.mean_gap = sum / N;
    auto quantile = [](std::vector<double> v, double q) {
        const std::size_t idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
        return v[idx];
    };
    rep.median_abs_gap = quantile(absg, 0.5);
    rep.max_abs_gap = *std::max_element(absg.begin(), absg.end());
    rep.q001 = quantile(gaps, 0.001);
    rep.q01 = quantile(gaps, 0.01);
    rep.q50 = quantile(gaps, 0.5);
    rep.q99 = quantile(gaps, 0.99);
    return rep;
}

namespace detail {

/// Pushes an atomic law through interval exits using exact exit probabilities.
inline std::vector<Atom> apply_exits(std::vector<Atom> atoms, const std::vector<ExitInstruction>& ins) {
    for (const ExitInstruction& e : ins) {
        std::vector<Atom> next;
        double wa = 0.0, wb = 0.0;
        for (const Atom& a : atoms) {
            if (a.x > e.a && a.x < e.b) {
                const double pb = (a.x - e.a) / (e.b - e.a);
                wb += a.w * pb;
                wa += a.w * (1.0 - pb);
            } else {
                next.push_back(a);
            }
        }
        if (wa > 0.0) next.push_back({e.a, wa});
        if (wb > 0.0) next.push_back({e.b, wb});
        std::sort(next.begin(), next.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
        atoms.clear();
        for (const Atom& a : next) {
            if (!atoms.empty() && std::abs(atoms.back().x - a.x) <= 1e-12 * (1.0 + std::abs(a.x))) atoms.back().w += a.w;
            else atoms.push_back(a);
        }
    }
    return atoms;
}

}  // namespace detail

/// Tangent-line peeling: repeatedly cut the current potential with the
/// supporting line of U^target where the gap U^cur - U^target is largest.
/// Each cut is the exit from the interval where the line lies below U^cur.
inline std::vector<ExitInstruction> chacon_walsh_embedding(const ProbabilityMeasure& mu0,
                                                           const ProbabilityMeasure& target) {
    const ConvexOrderReport order = check_convex_order(mu0, target);
    if (!order.ordered) throw Error(ErrorCode::NotConvexOrdered, "mu0 is not below the target in convex order");
    const PotentialFunction ut = target.potential_function();
    const std::vector<double>& tx = ut.xs();
    const PotentialFunction u0 = mu0.potential_function();
    std::vector<double> cx = u0.xs(), cu = u0.us();
    auto snap = [&](double v) {
        for (double a : tx)
            if (std::abs(a - v) <= 1e-11 * (1.0 + std::abs(a))) return a;
        for (double a : cx)
            if (std::abs(a - v) <= 1e-11 * (1.0 + std::abs(a))) return a;
        return v;
    };
    const std::size_t m = target.size();
    const std::size_t cap = std::max<std::size_t>(m * m, 2 * m + 2);
    const double tol = 1e-12 * (1.0 + std::abs(ut(0.0)));
    std::vector<ExitInstruction> out;
    for (std::size_t step = 0;; ++step) {
        const PotentialFunction uc(cx, cu);
        double best = tol, xs = 0.0;
        bool found = false;
        std::vector<double> cand = cx;
        cand.insert(cand.end(), tx.begin(), tx.end());
        std::sort(cand.begin(), cand.end());
        for (double x : cand) {
            const double gap = uc(x) - ut(x);
            if (gap > best) {
                best = gap;
                xs = x;
                found = true;
            }
        }
        if (!found) break;
        if (step >= cap) throw Error(ErrorCode::PeelingStalled, "tangent peeling did not converge");
        double slope;
        const auto it = std::find(tx.begin(), tx.end(), xs);
        if (it != tx.end()) {
            const std::size_t j = static_cast<std::size_t>(it - tx.begin());
            slope = 0.5 * (ut.slope_before(j) + ut.slope_after(j));
        } else if (xs < tx.front()) {
            slope = ut.left_slope();
        } else if (xs > tx.back()) {
            slope = ut.right_slope();
        } else {
            const std::size_t j = static_cast<std::size_t>(std::upper_bound(tx.begin(), tx.end(), xs) - tx.begin());
            slope = ut.slope_after(j - 1);
        }
        const double y0 = ut(xs);
        auto line = [&](double x) { return y0 + slope * (x - xs); };
        // crossings of the concave U^cur with the line on either side of xs
        auto crossing = [&](bool right) {
            const std::vector<double>& bx = uc.xs();
            std::vector<double> pts;
            for (double b : bx)
                if (right ? b > xs : b < xs) pts.push_back(b);
            if (!right) std::reverse(pts.begin(), pts.end());
            double px = xs, pd = uc(xs) - line(xs);
            for (double b : pts) {
                const double d = uc(b) - line(b);
                if (d <= 0.0) return px + (b - px) * pd / (pd - d);
                px = b;
                pd = d;
            }
            const double s_end = (right ? uc.right_slope() : uc.left_slope()) - slope;
            return px - pd / s_end;
        };
        const double a = snap(crossing(false)), b = snap(crossing(true));
        ExitInstruction ins{a, b, {}};
        for (double x : cx)
            if (x > a && x < b) ins.from.push_back(x);
        out.push_back(ins);
        std::vector<double> nx, nu;
        for (std::size_t i = 0; i < cx.size(); ++i)
            if (cx[i] < a) {
                nx.push_back(cx[i]);
                nu.push_back(cu[i]);
            }
        nx.push_back(a);
        nu.push_back(line(a));
        nx.push_back(b);
        nu.push_back(line(b));
        for (std::size_t i = 0; i < cx.size(); ++i)
            if (cx[i] > b) {
                nx.push_back(cx[i]);
                nu.push_back(cu[i]);
            }
        cx = std::move(nx);
        cu = std::move(nu);
    }
    // exact bookkeeping: push mu0 through the exits and compare with the target
    const std::vector<Atom> law = detail::apply_exits(mu0.atoms(), out);
    bool ok = law.size() == target.size();
    for (std::size_t i = 0; ok && i < law.size(); ++i)
        ok = std::abs(law[i].x - target.atoms()[i].x) <= 1e-9 && std::abs(law[i].w - target.atoms()[i].w) <= 1e-9;
    if (!ok) throw Error(ErrorCode::PeelingStalled, "peeled exits do not reproduce the target law");
    return out;
}

struct ComparisonReport {
    MeanEstimate root;
    MeanEstimate comparator;
    double difference = 0.0;  ///< root - comparator
    double joint_stderr = 0.0;
    double z = 0.0;
    bool root_not_worse = false;      ///< difference <= 3 joint stderr
    bool strictly_better = false;     ///< difference <= -3 joint stderr
    bool equal_within_noise = false;  ///< |difference| <= 3 joint stderr
};

inline MeanEstimate expected_cost(const StoppedSampleSet& s, const CostSpec& f) {
    std::vector<double> v;
    for (std::size_t p = 0; p < s.n_paths; ++p)
        if (!s.censored[p]) v.push_back(f.integral(s.sigma(p, s.n_stages)));
    return estimate_mean(v);
}

inline ComparisonReport expected_cost_comparison(const StoppedSampleSet& root, const StoppedSampleSet& comparator,
                                                 const CostSpec& f) {
    if (root.n_stages != comparator.n_stages)
        throw Error(ErrorCode::ChainMismatch, "sample sets embed chains of different length");
    ComparisonReport rep;
    rep.root = expected_cost(root, f);
    rep.comparator = expected_cost(comparator, f);
    rep.difference = rep.root.mean - rep.comparator.mean;
    rep.joint_stderr = std::hypot(rep.root.stderr_, rep.comparator.stderr_);
    rep.z = rep.joint_stderr > 0.0 ? rep.difference / rep.joint_stderr : 0.0;
    rep.root_not_worse = rep.difference <= 3.0 * rep.joint_stderr;
    rep.strictly_better = rep.difference <= -3.0 * rep.joint_stderr;
    rep.equal_within_noise = std::abs(rep.difference) <= 3.0 * rep.joint_stderr;
    return rep;
}

}  // namespace rootlab
