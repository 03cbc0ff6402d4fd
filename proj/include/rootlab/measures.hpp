#pragma once

#include "rootlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rootlab {

inline constexpr double kWeightTol = 1e-12;
inline constexpr double kMeanTol = 1e-10;
inline constexpr double kOrderTol = 1e-12;

struct Atom {
    double x;
    double w;

    bool operator==(const Atom&) const = default;
};

/// Piecewise-linear concave function given by its breakpoints and the slopes
/// of the two unbounded pieces.
class PotentialFunction {
public:
    PotentialFunction(std::vector<double> xs, std::vector<double> us,
                      double left_slope = 1.0, double right_slope = -1.0)
        : xs_(std::move(xs)), us_(std::move(us)),
          left_slope_(left_slope), right_slope_(right_slope) {
        if (xs_.empty() || xs_.size() != us_.size())
            throw Error(ErrorCode::InvalidMeasure, "potential needs matching non-empty breakpoints");
    }

    double operator()(double x) const {
        if (x <= xs_.front()) return us_.front() + left_slope_ * (x - xs_.front());
        if (x >= xs_.back()) return us_.back() + right_slope_ * (x - xs_.back());
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - xs_.begin());
        const double x0 = xs_[j - 1], x1 = xs_[j];
        const double s = (x - x0) / (x1 - x0);
        return us_[j - 1] + s * (us_[j] - us_[j - 1]);
    }

    const std::vector<double>& xs() const noexcept { return xs_; }
    const std::vector<double>& us() const noexcept { return us_; }
    double left_slope() const noexcept { return left_slope_; }
    double right_slope() const noexcept { return right_slope_; }

    /// Slope immediately left of breakpoint j.
    double slope_before(std::size_t j) const {
        if (j == 0) return left_slope_;
        return (us_[j] - us_[j - 1]) / (xs_[j] - xs_[j - 1]);
    }
    /// Slope immediately right of breakpoint j.
    double slope_after(std::size_t j) const {
        if (j + 1 == xs_.size()) return right_slope_;
        return (us_[j + 1] - us_[j]) / (xs_[j + 1] - xs_[j]);
    }

private:
    std::vector<double> xs_;
    std::vector<double> us_;
    double left_slope_;
    double right_slope_;
};

/// Finite atomic probability measure with zero mean.
class ProbabilityMeasure {
public:
    ProbabilityMeasure() : atoms_{{0.0, 1.0}} {}

    explicit ProbabilityMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw Error(ErrorCode::InvalidMeasure, "measure has no atoms");
        double total = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const Atom& a = atoms_[i];
            if (!std::isfinite(a.x) || !std::isfinite(a.w))
                throw Error(ErrorCode::InvalidMeasure, "atom is not finite");
            if (!(a.w > 0.0))
                throw Error(ErrorCode::InvalidMeasure, "atom weight must be positive");
            if (i > 0 && !(atoms_[i - 1].x < a.x))
                throw Error(ErrorCode::InvalidMeasure, "atom locations must be strictly increasing");
            total += a.w;
        }
        if (std::abs(total - 1.0) > kWeightTol)
            throw Error(ErrorCode::InvalidMeasure, "weights sum to " + std::to_string(total));
        if (std::abs(mean()) > kMeanTol)
            throw Error(ErrorCode::InvalidMeasure, "measure is not centred, mean " + std::to_string(mean()));
    }

    static ProbabilityMeasure dirac() { return ProbabilityMeasure(); }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    double min_location() const noexcept { return atoms_.front().x; }
    double max_location() const noexcept { return atoms_.back().x; }

    double mean() const noexcept {
        double m = 0.0;
        for (const Atom& a : atoms_) m += a.w * a.x;
        return m;
    }

    double variance() const noexcept {
        const double m = mean();
        double v = 0.0;
        for (const Atom& a : atoms_) v += a.w * (a.x - m) * (a.x - m);
        return v;
    }

    /// U(x) = -sum w |x - loc|.
    double potential(double x) const noexcept {
        double u = 0.0;
        for (const Atom& a : atoms_) u -= a.w * std::abs(x - a.x);
        return u;
    }

    /// Breakpoint representation of the potential, evaluated in O(n).
    PotentialFunction potential_function() const {
        const std::size_t n = atoms_.size();
        std::vector<double> xs(n), us(n);
        double w_total = 0.0, m_total = 0.0;
        for (const Atom& a : atoms_) {
            w_total += a.w;
            m_total += a.w * a.x;
        }
        double w_left = 0.0, m_left = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double x = atoms_[j].x;
            const double w_right = w_total - w_left - atoms_[j].w;
            const double m_right = m_total - m_left - atoms_[j].w * x;
            xs[j] = x;
            us[j] = -((x * w_left - m_left) + (m_right - x * w_right));
            w_left += atoms_[j].w;
            m_left += atoms_[j].w * x;
        }
        return PotentialFunction(std::move(xs), std::move(us), 1.0, -1.0);
    }

    bool operator==(const ProbabilityMeasure&) const = default;

private:
    std::vector<Atom> atoms_;
};

/// Measure after centring together with the shift that was subtracted.
struct CentredMeasure {
    ProbabilityMeasure measure;
    double shift = 0.0;
};

/// Sorts, merges duplicate locations, renormalises and centres raw atoms.
/// Weights must already sum to 1 within `sum_tol`.
inline CentredMeasure centre_atoms(std::vector<Atom> atoms, double sum_tol = 1e-9) {
    if (atoms.empty()) throw Error(ErrorCode::InvalidMeasure, "measure has no atoms");
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    std::vector<Atom> merged;
    double total = 0.0;
    for (const Atom& a : atoms) {
        if (!std::isfinite(a.x) || !std::isfinite(a.w) || !(a.w > 0.0))
            throw Error(ErrorCode::InvalidMeasure, "atoms need finite locations and positive weights");
        total += a.w;
        if (!merged.empty() && merged.back().x == a.x) merged.back().w += a.w;
        else merged.push_back(a);
    }
    if (std::abs(total - 1.0) > sum_tol)
        throw Error(ErrorCode::InvalidMeasure, "weights sum to " + std::to_string(total));
    double mean = 0.0;
    for (Atom& a : merged) {
        a.w /= total;
        mean += a.w * a.x;
    }
    if (std::abs(mean) <= kMeanTol * 1e-2) mean = 0.0;
    for (Atom& a : merged) a.x -= mean;
    // renormalise once more so the constructor's sum check sees exact rounding
    double s = 0.0;
    for (const Atom& a : merged) s += a.w;
    for (Atom& a : merged) a.w /= s;
    return {ProbabilityMeasure(std::move(merged)), mean};
}

struct ConvexOrderReport {
    bool ordered = false;
    double worst_violation = 0.0;  ///< max of U^b - U^a over breakpoints
    double worst_x = 0.0;
};

/// Tests a ⪯_cx b by comparing potentials on the union of breakpoints.
inline ConvexOrderReport check_convex_order(const ProbabilityMeasure& a, const ProbabilityMeasure& b,
                                            double tol = kOrderTol) {
    if (std::abs(a.mean() - b.mean()) > std::max(tol, kMeanTol))
        throw Error(ErrorCode::MeanMismatch, "means differ by " + std::to_string(a.mean() - b.mean()));
    const PotentialFunction ua = a.potential_function();
    const PotentialFunction ub = b.potential_function();
    ConvexOrderReport rep;
    rep.worst_violation = -std::numeric_limits<double>::infinity();
    auto visit = [&](double x) {
        const double d = ub(x) - ua(x);
        if (d > rep.worst_violation) {
            rep.worst_violation = d;
            rep.worst_x = x;
        }
    };
    for (double x : ua.xs()) visit(x);
    for (double x : ub.xs()) visit(x);
    rep.ordered = rep.worst_violation <= tol;
    return rep;
}

struct SupportBounds {
    double ell = -std::numeric_limits<double>::infinity();
    double r = std::numeric_limits<double>::infinity();
};

namespace detail {

struct MergedMass {
    double x;
    double w_prev;
    double w_next;
};

inline std::vector<MergedMass> merge_masses(const ProbabilityMeasure& prev, const ProbabilityMeasure& next) {
    std::vector<MergedMass> out;
    const auto& pa = prev.atoms();
    const auto& na = next.atoms();
    std::size_t i = 0, j = 0;
    while (i < pa.size() || j < na.size()) {
        if (j == na.size() || (i < pa.size() && pa[i].x < na[j].x)) {
            out.push_back({pa[i].x, pa[i].w, 0.0});
            ++i;
        } else if (i == pa.size() || na[j].x < pa[i].x) {
            out.push_back({na[j].x, 0.0, na[j].w});
            ++j;
        } else {
            out.push_back({pa[i].x, pa[i].w, na[j].w});
            ++i;
            ++j;
        }
    }
    return out;
}

}  // namespace detail

/// Support bounds of next - prev, or nullopt when the measures coincide.
inline std::optional<SupportBounds> try_support_bounds(const ProbabilityMeasure& prev,
                                                       const ProbabilityMeasure& next,
                                                       double tol = kWeightTol) {
    const auto m = detail::merge_masses(prev, next);
    std::optional<std::size_t> first, last;
    double cp = 0.0, cn = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
        cp += m[j].w_prev;
        cn += m[j].w_next;
        if (std::abs(cp - cn) > tol) {
            first = j;
            break;
        }
    }
    double tp = 0.0, tn = 0.0;
    for (std::size_t j = m.size(); j-- > 0;) {
        tp += m[j].w_prev;
        tn += m[j].w_next;
        if (std::abs(tp - tn) > tol) {
            last = j;
            break;
        }
    }
    if (!first || !last) return std::nullopt;
    return SupportBounds{m[*first].x, m[*last].x};
}

inline SupportBounds support_bounds(const ProbabilityMeasure& prev, const ProbabilityMeasure& next) {
    auto b = try_support_bounds(prev, next);
    if (!b) throw Error(ErrorCode::IdenticalMeasures, "support bounds of identical measures");
    return *b;
}

/// w = U^target - U^source sampled on nodes.
struct PotentialDifference {
    std::vector<double> nodes;
    std::vector<double> w;
    std::vector<double> target_mass;      ///< target atom weight at each node (0 off-support)
    std::optional<SupportBounds> bounds;  ///< nullopt when source == target

    bool is_zero() const noexcept {
        return std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });
    }
};

inline PotentialDifference potential_difference(const ProbabilityMeasure& source,
                                                const ProbabilityMeasure& target,
                                                std::span<const double> nodes) {
    const ConvexOrderReport order = check_convex_order(source, target);
    if (!order.ordered)
        throw Error(ErrorCode::NotConvexOrdered,
                    "potential ordering fails at x=" + std::to_string(order.worst_x));
    PotentialDifference pd;
    pd.nodes.assign(nodes.begin(), nodes.end());
    pd.w.assign(nodes.size(), 0.0);
    pd.target_mass.assign(nodes.size(), 0.0);
    for (const Atom& a : target.atoms()) {
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), a.x);
        if (it != nodes.end() && *it == a.x) pd.target_mass[static_cast<std::size_t>(it - nodes.begin())] = a.w;
    }
    pd.bounds = try_support_bounds(source, target);
    if (!pd.bounds) return pd;
    const PotentialFunction us = source.potential_function();
    const PotentialFunction ut = target.potential_function();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        if (x <= pd.bounds->ell || x >= pd.bounds->r) continue;
        pd.w[i] = std::min(0.0, ut(x) - us(x));
    }
    return pd;
}

/// Target potential tabulated at candidate locations, used by atomize.
struct TabulatedPotential {
    std::vector<double> xs;  ///< strictly increasing, first/last = support extremes
    std::vector<double> us;
    double mean = 0.0;
};

namespace detail {

inline CentredMeasure atomize_tabulated(const TabulatedPotential& tp, std::size_t n_atoms) {
    const std::size_t m = tp.xs.size();
    if (m == 1) {
        return {ProbabilityMeasure(), tp.mean};
    }
    if (n_atoms < 2)
        throw Error(ErrorCode::DegenerateInput, "need at least 2 atoms for a non-degenerate target");

    // Greedy nested selection: always split where the chord gap is largest.
    struct Segment {
        double gap;
        std::size_t lo, hi, arg;
        bool operator<(const Segment& o) const {
            if (gap != o.gap) return gap < o.gap;
            return arg > o.arg;
        }
    };
    auto make_segment = [&](std::size_t lo, std::size_t hi) {
        Segment s{0.0, lo, hi, lo};
        const double x0 = tp.xs[lo], x1 = tp.xs[hi];
        const double u0 = tp.us[lo], u1 = tp.us[hi];
        for (std::size_t j = lo + 1; j < hi; ++j) {
            const double chord = u0 + (u1 - u0) * (tp.xs[j] - x0) / (x1 - x0);
            const double g = tp.us[j] - chord;
            if (g > s.gap) {
                s.gap = g;
                s.arg = j;
            }
        }
        return s;
    };
    std::vector<std::size_t> chosen{0, m - 1};
    std::priority_queue<Segment> queue;
    queue.push(make_segment(0, m - 1));
    const double scale = 1.0 + std::abs(tp.us.front()) + std::abs(tp.us.back());
    while (chosen.size() < n_atoms && !queue.empty()) {
        const Segment s = queue.top();
        if (s.gap <= 1e-14 * scale) break;
        queue.pop();
        chosen.push_back(s.arg);
        queue.push(make_segment(s.lo, s.arg));
        queue.push(make_segment(s.arg, s.hi));
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<Atom> atoms;
    const std::size_t k = chosen.size();
    for (std::size_t j = 0; j < k; ++j) {
        const double x = tp.xs[chosen[j]];
        const double sl = j == 0 ? 1.0
                                 : (tp.us[chosen[j]] - tp.us[chosen[j - 1]]) / (x - tp.xs[chosen[j - 1]]);
        const double sr = j + 1 == k ? -1.0
                                     : (tp.us[chosen[j + 1]] - tp.us[chosen[j]]) / (tp.xs[chosen[j + 1]] - x);
        const double w = 0.5 * (sl - sr);
        if (w > 1e-15) atoms.push_back({x, w});
    }
    CentredMeasure c = centre_atoms(std::move(atoms), 1e-6);
    c.shift += tp.mean;
    return c;
}

}  // namespace detail

/// Atomic approximation of an empirical sample: the potential is interpolated
/// at a nested greedy set of sample values, always keeping the extremes.
/// The result satisfies U^{atomized} <= U^{target} and has the same mean.
inline CentredMeasure atomize_samples(std::span<const double> samples, std::size_t n_atoms) {
    if (samples.empty()) throw Error(ErrorCode::DegenerateInput, "no samples");
    std::vector<double> s(samples.begin(), samples.end());
    for (double v : s)
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "non-finite sample");
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= n;

    TabulatedPotential tp;
    tp.mean = mean;
    std::vector<double> cnt;
    for (double v : s) {
        const double x = v - mean;
        if (tp.xs.empty() || tp.xs.back() != x) {
            tp.xs.push_back(x);
            cnt.push_back(1.0);
        } else {
            cnt.back() += 1.0;
        }
    }
    const std::size_t m = tp.xs.size();
    double w_total = 0.0, m_total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        w_total += cnt[j] / n;
        m_total += cnt[j] / n * tp.xs[j];
    }
    tp.us.resize(m);
    double w_left = 0.0, m_left = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double x = tp.xs[j];
        const double wj = cnt[j] / n;
        const double w_right = w_total - w_left - wj;
        const double m_right = m_total - m_left - wj * x;
        tp.us[j] = -((x * w_left - m_left) + (m_right - x * w_right));
        w_left += wj;
        m_left += wj * x;
    }
    return detail::atomize_tabulated(tp, n_atoms);
}

/// Atomic approximation of a piecewise-linear density tabulated at xs.
/// Candidate atom locations are the tabulation nodes.
inline CentredMeasure atomize_density(std::span<const double> xs, std::span<const double> ps,
                                      std::size_t n_atoms) {
    if (xs.size() != ps.size() || xs.size() < 2)
        throw Error(ErrorCode::DegenerateInput, "density needs matching xs/ps with at least 2 nodes");
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (!std::isfinite(xs[j]) || !std::isfinite(ps[j]) || ps[j] < 0.0)
            throw Error(ErrorCode::DegenerateInput, "density values must be finite and non-negative");
        if (j > 0 && !(xs[j - 1] < xs[j]))
            throw Error(ErrorCode::DegenerateInput, "density nodes must be strictly increasing");
    }
    const std::size_t m = xs.size();
    // Exact mass and first moment of the linear interpolant on each cell.
    std::vector<double> F(m, 0.0), M(m, 0.0);
    for (std::size_t j = 1; j < m; ++j) {
        const double h = xs[j] - xs[j - 1];
        const double p0 = ps[j - 1], p1 = ps[j];
        const double xm = 0.5 * (xs[j - 1] + xs[j]);
        F[j] = F[j - 1] + 0.5 * h * (p0 + p1);
        M[j] = M[j - 1] + h / 6.0 * (xs[j - 1] * p0 + 4.0 * xm * 0.5 * (p0 + p1) + xs[j] * p1);
    }
    const double mass = F[m - 1];
    if (!(mass > 0.0)) throw Error(ErrorCode::DegenerateInput, "density has zero mass");
    const double mean = M[m - 1] / mass;
    std::size_t lo = 0, hi = m - 1;
    while (lo + 1 < m && F[lo + 1] == 0.0) ++lo;
    while (hi > 0 && F[hi - 1] == mass) --hi;
    if (lo >= hi) throw Error(ErrorCode::DegenerateInput, "density support is degenerate");

    TabulatedPotential tp;
    tp.mean = mean;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double x = xs[j];
        const double f = F[j] / mass, mm = M[j] / mass, mt = M[m - 1] / mass;
        tp.xs.push_back(x - mean);
        tp.us.push_back(-((x * f - mm) + ((mt - mm) - x * (1.0 - f))));
    }
    return detail::atomize_tabulated(tp, n_atoms);
}

}  // namespace rootlab
