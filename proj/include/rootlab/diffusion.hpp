#pragma once

#include "rootlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rootlab {

struct ConstantEta {
    double c = 1.0;
};

/// Linear interpolation between knots, constant extension outside.
struct TableEta {
    std::vector<double> xs;
    std::vector<double> etas;
};

/// max(floor, a + b|x - center|).
struct AffineEta {
    double a = 1.0;
    double b = 0.0;
    double floor = 1e-3;
    double center = 0.0;
};

using EtaSpec = std::variant<ConstantEta, TableEta, AffineEta>;

/// State interval; infinite ends are +-inf. Finite ends are absorbing.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    bool lo_finite() const noexcept { return std::isfinite(lo); }
    bool hi_finite() const noexcept { return std::isfinite(hi); }
};

/// Martingale diffusion dX = eta(X) dW on an interval.
class DiffusionSpec {
public:
    DiffusionSpec() = default;

    explicit DiffusionSpec(EtaSpec eta, Interval interval = {}, std::optional<double> c_eta = std::nullopt)
        : eta_(std::move(eta)), interval_(interval), c_eta_(c_eta) {
        if (!(interval_.lo < interval_.hi))
            throw Error(ErrorCode::InvalidDiffusion, "interval must satisfy lo < hi", "interval");
        if (const auto* t = std::get_if<TableEta>(&eta_)) {
            if (t->xs.empty() || t->xs.size() != t->etas.size())
                throw Error(ErrorCode::InvalidDiffusion, "table needs matching non-empty xs/etas", "eta");
            for (std::size_t i = 1; i < t->xs.size(); ++i)
                if (!(t->xs[i - 1] < t->xs[i]))
                    throw Error(ErrorCode::InvalidDiffusion, "table xs must be strictly increasing", "eta.xs");
        }
        if (c_eta_ && !(*c_eta_ > 0.0))
            throw Error(ErrorCode::InvalidDiffusion, "c_eta must be positive", "c_eta");
    }

    static DiffusionSpec brownian() { return DiffusionSpec(ConstantEta{1.0}); }

    const EtaSpec& eta_spec() const noexcept { return eta_; }
    const Interval& interval() const noexcept { return interval_; }
    std::optional<double> c_eta() const noexcept { return c_eta_; }

    bool is_constant() const noexcept { return std::holds_alternative<ConstantEta>(eta_); }

    /// eta(x) without the domain check; used on hot paths.
    double eta_unchecked(double x) const noexcept {
        switch (eta_.index()) {
        case 0: return std::get<0>(eta_).c;
        case 1: {
            const TableEta& t = std::get<1>(eta_);
            if (x <= t.xs.front()) return t.etas.front();
            if (x >= t.xs.back()) return t.etas.back();
            const auto it = std::upper_bound(t.xs.begin(), t.xs.end(), x);
            const std::size_t j = static_cast<std::size_t>(it - t.xs.begin());
            const double s = (x - t.xs[j - 1]) / (t.xs[j] - t.xs[j - 1]);
            return t.etas[j - 1] + s * (t.etas[j] - t.etas[j - 1]);
        }
        default: {
            const AffineEta& p = std::get<2>(eta_);
            return std::max(p.floor, p.a + p.b * std::abs(x - p.center));
        }
        }
    }

    double eta(double x) const {
        if (!interval_.contains(x))
            throw Error(ErrorCode::OutOfDomain, "x=" + std::to_string(x) + " outside the state interval");
        return eta_unchecked(x);
    }

    /// Knots where eta is not smooth, used to sharpen scans.
    std::vector<double> kinks() const {
        if (const auto* t = std::get_if<TableEta>(&eta_)) return t->xs;
        if (const auto* p = std::get_if<AffineEta>(&eta_)) {
            std::vector<double> k{p->center};
            if (p->b != 0.0) {
                const double d = (p->floor - p->a) / p->b;
                if (d > 0.0) {
                    k.push_back(p->center - d);
                    k.push_back(p->center + d);
                }
            }
            return k;
        }
        return {};
    }

private:
    EtaSpec eta_ = ConstantEta{1.0};
    Interval interval_{};
    std::optional<double> c_eta_;
};

inline double eta_eval(const DiffusionSpec& spec, double x) { return spec.eta(x); }

struct ValidationReport {
    bool valid = false;
    bool positive = false;
    bool growth_ok = false;
    double min_eta = 0.0;
    double max_eta = 0.0;
    double c_eta = 0.0;                 ///< constant used for the growth check
    std::optional<double> growth_violation_x;  ///< first x (by |x|) where the bound fails
    double lipschitz = 0.0;
    std::vector<std::string> messages;
};

/// Scans the coefficient on [x_min, x_max] (clipped to the interval). When the
/// spec carries no c_eta the smallest admissible constant is reported.
inline ValidationReport validate_spec(const DiffusionSpec& spec, double x_min, double x_max,
                                      std::size_t n_scan = 20001) {
    ValidationReport rep;
    const double lo = std::max(x_min, spec.interval().lo);
    const double hi = std::min(x_max, spec.interval().hi);
    if (!(lo < hi) || n_scan < 2) {
        rep.messages.push_back("empty scan domain");
        return rep;
    }
    std::vector<double> xs(n_scan);
    for (std::size_t i = 0; i < n_scan; ++i)
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_scan - 1);
    for (double k : spec.kinks())
        if (k > lo && k < hi) xs.push_back(k);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> es(xs.size());
    rep.min_eta = std::numeric_limits<double>::infinity();
    rep.max_eta = -std::numeric_limits<double>::infinity();
    double c_needed = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        es[i] = spec.eta_unchecked(xs[i]);
        rep.min_eta = std::min(rep.min_eta, es[i]);
        rep.max_eta = std::max(rep.max_eta, es[i]);
        c_needed = std::max(c_needed, es[i] * es[i] / (1.0 + xs[i] * xs[i]));
        if (i > 0) rep.lipschitz = std::max(rep.lipschitz, std::abs(es[i] - es[i - 1]) / (xs[i] - xs[i - 1]));
    }
    rep.positive = std::all_of(es.begin(), es.end(), [](double e) { return e > 0.0 && std::isfinite(e); });
    if (!rep.positive) rep.messages.push_back("eta is not strictly positive on the domain");

    rep.c_eta = spec.c_eta().value_or(c_needed);
    rep.growth_ok = true;
    double best_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (es[i] * es[i] > rep.c_eta * (1.0 + xs[i] * xs[i]) * (1.0 + 1e-12)) {
            rep.growth_ok = false;
            if (std::abs(xs[i]) < best_abs) {
                best_abs = std::abs(xs[i]);
                rep.growth_violation_x = xs[i];
            }
        }
    }
    if (!rep.growth_ok) rep.messages.push_back("growth bound eta^2 <= C(1+x^2) fails");
    rep.valid = rep.positive && rep.growth_ok;
    return rep;
}

}  // namespace rootlab
