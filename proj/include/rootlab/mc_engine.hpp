#pragma once

#include "rootlab/barrier.hpp"
#include "rootlab/diffusion.hpp"
#include "rootlab/error.hpp"
#include "rootlab/measures.hpp"
#include "rootlab/ost_solver.hpp"
#include "rootlab/rng.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace rootlab {

struct PathConfig {
    double dt = 1e-4;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    bool bridge_correction = true;
    double max_time = 64.0;
    double censor_cap = 1e-3;
    unsigned threads = 1;
    std::vector<double> probe_times;  ///< path values X_{t ^ sigma_n} are stored at these times
};

/// Checks dt <= horizon/256, n_paths >= 1 and max_time >= 2 horizon.
inline void validate_path_config(const PathConfig& c, double horizon) {
    if (!(c.dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive", "paths.dt");
    if (c.dt > horizon / 256.0 * (1.0 + 1e-12))
        throw Error(ErrorCode::InvalidConfig, "dt must not exceed horizon/256", "paths.dt");
    if (c.n_paths < 1) throw Error(ErrorCode::InvalidConfig, "n_paths must be at least 1", "paths.n_paths");
    if (c.max_time < 2.0 * horizon)
        throw Error(ErrorCode::InvalidConfig, "max_time must be at least twice the horizon", "paths.max_time");
}

/// Per-path start points and stop records. Stage index k runs 1..n.
struct StoppedSampleSet {
    std::size_t n_paths = 0;
    std::size_t n_stages = 0;
    std::vector<double> x0;
    std::vector<double> sigma_;   ///< n_paths * n_stages, +inf when not reached
    std::vector<double> xstop_;   ///< n_paths * n_stages, NaN when not reached
    std::vector<std::uint8_t> censored;
    std::vector<double> probe_times;
    std::vector<double> probe_x_;  ///< n_paths * n_probes, X_{t ^ sigma_n}

    std::uint64_t seed = 0;
    double dt = 0.0;
    bool bridge_correction = false;
    std::string rng = kRngName;
    std::string start_sampling = "stratified proportional allocation over mu_0 atoms";
    std::string embedding = "root";

    double sigma(std::size_t p, std::size_t k) const noexcept { return sigma_[p * n_stages + (k - 1)]; }
    double xstop(std::size_t p, std::size_t k) const noexcept { return xstop_[p * n_stages + (k - 1)]; }
    double probe_x(std::size_t p, std::size_t j) const noexcept { return probe_x_[p * probe_times.size() + j]; }

    std::size_t censored_count() const noexcept {
        return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), std::uint8_t{1}));
    }
    double censored_fraction() const noexcept {
        return n_paths ? static_cast<double>(censored_count()) / static_cast<double>(n_paths) : 0.0;
    }

    /// Stop time sigma_0 = 0 and location X_0 for k = 0.
    double sigma_or_zero(std::size_t p, std::size_t k) const noexcept { return k == 0 ? 0.0 : sigma(p, k); }
    double xstop_or_start(std::size_t p, std::size_t k) const noexcept { return k == 0 ? x0[p] : xstop(p, k); }

    std::optional<std::size_t> probe_index(double t) const {
        for (std::size_t j = 0; j < probe_times.size(); ++j)
            if (std::abs(probe_times[j] - t) <= 1e-12 * (1.0 + t)) return j;
        return std::nullopt;
    }

    /// X_{t ^ sigma_k} for a recorded probe time index j.
    double stopped_at_probe(std::size_t p, std::size_t j, std::size_t k) const noexcept {
        const double t = probe_times[j];
        if (k > 0 && sigma(p, k) <= t) return xstop(p, k);
        return probe_x(p, j);
    }
};

/// Path counts per mu_0 atom by largest remainder, in atom order.
inline std::vector<std::size_t> stratify(const ProbabilityMeasure& mu0, std::size_t n) {
    const auto& atoms = mu0.atoms();
    std::vector<std::size_t> cnt(atoms.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double q = atoms[j].w * static_cast<double>(n);
        cnt[j] = static_cast<std::size_t>(std::floor(q));
        used += cnt[j];
        rem.push_back({q - std::floor(q), j});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; used < n; ++r, ++used) ++cnt[rem[r % rem.size()].second];
    return cnt;
}

inline std::vector<double> stratified_starts(const ProbabilityMeasure& mu0, std::size_t n) {
    const auto cnt = stratify(mu0, n);
    std::vector<double> xs;
    xs.reserve(n);
    for (std::size_t j = 0; j < cnt.size(); ++j) xs.insert(xs.end(), cnt[j], mu0.atoms()[j].x);
    return xs;
}

namespace detail {

/// Runs body(begin, end) over [0, n) in contiguous blocks across threads.
inline void parallel_blocks(std::size_t n, unsigned threads, const std::function<void(std::size_t, std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
        pool.emplace_back([&, w, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

/// Random source for one path.
struct PathNoise {
    std::mt19937_64 gen;
    boost::random::normal_distribution<double> normal{0.0, 1.0};
    std::uniform_real_distribution<double> uniform{0.0, 1.0};

    explicit PathNoise(std::mt19937_64 g) : gen(std::move(g)) {}
    double z() { return normal(gen); }
    double u() { return uniform(gen); }
};

struct StepOutcome {
    bool stopped = false;
    bool at_hi = false;
    double t = 0.0;
    double x = 0.0;
};

/// One Euler step of length h from (t, x) inside (lo, hi); stops at an end
/// on a sign change or, with the bridge correction, by Bernoulli draw.
inline StepOutcome step_in_interval(PathNoise& noise, double t, double x, double h, double lo, double hi,
                                    double eta, bool bridge) {
    const double x1 = x + eta * std::sqrt(h) * noise.z();
    if (x1 <= lo) return {true, false, t + h * (x - lo) / (x - x1), lo};
    if (x1 >= hi) return {true, true, t + h * (hi - x) / (x1 - x), hi};
    if (bridge) {
        const double v = eta * eta * h;
        const double dl0 = x - lo, dl1 = x1 - lo, dh0 = hi - x, dh1 = hi - x1;
        const double al = 2.0 * dl0 * dl1 / v, ah = 2.0 * dh0 * dh1 / v;
        const double pl = al < 40.0 ? std::exp(-al) : 0.0;
        const double ph = ah < 40.0 ? std::exp(-ah) : 0.0;
        if (pl + ph > 0.0) {
            const double u = noise.u();
            if (u < pl) return {true, false, t + h * dl0 / (dl0 + dl1), lo};
            if (u < pl + ph) return {true, true, t + h * dh0 / (dh0 + dh1), hi};
        }
    }
    return {false, false, t + h, x1};
}

/// Step length from t respecting the next probe time; sets `lands` when the
/// step ends on probe `next`.
inline double next_step(double t, double dt, const std::vector<double>& probes, std::size_t next, bool& lands) {
    lands = false;
    if (next < probes.size()) {
        const double gap = probes[next] - t;
        if (gap <= dt * (1.0 + 1e-9)) {
            lands = true;
            return gap;
        }
    }
    return dt;
}

inline StoppedSampleSet make_sample_set(std::size_t n_paths, std::size_t n_stages, const PathConfig& config) {
    StoppedSampleSet s;
    s.n_paths = n_paths;
    s.n_stages = n_stages;
    s.sigma_.assign(n_paths * n_stages, std::numeric_limits<double>::infinity());
    s.xstop_.assign(n_paths * n_stages, std::numeric_limits<double>::quiet_NaN());
    s.censored.assign(n_paths, 0);
    s.probe_times = config.probe_times;
    std::sort(s.probe_times.begin(), s.probe_times.end());
    s.probe_times.erase(std::unique(s.probe_times.begin(), s.probe_times.end()), s.probe_times.end());
    for (double t : s.probe_times)
        if (!(t >= 0.0)) throw Error(ErrorCode::InvalidConfig, "probe times must be non-negative", "probes");
    s.probe_x_.assign(n_paths * s.probe_times.size(), std::numeric_limits<double>::quiet_NaN());
    s.seed = config.seed;
    s.dt = config.dt;
    s.bridge_correction = config.bridge_correction;
    return s;
}

inline void check_censoring(const StoppedSampleSet& s, double cap) {
    if (s.censored_fraction() > cap)
        throw Error(ErrorCode::CensoredExcess, "censored fraction " + std::to_string(s.censored_fraction()) +
                                                   " exceeds cap " + std::to_string(cap));
}

}  // namespace detail

/// Simulates dX = eta dW from mu_0 and stops sequentially at the barriers:
/// sigma_k = inf{t >= sigma_{k-1} : t >= tbar_k(X_t)}.
inline StoppedSampleSet simulate_sequential_stops(const ProbabilityMeasure& mu0, const DiffusionSpec& diffusion,
                                                  const std::vector<Barrier>& barriers, const PathConfig& config) {
    if (barriers.empty()) throw Error(ErrorCode::InvalidConfig, "need at least one barrier", "barriers");
    for (const Barrier& b : barriers)
        if (b.x() != barriers.front().x())
            throw Error(ErrorCode::GridMismatch, "barriers do not share x nodes");
    if (config.n_paths < 1) throw Error(ErrorCode::InvalidConfig, "n_paths must be at least 1", "paths.n_paths");
    if (!(config.dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive", "paths.dt");
    const std::size_t n = barriers.size(), N = config.n_paths;
    StoppedSampleSet out = detail::make_sample_set(N, n, config);
    out.x0 = stratified_starts(mu0, N);
    const std::vector<double>& probes = out.probe_times;
    const std::size_t P = probes.size();

    auto run_path = [&](std::size_t p) {
        detail::PathNoise noise(path_rng(config.seed, 0, p));
        double* sig = out.sigma_.data() + p * n;
        double* xs = out.xstop_.data() + p * n;
        double* px = out.probe_x_.data() + p * P;
        double t = 0.0, x = out.x0[p];
        std::size_t k = 0, next = 0;
        while (next < P && probes[next] <= 0.0) px[next++] = x;

        auto cascade = [&] {
            while (k < n && barriers[k].hit(t, x)) {
                sig[k] = t;
                xs[k] = x;
                ++k;
            }
        };
        cascade();
        FreeInterval fi;
        if (k < n) fi = barriers[k].free_interval(t, x);
        while (k < n) {
            bool lands = false;
            const double h = detail::next_step(t, config.dt, probes, next, lands);
            const double t1 = lands ? probes[next] : t + h;
            if (t1 > config.max_time) {
                out.censored[p] = 1;
                break;
            }
            const Barrier& bk = barriers[k];
            bool stopped = false;
            double st = 0.0, sx = 0.0;
            if (t1 >= fi.valid_until) {
                const double tx = bk.tbar_interp(x);
                if (t1 >= tx) {
                    stopped = true;
                    st = std::max(t, tx);
                    sx = x;
                } else {
                    fi = bk.free_interval(t1, x);
                }
            }
            if (!stopped) {
                const double lo = fi.lo.at(t1), hi = fi.hi.at(t1);
                const detail::StepOutcome o = detail::step_in_interval(
                    noise, t, x, h, lo, hi, diffusion.eta_unchecked(x), config.bridge_correction);
                if (o.stopped) {
                    if ((o.at_hi ? fi.hi : fi.lo).grid_end)
                        throw Error(ErrorCode::OutOfRange, "path left the grid without meeting the barrier");
                    stopped = true;
                    sx = o.x;
                    st = std::clamp(std::max(o.t, bk.tbar_interp(sx)), t, t1);
                } else {
                    t = t1;
                    x = o.x;
                    if (lands) px[next++] = x;
                }
            }
            if (stopped) {
                sig[k] = st;
                xs[k] = sx;
                ++k;
                t = st;
                x = sx;
                cascade();
                if (k < n) fi = barriers[k].free_interval(t, x);
            }
        }
        if (!out.censored[p])
            while (next < P) px[next++] = x;
    };
    detail::parallel_blocks(N, config.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) run_path(p);
    });
    detail::check_censoring(out, config.censor_cap);
    return out;
}

/// Interval-exit instruction: a path strictly inside (a, b) runs until it
/// leaves the interval; other paths are unaffected.
struct ExitInstruction {
    double a = 0.0;
    double b = 0.0;
    std::vector<double> from;  ///< locations inside (a, b) carrying mass when the exit is applied
};

/// Runs per-stage lists of interval exits; the stage-k stop is the state after
/// the k-th list.
inline StoppedSampleSet simulate_interval_exits(const ProbabilityMeasure& mu0, const DiffusionSpec& diffusion,
                                                const std::vector<std::vector<ExitInstruction>>& stages,
                                                const PathConfig& config) {
    if (stages.empty()) throw Error(ErrorCode::InvalidConfig, "need at least one stage", "stages");
    const std::size_t n = stages.size(), N = config.n_paths;
    StoppedSampleSet out = detail::make_sample_set(N, n, config);
    out.embedding = "interval-exits";
    out.x0 = stratified_starts(mu0, N);
    const std::vector<double>& probes = out.probe_times;
    const std::size_t P = probes.size();

    auto run_path = [&](std::size_t p) {
        detail::PathNoise noise(path_rng(config.seed, 1, p));
        double* px = out.probe_x_.data() + p * P;
        double t = 0.0, x = out.x0[p];
        std::size_t next = 0;
        while (next < P && probes[next] <= 0.0) px[next++] = x;
        for (std::size_t k = 0; k < n && !out.censored[p]; ++k) {
            for (const ExitInstruction& ins : stages[k]) {
                if (!(x > ins.a && x < ins.b)) continue;
                for (;;) {
                    bool lands = false;
                    const double h = detail::next_step(t, config.dt, probes, next, lands);
                    const double t1 = lands ? probes[next] : t + h;
                    if (t1 > config.max_time) {
                        out.censored[p] = 1;
                        break;
                    }
                    const detail::StepOutcome o = detail::step_in_interval(
                        noise, t, x, h, ins.a, ins.b, diffusion.eta_unchecked(x), config.bridge_correction);
                    if (o.stopped) {
                        t = std::clamp(o.t, t, t1);
                        x = o.x;
                        break;
                    }
                    t = t1;
                    x = o.x;
                    if (lands) px[next++] = x;
                }
                if (out.censored[p]) break;
            }
            if (out.censored[p]) break;
            out.sigma_[p * n + k] = t;
            out.xstop_[p * n + k] = x;
        }
        if (!out.censored[p])
            while (next < P) px[next++] = x;
    };
    detail::parallel_blocks(N, config.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) run_path(p);
    });
    detail::check_censoring(out, config.censor_cap);
    return out;
}

struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t count = 0;
};

inline MeanEstimate estimate_mean(const std::vector<double>& v) {
    MeanEstimate m;
    m.count = v.size();
    if (v.empty()) return m;
    double s = 0.0;
    for (double a : v) s += a;
    m.mean = s / static_cast<double>(v.size());
    if (v.size() > 1) {
        double q = 0.0;
        for (double a : v) q += (a - m.mean) * (a - m.mean);
        m.stderr_ = std::sqrt(q / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    return m;
}

/// sup_x |F_N - F| with right limits and midpoint values at every jump point.
inline double ks_distance(std::vector<double> samples, const ProbabilityMeasure& mu) {
    std::sort(samples.begin(), samples.end());
    const double N = static_cast<double>(samples.size());
    std::vector<double> pts;
    pts.reserve(samples.size() + mu.size());
    for (double s : samples)
        if (pts.empty() || pts.back() != s) pts.push_back(s);
    for (const Atom& a : mu.atoms()) pts.push_back(a.x);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto& atoms = mu.atoms();
    std::size_t is = 0, ia = 0;
    double Fn = 0.0, F = 0.0, d = 0.0;
    for (double z : pts) {
        double jn = 0.0, ja = 0.0;
        while (is < samples.size() && samples[is] == z) {
            jn += 1.0;
            ++is;
        }
        jn /= N;
        while (ia < atoms.size() && atoms[ia].x == z) ja += atoms[ia++].w;
        d = std::max(d, std::abs((Fn + 0.5 * jn) - (F + 0.5 * ja)));
        Fn += jn;
        F += ja;
        d = std::max(d, std::abs(Fn - F));
    }
    return d;
}

/// -mean |X - x| for sorted samples, via prefix sums.
class EmpiricalPotential {
public:
    explicit EmpiricalPotential(std::vector<double> samples) : s_(std::move(samples)) {
        std::sort(s_.begin(), s_.end());
        prefix_.resize(s_.size() + 1, 0.0);
        for (std::size_t i = 0; i < s_.size(); ++i) prefix_[i + 1] = prefix_[i] + s_[i];
    }

    double operator()(double x) const {
        const std::size_t j = static_cast<std::size_t>(std::lower_bound(s_.begin(), s_.end(), x) - s_.begin());
        const double n = static_cast<double>(s_.size());
        const double left = x * static_cast<double>(j) - prefix_[j];
        const double right = (prefix_.back() - prefix_[j]) - x * static_cast<double>(s_.size() - j);
        return -(left + right) / n;
    }

private:
    std::vector<double> s_;
    std::vector<double> prefix_;
};

struct StageEmbedding {
    std::size_t k = 0;
    double ks = 0.0;
    double ks_radius = 0.0;          ///< 95% Kolmogorov radius 1.36/sqrt(N)
    double potential_distance = 0.0;
    double potential_radius = 0.0;   ///< 3 x largest per-probe stderr
    MeanEstimate sigma;
    MeanEstimate abs_x;
    MeanEstimate x;
};

struct EmbeddingReport {
    std::size_t n_paths = 0;
    std::size_t n_censored = 0;
    std::uint64_t seed = 0;
    std::string rng;
    std::string start_sampling;
    std::vector<StageEmbedding> stages;
};

inline EmbeddingReport empirical_embedding_report(const StoppedSampleSet& s,
                                                  const std::vector<ProbabilityMeasure>& chain) {
    if (chain.size() < 2 || s.n_stages + 1 != chain.size())
        throw Error(ErrorCode::ChainMismatch, "sample stages do not match the chain length");
    if (s.censored_fraction() > 1e-3)
        throw Error(ErrorCode::CensoredExcess, "uncensored fraction below 99.9%");
    EmbeddingReport rep;
    rep.n_paths = s.n_paths;
    rep.n_censored = s.censored_count();
    rep.seed = s.seed;
    rep.rng = s.rng;
    rep.start_sampling = s.start_sampling;
    for (std::size_t k = 1; k <= s.n_stages; ++k) {
        std::vector<double> xk, sk, ak;
        for (std::size_t p = 0; p < s.n_paths; ++p) {
            if (s.censored[p]) continue;
            xk.push_back(s.xstop(p, k));
            sk.push_back(s.sigma(p, k));
            ak.push_back(std::abs(s.xstop(p, k)));
        }
        StageEmbedding st;
        st.k = k;
        st.ks = ks_distance(xk, chain[k]);
        st.ks_radius = 1.36 / std::sqrt(static_cast<double>(xk.size()));
        st.sigma = estimate_mean(sk);
        st.abs_x = estimate_mean(ak);
        st.x = estimate_mean(xk);
        const ProbabilityMeasure& mu = chain[k];
        std::vector<double> probe;
        for (const Atom& a : mu.atoms()) probe.push_back(a.x);
        const double lo = mu.min_location() - 1.0, hi = mu.max_location() + 1.0;
        for (int i = 0; i <= 100; ++i) probe.push_back(lo + (hi - lo) * i / 100.0);
        const EmpiricalPotential ep(xk);
        const double n = static_cast<double>(xk.size());
        for (double z : probe) {
            const double e = ep(z);
            st.potential_distance = std::max(st.potential_distance, std::abs(e - mu.potential(z)));
            double q = 0.0;
            for (double v : xk) q += (std::abs(v - z) + e) * (std::abs(v - z) + e);
            st.potential_radius = std::max(st.potential_radius, 3.0 * std::sqrt(q / (n - 1.0) / n));
        }
        rep.stages.push_back(st);
    }
    return rep;
}

struct IdentityEntry {
    std::size_t k = 0;
    double t = 0.0;
    double x = 0.0;
    double u = 0.0;        ///< solver value u^k(t, x)
    double mc = 0.0;       ///< -mean |X_{t ^ sigma_k} - x|
    double gap = 0.0;      ///< |u - mc|
    double stderr_ = 0.0;
};

struct IdentityReport {
    std::vector<IdentityEntry> entries;
    double max_gap = 0.0;
};

/// Compares u^k(t, x) with -E|X_{t ^ sigma_k} - x| at the probes for every k.
/// Probe times must be 0 or among the recorded sample probe times.
inline IdentityReport verify_value_identity(const StoppedSampleSet& s, const std::vector<ValueSurface>& surfaces,
                                            const std::vector<std::pair<double, double>>& probes) {
    if (surfaces.size() != s.n_stages + 1)
        throw Error(ErrorCode::ChainMismatch, "surface count does not match the sample stages");
    IdentityReport rep;
    const Grid& g = surfaces.front().grid();
    for (const auto& [t, x] : probes) {
        if (!(x >= g.x_min() && x <= g.x_max() && t >= 0.0 && t <= g.horizon()))
            throw Error(ErrorCode::ProbeOutsideGrid,
                        "probe (" + std::to_string(t) + ", " + std::to_string(x) + ") outside the grid", "probes");
        const auto j = s.probe_index(t);
        if (!j && t != 0.0)
            throw Error(ErrorCode::ProbeOutsideGrid, "probe time " + std::to_string(t) + " was not recorded", "probes");
        for (std::size_t k = 1; k <= s.n_stages; ++k) {
            std::vector<double> v;
            for (std::size_t p = 0; p < s.n_paths; ++p) {
                if (s.censored[p]) continue;
                const double xt = j ? s.stopped_at_probe(p, *j, k) : s.x0[p];
                v.push_back(std::abs(xt - x));
            }
            const MeanEstimate m = estimate_mean(v);
            IdentityEntry e;
            e.k = k;
            e.t = t;
            e.x = x;
            e.u = surfaces[k].value(t, x);
            e.mc = -m.mean;
            e.gap = std::abs(e.u - e.mc);
            e.stderr_ = m.stderr_;
            rep.max_gap = std::max(rep.max_gap, e.gap);
            rep.entries.push_back(e);
        }
    }
    return rep;
}

struct SymmetryReport {
    double a = 0.0, b = 0.0, x = 0.0, y = 0.0, t = 0.0;
    MeanEstimate from_x;  ///< E^x |X_{t ^ H} - y|
    MeanEstimate from_y;  ///< E^y |X_{t ^ H} - x|
    double difference = 0.0;
    double joint_stderr = 0.0;
    double z = 0.0;
};

/// Estimates E^x|X_{t^H} - y| and E^y|X_{t^H} - x| for H the exit time of
/// (a, b), with independent streams; steps are t / ceil(t / dt).
inline SymmetryReport symmetry_check(const DiffusionSpec& diffusion, double a, double b, double x, double y,
                                     double t, const PathConfig& config) {
    if (!(a < x && x < b && a < y && y < b))
        throw Error(ErrorCode::DomainViolation, "need a < x, y < b", "symmetry");
    if (!(t > 0.0)) throw Error(ErrorCode::DomainViolation, "need t > 0", "symmetry.t");
    if (a < diffusion.interval().lo || b > diffusion.interval().hi)
        throw Error(ErrorCode::DomainViolation, "box leaves the state interval", "symmetry");
    const std::size_t m = static_cast<std::size_t>(std::ceil(t / config.dt - 1e-9));
    const double h = t / static_cast<double>(m);
    auto side = [&](double start, double target, std::uint64_t stream) {
        std::vector<double> v(config.n_paths);
        detail::parallel_blocks(config.n_paths, config.threads, [&](std::size_t pb, std::size_t pe) {
            for (std::size_t p = pb; p < pe; ++p) {
                detail::PathNoise noise(path_rng(config.seed, stream, p));
                double s = 0.0, z = start;
                for (std::size_t i = 0; i < m; ++i) {
                    const double s1 = i + 1 == m ? t : s + h;
                    const detail::StepOutcome o = detail::step_in_interval(
                        noise, s, z, s1 - s, a, b, diffusion.eta_unchecked(z), config.bridge_correction);
                    z = o.x;
                    if (o.stopped) break;
                    s = s1;
                }
                v[p] = std::abs(z - target);
            }
        });
        return estimate_mean(v);
    };
    SymmetryReport rep{a, b, x, y, t, side(x, y, 2), side(y, x, 3), 0.0, 0.0, 0.0};
    rep.difference = rep.from_x.mean - rep.from_y.mean;
    rep.joint_stderr = std::hypot(rep.from_x.stderr_, rep.from_y.stderr_);
    rep.z = rep.joint_stderr > 0.0 ? rep.difference / rep.joint_stderr : 0.0;
    return rep;
}

struct RegularityProbe {
    double t = 0.0;
    double x = 0.0;
    double increase = 0.0;  ///< E[|X_{sigma_k} - x| - |X_s - x|], s = (t v sigma_{k-1}) ^ sigma_k
    double stderr_ = 0.0;
    bool failed = false;
};

struct RegularityReport {
    std::size_t k = 0;
    std::vector<RegularityProbe> probes;
    std::size_t skipped_in_barrier = 0;
    std::size_t skipped_low_power = 0;
    std::size_t failures = 0;
};

/// Local-time diagnostic: at probes (t, x) outside the barrier the expected
/// local time at x accumulated after t must be positive at 95% confidence.
/// Probes default to the recorded probe times crossed with up to 25 nodes
/// where tbar > 0; probes where fewer than 1% of paths are still running in
/// stage k are skipped.
inline RegularityReport check_regularity(const Barrier& barrier, const StoppedSampleSet& s, std::size_t k,
                                         std::vector<double> probe_xs = {}) {
    if (k < 1 || k > s.n_stages) throw Error(ErrorCode::ChainMismatch, "stage out of range");
    if (probe_xs.empty()) {
        std::vector<double> cand;
        for (std::size_t i = 0; i < barrier.size(); ++i)
            if (barrier.tbar()[i] > 0.0) cand.push_back(barrier.x()[i]);
        const std::size_t stride = std::max<std::size_t>(1, (cand.size() + 24) / 25);
        for (std::size_t i = 0; i < cand.size(); i += stride) probe_xs.push_back(cand[i]);
    }
    RegularityReport rep;
    rep.k = k;
    for (std::size_t j = 0; j < s.probe_times.size(); ++j) {
        const double t = s.probe_times[j];
        std::size_t alive = 0, used = 0;
        for (std::size_t p = 0; p < s.n_paths; ++p) {
            if (s.censored[p]) continue;
            ++used;
            if (s.sigma(p, k) > t) ++alive;
        }
        for (double x : probe_xs) {
            if (barrier.hit(t, x)) {
                ++rep.skipped_in_barrier;
                continue;
            }
            if (static_cast<double>(alive) < 0.01 * static_cast<double>(used)) {
                ++rep.skipped_low_power;
                continue;
            }
            std::vector<double> v;
            v.reserve(used);
            for (std::size_t p = 0; p < s.n_paths; ++p) {
                if (s.censored[p]) continue;
                const double sk = s.sigma(p, k), sp = s.sigma_or_zero(p, k - 1);
                double xs;
                if (sk <= t) xs = s.xstop(p, k);
                else if (sp >= t) xs = s.xstop_or_start(p, k - 1);
                else xs = s.probe_x(p, j);
                v.push_back(std::abs(s.xstop(p, k) - x) - std::abs(xs - x));
            }
            const MeanEstimate m = estimate_mean(v);
            RegularityProbe pr{t, x, m.mean, m.stderr_, false};
            pr.failed = !(m.mean > 1.645 * m.stderr_);
            rep.failures += pr.failed ? 1 : 0;
            rep.probes.push_back(pr);
        }
    }
    return rep;
}

}  // namespace rootlab
