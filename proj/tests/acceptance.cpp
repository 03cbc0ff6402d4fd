// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "rootlab/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rootlab;

namespace {

struct Case {
    std::string name;
    std::vector<ProbabilityMeasure> chain;
    std::shared_ptr<SolveResult> solved;
    std::vector<Barrier> barriers;
    std::vector<PotentialDifference> dU;
    std::shared_ptr<StoppedSampleSet> samples;
};

int failures = 0;

void report(int id, bool pass, const std::string& what) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const DiffusionSpec kBM = DiffusionSpec::brownian();

SolveResult solve(const std::vector<ProbabilityMeasure>& chain, std::size_t nx, double dt) {
    SolverConfig c;
    c.horizon.adaptive = true;
    const auto nt = static_cast<std::size_t>(std::llround(seed_horizon(chain, 1.0) / dt));
    return solve_chain(chain, kBM, nx, nt, c);
}

std::vector<Barrier> barriers_of(const SolveResult& r, const std::vector<ProbabilityMeasure>& chain,
                                 std::vector<PotentialDifference>* dus = nullptr) {
    std::vector<Barrier> out;
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const PotentialDifference dU = potential_difference(chain[k - 1], chain[k], r.grid->x);
        out.push_back(extract_barrier(r.surfaces[k], r.surfaces[k - 1], dU));
        if (dus) dus->push_back(dU);
    }
    return out;
}

PathConfig root_paths(std::size_t n, double dt, double horizon, std::uint64_t seed) {
    PathConfig pc;
    pc.n_paths = n;
    pc.dt = dt;
    pc.seed = seed;
    pc.max_time = std::max(64.0, 4.0 * horizon);
    for (const auto& [t, x] : default_identity_probes()) pc.probe_times.push_back(t);
    std::sort(pc.probe_times.begin(), pc.probe_times.end());
    pc.probe_times.erase(std::unique(pc.probe_times.begin(), pc.probe_times.end()), pc.probe_times.end());
    return pc;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    const ProbabilityMeasure d0;
    const ProbabilityMeasure two({{-1.0, 0.5}, {1.0, 0.5}});
    const ProbabilityMeasure three({{-2.0, 0.25}, {0.0, 0.5}, {2.0, 0.25}});
    const ProbabilityMeasure two2({{-2.0, 0.5}, {2.0, 0.5}});
    std::vector<Case> cases{{"two-point", {d0, two}, {}, {}, {}, {}},
                            {"three-atom", {d0, three}, {}, {}, {}, {}},
                            {"chain", {d0, two, two2}, {}, {}, {}, {}}};

    std::uint64_t seed = 20240601;
    for (Case& c : cases) {
        const auto t0 = std::chrono::steady_clock::now();
        c.solved = std::make_shared<SolveResult>(solve(c.chain, 401, 1e-3));
        c.barriers = barriers_of(*c.solved, c.chain, &c.dU);
        c.samples = std::make_shared<StoppedSampleSet>(
            simulate_sequential_stops(c.chain[0], kBM, c.barriers, root_paths(100000, 1e-4, c.solved->grid->horizon(), seed++)));
        std::printf("# %s: T=%g, %zu censored, %.0fs\n", c.name.c_str(), c.solved->grid->horizon(),
                    c.samples->censored_count(), elapsed(t0));
    }

    {
        bool ok = true;
        std::string d;
        for (const Case& c : cases) {
            const EmbeddingReport er = empirical_embedding_report(*c.samples, c.chain);
            for (const auto& st : er.stages) {
                ok = ok && st.ks <= 0.015;
                d += fmt("%s k=%zu KS=%.4f; ", c.name.c_str(), st.k, st.ks);
            }
        }
        report(1, ok, "embedding KS <= 0.015: " + d);
    }

    {
        bool ok = true;
        double worst = 0.0;
        std::size_t n = 0;
        for (const Case& c : cases) {
            const IdentityReport ir = verify_value_identity(*c.samples, c.solved->surfaces, default_identity_probes());
            for (const IdentityEntry& e : ir.entries) {
                const double allowed = 0.01 + 3.0 * e.stderr_;
                ok = ok && e.gap <= allowed;
                worst = std::max(worst, e.gap / allowed);
                ++n;
            }
        }
        report(2, ok, fmt("value identity on %zu probes, worst gap / allowance = %.3f", n, worst));
    }

    {
        bool ok = true;
        std::string d;
        for (const Case& c : cases) {
            const MeanEstimate m = estimate_mean([&] {
                std::vector<double> v(c.samples->n_paths);
                for (std::size_t p = 0; p < v.size(); ++p) v[p] = c.samples->sigma(p, c.samples->n_stages);
                return v;
            }());
            const double expect = c.chain.back().variance() - c.chain.front().variance();
            const bool pass = std::abs(m.mean - expect) <= 3.0 * m.stderr_;
            ok = ok && pass;
            d += fmt("%s %.4f+-%.4f vs %.0f; ", c.name.c_str(), m.mean, m.stderr_, expect);
        }
        report(3, ok, "mean sigma_n within 3 stderr of the variance gap: " + d);
    }

    {
        bool ok = true;
        double tail = 0.0, worst = 0.0;
        for (const Case& c : cases) {
            const auto& s = c.solved->surfaces;
            const double eps = default_eps_c(*c.solved->grid);
            for (std::size_t k = 0; k < s.size(); ++k) {
                const SurfaceCheckReport r = check_surface(s[k], k ? &s[k - 1] : nullptr, c.chain[k], c.chain[0], eps);
                ok = ok && r.passed;
                worst = std::max({worst, r.monotone_violation, r.concavity_violation, r.lipschitz_violation,
                                  r.lower_violation, r.upper_violation});
            }
            tail = std::max(tail, c.solved->tail_error);
        }
        ok = ok && tail <= 1e-3;
        report(4, ok, fmt("surface sweeps (worst violation %.2e, eps_c = 1e-6 + 2dx), max tail error %.2e", worst, tail));
    }

    {
        bool zero_ok = true, two_ok = true, three_ok = true;
        for (const Case& c : cases)
            for (std::size_t k = 0; k < c.barriers.size(); ++k) {
                const Barrier& b = c.barriers[k];
                for (std::size_t i = 0; i < b.size(); ++i) {
                    const bool w0 = std::abs(c.dU[k].w[i]) <= kDefaultEpsB;
                    zero_ok = zero_ok && (w0 == (b.tbar()[i] == 0.0));
                }
            }
        const Barrier& b2 = cases[0].barriers[0];
        for (std::size_t i = 0; i < b2.size(); ++i)
            two_ok = two_ok && ((std::abs(b2.x()[i]) >= 1.0) ? b2.tbar()[i] == 0.0 : std::isinf(b2.tbar()[i]));
        const Barrier& b3 = cases[1].barriers[0];
        std::size_t rays = 0;
        for (std::size_t i = 0; i < b3.size(); ++i) {
            const double x = b3.x()[i], t = b3.tbar()[i];
            if (x > -2.0 && x < 2.0 && std::isfinite(t)) {
                ++rays;
                three_ok = three_ok && x == 0.0 && t > 0.0;
            }
        }
        three_ok = three_ok && rays == 1;
        report(5, zero_ok && two_ok && three_ok,
               fmt("tbar = 0 iff w = 0: %s; two-point barrier {|x| >= 1}: %s; three-atom interior rays at atoms only "
                   "(%zu ray, tbar(0) = %.3f): %s",
                   zero_ok ? "yes" : "no", two_ok ? "yes" : "no", rays, b3.tbar_interp(0.0), three_ok ? "yes" : "no"));
    }

    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::string d;
        bool ok = true;
        const DiffusionSpec table(TableEta{{-1.0, 1.0}, {1.0, 2.0}});
        for (int type = 0; type < 2; ++type) {
            const DiffusionSpec& eta = type == 0 ? kBM : table;
            std::size_t exceed = 0;
            double zmax = 0.0;
            for (int i = 0; i < 10; ++i) {
                const double a = -0.5 - 1.5 * u(rng), b = 0.5 + 1.5 * u(rng);
                const double x = a + (b - a) * (0.05 + 0.9 * u(rng)), y = a + (b - a) * (0.05 + 0.9 * u(rng));
                const double t = 0.2 + 0.8 * u(rng);
                PathConfig pc;
                pc.n_paths = 1000000;
                pc.seed = 900 + 10 * type + i;
                pc.dt = type == 0 ? t / 16.0 : 2e-3;
                const SymmetryReport s = symmetry_check(eta, a, b, x, y, t, pc);
                exceed += std::abs(s.difference) > 3.0 * s.joint_stderr ? 1 : 0;
                zmax = std::max(zmax, std::abs(s.z));
            }
            ok = ok && exceed <= 1;
            d += fmt("%s eta: %zu/10 beyond 3 sigma (max |z| %.2f); ", type == 0 ? "constant" : "table", exceed, zmax);
        }
        report(6, ok, "expectation symmetry at 1e6 paths per side: " + d + fmt("%.0fs", elapsed(t0)));
    }

    const Case& c3 = cases[1];
    const CostSpec lin = CostSpec::linear(2.0), one = CostSpec::constant(1.0);
    const StoppedSampleSet cmp = [&] {
        PathConfig pc = root_paths(100000, 1e-4, c3.solved->grid->horizon(), 20240611);
        return simulate_interval_exits(d0, kBM, {chacon_walsh_embedding(d0, three)}, pc);
    }();

    {
        bool ok = true;
        std::string d;
        for (const Case* c : {&cases[1], &cases[2]}) {
            const CertificateBundle cb = compute_phi(c->barriers, kBM, lin, c->solved->grid, c->samples.get());
            const CertificateReport r = pathwise_certificate_check(*c->samples, cb, lin);
            ok = ok && r.violation_fraction <= 1e-3;
            d += fmt("%s root violations %.5f (median |gap| %.2e); ", c->name.c_str(), r.violation_fraction,
                     r.median_abs_gap);
            if (c == &cases[1]) {
                const CertificateReport rc = pathwise_certificate_check(cmp, cb, lin);
                ok = ok && rc.violation_fraction <= 1e-3;
                d += fmt("comparator violations %.5f; ", rc.violation_fraction);
            }
        }
        std::vector<double> med;
        for (int l = 0; l < 3; ++l) {
            const std::size_t nx = 200 * (1u << l) + 1;
            const SolveResult r = solve(c3.chain, nx, 4e-3 / (1 << l));
            const std::vector<Barrier> b = barriers_of(r, c3.chain);
            PathConfig pc = root_paths(20000, 4e-4 / (1 << l), r.grid->horizon(), 31);
            pc.probe_times.clear();
            const StoppedSampleSet s = simulate_sequential_stops(d0, kBM, b, pc);
            const CertificateBundle cb = compute_phi(b, kBM, lin, r.grid, &s);
            const CertificateReport cr = pathwise_certificate_check(s, cb, lin);
            ok = ok && cr.violation_fraction <= 1e-3;
            med.push_back(cr.median_abs_gap);
        }
        const bool dec = med[1] < med[0] && med[2] < med[1];
        ok = ok && dec;
        report(7, ok, d + fmt("ladder median |gap| %.2e > %.2e > %.2e: %s", med[0], med[1], med[2], dec ? "yes" : "no"));
    }

    {
        const ComparisonReport a = expected_cost_comparison(*c3.samples, cmp, lin);
        const ComparisonReport b = expected_cost_comparison(*c3.samples, cmp, one);
        report(8, a.strictly_better && b.equal_within_noise,
               fmt("f = 2t: root %.4f vs comparator %.4f (z = %.2f); f = 1: %.4f vs %.4f (z = %.2f)", a.root.mean,
                   a.comparator.mean, a.z, b.root.mean, b.comparator.mean, b.z));
    }

    {
        namespace fs = std::filesystem;
        const fs::path work = fs::temp_directory_path() / "rootlab_acceptance";
        fs::remove_all(work);
        std::vector<std::string> files;
        for (const auto& [tag, threads] : std::vector<std::pair<std::string, unsigned>>{{"a", 1}, {"b", 1}, {"c", 2}}) {
            RunOptions o;
            o.out = (work / tag).string();
            o.threads = threads;
            RunConfig cfg = load_config(std::string(ROOTLAB_CONFIGS) + "/smoke.json");
            Pipeline p(std::move(cfg), o);
            p.run("simulate");
            files.push_back(slurp(work / tag / "samples.csv"));
        }
        const bool ok = files[0].size() > 0 && files[0] == files[1] && files[0] == files[2];
        report(9, ok, fmt("samples.csv (%zu bytes) byte-identical across two runs and across thread counts", files[0].size()));
    }

    {
        SolverConfig sc;
        sc.horizon.T = 8.0;
        std::vector<SolveResult> rs;
        for (int l = 0; l < 3; ++l)
            rs.push_back(solve_chain(c3.chain, kBM, 200 * (1u << l) + 1, 2000u << l, sc));
        double d[2];
        for (int l = 0; l < 2; ++l) {
            const ValueSurface& a = rs[l].surfaces[1];
            const ValueSurface& b = rs[l + 1].surfaces[1];
            d[l] = 0.0;
            for (std::size_t m = 0; m < a.grid().nt(); ++m)
                for (std::size_t i = 0; i < a.grid().nx(); ++i)
                    d[l] = std::max(d[l], std::abs(a.at(m, i) - b.at(2 * m, 2 * i)));
        }
        const double order = std::log2(d[0] / d[1]);
        report(10, order >= 0.8,
               fmt("sup change %.3e then %.3e, ratio %.3f, empirical order %.2f (needs >= 0.8)", d[0], d[1], d[1] / d[0],
                   order));
    }

    std::printf("# %d failing criteria, %.0fs total\n", failures, elapsed(start));
    return failures == 0 ? 0 : 1;
}
