#pragma once

#include "rootlab/barrier.hpp"
#include "rootlab/io.hpp"
#include "rootlab/mc_engine.hpp"
#include "rootlab/optimality.hpp"
#include "rootlab/ost_solver.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace rootlab {

enum ExitCode : int { kExitPass = 0, kExitCheckFailure = 1, kExitUsage = 2 };

struct RunOptions {
    std::string subcommand = "all";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
};

inline json to_json(const MeanEstimate& m) { return {{"mean", m.mean}, {"stderr", m.stderr_}, {"count", m.count}}; }

inline json error_json(const std::string& code, const std::string& message, const std::string& field) {
    return {{"error", code}, {"message", message}, {"field", field}};
}

/// Input validation errors map to exit 2; numerical failures during a run to exit 1.
inline int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::ProjectionDiverged:
    case ErrorCode::HorizonTooShort:
    case ErrorCode::CensoredExcess:
    case ErrorCode::MissingLambda:
    case ErrorCode::PeelingStalled: return kExitCheckFailure;
    default: return kExitUsage;
    }
}

/// Runs solve -> extract -> simulate -> verify -> certify -> compare as far
/// as the subcommand needs, writing CSV and JSON artifacts to the output dir.
class Pipeline {
public:
    Pipeline(RunConfig config, const RunOptions& opts) : cfg_(std::move(config)), opts_(opts) {
        if (opts.seed) cfg_.paths.seed = *opts.seed;
        if (opts.out) cfg_.output_dir = *opts.out;
        cfg_.paths.threads = resolve_threads(opts);
        hash_ = config_hash(cfg_.source);
        meta_ = {hash_, cfg_.paths.seed};
    }

    static unsigned resolve_threads(const RunOptions& opts) {
        if (opts.threads && *opts.threads > 0) return *opts.threads;
        if (const char* env = std::getenv("ROOT_LAB_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
        }
        return 1;
    }

    const RunConfig& config() const noexcept { return cfg_; }
    const std::string& hash() const noexcept { return hash_; }

    int run(const std::string& sub) {
        std::filesystem::create_directories(cfg_.output_dir);
        bool ok = true;
        if (sub == "solve") {
            ok = solve_stage();
        } else if (sub == "simulate") {
            solve_stage(false);
            ok = simulate_stage();
        } else if (sub == "verify") {
            solve_stage(false);
            simulate_stage(false);
            ok = verify_stage();
        } else if (sub == "certify") {
            solve_stage(false);
            simulate_stage(false);
            ok = certify_stage();
        } else if (sub == "compare") {
            solve_stage(false);
            simulate_stage(false);
            ok = compare_stage();
        } else if (sub == "all") {
            ok = solve_stage();
            ok = simulate_stage() && ok;
            ok = verify_stage() && ok;
            ok = certify_stage() && ok;
            ok = compare_stage() && ok;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown subcommand '" + sub + "'", "subcommand");
        }
        return ok ? kExitPass : kExitCheckFailure;
    }

    const SolveResult& solution() const { return *solved_; }
    const std::vector<Barrier>& barriers() const { return barriers_; }
    const StoppedSampleSet& samples() const { return *samples_; }

private:
    std::string path(const std::string& name) const { return (std::filesystem::path(cfg_.output_dir) / name).string(); }

    json header(const std::string& sub) const {
        char buf[32];
        const std::time_t now = std::time(nullptr);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        return {{"subcommand", sub}, {"config_hash", hash_}, {"seed", cfg_.paths.seed}, {"generated_at", buf},
                {"schema_version", kSchemaVersion}};
    }

    void write_json(const std::string& name, const json& j) const {
        std::ofstream out = detail::open_out(path(name));
        out << j.dump(2) << '\n';
    }

    static bool all_true(const json& checks) {
        for (const auto& [k, v] : checks.items())
            if (!v.get<bool>()) return false;
        return true;
    }

    bool solve_stage(bool emit = true) {
        if (!solved_) {
            const std::size_t nt = static_cast<std::size_t>(std::llround(
                (cfg_.horizon.adaptive ? seed_horizon(cfg_.chain, min_eta()) : cfg_.horizon.T) / cfg_.solver_dt));
            SolverConfig sc = cfg_.solver;
            sc.horizon = cfg_.horizon;
            solved_ = solve_chain(cfg_.chain, cfg_.diffusion, cfg_.nx, std::max<std::size_t>(nt, 2), sc);
            for (std::size_t k = 1; k < cfg_.chain.size(); ++k) {
                const PotentialDifference dU = potential_difference(cfg_.chain[k - 1], cfg_.chain[k], solved_->grid->x);
                barriers_.push_back(extract_barrier(solved_->surfaces[k], solved_->surfaces[k - 1], dU, cfg_.eps_b));
            }
            if (cfg_.paths.max_time <= 0.0) cfg_.paths.max_time = std::max(64.0, 4.0 * solved_->grid->horizon());
        }
        if (!emit) return true;
        const Grid& g = *solved_->grid;
        json surfaces = json::array();
        bool surf_ok = true;
        for (std::size_t k = 1; k < solved_->surfaces.size(); ++k) {
            const SurfaceCheckReport r = check_surface(solved_->surfaces[k], &solved_->surfaces[k - 1], cfg_.chain[k],
                                                       cfg_.chain[0], default_eps_c(g));
            surf_ok = surf_ok && r.passed;
            surfaces.push_back({{"stage", k}, {"eps_c", r.eps_c}, {"initial_error", r.initial_error},
                                {"monotone_violation", r.monotone_violation},
                                {"concavity_violation", r.concavity_violation},
                                {"lipschitz_violation", r.lipschitz_violation},
                                {"lower_violation", r.lower_violation}, {"upper_violation", r.upper_violation},
                                {"passed", r.passed}});
        }
        for (std::size_t k = 0; k < solved_->surfaces.size(); ++k)
            write_surface_csv(path("surface_" + std::to_string(k) + ".csv"), solved_->surfaces[k], meta_,
                              cfg_.surface_rows);
        json bars = json::array();
        for (const Barrier& b : barriers_) {
            write_barrier_csv(path("barrier_" + std::to_string(b.stage()) + ".csv"), b, meta_);
            std::size_t finite = 0, zero = 0;
            for (double t : b.tbar()) {
                finite += std::isfinite(t) ? 1 : 0;
                zero += t == 0.0 ? 1 : 0;
            }
            bars.push_back({{"stage", b.stage()}, {"finite_nodes", finite}, {"zero_nodes", zero}});
        }
        json checks = {{"surfaces", surf_ok}, {"tail", solved_->tail_error <= cfg_.thresholds.tail}};
        json rep = header("solve");
        rep["grid"] = {{"nx", g.nx()}, {"nt", g.nt()}, {"horizon", g.horizon()}, {"x_min", g.x_min()},
                       {"x_max", g.x_max()}, {"doublings", solved_->doublings}};
        rep["tail_error"] = solved_->tail_error;
        rep["surfaces"] = surfaces;
        rep["barriers"] = bars;
        rep["checks"] = checks;
        rep["passed"] = all_true(checks);
        write_json("solve_report.json", rep);
        return rep["passed"].get<bool>();
    }

    double min_eta() const {
        const Grid probe = build_grid(cfg_.chain, cfg_.diffusion, cfg_.nx, 2, 1.0);
        return validate_spec(cfg_.diffusion, probe.x_min(), probe.x_max()).min_eta;
    }

    bool simulate_stage(bool emit = true) {
        if (!samples_) samples_ = simulate_sequential_stops(cfg_.chain[0], cfg_.diffusion, barriers_, cfg_.paths);
        if (!emit) return true;
        write_samples_csv(path("samples.csv"), *samples_, meta_);
        json checks = {{"censoring", samples_->censored_fraction() <= cfg_.paths.censor_cap}};
        json rep = header("simulate");
        rep["n_paths"] = samples_->n_paths;
        rep["n_censored"] = samples_->censored_count();
        rep["dt"] = samples_->dt;
        rep["bridge_correction"] = samples_->bridge_correction;
        rep["rng"] = samples_->rng;
        rep["start_sampling"] = samples_->start_sampling;
        rep["checks"] = checks;
        rep["passed"] = all_true(checks);
        write_json("simulate_report.json", rep);
        return rep["passed"].get<bool>();
    }

    bool verify_stage() {
        const Thresholds& th = cfg_.thresholds;
        const EmbeddingReport er = empirical_embedding_report(*samples_, cfg_.chain);
        json checks;
        json stages = json::array();
        bool ks_ok = true;
        for (const StageEmbedding& st : er.stages) {
            ks_ok = ks_ok && st.ks <= th.ks;
            stages.push_back({{"k", st.k}, {"ks", st.ks}, {"ks_radius", st.ks_radius},
                              {"potential_distance", st.potential_distance}, {"potential_radius", st.potential_radius},
                              {"sigma", to_json(st.sigma)}, {"abs_x", to_json(st.abs_x)}, {"x", to_json(st.x)}});
        }
        checks["embedding_ks"] = ks_ok;

        const IdentityReport ir = verify_value_identity(*samples_, solved_->surfaces, cfg_.identity_probes);
        json ident = json::array();
        bool id_ok = true;
        for (const IdentityEntry& e : ir.entries) {
            const bool pass = e.gap <= th.identity_abs + th.identity_sigma * e.stderr_;
            id_ok = id_ok && pass;
            ident.push_back({{"k", e.k}, {"t", e.t}, {"x", e.x}, {"u", e.u}, {"mc", e.mc}, {"gap", e.gap},
                             {"stderr", e.stderr_}, {"passed", pass}});
        }
        checks["value_identity"] = id_ok;

        json mean_check = nullptr;
        if (const auto* c = std::get_if<ConstantEta>(&cfg_.diffusion.eta_spec())) {
            const MeanEstimate& ms = er.stages.back().sigma;
            const double expect = (cfg_.chain.back().variance() - cfg_.chain.front().variance()) / (c->c * c->c);
            const bool pass = std::abs(ms.mean - expect) <= th.mean_sigma * ms.stderr_;
            checks["mean_stopping_time"] = pass;
            mean_check = {{"mean", ms.mean}, {"stderr", ms.stderr_}, {"expected", expect}, {"passed", pass}};
        }

        json regs = json::array();
        for (std::size_t k = 1; k <= barriers_.size(); ++k) {
            const RegularityReport rr = check_regularity(barriers_[k - 1], *samples_, k);
            regs.push_back({{"k", k}, {"probes", rr.probes.size()}, {"failures", rr.failures},
                            {"skipped_in_barrier", rr.skipped_in_barrier}, {"skipped_low_power", rr.skipped_low_power}});
        }

        json sym = json::array();
        if (!cfg_.symmetry.empty()) {
            PathConfig pc = cfg_.paths;
            pc.n_paths = cfg_.symmetry_paths;
            std::size_t exceed = 0;
            for (const SymmetryBox& b : cfg_.symmetry) {
                const SymmetryReport s = symmetry_check(cfg_.diffusion, b.a, b.b, b.x, b.y, b.t, pc);
                const bool pass = std::abs(s.difference) <= th.symmetry_sigma * s.joint_stderr;
                exceed += pass ? 0 : 1;
                sym.push_back({{"a", b.a}, {"b", b.b}, {"x", b.x}, {"y", b.y}, {"t", b.t}, {"from_x", to_json(s.from_x)},
                               {"from_y", to_json(s.from_y)}, {"difference", s.difference},
                               {"joint_stderr", s.joint_stderr}, {"z", s.z}, {"passed", pass}});
            }
            checks["symmetry"] = exceed <= th.symmetry_allowance;
        }

        json rep = header("verify");
        rep["n_paths"] = er.n_paths;
        rep["n_censored"] = er.n_censored;
        rep["rng"] = er.rng;
        rep["start_sampling"] = er.start_sampling;
        rep["embedding"] = stages;
        rep["value_identity"] = ident;
        rep["mean_stopping_time"] = mean_check;
        rep["regularity"] = regs;
        rep["symmetry"] = sym;
        rep["checks"] = checks;
        rep["passed"] = all_true(checks);
        write_json("verify_report.json", rep);
        return rep["passed"].get<bool>();
    }

    json certificate_json(const CertificateReport& c) const {
        return {{"n_paths", c.n_paths}, {"eps_cert", c.eps_cert}, {"violation_fraction", c.violation_fraction},
                {"equality_fraction", c.equality_fraction}, {"mean_gap", c.mean_gap},
                {"median_abs_gap", c.median_abs_gap}, {"max_abs_gap", c.max_abs_gap}, {"q001", c.q001},
                {"q01", c.q01}, {"q50", c.q50}, {"q99", c.q99}};
    }

    bool certify_stage() {
        json costs = json::array();
        bool ok = true;
        for (const CostSpec& f : cfg_.costs) {
            json entry = {{"cost", cost_to_json(f)}};
            for (const auto& [label, g] : {std::pair<const char*, CostSpec>{"raw", f}, {"normalized", f.normalized()}}) {
                const CertificateBundle cb = compute_phi(barriers_, cfg_.diffusion, g, solved_->grid, &*samples_);
                const BundleCheckReport br = check_bundle(cb, g);
                const CertificateReport cr = pathwise_certificate_check(*samples_, cb, g);
                const bool pass = cr.violation_fraction <= cfg_.thresholds.cert_violation;
                ok = ok && pass;
                entry[label] = {{"bundle", {{"eps_cert", br.eps_cert}, {"terminal_error", br.terminal_error},
                                            {"ordering_violation", br.ordering_violation},
                                            {"barrier_equality_error", br.barrier_equality_error},
                                            {"h_inequality_violation", br.h_inequality_violation},
                                            {"h_equality_error", br.h_equality_error}, {"passed", br.passed}}},
                                {"root_paths", certificate_json(cr)},
                                {"passed", pass}};
            }
            costs.push_back(entry);
        }
        json rep = header("certify");
        rep["costs"] = costs;
        rep["checks"] = {{"certificate", ok}};
        rep["passed"] = ok;
        write_json("certificate_report.json", rep);
        return ok;
    }

    bool compare_stage() {
        std::vector<std::vector<ExitInstruction>> stages;
        json instr = json::array();
        for (std::size_t k = 1; k < cfg_.chain.size(); ++k) {
            stages.push_back(chacon_walsh_embedding(cfg_.chain[k - 1], cfg_.chain[k]));
            json st = json::array();
            for (const ExitInstruction& e : stages.back()) st.push_back({{"a", e.a}, {"b", e.b}, {"from", e.from}});
            instr.push_back(st);
        }
        const StoppedSampleSet cmp = simulate_interval_exits(cfg_.chain[0], cfg_.diffusion, stages, cfg_.paths);
        write_samples_csv(path("comparator_samples.csv"), cmp, meta_);
        const EmbeddingReport er = empirical_embedding_report(cmp, cfg_.chain);
        bool ks_ok = true;
        for (const StageEmbedding& st : er.stages) ks_ok = ks_ok && st.ks <= cfg_.thresholds.ks;

        json costs = json::array();
        bool not_worse = true, cert_ok = true;
        for (const CostSpec& f : cfg_.costs) {
            const ComparisonReport c = expected_cost_comparison(*samples_, cmp, f);
            not_worse = not_worse && c.root_not_worse;
            const CertificateBundle cb = compute_phi(barriers_, cfg_.diffusion, f, solved_->grid);
            const CertificateReport cr = pathwise_certificate_check(cmp, cb, f);
            const bool pass = cr.violation_fraction <= cfg_.thresholds.cert_violation;
            cert_ok = cert_ok && pass;
            costs.push_back({{"cost", cost_to_json(f)}, {"root", to_json(c.root)}, {"comparator", to_json(c.comparator)},
                             {"difference", c.difference}, {"joint_stderr", c.joint_stderr}, {"z", c.z},
                             {"root_not_worse", c.root_not_worse}, {"strictly_better", c.strictly_better},
                             {"equal_within_noise", c.equal_within_noise},
                             {"comparator_certificate", certificate_json(cr)}});
        }
        json checks = {{"comparator_embedding_ks", ks_ok}, {"root_not_worse", not_worse},
                       {"comparator_certificate", cert_ok}};
        json rep = header("compare");
        rep["instructions"] = instr;
        rep["costs"] = costs;
        rep["checks"] = checks;
        rep["passed"] = all_true(checks);
        write_json("compare_report.json", rep);
        return rep["passed"].get<bool>();
    }

    RunConfig cfg_;
    RunOptions opts_;
    std::string hash_;
    CsvMeta meta_;
    std::optional<SolveResult> solved_;
    std::vector<Barrier> barriers_;
    std::optional<StoppedSampleSet> samples_;
};

/// Loads the config and runs one subcommand. Errors go to stderr and to
/// error.json in the output directory.
inline int run(const RunOptions& opts, std::ostream& err = std::cerr) {
    std::string out_dir = opts.out.value_or("out");
    auto report = [&](const json& e, int code) {
        err << e.dump() << '\n';
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (!ec) {
            std::ofstream f((std::filesystem::path(out_dir) / "error.json").string());
            if (f) f << e.dump(2) << '\n';
        }
        return code;
    };
    try {
        RunConfig cfg = load_config(opts.config_path);
        if (!opts.out) out_dir = cfg.output_dir;
        Pipeline p(std::move(cfg), opts);
        return p.run(opts.subcommand);
    } catch (const Error& e) {
        return report(error_json(std::string(to_string(e.code())), e.what(), e.field()), exit_code_for(e.code()));
    } catch (const std::exception& e) {
        return report(error_json("Internal", e.what(), ""), kExitUsage);
    }
}

}  // namespace rootlab
