#pragma once

#include "rootlab/barrier.hpp"
#include "rootlab/diffusion.hpp"
#include "rootlab/error.hpp"
#include "rootlab/mc_engine.hpp"
#include "rootlab/measures.hpp"
#include "rootlab/optimality.hpp"
#include "rootlab/ost_solver.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rootlab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct SymmetryBox {
    double a = 0.0, b = 0.0, x = 0.0, y = 0.0, t = 0.0;
};

struct Thresholds {
    double ks = 0.015;
    double identity_abs = 0.01;
    double identity_sigma = 3.0;
    double mean_sigma = 3.0;
    double cert_violation = 1e-3;
    double symmetry_sigma = 3.0;
    std::size_t symmetry_allowance = 1;
    double tail = 1e-3;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::vector<ProbabilityMeasure> chain;
    DiffusionSpec diffusion = DiffusionSpec::brownian();
    std::size_t nx = 401;
    double solver_dt = 1e-3;
    HorizonRule horizon{true, 8.0, 1e-3, 8};
    SolverConfig solver{};
    double eps_b = kDefaultEpsB;
    std::size_t surface_rows = 201;  ///< time rows written per surface CSV
    PathConfig paths{};
    std::vector<CostSpec> costs{CostSpec::linear(2.0), CostSpec::constant(1.0)};
    std::vector<std::pair<double, double>> identity_probes;
    std::vector<SymmetryBox> symmetry;
    std::size_t symmetry_paths = 100000;
    Thresholds thresholds{};
    std::string output_dir = "out";
    json source;  ///< parsed document, for hashing
};

namespace detail {

inline Error config_error(const std::string& field, const std::string& msg) {
    return Error(ErrorCode::InvalidConfig, msg, field);
}

inline const json& require(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw config_error(path + "." + key, "missing field");
    return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw config_error(path, "expected a number");
    return j.get<double>();
}

inline double number_or(const json& j, const char* key, const std::string& path, double def) {
    if (!j.is_object() || !j.contains(key)) return def;
    return as_number(j.at(key), path + "." + key);
}

inline std::size_t count_or(const json& j, const char* key, const std::string& path, std::size_t def) {
    if (!j.is_object() || !j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw config_error(path + "." + key, "expected a non-negative integer");
    return v.get<std::size_t>();
}

inline bool bool_or(const json& j, const char* key, const std::string& path, bool def) {
    if (!j.is_object() || !j.contains(key)) return def;
    if (!j.at(key).is_boolean()) throw config_error(path + "." + key, "expected a boolean");
    return j.at(key).get<bool>();
}

inline std::vector<double> number_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw config_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

/// null stands for the infinite end.
inline double extended(const json& j, const std::string& path, double inf) {
    if (j.is_null()) return inf;
    return as_number(j, path);
}

template <class F>
auto rethrow_with(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (!e.field().empty() && e.field().rfind(field, 0) == 0) throw;
        throw Error(e.code(), e.what(), e.field().empty() ? field : field + "." + e.field());
    }
}

}  // namespace detail

/// Sorts, merges and renormalises raw atoms whose weights sum to 1 within 1e-9.
inline ProbabilityMeasure normalized_measure(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    std::vector<Atom> merged;
    double total = 0.0;
    for (const Atom& a : atoms) {
        if (!std::isfinite(a.x) || !(a.w > 0.0) || !std::isfinite(a.w))
            throw Error(ErrorCode::InvalidMeasure, "atoms need finite locations and positive weights");
        total += a.w;
        if (!merged.empty() && merged.back().x == a.x) merged.back().w += a.w;
        else merged.push_back(a);
    }
    if (merged.empty()) throw Error(ErrorCode::InvalidMeasure, "measure has no atoms");
    if (std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidMeasure, "weights sum to " + std::to_string(total));
    for (Atom& a : merged) a.w /= total;
    return ProbabilityMeasure(std::move(merged));
}

/// {"atoms": [[x, w], ...]} | {"samples": [...], "n_atoms": m} |
/// {"density": {"xs": [...], "ps": [...]}, "n_atoms": m}
/// Atom lists must be centred; samples and densities are centred on ingestion.
inline ProbabilityMeasure parse_measure(const json& j, const std::string& path) {
    if (!j.is_object()) throw detail::config_error(path, "measure must be an object");
    return detail::rethrow_with(path, [&]() -> ProbabilityMeasure {
        if (j.contains("atoms")) {
            const json& a = j.at("atoms");
            if (!a.is_array() || a.empty()) throw detail::config_error(path + ".atoms", "expected [[x, w], ...]");
            std::vector<Atom> atoms;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const std::string p = path + ".atoms[" + std::to_string(i) + "]";
                if (!a[i].is_array() || a[i].size() != 2) throw detail::config_error(p, "expected [x, w]");
                atoms.push_back({detail::as_number(a[i][0], p), detail::as_number(a[i][1], p)});
            }
            return normalized_measure(std::move(atoms));
        }
        const std::size_t m = detail::count_or(j, "n_atoms", path, 16);
        if (j.contains("samples")) {
            const std::vector<double> s = detail::number_array(j.at("samples"), path + ".samples");
            return atomize_samples(s, m).measure;
        }
        if (j.contains("density")) {
            const json& d = j.at("density");
            const auto xs = detail::number_array(detail::require(d, "xs", path + ".density"), path + ".density.xs");
            const auto ps = detail::number_array(detail::require(d, "ps", path + ".density"), path + ".density.ps");
            return atomize_density(xs, ps, m).measure;
        }
        throw detail::config_error(path, "measure needs one of atoms, samples, density");
    });
}

/// {"eta": {"constant": c} | {"table": [[x, eta], ...]} |
///          {"affine": {"a", "b", "floor", "center"}},
///  "interval": [lo | null, hi | null], "c_eta": C}
inline DiffusionSpec parse_diffusion(const json& j, const std::string& path) {
    if (!j.is_object()) throw detail::config_error(path, "diffusion must be an object");
    return detail::rethrow_with(path, [&]() -> DiffusionSpec {
        EtaSpec eta = ConstantEta{1.0};
        if (j.contains("eta")) {
            const json& e = j.at("eta");
            const std::string p = path + ".eta";
            if (e.is_number()) {
                eta = ConstantEta{e.get<double>()};
            } else if (e.is_object() && e.contains("constant")) {
                eta = ConstantEta{detail::as_number(e.at("constant"), p + ".constant")};
            } else if (e.is_object() && e.contains("table")) {
                const json& t = e.at("table");
                if (!t.is_array() || t.empty()) throw detail::config_error(p + ".table", "expected [[x, eta], ...]");
                TableEta te;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    const std::string q = p + ".table[" + std::to_string(i) + "]";
                    if (!t[i].is_array() || t[i].size() != 2) throw detail::config_error(q, "expected [x, eta]");
                    te.xs.push_back(detail::as_number(t[i][0], q));
                    te.etas.push_back(detail::as_number(t[i][1], q));
                }
                eta = te;
            } else if (e.is_object() && e.contains("affine")) {
                const json& a = e.at("affine");
                const std::string q = p + ".affine";
                eta = AffineEta{detail::number_or(a, "a", q, 1.0), detail::number_or(a, "b", q, 0.0),
                                detail::number_or(a, "floor", q, 1e-3), detail::number_or(a, "center", q, 0.0)};
            } else {
                throw detail::config_error(p, "eta needs one of constant, table, affine");
            }
        }
        Interval iv;
        if (j.contains("interval")) {
            const json& i = j.at("interval");
            if (!i.is_array() || i.size() != 2) throw detail::config_error(path + ".interval", "expected [lo, hi]");
            iv.lo = detail::extended(i[0], path + ".interval[0]", -std::numeric_limits<double>::infinity());
            iv.hi = detail::extended(i[1], path + ".interval[1]", std::numeric_limits<double>::infinity());
        }
        std::optional<double> c;
        if (j.contains("c_eta")) c = detail::as_number(j.at("c_eta"), path + ".c_eta");
        DiffusionSpec spec(std::move(eta), iv, c);
        double lo = -1.0, hi = 1.0;
        if (const auto* t = std::get_if<TableEta>(&spec.eta_spec())) {
            lo = t->xs.front();
            hi = t->xs.back();
        }
        const ValidationReport vr = validate_spec(spec, std::max(lo, iv.lo), std::min(hi, iv.hi), 2001);
        if (!vr.positive) throw Error(ErrorCode::InvalidDiffusion, "eta must be positive", "eta");
        return spec;
    });
}

/// {"kind": "constant", "c"} | {"kind": "linear", "scale"} |
/// {"kind": "power", "p", "scale"} | {"kind": "table", "ts", "fs"}
inline CostSpec parse_cost(const json& j, const std::string& path) {
    if (!j.is_object()) throw detail::config_error(path, "cost must be an object");
    if (!j.contains("kind") || !j.at("kind").is_string()) throw detail::config_error(path + ".kind", "missing cost kind");
    const std::string kind = j.at("kind").get<std::string>();
    return detail::rethrow_with(path, [&]() -> CostSpec {
        if (kind == "constant") return CostSpec::constant(detail::number_or(j, "c", path, 1.0));
        if (kind == "linear") return CostSpec::linear(detail::number_or(j, "scale", path, 1.0));
        if (kind == "power")
            return CostSpec::power(detail::as_number(detail::require(j, "p", path), path + ".p"),
                                   detail::number_or(j, "scale", path, 1.0));
        if (kind == "table")
            return CostSpec::table(detail::number_array(detail::require(j, "ts", path), path + ".ts"),
                                   detail::number_array(detail::require(j, "fs", path), path + ".fs"));
        throw detail::config_error(path + ".kind", "unknown cost kind '" + kind + "'");
    });
}

inline json cost_to_json(const CostSpec& c) {
    switch (c.kind()) {
    case CostSpec::Kind::Constant: return {{"kind", "constant"}, {"c", c.scale()}};
    case CostSpec::Kind::Linear: return {{"kind", "linear"}, {"scale", c.scale()}};
    case CostSpec::Kind::Power: return {{"kind", "power"}, {"p", c.exponent()}, {"scale", c.scale()}};
    case CostSpec::Kind::Table: break;
    }
    return {{"kind", "table"}, {"ts", c.ts()}, {"fs", c.fs()}};
}

inline std::vector<std::pair<double, double>> default_identity_probes() {
    std::vector<std::pair<double, double>> out;
    for (double t : {0.1, 0.5, 1.0, 2.0, 4.0})
        for (double x : {-1.5, -0.5, 0.0, 0.5, 1.5}) out.emplace_back(t, x);
    return out;
}

inline RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw detail::config_error("$", "config must be a JSON object");
    RunConfig c;
    c.source = j;
    if (!j.contains("schema_version")) throw detail::config_error("schema_version", "missing field");
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion)
        throw detail::config_error("schema_version", "unsupported schema version");

    const json& chain = detail::require(j, "chain", "$");
    if (!chain.is_array() || chain.size() < 2)
        throw detail::config_error("chain", "chain needs at least two measures");
    for (std::size_t k = 0; k < chain.size(); ++k)
        c.chain.push_back(parse_measure(chain[k], "chain[" + std::to_string(k) + "]"));
    detail::rethrow_with("chain", [&] {
        check_chain_order(c.chain);
        return 0;
    });

    if (j.contains("diffusion")) c.diffusion = parse_diffusion(j.at("diffusion"), "diffusion");

    const json g = j.value("grid", json::object());
    c.nx = detail::count_or(g, "nx", "grid", c.nx);
    c.solver_dt = detail::number_or(g, "dt", "grid", c.solver_dt);
    if (!(c.solver_dt > 0.0)) throw detail::config_error("grid.dt", "dt must be positive");
    c.surface_rows = detail::count_or(g, "surface_rows", "grid", c.surface_rows);
    c.horizon.tail_tol = detail::number_or(g, "tail_tol", "grid", c.horizon.tail_tol);
    c.horizon.max_doublings = static_cast<int>(detail::count_or(g, "max_doublings", "grid", 8));
    if (g.contains("horizon")) {
        const json& h = g.at("horizon");
        if (h.is_string() && h.get<std::string>() == "adaptive") {
            c.horizon.adaptive = true;
        } else if (h.is_number() && h.get<double>() > 0.0) {
            c.horizon.adaptive = false;
            c.horizon.T = h.get<double>();
        } else {
            throw detail::config_error("grid.horizon", "expected \"adaptive\" or a positive number");
        }
    }

    const json s = j.value("solver", json::object());
    c.solver.omega = detail::number_or(s, "omega", "solver", c.solver.omega);
    c.solver.projection_tol = detail::number_or(s, "tol", "solver", c.solver.projection_tol);
    c.solver.max_projection_iters =
        static_cast<int>(detail::count_or(s, "max_iters", "solver", static_cast<std::size_t>(c.solver.max_projection_iters)));
    c.eps_b = detail::number_or(s, "eps_b", "solver", c.eps_b);
    if (!(c.solver.omega > 0.0 && c.solver.omega < 2.0)) throw detail::config_error("solver.omega", "need 0 < omega < 2");

    const json p = j.value("paths", json::object());
    c.paths.dt = detail::number_or(p, "dt", "paths", c.paths.dt);
    c.paths.n_paths = detail::count_or(p, "n_paths", "paths", c.paths.n_paths);
    c.paths.seed = detail::count_or(p, "seed", "paths", c.paths.seed);
    c.paths.bridge_correction = detail::bool_or(p, "bridge_correction", "paths", c.paths.bridge_correction);
    c.paths.censor_cap = detail::number_or(p, "censor_cap", "paths", c.paths.censor_cap);
    if (p.contains("max_time")) c.paths.max_time = detail::number_or(p, "max_time", "paths", 0.0);
    else c.paths.max_time = 0.0;  // resolved against the horizon
    if (!(c.paths.dt > 0.0)) throw detail::config_error("paths.dt", "dt must be positive");
    if (c.paths.n_paths < 1) throw detail::config_error("paths.n_paths", "need at least one path");

    if (j.contains("costs")) {
        const json& cs = j.at("costs");
        if (!cs.is_array() || cs.empty()) throw detail::config_error("costs", "expected a non-empty array");
        c.costs.clear();
        for (std::size_t i = 0; i < cs.size(); ++i) c.costs.push_back(parse_cost(cs[i], "costs[" + std::to_string(i) + "]"));
    }

    c.identity_probes = default_identity_probes();
    if (j.contains("probes")) {
        const json& pr = j.at("probes");
        if (!pr.is_array()) throw detail::config_error("probes", "expected [[t, x], ...]");
        c.identity_probes.clear();
        for (std::size_t i = 0; i < pr.size(); ++i) {
            const std::string q = "probes[" + std::to_string(i) + "]";
            if (!pr[i].is_array() || pr[i].size() != 2) throw detail::config_error(q, "expected [t, x]");
            const double t = detail::as_number(pr[i][0], q), x = detail::as_number(pr[i][1], q);
            if (!(t >= 0.0)) throw detail::config_error(q, "probe time must be non-negative");
            c.identity_probes.emplace_back(t, x);
        }
    }
    for (const auto& [t, x] : c.identity_probes) c.paths.probe_times.push_back(t);
    std::sort(c.paths.probe_times.begin(), c.paths.probe_times.end());
    c.paths.probe_times.erase(std::unique(c.paths.probe_times.begin(), c.paths.probe_times.end()),
                              c.paths.probe_times.end());

    if (j.contains("symmetry")) {
        const json& sy = j.at("symmetry");
        c.symmetry_paths = detail::count_or(sy, "n_paths", "symmetry", c.symmetry_paths);
        const json& boxes = detail::require(sy, "boxes", "symmetry");
        if (!boxes.is_array()) throw detail::config_error("symmetry.boxes", "expected an array");
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            const std::string q = "symmetry.boxes[" + std::to_string(i) + "]";
            const json& b = boxes[i];
            SymmetryBox box{detail::as_number(detail::require(b, "a", q), q + ".a"),
                            detail::as_number(detail::require(b, "b", q), q + ".b"),
                            detail::as_number(detail::require(b, "x", q), q + ".x"),
                            detail::as_number(detail::require(b, "y", q), q + ".y"),
                            detail::as_number(detail::require(b, "t", q), q + ".t")};
            if (!(box.a < box.x && box.x < box.b && box.a < box.y && box.y < box.b && box.t > 0.0))
                throw detail::config_error(q, "need a < x, y < b and t > 0");
            c.symmetry.push_back(box);
        }
    }

    const json th = j.value("thresholds", json::object());
    Thresholds& T = c.thresholds;
    T.ks = detail::number_or(th, "ks", "thresholds", T.ks);
    T.identity_abs = detail::number_or(th, "identity_abs", "thresholds", T.identity_abs);
    T.identity_sigma = detail::number_or(th, "identity_sigma", "thresholds", T.identity_sigma);
    T.mean_sigma = detail::number_or(th, "mean_sigma", "thresholds", T.mean_sigma);
    T.cert_violation = detail::number_or(th, "cert_violation", "thresholds", T.cert_violation);
    T.symmetry_sigma = detail::number_or(th, "symmetry_sigma", "thresholds", T.symmetry_sigma);
    T.symmetry_allowance = detail::count_or(th, "symmetry_allowance", "thresholds", T.symmetry_allowance);
    T.tail = detail::number_or(th, "tail", "thresholds", T.tail);
    c.horizon.tail_tol = T.tail;

    if (j.contains("output_dir")) {
        if (!j.at("output_dir").is_string()) throw detail::config_error("output_dir", "expected a string");
        c.output_dir = j.at("output_dir").get<std::string>();
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path, "config");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what(),
                    "$ (byte " + std::to_string(e.byte) + ")");
    }
    return parse_config(j);
}

/// FNV-1a 64 of the compact dump; object keys are sorted, so equal documents hash equally.
inline std::string config_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string fmt17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "inf" || s == "+inf" || s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error(ErrorCode::Io, "bad number '" + s + "'");
    return v;
}

struct CsvMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path, "output_dir");
    return out;
}

inline void write_meta(std::ostream& os, const CsvMeta& m) {
    os << "# config_hash=" << m.config_hash << "\n# seed=" << m.seed << "\n";
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace detail

/// Header "t,<x_0>,...,<x_{nx-1}>", one row per written time; at most `rows` rows.
inline void write_surface_csv(const std::string& path, const ValueSurface& u, const CsvMeta& meta,
                              std::size_t rows = 0) {
    const Grid& g = u.grid();
    std::ofstream out = detail::open_out(path);
    detail::write_meta(out, meta);
    out << "# stage=" << u.stage() << "\n" << "t";
    for (double x : g.x) out << ',' << fmt17(x);
    out << '\n';
    const std::size_t stride = rows == 0 ? 1 : std::max<std::size_t>(1, (g.nt() - 1 + rows - 2) / std::max<std::size_t>(1, rows - 1));
    for (std::size_t m = 0; m < g.nt(); ++m) {
        if (m % stride != 0 && m + 1 != g.nt()) continue;
        out << fmt17(g.t[m]);
        for (std::size_t i = 0; i < g.nx(); ++i) out << ',' << fmt17(u.at(m, i));
        out << '\n';
    }
}

/// "x,tbar" with "inf" for nodes outside the barrier.
inline void write_barrier_csv(const std::string& path, const Barrier& b, const CsvMeta& meta) {
    std::ofstream out = detail::open_out(path);
    detail::write_meta(out, meta);
    out << "# stage=" << b.stage() << "\nx,tbar\n";
    for (std::size_t i = 0; i < b.size(); ++i) out << fmt17(b.x()[i]) << ',' << fmt17(b.tbar()[i]) << '\n';
}

inline Barrier read_barrier_csv(const std::string& path, int stage = 1) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::string line;
    std::vector<double> xs, ts;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            if (line != "x,tbar") throw Error(ErrorCode::Io, "expected header x,tbar in " + path);
            continue;
        }
        const auto cells = detail::split_csv(line);
        if (cells.size() != 2) throw Error(ErrorCode::Io, "bad barrier row '" + line + "'");
        xs.push_back(parse_double(cells[0]));
        ts.push_back(parse_double(cells[1]));
    }
    return Barrier(std::move(xs), std::move(ts), stage);
}

/// "path_id,k,sigma_k,x_k,censored", one row per path and stage.
inline void write_samples_csv(const std::string& path, const StoppedSampleSet& s, const CsvMeta& meta) {
    std::ofstream out = detail::open_out(path);
    detail::write_meta(out, meta);
    out << "# embedding=" << s.embedding << "\n# rng=" << s.rng << "\n# dt=" << fmt17(s.dt)
        << "\n# bridge_correction=" << (s.bridge_correction ? 1 : 0) << "\n";
    out << "path_id,k,sigma_k,x_k,censored\n";
    std::string buf;
    for (std::size_t p = 0; p < s.n_paths; ++p) {
        buf.clear();
        buf += std::to_string(p) + ",0,0," + fmt17(s.x0[p]) + "," + std::to_string(s.censored[p]) + "\n";
        for (std::size_t k = 1; k <= s.n_stages; ++k)
            buf += std::to_string(p) + "," + std::to_string(k) + "," + fmt17(s.sigma(p, k)) + "," +
                   fmt17(s.xstop(p, k)) + "," + std::to_string(s.censored[p]) + "\n";
        out << buf;
    }
}

}  // namespace rootlab
