#include "catch_amalgamated.hpp"

#include "oracles.hpp"
#include "rootlab/optimality.hpp"

#include <cmath>
#include <random>

using namespace rootlab;
using Catch::Approx;

namespace {

ProbabilityMeasure two() { return ProbabilityMeasure({{-1.0, 0.5}, {1.0, 0.5}}); }
ProbabilityMeasure two2() { return ProbabilityMeasure({{-2.0, 0.5}, {2.0, 0.5}}); }
ProbabilityMeasure three() { return ProbabilityMeasure({{-2.0, 0.25}, {0.0, 0.5}, {2.0, 0.25}}); }

struct Fixture {
    std::vector<ProbabilityMeasure> chain;
    SolveResult r;
    std::vector<Barrier> b;
};

Fixture fixture(std::vector<ProbabilityMeasure> chain, std::size_t nx = 201, double dt = 2e-3) {
    SolverConfig c;
    c.horizon.adaptive = true;
    const auto nt = static_cast<std::size_t>(std::llround(seed_horizon(chain, 1.0) / dt));
    Fixture f{chain, solve_chain(chain, DiffusionSpec::brownian(), nx, nt, c), {}};
    for (std::size_t k = 1; k < chain.size(); ++k)
        f.b.push_back(extract_barrier(f.r.surfaces[k], f.r.surfaces[k - 1],
                                      potential_difference(chain[k - 1], chain[k], f.r.grid->x)));
    return f;
}

PathConfig paths(std::size_t n, double dt, double horizon) {
    PathConfig pc;
    pc.n_paths = n;
    pc.dt = dt;
    pc.max_time = 4.0 * horizon;
    return pc;
}

}  // namespace

TEST_CASE("cost evaluation and exact integrals") {
    const CostSpec c = CostSpec::constant(2.0), l = CostSpec::linear(2.0), p = CostSpec::power(2.0, 3.0);
    CHECK(c.integral(1.5) == Approx(3.0));
    CHECK(l.f(0.5) == Approx(1.0));
    CHECK(l.integral(3.0) == Approx(9.0));
    CHECK(p.integral(1.0) == Approx(1.0));
    const CostSpec t = CostSpec::table({0.0, 1.0, 2.0}, {1.0, 1.0, 3.0});
    CHECK(t.f(1.5) == Approx(2.0));
    CHECK(t.f(5.0) == Approx(3.0));
    CHECK(t.integral(2.0) == Approx(1.0 + 2.0));
    CHECK(t.integral(3.0) == Approx(3.0 + 3.0));
    double num = 0.0;
    for (int i = 0; i < 25000; ++i) num += t.f((i + 0.5) * 1e-4) * 1e-4;
    CHECK(t.integral(2.5) == Approx(num).margin(1e-7));
    CHECK(t.normalized().f(0.0) == 0.0);
    CHECK(c.normalized().f(3.0) == 0.0);
    CHECK_THROWS_AS(CostSpec::constant(-1.0), Error);
    CHECK_THROWS_AS(CostSpec::power(0.5), Error);
    CHECK_THROWS_AS(CostSpec::table({0.0, 1.0}, {2.0, 1.0}), Error);
    CHECK_THROWS_AS(CostSpec::table({0.0, 0.0}, {1.0, 1.0}), Error);
}

TEST_CASE("certificate functions for degenerate and constant costs") {
    const Fixture f = fixture({ProbabilityMeasure(), two()});
    const Grid& g = *f.r.grid;
    const CertificateBundle zero = compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::constant(0.0), f.r.grid);
    for (const auto& s : zero.phi)
        for (double v : s.values()) REQUIRE(v == 0.0);
    for (const auto& s : zero.h)
        for (double v : s.values()) REQUIRE(v == 0.0);
    for (const auto& l : zero.lambda[0])
        if (l) REQUIRE(*l == 0.0);

    const CertificateBundle one = compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::constant(1.0), f.r.grid);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t m = 0; m < g.nt(); m += 37)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                REQUIRE(one.phi[k].at(m, i) == Approx(1.0).margin(1e-12));
                REQUIRE(one.h[k].at(m, i) == Approx(g.t[m] - g.x[i] * g.x[i]).margin(1e-9));
            }
    for (std::size_t i = 0; i < g.nx(); ++i) REQUIRE(one.psi[i] == Approx(g.x[i] * g.x[i]).margin(1e-9));
    CHECK(check_bundle(one, CostSpec::constant(1.0)).passed);
}

TEST_CASE("phi for a linear cost is the expected exit time") {
    const Fixture f = fixture({ProbabilityMeasure(), two()}, 401, 1e-3);
    const CertificateBundle cb = compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::linear(1.0), f.r.grid);
    CHECK(cb.phi[0].value(0.0, 0.0) == Approx(oracle::exit_mean(-1.0, 1.0, 0.0)).margin(5e-3));
    CHECK(cb.phi[0].value(0.0, 0.5) == Approx(oracle::exit_mean(-1.0, 1.0, 0.5)).margin(5e-3));
    CHECK(cb.phi[0].value(1.0, 0.0) == Approx(1.0 + oracle::exit_mean(-1.0, 1.0, 0.0)).margin(5e-3));
    const BundleCheckReport br = check_bundle(cb, CostSpec::linear(1.0));
    CHECK(br.passed);
    CHECK(br.terminal_error == 0.0);
}

TEST_CASE("pathwise certificate: equality on Root paths, inequality on exits") {
    const Fixture f = fixture({ProbabilityMeasure(), three()});
    const PathConfig pc = paths(5000, 1e-4, f.r.grid->horizon());
    const StoppedSampleSet root = simulate_sequential_stops(ProbabilityMeasure(), DiffusionSpec::brownian(), f.b, pc);
    const auto cw = chacon_walsh_embedding(ProbabilityMeasure(), three());
    const StoppedSampleSet cmp = simulate_interval_exits(ProbabilityMeasure(), DiffusionSpec::brownian(), {cw}, pc);
    for (const CostSpec& cost : {CostSpec::constant(1.0), CostSpec::linear(2.0), CostSpec::power(3.0)}) {
        const CertificateBundle cb = compute_phi(f.b, DiffusionSpec::brownian(), cost, f.r.grid, &root);
        CHECK(check_bundle(cb, cost).passed);
        const CertificateReport rr = pathwise_certificate_check(root, cb, cost);
        CHECK(rr.equality_fraction >= 0.99);
        CHECK(rr.violation_fraction <= 1e-3);
        const CertificateReport cr = pathwise_certificate_check(cmp, cb, cost);
        CHECK(cr.violation_fraction <= 1e-3);
    }
    const CertificateBundle z = compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::constant(0.0), f.r.grid);
    const CertificateReport zr = pathwise_certificate_check(root, z, CostSpec::constant(0.0));
    CHECK(zr.max_abs_gap == 0.0);
}

TEST_CASE("mean certified cost matches the second exit moment") {
    const Fixture f = fixture({ProbabilityMeasure(), two()});
    const StoppedSampleSet s = simulate_sequential_stops(ProbabilityMeasure(), DiffusionSpec::brownian(), f.b,
                                                         paths(10000, 1e-4, f.r.grid->horizon()));
    const MeanEstimate m = expected_cost(s, CostSpec::linear(2.0));
    CHECK(m.mean == Approx(oracle::exit_second_moment(-1.0, 1.0, 0.0)).margin(3.0 * m.stderr_ + 5e-3));
}

TEST_CASE("missing barrier time at a stop location") {
    const Fixture f = fixture({ProbabilityMeasure(), two()});
    StoppedSampleSet s;
    s.n_paths = 1;
    s.n_stages = 1;
    s.x0 = {0.0};
    s.sigma_ = {0.5};
    s.xstop_ = {0.5};
    s.censored = {0};
    const CertificateBundle cb = compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::constant(1.0), f.r.grid);
    try {
        pathwise_certificate_check(s, cb, CostSpec::constant(1.0));
        FAIL("expected MissingLambda");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingLambda);
    }
}

TEST_CASE("horizon check on the stage-n stops") {
    const Fixture f = fixture({ProbabilityMeasure(), two()});
    StoppedSampleSet s;
    s.n_paths = 100;
    s.n_stages = 1;
    s.x0.assign(100, 0.0);
    s.sigma_.assign(100, 1.0);
    s.xstop_.assign(100, 1.0);
    s.censored.assign(100, 0);
    s.sigma_[0] = 1e3;
    try {
        compute_phi(f.b, DiffusionSpec::brownian(), CostSpec::constant(1.0), f.r.grid, &s);
        FAIL("expected HorizonTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HorizonTooShort);
    }
}

TEST_CASE("tangent peeling instructions") {
    const auto a = chacon_walsh_embedding(ProbabilityMeasure(), two());
    REQUIRE(a.size() == 1);
    CHECK(a[0].a == -1.0);
    CHECK(a[0].b == 1.0);
    const auto b = chacon_walsh_embedding(ProbabilityMeasure(), three());
    REQUIRE(b.size() == 3);
    CHECK(b[0].a == -1.0);
    CHECK(b[0].b == 1.0);
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(std::abs(b[i].b - b[i].a) == Approx(2.0));
        CHECK((b[i].a == 0.0 || b[i].b == 0.0));
        REQUIRE(b[i].from.size() == 1);
        CHECK(std::abs(b[i].from[0]) == 1.0);
    }
    CHECK(chacon_walsh_embedding(two(), two()).empty());
    try {
        chacon_walsh_embedding(two(), ProbabilityMeasure());
        FAIL("expected NotConvexOrdered");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotConvexOrdered);
    }
    const auto c = chacon_walsh_embedding(two(), two2());
    REQUIRE(c.size() == 1);
    CHECK(c[0].from.size() == 2);
}

TEST_CASE("tangent peeling on random targets reproduces the law") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> loc(-3.0, 3.0), wt(0.05, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<Atom> at;
        double total = 0.0, mean = 0.0;
        for (int i = 0; i < 2 + rep % 9; ++i) {
            at.push_back({loc(rng), wt(rng)});
            total += at.back().w;
        }
        for (Atom& x : at) mean += (x.w /= total) * x.x;
        for (Atom& x : at) x.x -= mean;
        const ProbabilityMeasure target = centre_atoms(at).measure;
        const auto ins = chacon_walsh_embedding(ProbabilityMeasure(), target);
        CHECK(ins.size() <= 2 * target.size() + 2);
        const auto law = detail::apply_exits({{0.0, 1.0}}, ins);
        REQUIRE(law.size() == target.size());
        for (std::size_t i = 0; i < law.size(); ++i) {
            REQUIRE(law[i].x == Approx(target.atoms()[i].x).margin(1e-9));
            REQUIRE(law[i].w == Approx(target.atoms()[i].w).margin(1e-9));
        }
    }
}

TEST_CASE("expected cost comparison") {
    const Fixture f = fixture({ProbabilityMeasure(), two()});
    const PathConfig pc = paths(4000, 1e-4, f.r.grid->horizon());
    const StoppedSampleSet root = simulate_sequential_stops(ProbabilityMeasure(), DiffusionSpec::brownian(), f.b, pc);
    const StoppedSampleSet cmp = simulate_interval_exits(
        ProbabilityMeasure(), DiffusionSpec::brownian(), {chacon_walsh_embedding(ProbabilityMeasure(), two())}, pc);
    const ComparisonReport r = expected_cost_comparison(root, cmp, CostSpec::linear(1.0));
    CHECK(r.equal_within_noise);
    CHECK(r.root_not_worse);
    StoppedSampleSet other = cmp;
    other.n_stages = 2;
    try {
        expected_cost_comparison(root, other, CostSpec::linear(1.0));
        FAIL("expected ChainMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ChainMismatch);
    }
}
