#include "catch_amalgamated.hpp"

#include "rootlab/barrier.hpp"
#include "rootlab/mc_engine.hpp"
#include "rootlab/ost_solver.hpp"

#include <cmath>

using namespace rootlab;
using Catch::Approx;

namespace {

struct Solved {
    SolveResult r;
    std::vector<Barrier> b;
};

Solved solve(const std::vector<ProbabilityMeasure>& chain, std::size_t nx, std::size_t nt, double T) {
    SolverConfig c;
    c.horizon.adaptive = false;
    c.horizon.T = T;
    Solved s{solve_chain(chain, DiffusionSpec::brownian(), nx, nt, c), {}};
    for (std::size_t k = 1; k < chain.size(); ++k)
        s.b.push_back(extract_barrier(s.r.surfaces[k], s.r.surfaces[k - 1],
                                      potential_difference(chain[k - 1], chain[k], s.r.grid->x)));
    return s;
}

ProbabilityMeasure two() { return ProbabilityMeasure({{-1.0, 0.5}, {1.0, 0.5}}); }
ProbabilityMeasure three() { return ProbabilityMeasure({{-2.0, 0.25}, {0.0, 0.5}, {2.0, 0.25}}); }

}  // namespace

TEST_CASE("two-point barrier is the exterior of (-1, 1)") {
    const Solved s = solve({ProbabilityMeasure(), two()}, 401, 8000, 8.0);
    const Barrier& b = s.b[0];
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (std::abs(b.x()[i]) >= 1.0) REQUIRE(b.tbar()[i] == 0.0);
        else REQUIRE(std::isinf(b.tbar()[i]));
    }
    CHECK(hit_test(b, 0.5, 1.2));
    CHECK_FALSE(hit_test(b, 100.0, 0.0));
    CHECK(hit_test(b, 0.0, 1.0));
    const FreeInterval fi = b.free_interval(0.3, 0.0);
    CHECK(fi.lo.x == -1.0);
    CHECK(fi.hi.x == 1.0);
    CHECK_FALSE(fi.lo.moving);
    CHECK(std::isinf(fi.valid_until));
}

TEST_CASE("equal measures give the whole line") {
    const Solved s = solve({ProbabilityMeasure(), two(), two()}, 101, 400, 4.0);
    for (double t : s.b[1].tbar()) REQUIRE(t == 0.0);
}

TEST_CASE("three-atom barrier has a single interior ray") {
    const Solved s = solve({ProbabilityMeasure(), three()}, 401, 8000, 8.0);
    const Barrier& b = s.b[0];
    const Grid& g = *s.r.grid;
    const double t0 = b.tbar()[*g.node_index(0.0)];
    CHECK(std::isfinite(t0));
    CHECK(t0 > 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double x = b.x()[i];
        if (std::abs(x) >= 2.0) REQUIRE(b.tbar()[i] == 0.0);
        else if (x != 0.0) REQUIRE(std::isinf(b.tbar()[i]));
    }
    // closed at the ray start
    CHECK(hit_test(b, t0, 0.0));
    CHECK_FALSE(hit_test(b, t0 * 0.999, 0.0));
}

TEST_CASE("raw contact rule marks mass-free nodes without the support mask") {
    const Solved s = solve({ProbabilityMeasure(), three()}, 201, 2000, 8.0);
    const PotentialDifference dU = potential_difference(ProbabilityMeasure(), three(), s.r.grid->x);
    const Barrier raw = extract_barrier(s.r.surfaces[1], s.r.surfaces[0], dU, kDefaultEpsB, false);
    // the masked barrier is contained in the raw one
    for (std::size_t i = 0; i < raw.size(); ++i) REQUIRE(raw.tbar()[i] <= s.b[0].tbar()[i]);
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (dU.w[i] == 0.0) REQUIRE(raw.tbar()[i] == 0.0);
}

TEST_CASE("barrier interpolation") {
    const Barrier b({-1.0, 0.0, 1.0, 2.0}, {0.0, 2.0, kInf, 0.0}, 1);
    CHECK(b.tbar_interp(-0.5) == Approx(1.0));
    CHECK(std::isinf(b.tbar_interp(0.5)));
    CHECK(b.tbar_interp(2.0) == 0.0);
    CHECK_THROWS_AS(b.tbar_interp(3.0), Error);
    const FreeInterval fi = b.free_interval(1.5, 0.5);
    CHECK(fi.lo.moving);
    CHECK(fi.lo.at(1.5) == Approx(-0.25));
    CHECK(fi.hi.x == 2.0);
    CHECK(fi.valid_until == Approx(2.0));
    CHECK_THROWS_AS(Barrier({0.0, 1.0}, {0.0, -1.0}, 1), Error);
    CHECK_THROWS_AS(Barrier({1.0, 0.0}, {0.0, 0.0}, 1), Error);
}

TEST_CASE("grid mismatch is rejected") {
    const Solved a = solve({ProbabilityMeasure(), two()}, 101, 200, 4.0);
    const Solved c = solve({ProbabilityMeasure(), two()}, 121, 200, 4.0);
    const PotentialDifference dU = potential_difference(ProbabilityMeasure(), two(), a.r.grid->x);
    try {
        extract_barrier(a.r.surfaces[1], c.r.surfaces[0], dU);
        FAIL("expected GridMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridMismatch);
    }
}

TEST_CASE("regularity diagnostic") {
    const Solved s = solve({ProbabilityMeasure(), two()}, 201, 2000, 8.0);
    PathConfig pc;
    pc.n_paths = 4000;
    pc.dt = 1e-3;
    pc.max_time = 32.0;
    pc.probe_times = {0.1, 0.5, 1.0};
    const StoppedSampleSet samples = simulate_sequential_stops(ProbabilityMeasure(), DiffusionSpec::brownian(), s.b, pc);
    const RegularityReport ok = check_regularity(s.b[0], samples, 1, {-0.5, 0.0, 0.5});
    CHECK(ok.failures == 0);
    CHECK(ok.probes.size() == 9);
    const RegularityReport skip = check_regularity(s.b[0], samples, 1, {1.0});
    CHECK(skip.skipped_in_barrier == 3);
    CHECK(skip.probes.empty());

    // a hole in the exterior at 1.3..1.5 that no path can reach: adding rays
    // there would not change the stopped law, which the diagnostic flags
    std::vector<double> tb = s.b[0].tbar();
    for (std::size_t i = 0; i < tb.size(); ++i)
        if (s.b[0].x()[i] > 1.25 && s.b[0].x()[i] < 1.55) tb[i] = kInf;
    const Barrier holed(s.b[0].x(), tb, 1);
    const StoppedSampleSet hs = simulate_sequential_stops(ProbabilityMeasure(), DiffusionSpec::brownian(), {holed}, pc);
    const RegularityReport bad = check_regularity(holed, hs, 1, {1.4});
    CHECK(bad.failures == bad.probes.size());
    CHECK(bad.failures > 0);
}
