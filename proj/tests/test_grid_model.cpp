#include "gridmdp/errors.hpp"
#include "gridmdp/grid_model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace gridmdp;
using namespace gridmdp::grid;

namespace {

GridParams fig1_params() {
    GridParams p;
    p.name = "fig1";
    p.nodes = {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
    p.lines = {{0, 1, 20.0, 5.0}, {0, 2, 20.0, 5.0}, {1, 2, 20.0, 5.0}};
    p.generators = {{1, 0.0, 10.0, 0.01, 0.25, 0.25}};
    p.wind_farms = {{0}};
    p.batteries = {{2, 30.0, 2.5, 2.0, 2.0, 1.0}};
    p.loads = {{0}, {1}, {2}};
    return p;
}

GridParams one_node_params() {
    GridParams p = fig1_params();
    p.nodes = {{3.0, 6.0}};
    p.lines.clear();
    p.generators[0].node = 0;
    p.batteries[0].node = 0;
    p.loads = {{0}, {0}, {0}};
    return p;
}

ControlInput idle(const GridSpec& spec) {
    ControlInput u;
    u.dp_gen.assign(spec.n_generators(), 0.0);
    u.r_gen.assign(spec.n_generators(), 0.0);
    u.r_stor.assign(spec.n_batteries(), 0.0);
    return u;
}

KnownInput inputs(std::vector<double> load, std::vector<double> fc, std::vector<double> stor) {
    return KnownInput{std::move(load), std::move(fc), std::move(stor)};
}

}  // namespace

TEST_CASE("grid spec validation") {
    CHECK_NOTHROW(GridSpec(fig1_params()));

    GridParams p = fig1_params();
    p.lines.push_back({1, 0, 5.0, 1.0});
    CHECK_THROWS_AS(GridSpec{p}, ConfigError);  // duplicate line

    p = fig1_params();
    p.lines = {{0, 1, 20.0, 5.0}};
    CHECK_THROWS_AS(GridSpec{p}, ConfigError);  // node 2 disconnected

    p = fig1_params();
    p.lines[0].capacity = 0.0;
    CHECK_THROWS_AS(GridSpec{p}, ConfigError);

    p = fig1_params();
    p.batteries[0].node = 7;
    CHECK_THROWS_AS(GridSpec{p}, ConfigError);

    p = fig1_params();
    p.lines[1] = {2, 2, 1.0, 1.0};
    CHECK_THROWS_AS(GridSpec{p}, ConfigError);

    const GridSpec spec(fig1_params());
    CHECK(spec.susceptance(0, 2) == 20.0);
    CHECK(spec.susceptance(2, 0) == 20.0);
    CHECK(spec.susceptance(1, 1) == 0.0);
    CHECK(spec.neighbors(1).size() == 2);
}

TEST_CASE("node power balance") {
    const GridSpec spec(fig1_params());

    SUBCASE("balanced 1-node inputs give zero") {
        const GridSpec one(one_node_params());
        GridState x = make_state(one, {3.0}, {0.5});
        Disturbance w{{0.0}};
        auto pbar = node_power_balance(one, x, idle(one), inputs({4.0}, {1.0}, {0.0}), w);
        CHECK(pbar == std::vector<double>{0.0});
        w.dp_wind = {0.5};
        pbar = node_power_balance(one, x, idle(one), inputs({4.0}, {1.0}, {0.0}), w);
        CHECK(pbar[0] == doctest::Approx(0.5).epsilon(1e-15));
    }

    SUBCASE("hand sum on the 3-node grid") {
        GridState x = make_state(spec, {2.5}, {0.5});
        ControlInput u = idle(spec);
        u.r_gen = {0.2};
        u.r_stor = {0.3};
        const KnownInput v = inputs({1.0, 1.0, 1.0}, {0.7}, {0.1});
        const Disturbance w{{-0.4}};
        const auto pbar = node_power_balance(spec, x, u, v, w);
        CHECK(pbar[0] == doctest::Approx(0.7 - 0.4 - 1.0));
        CHECK(pbar[1] == doctest::Approx(2.5 + 0.2 - 1.0));
        CHECK(pbar[2] == doctest::Approx(-1.0 - 0.1 - 0.3));
    }

    SUBCASE("dimension mismatch") {
        GridState x = make_state(spec, {2.5}, {0.5});
        CHECK_THROWS_AS(node_power_balance(spec, x, idle(spec), inputs({1.0, 1.0}, {0.7}, {0.0}),
                                           Disturbance{{0.0}}),
                        StructuralError);
    }
}

TEST_CASE("swing residual") {
    GridParams p = fig1_params();
    p.nodes.resize(2);
    p.lines = {{0, 1, 20.0, 5.0}};
    p.batteries[0].node = 1;
    p.loads = {{0}, {1}};
    const GridSpec spec(p);
    GridState x = make_state(spec, {1.0}, {0.5});
    const std::vector<double> zero(2, 0.0);

    auto r = swing_residual(spec, x, x, zero);
    for (double v : r) CHECK(v == 0.0);

    const double eps = 1e-3;
    GridState y = x;
    y.delta[0] = eps;
    r = swing_residual(spec, y, x, zero);
    CHECK(r[0] == doctest::Approx(eps));
    CHECK(r[2] == doctest::Approx(20.0 * std::sin(eps)).epsilon(1e-14));
    CHECK(r[3] == doctest::Approx(-20.0 * std::sin(eps)).epsilon(1e-14));

    // finite-difference reconstruction of the implicit-Euler equations
    y.omega = {0.01, -0.02};
    y.delta = {0.3, -0.1};
    const std::vector<double> pbar{0.4, -0.2};
    r = swing_residual(spec, y, x, pbar);
    const double dt = spec.dt();
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t a = 0; a < 2; ++a) {
        const double ddelta = (y.delta[a] - x.delta[a]) / dt;
        const double domega = (y.omega[a] - x.omega[a]) / dt;
        const std::size_t b = 1 - a;
        const double lhs = two_pi * (1.0 * domega + 2.0 * y.omega[a]);
        const double rhs = pbar[a] - 20.0 * std::sin(y.delta[a] - y.delta[b]);
        CHECK(r[a] == doctest::Approx(dt * (ddelta - two_pi * y.omega[a])).epsilon(1e-12));
        CHECK(r[2 + a] == doctest::Approx(lhs - rhs).epsilon(1e-12));
    }
}

TEST_CASE("step dynamics") {
    const GridSpec spec(fig1_params());

    SUBCASE("equilibrium is a fixed point") {
        const KnownInput v = inputs({1.0, 1.5, 0.5}, {1.0}, {0.0});
        const GridState x = equilibrium_state(spec, v, {2.0}, {0.5}, 4);
        StepReport report;
        const GridState y = step_dynamics(spec, x, idle(spec), v, Disturbance{{0.0}}, {}, &report);
        CHECK(y.k == 5);
        for (std::size_t a = 0; a < 3; ++a) {
            CHECK(std::abs(y.omega[a]) < 1e-12);
            CHECK(y.delta[a] == doctest::Approx(x.delta[a]).epsilon(1e-9));
        }
        CHECK(y.p_gen == x.p_gen);
        CHECK(y.soc == x.soc);
    }

    SUBCASE("state of charge arithmetic") {
        GridParams p = fig1_params();
        p.batteries[0].capacity_mwh = 1.0;
        const GridSpec small(p);
        GridState x = make_state(small, {2.0}, {0.5});
        ControlInput u = idle(small);
        u.r_stor = {1.5};
        const GridState y = step_dynamics(small, x, u, inputs({1.0, 1.0, 1.0}, {1.0}, {0.5}),
                                          Disturbance{{0.0}});
        CHECK(y.soc[0] == doctest::Approx(0.5 + 300.0 * 2.0 / 3600.0).epsilon(1e-14));

        Battery lossy = p.batteries[0];
        lossy.efficiency = 0.9;
        CHECK(integrate_soc(lossy, 0.5, 2.0, 300.0) == doctest::Approx(0.5 + 0.9 * 600.0 / 3600.0));
        CHECK(integrate_soc(lossy, 0.5, -2.0, 300.0) == doctest::Approx(0.5 - 600.0 / 0.9 / 3600.0));
    }

    SUBCASE("Newton residual and reference integrator") {
        const KnownInput v = inputs({1.0, 1.0, 1.0}, {1.0}, {0.0});
        const GridState x = equilibrium_state(spec, v, {2.0}, {0.5});
        for (double injection : {0.5, -1.0, 2.0}) {
            const Disturbance w{{injection}};
            StepReport report;
            const GridState y = step_dynamics(spec, x, idle(spec), v, w, {}, &report);
            CHECK(report.residual_norm <= 1e-9);
            const auto pbar = node_power_balance(spec, y, idle(spec), v, w);
            const auto r = swing_residual(spec, y, x, pbar);
            for (double e : r) CHECK(std::abs(e) <= 1e-8);

            std::vector<double> delta = x.delta;
            std::vector<double> omega = x.omega;
            testsupport::rk4_swing(spec, delta, omega, pbar, spec.dt(), spec.dt() / 1000.0);
            for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(y.omega[a] - omega[a]) < 1e-4);
        }
    }

    SUBCASE("zero disturbance keeps frequency flat over a day") {
        const sim::Scenario sc = testsupport::shipped_scenario("3node");
        GridState x = equilibrium_state(sc.spec, sc.schedule.input_at(0), sc.schedule.p_gen[0], {0.5});
        double worst = 0.0;
        for (std::int64_t k = 0; k < 288; ++k) {
            ControlInput u = idle(sc.spec);
            u.dp_gen[0] = (sc.schedule.p_gen[static_cast<std::size_t>(k + 1)][0] - x.p_gen[0]) / sc.spec.dt();
            x = step_dynamics(sc.spec, x, u, sc.schedule.input_at(k + 1), Disturbance{{0.0}});
            for (double w : x.omega) worst = std::max(worst, std::abs(w));
        }
        CHECK(worst < 1e-6);
    }

    SUBCASE("energy conservation of the charge integrator") {
        Battery b{0, 7.0, 3.0, 2.0, 2.0, 1.0};
        Rng rng(3);
        double soc = 0.4;
        double energy = 0.0;
        for (int k = 0; k < 288; ++k) {
            const double power = rng.uniform(-2.0, 2.0);
            energy += 300.0 * power;
            soc = integrate_soc(b, soc, power, 300.0);
        }
        CHECK(energy == doctest::Approx(7.0 * 3600.0 * (soc - 0.4)).epsilon(1e-12));
    }
}

TEST_CASE("day-ahead schedule") {
    const GridSpec spec(fig1_params());
    TimeSeries loads{{0.0, 300.0, 600.0}, {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}};
    TimeSeries fc{{0.0, 300.0, 600.0}, {{1.0}, {1.0}, {1.0}}};
    DayAheadSchedule s = day_ahead_schedule(spec, loads, fc);
    REQUIRE(s.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(s.p_gen[k][0] == 2.0);
        CHECK(s.inputs[k].p_stor == std::vector<double>{0.0});
    }
    CHECK(&s.input_at(10) == &s.inputs.back());

    GridParams two = fig1_params();
    two.generators.push_back(two.generators[0]);
    const GridSpec spec2(two);
    s = day_ahead_schedule(spec2, loads, fc);
    CHECK(s.p_gen[1][0] == doctest::Approx(1.0));
    CHECK(s.p_gen[1][1] == doctest::Approx(1.0));

    TimeSeries steep = loads;
    steep.rows[2] = {3.0, 3.0, 3.0};
    CHECK_THROWS_AS(day_ahead_schedule(spec, steep, fc), InfeasibleScheduleError);
    TimeSeries windy = fc;
    windy.rows[1] = {4.0};
    try {
        day_ahead_schedule(spec, loads, windy);
        FAIL("expected an infeasible schedule");
    } catch (const InfeasibleScheduleError& e) {
        CHECK(e.step() == 1);
    }
}

TEST_CASE("constraint checks") {
    const GridSpec spec(fig1_params());
    GridState x = make_state(spec, {0.0}, {0.0});
    CHECK(is_feasible(spec, x));

    x.omega[0] = 0.11;
    FeasibilityReport r = check_constraints(spec, x);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ConstraintKind::Frequency);
    CHECK(r.violations[0].index == 0);
    CHECK(r.violations[0].margin < 0.0);
    CHECK_FALSE(is_feasible(spec, x));

    x = make_state(spec, {0.0}, {0.5});
    x.delta[1] = std::asin(1.01 * 5.0 / 20.0);
    r = check_constraints(spec, x);
    REQUIRE_FALSE(r.feasible());
    CHECK(r.violations[0].kind == ConstraintKind::LineFlow);
    CHECK(r.violations.size() == 2);  // lines 0-1 and 1-2

    x = make_state(spec, {0.0}, {0.5});
    x.delta[1] = std::asin(0.99 * 5.0 / 20.0);
    CHECK(is_feasible(spec, x));

    x = make_state(spec, {10.5}, {1.2});
    r = check_constraints(spec, x);
    CHECK(r.violations.size() == 2);
}
