#include "gridmdp/errors.hpp"
#include "gridmdp/simulation.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace gridmdp;
using namespace gridmdp::sim;

namespace {

Scenario zero_noise(Scenario s) {
    s.dtmc = wind::WindDtmc::identity(-1.0, 1.0, 41);
    s.initial_error = 0.0;
    return s;
}

Scenario shortened(Scenario s, std::size_t steps) {
    s.steps = steps;
    return s;
}

}  // namespace

TEST_CASE("J integral") {
    CHECK(evaluate_J(std::vector<double>(289, 0.0), 300.0) == 0.0);
    CHECK(evaluate_J(std::vector<double>(289, 0.1), 300.0) == doctest::Approx(2.4).epsilon(1e-14));
    CHECK(evaluate_J(std::vector<double>{0.3}, 300.0) == 0.0);

    // triangle wave with period 12 steps over 24 h: mean a/2, so J = 12 a
    std::vector<double> wave;
    const double a = 0.05;
    for (int k = 0; k <= 288; ++k) wave.push_back(a * std::abs((k % 12) - 6) / 6.0);
    CHECK(evaluate_J(wave, 300.0) == doctest::Approx(12.0 * a).epsilon(1e-12));

    // triangle with negative half: |.| folds it, closed form (base * height / 2)
    std::vector<double> tri;
    for (int k = -10; k <= 10; ++k) tri.push_back(0.01 * (10 - std::abs(k)) * (k < 0 ? -1.0 : 1.0));
    const double area = 2.0 * 0.5 * (10 * 300.0) * 0.1 / 3600.0;
    CHECK(evaluate_J(tri, 300.0) == doctest::Approx(area).epsilon(1e-12));

    // additivity over segments that share a boundary point
    Rng rng(1);
    std::vector<double> series(101);
    for (double& v : series) v = rng.uniform(-0.05, 0.05);
    const std::span<const double> all(series);
    CHECK(evaluate_J(all, 300.0) ==
          doctest::Approx(evaluate_J(all.subspan(0, 41), 300.0) + evaluate_J(all.subspan(40), 300.0))
              .epsilon(1e-12));
}

TEST_CASE("statistics") {
    const std::vector<double> one{0.7};
    MeanCi ci = mean_ci95(one);
    CHECK(ci.mean == 0.7);
    CHECK_FALSE(ci.half_width.has_value());

    const std::vector<double> pair{0.0, 2.0};
    ci = mean_ci95(pair);
    CHECK(ci.mean == 1.0);
    CHECK(*ci.half_width == doctest::Approx(12.706204736432095).epsilon(1e-10));

    const std::vector<double> same(5, 0.3);
    CHECK(*mean_ci95(same).half_width == 0.0);

    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{2, 4, 6, 8, 11};
    const WelchResult w = welch_t_test(a, b);
    CHECK(w.t == doctest::Approx(-1.866277899263374).epsilon(1e-12));
    CHECK(w.p_value == doctest::Approx(0.11499016052991887).epsilon(1e-9));
    CHECK(welch_t_test(same, same).p_value == 1.0);
}

TEST_CASE("single runs") {
    const Scenario base = testsupport::shipped_scenario("3node");

    SUBCASE("zero noise stays balanced") {
        const RunRecord r = run_once(zero_noise(base), 1);
        CHECK_FALSE(r.failed);
        CHECK(r.steps.size() == 288);
        CHECK(r.trajectory.size() == 289);
        CHECK(r.J < 1e-6);
        CHECK(r.J == evaluate_J(r, 300.0));
    }

    SUBCASE("deterministic per seed") {
        const Scenario s = shortened(base, 48);
        const RunRecord a = run_once(s, 5);
        const RunRecord b = run_once(s, 5);
        const RunRecord c = run_once(s, 6);
        CHECK(a == b);
        CHECK_FALSE(a == c);
        CHECK(a.iteration_seconds.size() == a.steps.size());
    }

    SUBCASE("trajectory follows the recorded actions") {
        const Scenario s = shortened(base, 12);
        const RunRecord r = run_once(s, 3);
        REQUIRE(r.steps.size() == 12);
        for (std::size_t k = 0; k < r.steps.size(); ++k) {
            const StepRecord& st = r.steps[k];
            CHECK(st.state.x == r.trajectory[k]);
            const grid::GridState next = grid::step_dynamics(
                s.spec, st.state.x, st.action.control, s.schedule.input_at(st.state.x.k + 1),
                grid::Disturbance{{s.dtmc.rep_value(st.realized_sw)}});
            CHECK(next == r.trajectory[k + 1]);
            if (k + 1 < r.steps.size()) CHECK(r.steps[k + 1].state.s_w == st.realized_sw);
        }
    }

    SUBCASE("jitter rebuilds from the true state") {
        Scenario s = shortened(base, 10);
        s.jitter_mw = 0.05;
        const RunRecord r = run_once(s, 3);
        CHECK(r.steps.size() <= 10);
        CHECK(r == run_once(s, 3));
    }

    SUBCASE("violations fail the run") {
        Scenario s = shortened(base, 24);
        s.spec = grid::GridSpec([&] {
            grid::GridParams p = s.spec.params();
            p.freq_limit = 0.004;
            return p;
        }());
        const RunRecord r = run_once(s, 2);
        CHECK(r.failed);
        CHECK(r.trajectory.size() == r.failure_step + 1);
        CHECK_FALSE(r.failure_reason.empty());
    }

    SUBCASE("zero horizon is rejected") {
        Scenario s = base;
        s.horizon_steps = 0;
        CHECK_THROWS_AS(run_once(s, 1), ConfigError);
    }
}

TEST_CASE("campaigns") {
    const Scenario base = shortened(testsupport::shipped_scenario("3node"), 36);

    SUBCASE("one run") {
        const Campaign c = run_campaign(base, 1, 10);
        CHECK(c.summary.mean_J == c.runs[0].J);
        CHECK_FALSE(c.summary.ci_half_width.has_value());
    }

    SUBCASE("identical outcomes") {
        const Campaign c = run_campaign(zero_noise(base), 4, 1);
        CHECK(*c.summary.ci_half_width == 0.0);
        CHECK(c.summary.failure_rate == 0.0);
    }

    SUBCASE("thread count does not matter") {
        const Campaign a = run_campaign(base, 6, 20, 1);
        const Campaign b = run_campaign(base, 6, 20, 3);
        CHECK(a.runs == b.runs);
        CHECK(a.summary.mean_J == b.summary.mean_J);
        for (std::size_t i = 0; i < 6; ++i) CHECK(a.runs[i].seed == 20 + i);
    }

    SUBCASE("tighter limits never fail less") {
        double previous = -1.0;
        for (double limit : {0.1, 0.03, 0.01, 0.005, 0.002}) {
            Scenario s = base;
            grid::GridParams p = s.spec.params();
            p.freq_limit = limit;
            s.spec = grid::GridSpec(p);
            const Campaign c = run_campaign(s, 8, 100, 1);
            CHECK(c.summary.failure_rate >= previous);
            previous = c.summary.failure_rate;
        }
    }

    SUBCASE("all failures make a degenerate campaign") {
        Scenario s = base;
        grid::GridParams p = s.spec.params();
        p.freq_limit = 1e-5;
        s.spec = grid::GridSpec(p);
        const Campaign c = run_campaign(s, 3, 1);
        CHECK(c.summary.degenerate);
        CHECK(c.summary.failure_rate == 1.0);
        CHECK_FALSE(c.summary.mean_J.has_value());
    }

    CHECK_THROWS_AS(run_campaign(base, 0, 1), ConfigError);
}
