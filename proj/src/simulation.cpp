#include "gridmdp/simulation.hpp"

#include "gridmdp/errors.hpp"
#include "gridmdp/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace gridmdp::sim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double total_omega(const grid::GridState& x) {
    return std::accumulate(x.omega.begin(), x.omega.end(), 0.0);
}

std::string describe(const grid::FeasibilityReport& report) {
    if (report.feasible()) return {};
    const grid::Violation& v = report.violations.front();
    return std::string(grid::to_string(v.kind)) + " limit broken at index " +
           std::to_string(v.index) + " (value " + std::to_string(v.value) + ", limit " +
           std::to_string(v.limit) + ")";
}

void mark_failed(RunRecord& record, std::string reason) {
    record.failed = true;
    record.failure_step = record.trajectory.size() - 1;
    record.failure_reason = std::move(reason);
}

}  // namespace

bool RunRecord::operator==(const RunRecord& other) const {
    return seed == other.seed && steps == other.steps && trajectory == other.trajectory &&
           J == other.J && failed == other.failed && failure_step == other.failure_step &&
           failure_reason == other.failure_reason;
}

double evaluate_J(std::span<const double> total, double dt) {
    if (total.size() < 2) return 0.0;
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < total.size(); ++k) {
        area += 0.5 * (std::abs(total[k]) + std::abs(total[k + 1]));
    }
    return area * dt / 3600.0;
}

double evaluate_J(const RunRecord& record, double dt) {
    std::vector<double> total(record.trajectory.size());
    for (std::size_t k = 0; k < total.size(); ++k) total[k] = total_omega(record.trajectory[k]);
    return evaluate_J(total, dt);
}

RunRecord run_once(const Scenario& scenario, std::uint64_t seed) {
    if (scenario.horizon_steps < 1) throw ConfigError("exploration horizon must be at least one step");
    if (scenario.steps < 1) throw ConfigError("simulation needs at least one step");
    const grid::GridSpec& spec = scenario.spec;
    const mdp::ExplorationContext ctx{spec,
                                      scenario.schedule,
                                      scenario.dtmc,
                                      scenario.lambda,
                                      scenario.violation_penalty,
                                      scenario.newton};

    RunRecord record;
    record.seed = seed;
    const std::size_t s0 = wind::map_error(scenario.dtmc, scenario.initial_error);
    const std::vector<std::size_t> wind_path =
        wind::sample_trajectory(scenario.dtmc, s0, scenario.steps, seed);
    Rng jitter(seed ^ 0x9e3779b97f4a7c15ULL);

    grid::GridState x0 = grid::equilibrium_state(spec, scenario.schedule.input_at(0),
                                                 scenario.schedule.p_gen.at(0),
                                                 scenario.initial_soc, 0, scenario.newton);
    record.trajectory.push_back(x0);
    if (!grid::is_feasible(spec, x0)) {
        mark_failed(record, "initial state: " + describe(grid::check_constraints(spec, x0)));
        record.J = evaluate_J(record, spec.dt());
        return record;
    }

    auto start = Clock::now();
    mdp::MdpTree tree;
    try {
        tree = mdp::build_tree(ctx, x0, s0, scenario.horizon_steps);
    } catch (const ExhaustionError& e) {
        mark_failed(record, std::string("exhausted: ") + e.what());
        record.J = evaluate_J(record, spec.dt());
        return record;
    }

    for (std::size_t k = 0; k < scenario.steps; ++k) {
        const mdp::Strategy strategy = mdp::solve(tree, scenario.violation_penalty);
        record.iteration_seconds.push_back(seconds_since(start));

        const mdp::Node& root = tree.node(tree.root());
        const std::optional<std::size_t> choice = strategy.at(tree.root());
        if (root.status != mdp::NodeStatus::Interior || !choice) {
            mark_failed(record, "exhausted: no feasible action at step " + std::to_string(k));
            break;
        }
        const mdp::ActionEdge& edge = root.actions[*choice];
        const std::size_t realized = wind_path[k + 1];

        StepRecord step;
        step.state = root.state;
        step.action = edge.action;
        step.realized_sw = realized;
        step.cost = root.cost;
        step.states = tree.size();
        step.actions = tree.action_count();
        record.steps.push_back(step);

        grid::GridState next;
        bool reuse_tree = true;
        if (scenario.jitter_mw > 0.0) {
            grid::Disturbance w;
            w.dp_wind.assign(spec.n_farms(), scenario.dtmc.rep_value(realized) +
                                                 jitter.uniform(-scenario.jitter_mw,
                                                                scenario.jitter_mw));
            next = grid::step_dynamics(spec, root.state.x, edge.action.control,
                                       scenario.schedule.input_at(root.state.x.k + 1), w,
                                       scenario.newton);
            reuse_tree = false;
        } else {
            const mdp::Outcome* hit = nullptr;
            for (const mdp::Outcome& o : edge.outcomes) {
                if (tree.node(o.child).state.s_w == realized) hit = &o;
            }
            if (!hit) throw ProtocolError("sampled wind state is not a successor in the model");
            next = tree.node(hit->child).state.x;
        }
        record.trajectory.push_back(next);

        const grid::FeasibilityReport report = grid::check_constraints(spec, next);
        if (!report.feasible()) {
            mark_failed(record, describe(report));
            break;
        }
        if (k + 1 == scenario.steps) break;

        start = Clock::now();
        if (reuse_tree) {
            tree = mdp::shift_horizon(ctx, tree, edge.action, realized);
        } else {
            try {
                tree = mdp::build_tree(ctx, next, realized, scenario.horizon_steps);
            } catch (const ExhaustionError& e) {
                mark_failed(record, std::string("exhausted: ") + e.what());
                break;
            }
        }
    }
    record.J = evaluate_J(record, spec.dt());
    return record;
}

MeanCi mean_ci95(std::span<const double> values) {
    MeanCi out;
    if (values.empty()) return out;
    const auto n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    out.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
    return out;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("Welch test needs two samples per group");
    const auto moments = [](std::span<const double> x) {
        const auto n = static_cast<double>(x.size());
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::pair{mean, ss / (n - 1.0)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double sa = va / na;
    const double sb = vb / nb;
    WelchResult out;
    if (sa + sb == 0.0) {
        out.t = ma == mb ? 0.0 : std::copysign(INFINITY, ma - mb);
        out.dof = na + nb - 2.0;
        out.p_value = ma == mb ? 1.0 : 0.0;
        return out;
    }
    out.t = (ma - mb) / std::sqrt(sa + sb);
    out.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    const boost::math::students_t dist(out.dof);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    return out;
}

std::vector<double> Campaign::completed_J() const {
    std::vector<double> js;
    for (const RunRecord& r : runs) {
        if (!r.failed) js.push_back(r.J);
    }
    return js;
}

CampaignSummary summarize(const std::vector<RunRecord>& runs) {
    CampaignSummary s;
    s.n_runs = runs.size();
    std::vector<double> js;
    double states = 0.0;
    double actions = 0.0;
    double seconds = 0.0;
    std::size_t iterations = 0;
    for (const RunRecord& r : runs) {
        if (!r.failed) js.push_back(r.J);
        for (const StepRecord& step : r.steps) {
            states += static_cast<double>(step.states);
            actions += static_cast<double>(step.actions);
        }
        iterations += r.steps.size();
        for (double t : r.iteration_seconds) seconds += t;
    }
    s.completed = js.size();
    s.failure_rate = runs.empty() ? 0.0
                                  : static_cast<double>(runs.size() - js.size()) /
                                        static_cast<double>(runs.size());
    if (iterations > 0) {
        s.mean_states = states / static_cast<double>(iterations);
        s.mean_actions = actions / static_cast<double>(iterations);
    }
    std::size_t timed = 0;
    for (const RunRecord& r : runs) timed += r.iteration_seconds.size();
    if (timed > 0) s.mean_iteration_seconds = seconds / static_cast<double>(timed);
    if (js.empty()) {
        s.degenerate = true;
        return s;
    }
    const MeanCi ci = mean_ci95(js);
    s.mean_J = ci.mean;
    s.ci_half_width = ci.half_width;
    return s;
}

Campaign run_campaign(const Scenario& scenario, std::size_t n_runs, std::uint64_t base_seed,
                      unsigned threads) {
    if (n_runs < 1) throw ConfigError("a campaign needs at least one run");
    Campaign campaign;
    campaign.scenario = scenario.name;
    campaign.lambda = scenario.lambda;
    campaign.horizon_steps = scenario.horizon_steps;
    campaign.dt = scenario.spec.dt();
    campaign.base_seed = base_seed;
    campaign.runs.resize(n_runs);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_runs));

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < n_runs; i = next++) {
            try {
                campaign.runs[i] = run_once(scenario, base_seed + i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n_runs;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    campaign.summary = summarize(campaign.runs);
    return campaign;
}

}  // namespace gridmdp::sim
