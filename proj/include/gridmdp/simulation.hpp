#pragma once

#include "gridmdp/grid_model.hpp"
#include "gridmdp/mdp_engine.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridmdp::sim {

/// Everything a receding-horizon run needs, already validated and loaded.
struct Scenario {
    std::string name;
    grid::GridSpec spec;
    grid::DayAheadSchedule schedule;
    wind::WindDtmc dtmc;
    std::vector<double> initial_soc;  // per battery
    double initial_error = 0.0;       // MW, selects the starting wind bin
    std::size_t steps = 288;          // control steps in one run
    int horizon_steps = 1;            // K_h
    int lambda = 5;
    double violation_penalty = mdp::kDefaultViolationPenalty;
    double jitter_mw = 0.0;           // uniform noise added to the true wind error
    grid::NewtonOptions newton{};
};

struct StepRecord {
    mdp::AugmentedState state;    // root of the MDP solved at this step
    mdp::DiscreteAction action;   // action executed
    std::size_t realized_sw = 0;  // wind state reached
    double cost = 0.0;            // sum |omega_n| at the root, Hz
    std::size_t states = 0;       // MDP size at this step
    std::size_t actions = 0;

    bool operator==(const StepRecord&) const = default;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    std::vector<grid::GridState> trajectory;  // x(0) .. last state reached
    double J = 0.0;                            // Hz h
    bool failed = false;
    std::size_t failure_step = 0;              // index into trajectory
    std::string failure_reason;
    std::vector<double> iteration_seconds;     // build or shift plus solve

    /// Compares outcomes only; wall-clock timings are ignored.
    bool operator==(const RunRecord& other) const;
};

/// Trapezoid rule over |sum_n omega_n| on a uniform grid, in Hz h.
double evaluate_J(std::span<const double> total_omega, double dt);
double evaluate_J(const RunRecord& record, double dt);

/**
 * One 24-hour (by default) receding-horizon run. Wind states are sampled up
 * front from the chain with `seed`; each step solves the current MDP, applies
 * the root's optimal action, follows the sampled successor and shifts the
 * horizon. Throws ConfigError on a scenario that cannot start.
 */
RunRecord run_once(const Scenario& scenario, std::uint64_t seed);

struct MeanCi {
    double mean = 0.0;
    std::optional<double> half_width;  // absent for fewer than two samples
};

/// Mean and Student-t 95% confidence half-width.
MeanCi mean_ci95(std::span<const double> values);

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p_value = 1.0;  // two-sided
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct CampaignSummary {
    std::size_t n_runs = 0;
    std::size_t completed = 0;
    double failure_rate = 0.0;  // fraction of runs that failed
    bool degenerate = false;    // every run failed; aggregates below are absent
    std::optional<double> mean_J;
    std::optional<double> ci_half_width;
    double mean_states = 0.0;
    double mean_actions = 0.0;
    double mean_iteration_seconds = 0.0;
};

struct Campaign {
    std::string scenario;
    int lambda = 0;
    int horizon_steps = 0;
    double dt = 0.0;
    std::uint64_t base_seed = 0;
    std::vector<RunRecord> runs;  // ordered by seed
    CampaignSummary summary;

    /// J of every completed run, in seed order.
    std::vector<double> completed_J() const;
};

CampaignSummary summarize(const std::vector<RunRecord>& runs);

/**
 * Runs seeds base_seed .. base_seed + n_runs - 1, `threads` at a time
 * (0 picks the hardware concurrency). Results do not depend on the thread
 * count.
 */
Campaign run_campaign(const Scenario& scenario, std::size_t n_runs, std::uint64_t base_seed,
                      unsigned threads = 0);

}  // namespace gridmdp::sim
