#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gridmdp::grid {

struct NodeParams {
    double inertia = 0.0;  // MW s^2 / rad
    double damping = 0.0;  // MW s / rad
};

struct Line {
    std::size_t from = 0;
    std::size_t to = 0;
    double susceptance = 0.0;  // MW
    double capacity = 0.0;     // MW
};

struct Generator {
    std::size_t node = 0;
    double p_min = 0.0;         // MW
    double p_max = 0.0;         // MW
    double ramp = 0.0;          // MW/s
    double reserve_down = 0.0;  // scheduled down-spinning reserve, MW
    double reserve_up = 0.0;    // scheduled up-spinning reserve, MW
};

struct WindFarm {
    std::size_t node = 0;
};

struct Battery {
    std::size_t node = 0;
    double capacity_mwh = 0.0;
    double rate_mw = 0.0;         // max |P^stor + R^stor|
    double flex_decrease = 0.0;   // scheduled decreased-demand flexibility, MW
    double flex_increase = 0.0;   // scheduled increased-demand flexibility, MW
    double efficiency = 1.0;
};

struct Load {
    std::size_t node = 0;
};

/// Plain description of a grid, as read from a config file.
struct GridParams {
    std::string name;
    std::vector<NodeParams> nodes;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<WindFarm> wind_farms;
    std::vector<Battery> batteries;
    std::vector<Load> loads;
    double freq_limit = 0.1;  // Hz
    double dt = 300.0;        // s
};

struct Neighbor {
    std::size_t node;
    double susceptance;
};

/**
 * Validated, immutable grid topology and asset parameters.
 *
 * Construction throws ConfigError unless every capacity, limit and dt is
 * strictly positive, every asset sits on an existing node, lines are not
 * self-loops or duplicates, and the line graph is connected.
 */
class GridSpec {
public:
    explicit GridSpec(GridParams params);

    const GridParams& params() const noexcept { return params_; }
    const std::string& name() const noexcept { return params_.name; }

    std::size_t n_nodes() const noexcept { return params_.nodes.size(); }
    std::size_t n_generators() const noexcept { return params_.generators.size(); }
    std::size_t n_farms() const noexcept { return params_.wind_farms.size(); }
    std::size_t n_batteries() const noexcept { return params_.batteries.size(); }
    std::size_t n_loads() const noexcept { return params_.loads.size(); }

    const NodeParams& node(std::size_t n) const { return params_.nodes.at(n); }
    const Line& line(std::size_t l) const { return params_.lines.at(l); }
    const Generator& generator(std::size_t i) const { return params_.generators.at(i); }
    const WindFarm& wind_farm(std::size_t m) const { return params_.wind_farms.at(m); }
    const Battery& battery(std::size_t j) const { return params_.batteries.at(j); }
    std::span<const Line> lines() const noexcept { return params_.lines; }

    /// b_{n,p}; zero when the nodes are not connected (and on the diagonal).
    double susceptance(std::size_t n, std::size_t p) const;
    std::span<const Neighbor> neighbors(std::size_t n) const { return adjacency_.at(n); }

    double freq_limit() const noexcept { return params_.freq_limit; }
    double dt() const noexcept { return params_.dt; }

private:
    GridParams params_;
    std::vector<std::vector<Neighbor>> adjacency_;
};

/// x(k) = [delta, omega, p_gen, soc] at time index k.
struct GridState {
    std::vector<double> delta;  // rad
    std::vector<double> omega;  // Hz, deviation from nominal
    std::vector<double> p_gen;  // MW
    std::vector<double> soc;    // fraction of capacity
    std::int64_t k = 0;

    bool operator==(const GridState&) const = default;
};

/// u(k) = [dP^gen/dt, R^gen, R^stor].
struct ControlInput {
    std::vector<double> dp_gen;  // MW/s
    std::vector<double> r_gen;   // MW
    std::vector<double> r_stor;  // MW, positive = increased demand (charging)

    bool operator==(const ControlInput&) const = default;
};

/// v(k): uncontrollable inputs known from the day-ahead plan.
struct KnownInput {
    std::vector<double> p_load;     // per node, MW
    std::vector<double> p_wind_fc;  // per farm, MW
    std::vector<double> p_stor;     // per battery, MW

    bool operator==(const KnownInput&) const = default;
};

/// w(k): wind forecast error per farm, MW.
struct Disturbance {
    std::vector<double> dp_wind;
};

struct NewtonOptions {
    double tolerance = 1e-9;  // residual infinity norm
    int max_iterations = 50;
};

/// Flat state with angles equal to zero and the given dispatch and charge levels.
GridState make_state(const GridSpec& spec, std::vector<double> p_gen, std::vector<double> soc,
                     std::int64_t k = 0);

/**
 * Synchronous equilibrium for the given known inputs and dispatch: zero
 * frequency deviation and angles (node 0 as reference) whose line flows carry
 * the scheduled injections. Throws ConfigError if injections do not sum to
 * zero, NumericalError if the flow equations have no solution.
 */
GridState equilibrium_state(const GridSpec& spec, const KnownInput& v, std::vector<double> p_gen,
                            std::vector<double> soc, std::int64_t k = 0,
                            const NewtonOptions& options = {});

/// Net injection per node that drives the swing equation.
std::vector<double> node_power_balance(const GridSpec& spec, const GridState& state,
                                       const ControlInput& u, const KnownInput& v,
                                       const Disturbance& w);

/**
 * Backward-Euler residual of the angle/frequency equations, evaluated at
 * `next`. Entries [0, n) are the angle rows in rad, entries [n, 2n) the
 * frequency rows in MW. Angle rate is 2*pi*omega since omega is in Hz.
 */
std::vector<double> swing_residual(const GridSpec& spec, const GridState& next,
                                   const GridState& state, std::span<const double> pbar_next);

struct StepReport {
    int iterations = 0;
    double residual_norm = 0.0;
};

/**
 * One implicit step x(k+1) = f(x(k), u, v, w).
 *
 * `v` and `w` are the inputs at k+1, where the implicit scheme evaluates the
 * right-hand side. Angles and frequencies come from damped Newton; generator
 * output and state of charge are explicit integrators. Throws NumericalError
 * when Newton does not converge.
 */
GridState step_dynamics(const GridSpec& spec, const GridState& state, const ControlInput& u,
                        const KnownInput& v, const Disturbance& w,
                        const NewtonOptions& options = {}, StepReport* report = nullptr);

/// Charge level after `dt` seconds at net battery power `power_mw` (charging positive).
double integrate_soc(const grid::Battery& battery, double soc, double power_mw, double dt);

/// Per-step time series with one column per asset.
struct TimeSeries {
    std::vector<double> timestamps;          // s
    std::vector<std::vector<double>> rows;   // rows[k][column]

    std::size_t size() const noexcept { return rows.size(); }
};

struct DayAheadSchedule {
    double dt = 0.0;
    std::vector<KnownInput> inputs;          // per step
    std::vector<std::vector<double>> p_gen;  // per step, per generator
    std::vector<double> required;            // total dispatch per step

    std::size_t size() const noexcept { return inputs.size(); }
    /// Clamped lookup: steps beyond the end repeat the final row.
    const KnownInput& input_at(std::int64_t k) const;
    double required_at(std::int64_t k) const;
};

/**
 * Day-ahead dispatch matching generation plus forecast to load at every step.
 *
 * `loads` has one column per load asset, `wind_forecast` one per farm. The
 * residual demand is split over generators in proportion to their capacity
 * range. Throws InfeasibleScheduleError at the first step that breaks a
 * capacity or ramp limit.
 */
DayAheadSchedule day_ahead_schedule(const GridSpec& spec, const TimeSeries& loads,
                                    const TimeSeries& wind_forecast);

enum class ConstraintKind { Frequency, LineFlow, GeneratorCapacity, StateOfCharge };

const char* to_string(ConstraintKind kind);

struct Violation {
    ConstraintKind kind;
    std::size_t index;  // node, line, generator or battery
    double value;
    double limit;
    double margin;      // negative: by how much the limit is exceeded
};

struct FeasibilityReport {
    std::vector<Violation> violations;
    bool feasible() const noexcept { return violations.empty(); }
};

inline constexpr double kBoxTolerance = 1e-9;

/// Flow on a line, b sin(delta_from - delta_to).
double line_flow(const Line& line, const GridState& state);

FeasibilityReport check_constraints(const GridSpec& spec, const GridState& state);

/// Cheaper yes/no version of check_constraints.
bool is_feasible(const GridSpec& spec, const GridState& state);

}  // namespace gridmdp::grid
