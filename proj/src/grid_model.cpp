#include "gridmdp/grid_model.hpp"

#include "gridmdp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gridmdp::grid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double value, const std::string& what) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError(what + " must be strictly positive, got " + std::to_string(value));
    }
}

void require_non_negative(double value, const std::string& what) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw ConfigError(what + " must be non-negative, got " + std::to_string(value));
    }
}

void require_node(std::size_t node, std::size_t n_nodes, const std::string& what) {
    if (node >= n_nodes) {
        throw ConfigError(what + " placed on node " + std::to_string(node) + " but grid has " +
                          std::to_string(n_nodes) + " nodes");
    }
}

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        std::ostringstream msg;
        msg << what << ": expected " << want << " entries, got " << got;
        throw StructuralError(msg.str());
    }
}

void check_state_dims(const GridSpec& spec, const GridState& state) {
    require_size(state.delta.size(), spec.n_nodes(), "state.delta");
    require_size(state.omega.size(), spec.n_nodes(), "state.omega");
    require_size(state.p_gen.size(), spec.n_generators(), "state.p_gen");
    require_size(state.soc.size(), spec.n_batteries(), "state.soc");
}

}  // namespace

GridSpec::GridSpec(GridParams params) : params_(std::move(params)) {
    const std::size_t n = params_.nodes.size();
    if (n == 0) throw ConfigError("grid needs at least one node");
    if (params_.generators.empty()) throw ConfigError("grid needs at least one generator");
    require_positive(params_.freq_limit, "freq_limit");
    require_positive(params_.dt, "dt");

    for (std::size_t i = 0; i < n; ++i) {
        require_positive(params_.nodes[i].inertia, "node " + std::to_string(i) + " inertia");
        require_positive(params_.nodes[i].damping, "node " + std::to_string(i) + " damping");
    }

    adjacency_.assign(n, {});
    for (std::size_t l = 0; l < params_.lines.size(); ++l) {
        const Line& line = params_.lines[l];
        const std::string tag = "line " + std::to_string(l);
        require_node(line.from, n, tag);
        require_node(line.to, n, tag);
        if (line.from == line.to) throw ConfigError(tag + " connects a node to itself");
        require_positive(line.susceptance, tag + " susceptance");
        require_positive(line.capacity, tag + " capacity");
        for (const Neighbor& nb : adjacency_[line.from]) {
            if (nb.node == line.to) throw ConfigError(tag + " duplicates an existing line");
        }
        adjacency_[line.from].push_back({line.to, line.susceptance});
        adjacency_[line.to].push_back({line.from, line.susceptance});
    }

    // connectivity by flood fill from node 0
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        for (const Neighbor& nb : adjacency_[cur]) {
            if (!seen[nb.node]) {
                seen[nb.node] = true;
                stack.push_back(nb.node);
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw ConfigError("grid graph is not connected");
    }

    for (std::size_t i = 0; i < params_.generators.size(); ++i) {
        const Generator& g = params_.generators[i];
        const std::string tag = "generator " + std::to_string(i);
        require_node(g.node, n, tag);
        require_non_negative(g.p_min, tag + " p_min");
        require_positive(g.p_max, tag + " p_max");
        if (g.p_max <= g.p_min) throw ConfigError(tag + " needs p_max > p_min");
        require_positive(g.ramp, tag + " ramp");
        require_positive(g.reserve_down, tag + " reserve_down");
        require_positive(g.reserve_up, tag + " reserve_up");
    }
    for (std::size_t m = 0; m < params_.wind_farms.size(); ++m) {
        require_node(params_.wind_farms[m].node, n, "wind farm " + std::to_string(m));
    }
    for (std::size_t j = 0; j < params_.batteries.size(); ++j) {
        const Battery& b = params_.batteries[j];
        const std::string tag = "battery " + std::to_string(j);
        require_node(b.node, n, tag);
        require_positive(b.capacity_mwh, tag + " capacity_mwh");
        require_positive(b.rate_mw, tag + " rate_mw");
        require_positive(b.flex_decrease, tag + " flex_decrease");
        require_positive(b.flex_increase, tag + " flex_increase");
        require_positive(b.efficiency, tag + " efficiency");
        if (b.efficiency > 1.0) throw ConfigError(tag + " efficiency must not exceed 1");
    }
    for (std::size_t l = 0; l < params_.loads.size(); ++l) {
        require_node(params_.loads[l].node, n, "load " + std::to_string(l));
    }
}

double GridSpec::susceptance(std::size_t n, std::size_t p) const {
    for (const Neighbor& nb : adjacency_.at(n)) {
        if (nb.node == p) return nb.susceptance;
    }
    return 0.0;
}

GridState make_state(const GridSpec& spec, std::vector<double> p_gen, std::vector<double> soc,
                     std::int64_t k) {
    GridState s;
    s.delta.assign(spec.n_nodes(), 0.0);
    s.omega.assign(spec.n_nodes(), 0.0);
    s.p_gen = std::move(p_gen);
    s.soc = std::move(soc);
    s.k = k;
    check_state_dims(spec, s);
    return s;
}

GridState equilibrium_state(const GridSpec& spec, const KnownInput& v, std::vector<double> p_gen,
                            std::vector<double> soc, std::int64_t k, const NewtonOptions& options) {
    GridState state = make_state(spec, std::move(p_gen), std::move(soc), k);
    ControlInput idle;
    idle.dp_gen.assign(spec.n_generators(), 0.0);
    idle.r_gen.assign(spec.n_generators(), 0.0);
    idle.r_stor.assign(spec.n_batteries(), 0.0);
    Disturbance calm;
    calm.dp_wind.assign(spec.n_farms(), 0.0);
    const std::vector<double> pbar = node_power_balance(spec, state, idle, v, calm);
    const double total = std::accumulate(pbar.begin(), pbar.end(), 0.0);
    if (std::abs(total) > 1e-9) {
        throw ConfigError("injections are unbalanced by " + std::to_string(total) + " MW");
    }
    const std::size_t n = spec.n_nodes();
    if (n == 1) return state;

    // Unknowns are delta_1..delta_{n-1}; row 0 is implied by the balance.
    const auto m = static_cast<Eigen::Index>(n - 1);
    Eigen::VectorXd g(m);
    Eigen::MatrixXd jac(m, m);
    auto evaluate = [&]() {
        jac.setZero();
        for (std::size_t a = 1; a < n; ++a) {
            const auto row = static_cast<Eigen::Index>(a - 1);
            double value = -pbar[a];
            for (const Neighbor& nb : spec.neighbors(a)) {
                const double angle = state.delta[a] - state.delta[nb.node];
                value += nb.susceptance * std::sin(angle);
                const double slope = nb.susceptance * std::cos(angle);
                jac(row, row) += slope;
                if (nb.node != 0) jac(row, static_cast<Eigen::Index>(nb.node - 1)) -= slope;
            }
            g(row) = value;
        }
        return g.lpNorm<Eigen::Infinity>();
    };
    double norm = evaluate();
    for (int iter = 0; norm > options.tolerance; ++iter) {
        if (iter >= options.max_iterations) {
            throw NumericalError("power flow equations did not converge", norm);
        }
        const Eigen::VectorXd step = jac.partialPivLu().solve(-g);
        for (std::size_t a = 1; a < n; ++a) state.delta[a] += step(static_cast<Eigen::Index>(a - 1));
        norm = evaluate();
    }
    return state;
}

std::vector<double> node_power_balance(const GridSpec& spec, const GridState& state,
                                       const ControlInput& u, const KnownInput& v,
                                       const Disturbance& w) {
    check_state_dims(spec, state);
    require_size(u.dp_gen.size(), spec.n_generators(), "u.dp_gen");
    require_size(u.r_gen.size(), spec.n_generators(), "u.r_gen");
    require_size(u.r_stor.size(), spec.n_batteries(), "u.r_stor");
    require_size(v.p_load.size(), spec.n_nodes(), "v.p_load");
    require_size(v.p_wind_fc.size(), spec.n_farms(), "v.p_wind_fc");
    require_size(v.p_stor.size(), spec.n_batteries(), "v.p_stor");
    require_size(w.dp_wind.size(), spec.n_farms(), "w.dp_wind");

    std::vector<double> pbar(spec.n_nodes(), 0.0);
    for (std::size_t i = 0; i < spec.n_generators(); ++i) {
        pbar[spec.generator(i).node] += state.p_gen[i] + u.r_gen[i];
    }
    for (std::size_t m = 0; m < spec.n_farms(); ++m) {
        pbar[spec.wind_farm(m).node] += v.p_wind_fc[m] + w.dp_wind[m];
    }
    for (std::size_t n = 0; n < spec.n_nodes(); ++n) pbar[n] -= v.p_load[n];
    for (std::size_t j = 0; j < spec.n_batteries(); ++j) {
        pbar[spec.battery(j).node] -= v.p_stor[j] + u.r_stor[j];
    }
    return pbar;
}

std::vector<double> swing_residual(const GridSpec& spec, const GridState& next,
                                   const GridState& state, std::span<const double> pbar_next) {
    check_state_dims(spec, next);
    check_state_dims(spec, state);
    const std::size_t n = spec.n_nodes();
    require_size(pbar_next.size(), n, "pbar_next");
    const double dt = spec.dt();

    std::vector<double> r(2 * n);
    for (std::size_t a = 0; a < n; ++a) {
        r[a] = next.delta[a] - state.delta[a] - dt * kTwoPi * next.omega[a];
        const NodeParams& np = spec.node(a);
        double coupling = 0.0;
        for (const Neighbor& nb : spec.neighbors(a)) {
            coupling += nb.susceptance * std::sin(next.delta[a] - next.delta[nb.node]);
        }
        r[n + a] = kTwoPi * np.inertia * (next.omega[a] - state.omega[a]) / dt +
                   kTwoPi * np.damping * next.omega[a] - pbar_next[a] + coupling;
    }
    return r;
}

double integrate_soc(const Battery& battery, double soc, double power_mw, double dt) {
    const double stored = power_mw > 0.0 ? power_mw * battery.efficiency
                                         : power_mw / battery.efficiency;
    return soc + dt * stored / (3600.0 * battery.capacity_mwh);
}

GridState step_dynamics(const GridSpec& spec, const GridState& state, const ControlInput& u,
                        const KnownInput& v, const Disturbance& w, const NewtonOptions& options,
                        StepReport* report) {
    const double dt = spec.dt();
    const std::size_t n = spec.n_nodes();

    GridState next;
    next.k = state.k + 1;
    next.p_gen.resize(spec.n_generators());
    for (std::size_t i = 0; i < spec.n_generators(); ++i) {
        next.p_gen[i] = state.p_gen[i] + dt * u.dp_gen.at(i);
    }
    next.soc.resize(spec.n_batteries());
    for (std::size_t j = 0; j < spec.n_batteries(); ++j) {
        next.soc[j] = integrate_soc(spec.battery(j), state.soc[j],
                                    v.p_stor.at(j) + u.r_stor.at(j), dt);
    }
    next.delta = state.delta;
    next.omega = state.omega;

    // Implicit in p_gen(k+1): the injection is evaluated at the end of the step.
    const std::vector<double> pbar = node_power_balance(spec, next, u, v, w);

    // Substituting delta' = delta + 2 pi dt omega' leaves n unknowns.
    Eigen::VectorXd g(n);
    Eigen::MatrixXd jac(n, n);
    auto evaluate = [&](const std::vector<double>& omega, std::vector<double>& delta,
                        bool with_jacobian) {
        for (std::size_t a = 0; a < n; ++a) delta[a] = state.delta[a] + dt * kTwoPi * omega[a];
        if (with_jacobian) jac.setZero();
        for (std::size_t a = 0; a < n; ++a) {
            const NodeParams& np = spec.node(a);
            double value = kTwoPi * np.inertia * (omega[a] - state.omega[a]) / dt +
                           kTwoPi * np.damping * omega[a] - pbar[a];
            double diag = kTwoPi * np.inertia / dt + kTwoPi * np.damping;
            for (const Neighbor& nb : spec.neighbors(a)) {
                const double angle = delta[a] - delta[nb.node];
                value += nb.susceptance * std::sin(angle);
                if (with_jacobian) {
                    const double slope = nb.susceptance * std::cos(angle) * dt * kTwoPi;
                    diag += slope;
                    jac(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(nb.node)) -= slope;
                }
            }
            if (with_jacobian) {
                jac(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) += diag;
            }
            g(static_cast<Eigen::Index>(a)) = value;
        }
        return g.lpNorm<Eigen::Infinity>();
    };

    std::vector<double> trial_omega(n);
    std::vector<double> trial_delta(n);
    double norm = evaluate(next.omega, next.delta, true);
    int iter = 0;
    while (norm > options.tolerance) {
        if (iter >= options.max_iterations) {
            throw NumericalError("implicit step did not converge after " +
                                     std::to_string(iter) + " Newton iterations",
                                 norm);
        }
        ++iter;
        const Eigen::VectorXd step = jac.partialPivLu().solve(-g);
        double alpha = 1.0;
        double trial_norm = 0.0;
        for (int halving = 0;; ++halving) {
            for (std::size_t a = 0; a < n; ++a) {
                trial_omega[a] = next.omega[a] + alpha * step(static_cast<Eigen::Index>(a));
            }
            trial_norm = evaluate(trial_omega, trial_delta, false);
            if (trial_norm < norm || halving >= 30) break;
            alpha *= 0.5;
        }
        next.omega.swap(trial_omega);
        next.delta.swap(trial_delta);
        norm = evaluate(next.omega, next.delta, true);
    }
    if (report) {
        report->iterations = iter;
        report->residual_norm = norm;
    }
    return next;
}

const KnownInput& DayAheadSchedule::input_at(std::int64_t k) const {
    if (inputs.empty()) throw StructuralError("empty day-ahead schedule");
    const auto last = static_cast<std::int64_t>(inputs.size()) - 1;
    return inputs[static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, last))];
}

double DayAheadSchedule::required_at(std::int64_t k) const {
    if (required.empty()) throw StructuralError("empty day-ahead schedule");
    const auto last = static_cast<std::int64_t>(required.size()) - 1;
    return required[static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, last))];
}

DayAheadSchedule day_ahead_schedule(const GridSpec& spec, const TimeSeries& loads,
                                    const TimeSeries& wind_forecast) {
    if (loads.size() == 0) throw ConfigError("load profile is empty");
    if (loads.size() != wind_forecast.size()) {
        throw ConfigError("load and wind forecast profiles differ in length");
    }
    const double dt = spec.dt();
    for (const TimeSeries* series : {&loads, &wind_forecast}) {
        if (!series->timestamps.empty() && series->timestamps.size() != series->size()) {
            throw ConfigError("profile timestamps and rows differ in length");
        }
        for (std::size_t k = 1; k < series->timestamps.size(); ++k) {
            const double step = series->timestamps[k] - series->timestamps[k - 1];
            if (std::abs(step - dt) > 1e-6 * dt) {
                throw ConfigError("profile spacing " + std::to_string(step) +
                                  " s does not match grid dt " + std::to_string(dt) + " s");
            }
        }
    }

    const std::size_t ng = spec.n_generators();
    double range_total = 0.0;
    double p_min_total = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
        range_total += spec.generator(i).p_max - spec.generator(i).p_min;
        p_min_total += spec.generator(i).p_min;
    }

    DayAheadSchedule out;
    out.dt = dt;
    out.inputs.reserve(loads.size());
    out.p_gen.reserve(loads.size());
    out.required.reserve(loads.size());
    for (std::size_t k = 0; k < loads.size(); ++k) {
        if (loads.rows[k].size() != spec.n_loads()) {
            throw ConfigError("load profile row " + std::to_string(k) + " has " +
                              std::to_string(loads.rows[k].size()) + " columns, grid has " +
                              std::to_string(spec.n_loads()) + " loads");
        }
        if (wind_forecast.rows[k].size() != spec.n_farms()) {
            throw ConfigError("wind forecast row " + std::to_string(k) + " has " +
                              std::to_string(wind_forecast.rows[k].size()) +
                              " columns, grid has " + std::to_string(spec.n_farms()) + " farms");
        }
        KnownInput v;
        v.p_load.assign(spec.n_nodes(), 0.0);
        double load_total = 0.0;
        for (std::size_t l = 0; l < spec.n_loads(); ++l) {
            v.p_load[spec.params().loads[l].node] += loads.rows[k][l];
            load_total += loads.rows[k][l];
        }
        v.p_wind_fc = wind_forecast.rows[k];
        const double fc_total = std::accumulate(v.p_wind_fc.begin(), v.p_wind_fc.end(), 0.0);
        v.p_stor.assign(spec.n_batteries(), 0.0);

        if (fc_total > load_total) {
            throw InfeasibleScheduleError(
                "wind forecast exceeds load at step " + std::to_string(k), k);
        }
        const double required = load_total - fc_total;

        std::vector<double> p(ng);
        double assigned = 0.0;
        for (std::size_t i = 0; i + 1 < ng; ++i) {
            const Generator& g = spec.generator(i);
            p[i] = g.p_min + (required - p_min_total) * (g.p_max - g.p_min) / range_total;
            assigned += p[i];
        }
        p[ng - 1] = required - assigned;

        for (std::size_t i = 0; i < ng; ++i) {
            const Generator& g = spec.generator(i);
            if (p[i] < g.p_min - kBoxTolerance || p[i] > g.p_max + kBoxTolerance) {
                throw InfeasibleScheduleError("generator " + std::to_string(i) + " dispatch " +
                                                  std::to_string(p[i]) +
                                                  " MW outside capacity at step " +
                                                  std::to_string(k),
                                              k);
            }
            if (k > 0 && std::abs(p[i] - out.p_gen.back()[i]) > g.ramp * dt + kBoxTolerance) {
                throw InfeasibleScheduleError("generator " + std::to_string(i) +
                                                  " ramp limit exceeded at step " +
                                                  std::to_string(k),
                                              k);
            }
        }
        out.inputs.push_back(std::move(v));
        out.p_gen.push_back(std::move(p));
        out.required.push_back(required);
    }
    return out;
}

const char* to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::Frequency: return "frequency";
        case ConstraintKind::LineFlow: return "line_flow";
        case ConstraintKind::GeneratorCapacity: return "generator_capacity";
        case ConstraintKind::StateOfCharge: return "state_of_charge";
    }
    return "unknown";
}

double line_flow(const Line& line, const GridState& state) {
    return line.susceptance * std::sin(state.delta.at(line.from) - state.delta.at(line.to));
}

FeasibilityReport check_constraints(const GridSpec& spec, const GridState& state) {
    check_state_dims(spec, state);
    FeasibilityReport report;
    const double f_max = spec.freq_limit();
    for (std::size_t n = 0; n < spec.n_nodes(); ++n) {
        const double margin = f_max - std::abs(state.omega[n]);
        if (margin < 0.0) {
            report.violations.push_back(
                {ConstraintKind::Frequency, n, state.omega[n], f_max, margin});
        }
    }
    const auto lines = spec.lines();
    for (std::size_t l = 0; l < lines.size(); ++l) {
        const double flow = line_flow(lines[l], state);
        const double margin = lines[l].capacity - std::abs(flow);
        if (margin < 0.0) {
            report.violations.push_back({ConstraintKind::LineFlow, l, flow, lines[l].capacity,
                                         margin});
        }
    }
    for (std::size_t i = 0; i < spec.n_generators(); ++i) {
        const Generator& g = spec.generator(i);
        const double p = state.p_gen[i];
        if (p > g.p_max + kBoxTolerance) {
            report.violations.push_back(
                {ConstraintKind::GeneratorCapacity, i, p, g.p_max, g.p_max - p});
        } else if (p < g.p_min - kBoxTolerance) {
            report.violations.push_back(
                {ConstraintKind::GeneratorCapacity, i, p, g.p_min, p - g.p_min});
        }
    }
    for (std::size_t j = 0; j < spec.n_batteries(); ++j) {
        const double q = state.soc[j];
        if (q > 1.0 + kBoxTolerance) {
            report.violations.push_back({ConstraintKind::StateOfCharge, j, q, 1.0, 1.0 - q});
        } else if (q < -kBoxTolerance) {
            report.violations.push_back({ConstraintKind::StateOfCharge, j, q, 0.0, q});
        }
    }
    return report;
}

bool is_feasible(const GridSpec& spec, const GridState& state) {
    const double f_max = spec.freq_limit();
    for (double w : state.omega) {
        if (std::abs(w) > f_max) return false;
    }
    for (const Line& line : spec.lines()) {
        if (std::abs(line_flow(line, state)) > line.capacity) return false;
    }
    for (std::size_t i = 0; i < spec.n_generators(); ++i) {
        const Generator& g = spec.generator(i);
        if (state.p_gen[i] > g.p_max + kBoxTolerance || state.p_gen[i] < g.p_min - kBoxTolerance) {
            return false;
        }
    }
    for (double q : state.soc) {
        if (q > 1.0 + kBoxTolerance || q < -kBoxTolerance) return false;
    }
    return true;
}

}  // namespace gridmdp::grid
