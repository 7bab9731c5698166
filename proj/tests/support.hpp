#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include "gridmdp/grid_model.hpp"
#include "gridmdp/mdp_engine.hpp"
#include "gridmdp/rng.hpp"
#include "gridmdp/scenario_io.hpp"
#include "gridmdp/simulation.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <vector>

namespace testsupport {

using namespace gridmdp;

inline std::filesystem::path source_dir() { return GRIDMDP_SOURCE_DIR; }

inline sim::Scenario shipped_scenario(const std::string& which = "3node") {
    return io::build_scenario(
        io::load_scenario_config(source_dir() / "configs" / ("scenario_" + which + ".json")));
}

// ---------------------------------------------------------------- random trees

struct RandomTreeOptions {
    int max_horizon = 3;
    std::size_t max_actions = 3;
    std::size_t max_outcomes = 2;
    std::size_t max_nodes = 200;
    double max_strategies = 32768.0;  // product of action counts over interior nodes
    bool coarse = false;              // costs in {0, 0.5, 1}, dyadic probabilities: exact ties
};

/**
 * Random well-formed tree built breadth-first. Costs are uniform in [0, 1),
 * so exact ties are improbable, unless `coarse` is set.
 */
inline mdp::MdpTree random_tree(Rng& rng, const RandomTreeOptions& opt) {
    const int horizon = 1 + static_cast<int>(rng.uniform() * opt.max_horizon);
    mdp::MdpTree tree(horizon, 2);
    const auto draw_cost = [&] {
        return opt.coarse ? 0.5 * static_cast<double>(static_cast<int>(rng.uniform() * 3)) : rng.uniform();
    };
    const auto leaf = [&](int layer, bool allow_exhausted) {
        mdp::Node n;
        n.state.layer = layer;
        n.cost = draw_cost();
        if (layer == horizon) {
            n.status = rng.uniform() < 0.85 ? mdp::NodeStatus::Goal : mdp::NodeStatus::Infeasible;
        } else {
            const double u = rng.uniform();
            n.status = u < 0.8 ? mdp::NodeStatus::Goal
                       : (u < 0.95 || !allow_exhausted) ? mdp::NodeStatus::Infeasible
                                                        : mdp::NodeStatus::Exhausted;
        }
        n.state.s_w = static_cast<std::size_t>(rng.uniform() * 5);
        return n;
    };
    mdp::Node root;
    root.cost = draw_cost();
    tree.set_root(tree.add_node(root));

    double strategies = 1.0;
    std::size_t begin = 0;
    for (int layer = 0; layer < horizon; ++layer) {
        const std::size_t end = tree.size();
        for (std::size_t id = begin; id < end; ++id) {
            mdp::Node& n = tree.node(static_cast<mdp::NodeId>(id));
            if (n.status != mdp::NodeStatus::Goal) continue;  // Goal marks "to expand" here
            std::size_t n_actions = 1 + static_cast<std::size_t>(rng.uniform() * opt.max_actions);
            while (n_actions > 1 && strategies * static_cast<double>(n_actions) > opt.max_strategies) --n_actions;
            if (tree.size() + n_actions > opt.max_nodes) {
                tree.node(static_cast<mdp::NodeId>(id)).status = mdp::NodeStatus::Exhausted;
                continue;
            }
            std::vector<mdp::ActionEdge> edges;
            std::size_t planned = 0;
            std::vector<std::size_t> counts;
            for (std::size_t a = 0; a < n_actions; ++a) {
                counts.push_back(1 + static_cast<std::size_t>(rng.uniform() * opt.max_outcomes));
                planned += counts.back();
            }
            if (tree.size() + planned > opt.max_nodes) {
                tree.node(static_cast<mdp::NodeId>(id)).status = mdp::NodeStatus::Exhausted;
                continue;
            }
            strategies *= static_cast<double>(n_actions);
            for (std::size_t a = 0; a < n_actions; ++a) {
                mdp::ActionEdge e;
                e.action.grid_index = {static_cast<int>(a)};
                std::vector<double> w(counts[a]);
                double total = 0.0;
                for (double& x : w) total += (x = opt.coarse ? (rng.uniform() < 0.5 ? 1.0 : 3.0) : 0.05 + rng.uniform());
                double assigned = 0.0;
                for (std::size_t o = 0; o < counts[a]; ++o) {
                    const double p = o + 1 == counts[a] ? 1.0 - assigned : w[o] / total;
                    assigned += p;
                    const mdp::NodeId child = tree.add_node(leaf(layer + 1, true));
                    e.outcomes.push_back({child, p});
                }
                edges.push_back(std::move(e));
            }
            mdp::Node& parent = tree.node(static_cast<mdp::NodeId>(id));
            parent.status = mdp::NodeStatus::Interior;
            for (auto& e : edges) tree.add_action(static_cast<mdp::NodeId>(id), std::move(e));
        }
        begin = end;
    }
    return tree;
}

struct Enumeration {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_by_root_action;  // best value given the root's choice
    std::size_t strategies = 0;
};

/**
 * Exhaustive search over memoryless deterministic strategies: every interior
 * node gets a fixed action; each strategy is evaluated by pushing probability
 * mass forward from the root.
 */
inline Enumeration enumerate_strategies(const mdp::MdpTree& tree, double penalty) {
    std::vector<mdp::NodeId> interior;
    for (mdp::NodeId id = 0; id < tree.size(); ++id) {
        if (tree.node(id).status == mdp::NodeStatus::Interior) interior.push_back(id);
    }
    std::vector<std::size_t> choice(tree.size(), 0);
    std::vector<std::size_t> digit(interior.size(), 0);
    Enumeration out;
    const mdp::Node& root = tree.node(tree.root());
    out.best_by_root_action.assign(std::max<std::size_t>(root.actions.size(), 1),
                                   std::numeric_limits<double>::infinity());
    std::vector<double> mass(tree.size());
    for (;;) {
        for (std::size_t i = 0; i < interior.size(); ++i) choice[interior[i]] = digit[i];
        std::fill(mass.begin(), mass.end(), 0.0);
        mass[tree.root()] = 1.0;
        double total = 0.0;
        for (mdp::NodeId id = 0; id < tree.size(); ++id) {
            if (mass[id] == 0.0) continue;
            const mdp::Node& n = tree.node(id);
            switch (n.status) {
                case mdp::NodeStatus::Goal:
                    total += mass[id] * n.cost;
                    break;
                case mdp::NodeStatus::Infeasible:
                case mdp::NodeStatus::Exhausted:
                    total += mass[id] * penalty;
                    break;
                case mdp::NodeStatus::Interior:
                    total += mass[id] * n.cost;
                    for (const mdp::Outcome& o : n.actions[choice[id]].outcomes) {
                        mass[o.child] += mass[id] * o.probability;
                    }
                    break;
            }
        }
        ++out.strategies;
        out.best = std::min(out.best, total);
        const std::size_t ra = root.actions.empty() ? 0 : choice[tree.root()];
        out.best_by_root_action[ra] = std::min(out.best_by_root_action[ra], total);

        std::size_t pos = 0;
        for (; pos < interior.size(); ++pos) {
            if (++digit[pos] < tree.node(interior[pos]).actions.size()) break;
            digit[pos] = 0;
        }
        if (pos == interior.size()) break;
    }
    return out;
}

// ------------------------------------------------------ continuous reference

/**
 * Explicit RK4 integration of the swing equation with constant injections,
 * omega in Hz: d(delta)/dt = 2 pi omega,
 * 2 pi m d(omega)/dt = P - 2 pi d omega - sum_p b sin(delta_n - delta_p).
 */
inline void rk4_swing(const grid::GridSpec& spec, std::vector<double>& delta,
                      std::vector<double>& omega, const std::vector<double>& pbar, double duration,
                      double h) {
    const std::size_t n = spec.n_nodes();
    const double two_pi = 2.0 * std::numbers::pi;
    const auto rhs = [&](const std::vector<double>& d, const std::vector<double>& w,
                         std::vector<double>& dd, std::vector<double>& dw) {
        for (std::size_t a = 0; a < n; ++a) {
            double flow = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const double s = spec.susceptance(a, b);
                if (s != 0.0) flow += s * std::sin(d[a] - d[b]);
            }
            dd[a] = two_pi * w[a];
            dw[a] = (pbar[a] - two_pi * spec.node(a).damping * w[a] - flow) /
                    (two_pi * spec.node(a).inertia);
        }
    };
    const auto steps = static_cast<std::size_t>(std::llround(duration / h));
    std::vector<double> k1d(n), k1w(n), k2d(n), k2w(n), k3d(n), k3w(n), k4d(n), k4w(n), td(n), tw(n);
    for (std::size_t s = 0; s < steps; ++s) {
        rhs(delta, omega, k1d, k1w);
        for (std::size_t a = 0; a < n; ++a) { td[a] = delta[a] + 0.5 * h * k1d[a]; tw[a] = omega[a] + 0.5 * h * k1w[a]; }
        rhs(td, tw, k2d, k2w);
        for (std::size_t a = 0; a < n; ++a) { td[a] = delta[a] + 0.5 * h * k2d[a]; tw[a] = omega[a] + 0.5 * h * k2w[a]; }
        rhs(td, tw, k3d, k3w);
        for (std::size_t a = 0; a < n; ++a) { td[a] = delta[a] + h * k3d[a]; tw[a] = omega[a] + h * k3w[a]; }
        rhs(td, tw, k4d, k4w);
        for (std::size_t a = 0; a < n; ++a) {
            delta[a] += h / 6.0 * (k1d[a] + 2.0 * k2d[a] + 2.0 * k3d[a] + k4d[a]);
            omega[a] += h / 6.0 * (k1w[a] + 2.0 * k2w[a] + 2.0 * k3w[a] + k4w[a]);
        }
    }
}

// ------------------------------------------------------- small random setups

/// Random row-stochastic chain over [lo, hi] with at most `branching` successors per row.
inline wind::WindDtmc random_dtmc(Rng& rng, std::size_t n_bins, std::size_t branching, double lo,
                                  double hi) {
    wind::WindDtmc::Matrix t(n_bins, std::vector<double>(n_bins, 0.0));
    for (std::size_t i = 0; i < n_bins; ++i) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * branching);
        double total = 0.0;
        std::vector<std::size_t> picked;
        for (std::size_t c = 0; c < k; ++c) {
            auto j = static_cast<std::size_t>(rng.uniform() * n_bins);
            if (std::find(picked.begin(), picked.end(), j) != picked.end()) continue;
            picked.push_back(j);
            t[i][j] = 0.1 + rng.uniform();
            total += t[i][j];
        }
        double assigned = 0.0;
        for (std::size_t c = 0; c < picked.size(); ++c) {
            const std::size_t j = picked[c];
            t[i][j] = c + 1 == picked.size() ? 1.0 - assigned : t[i][j] / total;
            assigned += t[i][j];
        }
    }
    return wind::WindDtmc(lo, hi, std::move(t));
}

/// Balanced flat schedule: constant loads, forecast and generator split.
inline grid::DayAheadSchedule flat_schedule(const grid::GridSpec& spec, std::size_t steps,
                                            const std::vector<double>& load_per_asset,
                                            double forecast) {
    grid::TimeSeries loads, fc;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = spec.dt() * static_cast<double>(k);
        loads.timestamps.push_back(t);
        loads.rows.push_back(load_per_asset);
        fc.timestamps.push_back(t);
        fc.rows.push_back(std::vector<double>(spec.n_farms(), forecast));
    }
    return grid::day_ahead_schedule(spec, loads, fc);
}

/// Grid with n nodes on a ring (or a line for n = 2), one farm, the given asset counts.
inline grid::GridParams small_grid(std::size_t nodes, std::size_t gens, std::size_t bats) {
    grid::GridParams p;
    p.name = "small";
    for (std::size_t n = 0; n < nodes; ++n) p.nodes.push_back({1.0, 2.0});
    if (nodes == 2) p.lines.push_back({0, 1, 20.0, 5.0});
    if (nodes >= 3) {
        for (std::size_t n = 0; n < nodes; ++n) p.lines.push_back({n, (n + 1) % nodes, 20.0, 5.0});
    }
    for (std::size_t i = 0; i < gens; ++i) p.generators.push_back({i % nodes, 0.0, 10.0, 0.01, 0.25, 0.25});
    p.wind_farms.push_back({0});
    for (std::size_t j = 0; j < bats; ++j) p.batteries.push_back({(j + 1) % nodes, 30.0, 2.5, 2.0, 2.0, 1.0});
    for (std::size_t n = 0; n < nodes; ++n) p.loads.push_back({n});
    return p;
}

}  // namespace testsupport
