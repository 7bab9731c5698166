#include "gridmdp/mdp_engine.hpp"

#include "gridmdp/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

namespace gridmdp::mdp {

namespace {

constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
constexpr double kIntervalTolerance = 1e-12;

struct Interval {
    double lo;
    double hi;
};

double representative_error(const ExplorationContext& ctx, std::size_t s_w) {
    if (ctx.spec.n_farms() == 0) return 0.0;
    if (ctx.spec.n_farms() > 1) {
        throw ConfigError("exploration supports at most one wind farm");
    }
    return ctx.dtmc.rep_value(s_w);
}

std::vector<double> axis(const Interval& box, int lambda) {
    if (box.hi - box.lo <= kIntervalTolerance * std::max(1.0, std::abs(box.lo))) {
        return {0.5 * (box.lo + box.hi)};
    }
    std::vector<double> points(static_cast<std::size_t>(lambda));
    for (int i = 0; i < lambda; ++i) {
        points[static_cast<std::size_t>(i)] =
            box.lo + (box.hi - box.lo) * static_cast<double>(i) / static_cast<double>(lambda - 1);
    }
    points.back() = box.hi;
    return points;
}

/// Ramp of the last generator that restores the scheduled total at k+1.
double balancing_ramp(const ExplorationContext& ctx, const grid::GridState& x,
                      const grid::ControlInput& u) {
    const double dt = ctx.spec.dt();
    const std::size_t last = ctx.spec.n_generators() - 1;
    double others = 0.0;
    for (std::size_t i = 0; i < last; ++i) others += x.p_gen[i] + dt * u.dp_gen[i];
    const double target = ctx.schedule.required_at(x.k + 1) - others;
    return (target - x.p_gen[last]) / dt;
}

bool box_feasible_after_step(const ExplorationContext& ctx, const grid::GridState& x,
                             const grid::ControlInput& u, const grid::KnownInput& v_next) {
    const double dt = ctx.spec.dt();
    for (std::size_t i = 0; i < ctx.spec.n_generators(); ++i) {
        const grid::Generator& g = ctx.spec.generator(i);
        if (std::abs(u.dp_gen[i]) > g.ramp + grid::kBoxTolerance) return false;
        const double p = x.p_gen[i] + dt * u.dp_gen[i];
        if (p > g.p_max + grid::kBoxTolerance || p < g.p_min - grid::kBoxTolerance) return false;
    }
    for (std::size_t j = 0; j < ctx.spec.n_batteries(); ++j) {
        const double q = grid::integrate_soc(ctx.spec.battery(j), x.soc[j],
                                             v_next.p_stor[j] + u.r_stor[j], dt);
        if (q > 1.0 + grid::kBoxTolerance || q < -grid::kBoxTolerance) return false;
    }
    return true;
}

Node make_node(AugmentedState state, bool feasible) {
    Node node;
    node.cost = state_cost(state.x);
    node.state = std::move(state);
    node.status = feasible ? NodeStatus::Goal : NodeStatus::Infeasible;
    return node;
}

/// Expands a feasible leaf in place; new children get status Goal or Infeasible.
void expand_leaf(const ExplorationContext& ctx, MdpTree& tree, NodeId id) {
    std::vector<ExpandedAction> expanded = expand_actions(ctx, tree.node(id).state);
    if (expanded.empty()) {
        tree.node(id).status = NodeStatus::Exhausted;
        return;
    }
    const int child_layer = tree.node(id).state.layer + 1;
    tree.node(id).status = NodeStatus::Interior;
    for (ExpandedAction& ea : expanded) {
        ActionEdge edge;
        edge.action = std::move(ea.action);
        edge.outcomes.reserve(ea.successors.size());
        for (Successor& succ : ea.successors) {
            AugmentedState child{std::move(succ.x), succ.s_w, child_layer};
            const NodeId cid = tree.add_node(make_node(std::move(child), succ.feasible));
            edge.outcomes.push_back({cid, succ.probability});
        }
        tree.add_action(id, std::move(edge));
    }
}

}  // namespace

std::size_t reduced_dimension(const grid::GridSpec& spec) {
    return 2 * spec.n_generators() + spec.n_batteries() - 2;
}

std::vector<DiscreteAction> candidate_actions(const ExplorationContext& ctx,
                                              const AugmentedState& aug) {
    if (ctx.lambda < 2) throw std::invalid_argument("lambda must be at least 2");
    const grid::GridSpec& spec = ctx.spec;
    const grid::GridState& x = aug.x;
    const double dt = spec.dt();
    const std::size_t ng = spec.n_generators();
    const std::size_t ns = spec.n_batteries();
    const grid::KnownInput& v_next = ctx.schedule.input_at(x.k + 1);
    const double rep = representative_error(ctx, aug.s_w);

    std::vector<Interval> boxes;
    boxes.reserve(reduced_dimension(spec));
    for (std::size_t i = 0; i + 1 < ng; ++i) {
        const grid::Generator& g = spec.generator(i);
        boxes.push_back({std::max(-g.ramp, (g.p_min - x.p_gen[i]) / dt),
                         std::min(g.ramp, (g.p_max - x.p_gen[i]) / dt)});
    }
    for (std::size_t i = 0; i + 1 < ng; ++i) {
        const grid::Generator& g = spec.generator(i);
        boxes.push_back({-g.reserve_down, g.reserve_up});
    }
    for (std::size_t j = 0; j < ns; ++j) {
        const grid::Battery& b = spec.battery(j);
        boxes.push_back({std::max(-b.flex_decrease, -b.rate_mw - v_next.p_stor[j]),
                         std::min(b.flex_increase, b.rate_mw - v_next.p_stor[j])});
    }

    std::vector<std::vector<double>> axes;
    axes.reserve(boxes.size());
    for (const Interval& box : boxes) {
        if (box.lo > box.hi + kIntervalTolerance) return {};
        axes.push_back(axis(box, ctx.lambda));
    }

    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();

    const grid::Generator& last_gen = spec.generator(ng - 1);
    std::vector<DiscreteAction> out;
    out.reserve(total);
    std::vector<int> index(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        DiscreteAction a;
        a.grid_index = index;
        a.coordinates.resize(axes.size());
        for (std::size_t d = 0; d < axes.size(); ++d) {
            a.coordinates[d] = axes[d][static_cast<std::size_t>(index[d])];
        }
        grid::ControlInput& u = a.control;
        u.dp_gen.assign(ng, 0.0);
        u.r_gen.assign(ng, 0.0);
        u.r_stor.assign(ns, 0.0);
        std::size_t d = 0;
        for (std::size_t i = 0; i + 1 < ng; ++i) u.dp_gen[i] = a.coordinates[d++];
        for (std::size_t i = 0; i + 1 < ng; ++i) u.r_gen[i] = a.coordinates[d++];
        for (std::size_t j = 0; j < ns; ++j) u.r_stor[j] = a.coordinates[d++];

        u.dp_gen[ng - 1] = balancing_ramp(ctx, x, u);

        double needed = -rep;
        for (std::size_t j = 0; j < ns; ++j) needed += u.r_stor[j];
        for (std::size_t i = 0; i + 1 < ng; ++i) needed -= u.r_gen[i];
        const double deployed = std::clamp(needed, -last_gen.reserve_down, last_gen.reserve_up);
        u.r_gen[ng - 1] = deployed;
        a.imbalance = deployed - needed;

        out.push_back(std::move(a));

        // mixed-radix increment, last coordinate fastest
        for (std::size_t pos = axes.size(); pos-- > 0;) {
            if (static_cast<std::size_t>(++index[pos]) < axes[pos].size()) break;
            index[pos] = 0;
        }
    }
    return out;
}

std::vector<ExpandedAction> expand_actions(const ExplorationContext& ctx,
                                           const AugmentedState& aug) {
    const grid::KnownInput& v_next = ctx.schedule.input_at(aug.x.k + 1);
    const std::vector<wind::Transition> next_wind = wind::successors(ctx.dtmc, aug.s_w);

    std::vector<ExpandedAction> out;
    for (DiscreteAction& action : candidate_actions(ctx, aug)) {
        if (!box_feasible_after_step(ctx, aug.x, action.control, v_next)) continue;
        ExpandedAction ea;
        ea.successors.reserve(next_wind.size());
        bool any_feasible = false;
        for (const wind::Transition& t : next_wind) {
            grid::Disturbance w;
            w.dp_wind.assign(ctx.spec.n_farms(), representative_error(ctx, t.state));
            Successor succ;
            succ.s_w = t.state;
            succ.probability = t.probability;
            succ.x = grid::step_dynamics(ctx.spec, aug.x, action.control, v_next, w, ctx.newton);
            succ.feasible = grid::is_feasible(ctx.spec, succ.x);
            any_feasible = any_feasible || succ.feasible;
            ea.successors.push_back(std::move(succ));
        }
        if (!any_feasible) continue;
        ea.action = std::move(action);
        out.push_back(std::move(ea));
    }
    return out;
}

std::vector<DiscreteAction> feasible_actions(const ExplorationContext& ctx,
                                             const AugmentedState& aug) {
    std::vector<DiscreteAction> out;
    for (ExpandedAction& ea : expand_actions(ctx, aug)) out.push_back(std::move(ea.action));
    return out;
}

const char* to_string(NodeStatus status) {
    switch (status) {
        case NodeStatus::Interior: return "interior";
        case NodeStatus::Goal: return "goal";
        case NodeStatus::Infeasible: return "infeasible";
        case NodeStatus::Exhausted: return "exhausted";
    }
    return "unknown";
}

NodeId MdpTree::add_node(Node node) {
    if (nodes_.size() >= kNoNode) throw std::length_error("tree node ids exhausted");
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void MdpTree::add_action(NodeId parent, ActionEdge edge) {
    for (const Outcome& o : edge.outcomes) {
        if (o.child >= nodes_.size()) throw std::out_of_range("outcome child does not exist");
    }
    nodes_.at(parent).actions.push_back(std::move(edge));
}

std::vector<NodeId> MdpTree::goal_set() const {
    std::vector<NodeId> goals;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].status == NodeStatus::Goal && nodes_[id].state.layer == horizon_) {
            goals.push_back(static_cast<NodeId>(id));
        }
    }
    return goals;
}

std::size_t MdpTree::action_count() const {
    std::size_t total = 0;
    for (const Node& n : nodes_) total += n.actions.size();
    return total;
}

void validate(const MdpTree& tree) {
    const auto fail = [](NodeId id, const std::string& what) {
        throw std::logic_error("node " + std::to_string(id) + ": " + what);
    };
    if (tree.size() == 0) throw std::logic_error("tree has no nodes");
    if (tree.root() >= tree.size()) throw std::logic_error("root id out of range");
    std::vector<int> parents(tree.size(), 0);
    for (NodeId id = 0; id < tree.size(); ++id) {
        const Node& n = tree.node(id);
        if (n.state.layer < 0 || n.state.layer > tree.horizon()) fail(id, "layer out of range");
        if ((n.status == NodeStatus::Interior) != !n.actions.empty()) {
            fail(id, "only interior nodes carry actions");
        }
        if (n.status == NodeStatus::Goal && n.state.layer != tree.horizon()) {
            fail(id, "goal node before the final layer");
        }
        if (n.status == NodeStatus::Exhausted && n.state.layer == tree.horizon()) {
            fail(id, "exhausted node at the final layer");
        }
        for (const ActionEdge& edge : n.actions) {
            if (edge.outcomes.empty()) fail(id, "action without outcomes");
            double sum = 0.0;
            for (const Outcome& o : edge.outcomes) {
                if (o.child >= tree.size() || o.child <= id) fail(id, "bad child id");
                if (!(o.probability > 0.0 && o.probability <= 1.0)) {
                    fail(id, "probability outside (0, 1]");
                }
                if (tree.node(o.child).state.layer != n.state.layer + 1) {
                    fail(id, "edge does not go to the next layer");
                }
                ++parents[o.child];
                sum += o.probability;
            }
            if (std::abs(sum - 1.0) > 1e-12) fail(id, "outcome probabilities do not sum to one");
        }
    }
    for (NodeId id = 0; id < tree.size(); ++id) {
        const int want = id == tree.root() ? 0 : 1;
        if (parents[id] != want) fail(id, "wrong number of parents");
    }
}

double state_cost(const grid::GridState& x) {
    double cost = 0.0;
    for (double w : x.omega) cost += std::abs(w);
    return cost;
}

MdpTree build_tree(const ExplorationContext& ctx, const grid::GridState& x0, std::size_t s_w0,
                   int horizon) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    if (!grid::is_feasible(ctx.spec, x0)) throw ProtocolError("initial state is infeasible");
    if (s_w0 >= ctx.dtmc.size()) throw ProtocolError("initial wind state out of range");

    MdpTree tree(horizon, ctx.lambda);
    tree.set_root(tree.add_node(make_node(AugmentedState{x0, s_w0, 0}, true)));

    std::size_t layer_begin = 0;
    for (int layer = 0; layer < horizon; ++layer) {
        const std::size_t layer_end = tree.size();
        for (std::size_t id = layer_begin; id < layer_end; ++id) {
            if (tree.node(static_cast<NodeId>(id)).status != NodeStatus::Goal) continue;
            expand_leaf(ctx, tree, static_cast<NodeId>(id));
        }
        layer_begin = layer_end;
    }
    if (horizon > 0 && tree.node(tree.root()).status == NodeStatus::Exhausted) {
        throw ExhaustionError("no feasible action at the initial state");
    }
    return tree;
}

MdpTree shift_horizon(const ExplorationContext& ctx, const MdpTree& tree,
                      const DiscreteAction& executed, std::size_t realized_sw) {
    const Node& root = tree.node(tree.root());

    if (root.actions.empty()) {
        if (tree.horizon() != 0 || root.status != NodeStatus::Goal) {
            throw ProtocolError("root has no actions to execute");
        }
        for (ExpandedAction& ea : expand_actions(ctx, root.state)) {
            if (ea.action.grid_index != executed.grid_index) continue;
            for (Successor& succ : ea.successors) {
                if (succ.s_w != realized_sw) continue;
                MdpTree next(0, tree.lambda());
                next.set_root(next.add_node(
                    make_node(AugmentedState{std::move(succ.x), succ.s_w, 0}, succ.feasible)));
                return next;
            }
            throw ProtocolError("realized wind state is not a successor");
        }
        throw ProtocolError("executed action is not available at the root");
    }

    const ActionEdge* edge = nullptr;
    for (const ActionEdge& e : root.actions) {
        if (e.action.grid_index == executed.grid_index) {
            edge = &e;
            break;
        }
    }
    if (!edge) throw ProtocolError("executed action is not among the root's actions");
    NodeId new_root = kNoNode;
    for (const Outcome& o : edge->outcomes) {
        if (tree.node(o.child).state.s_w == realized_sw) {
            new_root = o.child;
            break;
        }
    }
    if (new_root == kNoNode) throw ProtocolError("realized wind state is not a successor");

    // breadth-first copy of the surviving subtree
    std::vector<NodeId> remap(tree.size(), kNoNode);
    std::vector<NodeId> order{new_root};
    remap[new_root] = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        for (const ActionEdge& e : tree.node(order[pos]).actions) {
            for (const Outcome& o : e.outcomes) {
                remap[o.child] = static_cast<NodeId>(order.size());
                order.push_back(o.child);
            }
        }
    }

    MdpTree next(tree.horizon(), tree.lambda());
    for (NodeId old_id : order) {
        const Node& src = tree.node(old_id);
        Node copy;
        copy.state = src.state;
        copy.state.layer -= 1;
        copy.cost = src.cost;
        copy.status = src.status;
        copy.actions.reserve(src.actions.size());
        for (const ActionEdge& e : src.actions) {
            ActionEdge ce;
            ce.action = e.action;
            ce.outcomes.reserve(e.outcomes.size());
            for (const Outcome& o : e.outcomes) ce.outcomes.push_back({remap[o.child], o.probability});
            copy.actions.push_back(std::move(ce));
        }
        next.add_node(std::move(copy));
    }
    next.set_root(0);

    const std::size_t retained = next.size();
    for (std::size_t id = 0; id < retained; ++id) {
        if (next.node(static_cast<NodeId>(id)).status == NodeStatus::Goal) {
            expand_leaf(ctx, next, static_cast<NodeId>(id));
        }
    }
    return next;
}

Strategy solve(const MdpTree& tree, double violation_penalty) {
    const std::size_t n = tree.size();
    Strategy strategy;
    strategy.choice.assign(n, std::nullopt);
    strategy.value.assign(n, 0.0);

    int max_layer = 0;
    for (const Node& node : tree.nodes()) max_layer = std::max(max_layer, node.state.layer);
    std::vector<std::vector<NodeId>> by_layer(static_cast<std::size_t>(max_layer) + 1);
    for (NodeId id = 0; id < n; ++id) {
        by_layer[static_cast<std::size_t>(tree.node(id).state.layer)].push_back(id);
    }

    for (std::size_t layer = by_layer.size(); layer-- > 0;) {
        for (NodeId id : by_layer[layer]) {
            const Node& node = tree.node(id);
            switch (node.status) {
                case NodeStatus::Goal:
                    strategy.value[id] = node.cost;
                    continue;
                case NodeStatus::Infeasible:
                case NodeStatus::Exhausted:
                    strategy.value[id] = violation_penalty;
                    continue;
                case NodeStatus::Interior:
                    break;
            }
            if (node.actions.empty()) {
                strategy.value[id] = violation_penalty;
                continue;
            }
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_index = 0;
            for (std::size_t a = 0; a < node.actions.size(); ++a) {
                double expected = 0.0;
                for (const Outcome& o : node.actions[a].outcomes) {
                    expected += o.probability * strategy.value[o.child];
                }
                if (expected < best) {
                    best = expected;
                    best_index = a;
                }
            }
            strategy.choice[id] = best_index;
            strategy.value[id] = node.cost + best;
        }
    }
    return strategy;
}

void write_tree_dump(const MdpTree& tree, std::ostream& out, std::size_t max_nodes) {
    const std::size_t limit = std::min(max_nodes, tree.size());
    for (NodeId id = 0; id < limit; ++id) {
        const Node& node = tree.node(id);
        nlohmann::json line;
        line["id"] = id;
        line["layer"] = node.state.layer;
        line["k"] = node.state.x.k;
        line["s_w"] = node.state.s_w;
        line["status"] = to_string(node.status);
        line["cost"] = node.cost;
        line["omega"] = node.state.x.omega;
        nlohmann::json actions = nlohmann::json::array();
        for (const ActionEdge& e : node.actions) {
            nlohmann::json outcomes = nlohmann::json::array();
            for (const Outcome& o : e.outcomes) outcomes.push_back({o.child, o.probability});
            actions.push_back({{"grid_index", e.action.grid_index},
                               {"coordinates", e.action.coordinates},
                               {"imbalance", e.action.imbalance},
                               {"outcomes", std::move(outcomes)}});
        }
        line["actions"] = std::move(actions);
        out << line.dump() << '\n';
    }
}

}  // namespace gridmdp::mdp
