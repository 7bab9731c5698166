#pragma once

#include "gridmdp/grid_model.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace gridmdp::mdp {

using NodeId = std::uint32_t;

inline constexpr double kDefaultViolationPenalty = 1e6;

/// (x(k), s_w) plus the depth inside the current exploration window.
struct AugmentedState {
    grid::GridState x;
    std::size_t s_w = 0;
    int layer = 0;

    bool operator==(const AugmentedState&) const = default;
};

/**
 * One grid point of the reduced control space and the full control it
 * expands to.
 *
 * Free coordinates, in order: dP^gen/dt of generators 0..n_g-2, R^gen of
 * generators 0..n_g-2, R^stor of every battery. The last generator's ramp
 * follows from the dispatch balance and its reserve from the reserve balance
 * under the current bin's representative error. That reserve is projected
 * onto its scheduled band; `imbalance` is the net injection the projection
 * leaves behind (zero when the balance is met exactly).
 */
struct DiscreteAction {
    std::vector<int> grid_index;
    std::vector<double> coordinates;
    grid::ControlInput control;
    double imbalance = 0.0;  // MW

    bool operator==(const DiscreteAction&) const = default;
};

/// Number of free control dimensions, 2 n_g + n_s - 2.
std::size_t reduced_dimension(const grid::GridSpec& spec);

/// Problem data shared by every exploration step. Holds references only.
struct ExplorationContext {
    const grid::GridSpec& spec;
    const grid::DayAheadSchedule& schedule;
    const wind::WindDtmc& dtmc;
    int lambda = 5;
    double violation_penalty = kDefaultViolationPenalty;
    grid::NewtonOptions newton{};
};

struct Successor {
    std::size_t s_w = 0;
    double probability = 0.0;
    grid::GridState x;
    bool feasible = false;
};

struct ExpandedAction {
    DiscreteAction action;
    std::vector<Successor> successors;
};

/// Grid points of the state-dependent control box, before any elimination.
std::vector<DiscreteAction> candidate_actions(const ExplorationContext& ctx,
                                              const AugmentedState& aug);

/**
 * Candidate actions with every wind successor stepped through the dynamics.
 * An action is dropped when its dependent ramp breaks a generator limit or
 * when every successor violates a constraint; actions with at least one
 * feasible successor are kept.
 */
std::vector<ExpandedAction> expand_actions(const ExplorationContext& ctx,
                                           const AugmentedState& aug);

/// Actions of expand_actions without their successor states.
std::vector<DiscreteAction> feasible_actions(const ExplorationContext& ctx,
                                             const AugmentedState& aug);

enum class NodeStatus : std::uint8_t {
    Interior,    // expanded, has at least one action
    Goal,        // feasible, at the final layer
    Infeasible,  // violates a constraint; absorbing
    Exhausted,   // feasible before the final layer, but no action survived
};

const char* to_string(NodeStatus status);

struct Outcome {
    NodeId child = 0;
    double probability = 0.0;

    bool operator==(const Outcome&) const = default;
};

struct ActionEdge {
    DiscreteAction action;
    std::vector<Outcome> outcomes;

    bool operator==(const ActionEdge&) const = default;
};

struct Node {
    AugmentedState state;
    double cost = 0.0;  // sum_n |omega_n|, Hz
    NodeStatus status = NodeStatus::Goal;
    std::vector<ActionEdge> actions;

    bool operator==(const Node&) const = default;
};

/**
 * Layered tree MDP. Nodes are stored breadth-first, so a node's id is
 * always larger than its parent's and layers appear in order.
 */
class MdpTree {
public:
    MdpTree() = default;
    MdpTree(int horizon, int lambda) : horizon_(horizon), lambda_(lambda) {}

    NodeId add_node(Node node);
    /// Attaches an action; outcome children must already exist.
    void add_action(NodeId parent, ActionEdge edge);
    void set_root(NodeId root) { root_ = root; }

    NodeId root() const noexcept { return root_; }
    int horizon() const noexcept { return horizon_; }
    int lambda() const noexcept { return lambda_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    Node& node(NodeId id) { return nodes_.at(id); }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Feasible nodes at the final layer.
    std::vector<NodeId> goal_set() const;
    /// Total number of state-action pairs.
    std::size_t action_count() const;

    bool operator==(const MdpTree&) const = default;

private:
    std::vector<Node> nodes_;
    NodeId root_ = 0;
    int horizon_ = 0;
    int lambda_ = 0;
};

/// Throws std::logic_error naming the first broken structural invariant.
void validate(const MdpTree& tree);

double state_cost(const grid::GridState& x);

/**
 * Explores K_h steps from (x0, s_w0). Throws ExhaustionError if the root has
 * no feasible action (K_h > 0) and ProtocolError if the root is infeasible.
 */
MdpTree build_tree(const ExplorationContext& ctx, const grid::GridState& x0, std::size_t s_w0,
                   int horizon);

/**
 * Receding-horizon update: keeps the subtree under the child reached by
 * `executed` and `realized_sw`, then grows one more layer. Retained nodes
 * keep their payloads; ids are renumbered breadth-first.
 */
MdpTree shift_horizon(const ExplorationContext& ctx, const MdpTree& tree,
                      const DiscreteAction& executed, std::size_t realized_sw);

struct Strategy {
    std::vector<std::optional<std::size_t>> choice;  // index into node.actions
    std::vector<double> value;                       // expected cost-to-go

    std::optional<std::size_t> at(NodeId id) const { return choice.at(id); }
};

/**
 * Backward induction. Goal leaves are worth their own cost, infeasible and
 * exhausted nodes the violation penalty, interior nodes their cost plus the
 * best expected child value. Ties go to the lowest action index.
 */
Strategy solve(const MdpTree& tree, double violation_penalty = kDefaultViolationPenalty);

/// JSON-lines dump of at most `max_nodes` nodes, for debugging.
void write_tree_dump(const MdpTree& tree, std::ostream& out, std::size_t max_nodes);

}  // namespace gridmdp::mdp
