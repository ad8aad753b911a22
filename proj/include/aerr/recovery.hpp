#pragma once

#include "aerr/mapping.hpp"
#include "aerr/reasoner.hpp"
#include "aerr/world.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace aerr {

class PlanInvalidated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum-cost 8-connected path (octile costs, no corner cutting, stairs only as endpoints).
/// Open-list order is (f, h, cell), so equal-cost alternatives resolve deterministically.
std::optional<std::vector<Cell>> astar(const VisibilityMap& map, Cell start, Cell goal,
                                       const TraversalRules& rules = {});

/// Length of a lattice path in meters.
double path_length_m(const std::vector<Cell>& path);

struct WaypointPlan {
  std::vector<Cell> path;
  std::vector<std::size_t> waypoint_indices;  ///< indices into `path`, strictly increasing, last = goal
  std::size_t current = 0;                    ///< next waypoint to reach
  std::size_t path_cursor = 0;                ///< furthest path index reached so far
  double interval_m = 1.5;
  int replans = 0;

  Cell goal() const { return path.back(); }
  Cell waypoint(std::size_t i) const { return path[waypoint_indices[i]]; }
  bool exhausted() const { return current >= waypoint_indices.size(); }
  std::vector<Cell> waypoints() const;
};

/// Waypoints at every multiple of `interval_m` of cumulative path length, plus the final cell.
WaypointPlan segment_waypoints(std::vector<Cell> path, double interval_m);

struct FollowConfig {
  double capture_radius_m = 0.3;
  int lookahead_cells = 3;
};

struct FollowResult {
  std::optional<Action> action;  ///< empty once the last waypoint is consumed
  bool done = false;
  bool replanned = false;
};

/// Greedy heading-then-move along the plan. Consumes waypoints within the capture radius and
/// replans from the current cell when a remaining leg crosses a newly Occupied cell.
/// Throws PlanInvalidated when the goal becomes Occupied or unreachable.
FollowResult follow_plan(WaypointPlan& plan, const Pose& pose, const VisibilityMap& map,
                         const FollowConfig& cfg = {});

struct EscapeConfig {
  int max_escape_steps = 15;
  double capture_radius_m = 0.3;
  int sketch_margin = 4;  ///< cells added around the agent-goal box
};

struct EscapeResult {
  std::optional<Action> action;
  bool done = false;
  bool blacklist = false;  ///< budget exhausted without reaching the frontier
  std::optional<ReasonerDecision> decision;
};

/// Fine-grained approach to a nearby frontier through FineAction reasoner queries.
/// `steps_taken` counts escape steps already spent on this frontier.
EscapeResult near_frontier_escape(const Observation& obs, const VisibilityMap& map, Cell frontier,
                                  int steps_taken, Reasoner& reasoner, const std::string& target,
                                  const EscapeConfig& cfg = {});

}  // namespace aerr
