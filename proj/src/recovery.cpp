#include "aerr/recovery.hpp"

#include "aerr/locomotion.hpp"
#include "aerr/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace aerr {

namespace {

struct OpenNode {
  double f;
  double h;
  Cell cell;

  bool operator>(const OpenNode& o) const { return std::tie(f, h, cell) > std::tie(o.f, o.h, o.cell); }
};

double step_cost(Cell a, Cell b) {
  return (a.x != b.x && a.y != b.y) ? kCellSize * std::sqrt(2.0) : kCellSize;
}

}  // namespace

std::optional<std::vector<Cell>> astar(const VisibilityMap& map, Cell start, Cell goal, const TraversalRules& rules) {
  if (!map.contains(start) || !map.contains(goal)) return std::nullopt;
  if (start == goal) return std::vector<Cell>{start};
  if (!traversable(map, goal, rules)) return std::nullopt;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Grid<double> g(map.width(), map.height(), kInf);
  Grid<int> parent(map.width(), map.height(), -1);
  Grid<char> closed(map.width(), map.height(), 0);
  std::priority_queue<OpenNode, std::vector<OpenNode>, std::greater<>> open;
  g[start] = 0.0;
  const double h0 = octile_distance(start, goal);
  open.push({h0, h0, start});
  while (!open.empty()) {
    const OpenNode node = open.top();
    open.pop();
    const Cell c = node.cell;
    if (closed[c]) continue;
    closed[c] = 1;
    if (c == goal) {
      std::vector<Cell> path{c};
      for (int idx = parent[c]; idx >= 0; idx = parent[g.cell(static_cast<std::size_t>(idx))]) {
        path.push_back(g.cell(static_cast<std::size_t>(idx)));
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    if (c != start && map.state(c) == CellState::Stair) continue;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{c.x + dx, c.y + dy};
        if (!can_step(map, c, n, rules) || closed[n]) continue;
        const double ng = g[c] + step_cost(c, n);
        if (ng < g[n]) {
          g[n] = ng;
          parent[n] = static_cast<int>(g.index(c));
          const double h = octile_distance(n, goal);
          open.push({ng + h, h, n});
        }
      }
    }
  }
  return std::nullopt;
}

double path_length_m(const std::vector<Cell>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += step_cost(path[i - 1], path[i]);
  return len;
}

std::vector<Cell> WaypointPlan::waypoints() const {
  std::vector<Cell> out;
  out.reserve(waypoint_indices.size());
  for (auto i : waypoint_indices) out.push_back(path[i]);
  return out;
}

WaypointPlan segment_waypoints(std::vector<Cell> path, double interval_m) {
  if (path.empty()) throw std::invalid_argument("segment_waypoints: empty path");
  if (!(interval_m > 0.0)) throw std::invalid_argument("segment_waypoints: interval must be positive");
  WaypointPlan plan;
  plan.interval_m = interval_m;
  double cum = 0.0;
  double next_mark = interval_m;
  for (std::size_t i = 1; i < path.size(); ++i) {
    cum += step_cost(path[i - 1], path[i]);
    if (cum >= next_mark - 1e-9) {
      plan.waypoint_indices.push_back(i);
      while (next_mark <= cum + 1e-9) next_mark += interval_m;
    }
  }
  const std::size_t last = path.size() - 1;
  if (plan.waypoint_indices.empty() || plan.waypoint_indices.back() != last) plan.waypoint_indices.push_back(last);
  plan.path = std::move(path);
  return plan;
}

FollowResult follow_plan(WaypointPlan& plan, const Pose& pose, const VisibilityMap& map, const FollowConfig& cfg) {
  FollowResult out;
  if (plan.exhausted()) {
    out.done = true;
    return out;
  }
  const Cell goal = plan.goal();
  if (map.state(goal) == CellState::Occupied) throw PlanInvalidated("plan goal became occupied");

  plan.path_cursor = advance_cursor(pose, plan.path, plan.path_cursor, static_cast<std::size_t>(cfg.lookahead_cells) * 2);
  const TraversalRules loose{.allow_unknown = true};
  bool leg_blocked = false;
  for (std::size_t i = plan.path_cursor; i + 1 < plan.path.size(); ++i) {
    if (!can_step(map, plan.path[i], plan.path[i + 1], loose)) {
      leg_blocked = true;
      break;
    }
  }
  if (leg_blocked) {
    auto path = astar(map, pose.cell(), goal, TraversalRules{});
    if (!path) path = astar(map, pose.cell(), goal, loose);
    if (!path) throw PlanInvalidated("plan goal unreachable");
    const int replans = plan.replans + 1;
    plan = segment_waypoints(std::move(*path), plan.interval_m);
    plan.replans = replans;
    out.replanned = true;
  }

  while (!plan.exhausted() &&
         (cell_center(plan.waypoint(plan.current)) - pose.position).norm() <= cfg.capture_radius_m + 1e-9) {
    plan.path_cursor = std::max(plan.path_cursor, plan.waypoint_indices[plan.current]);
    ++plan.current;
  }
  if (plan.exhausted()) {
    out.done = true;
    return out;
  }

  const BlockedFn blocked = blocked_on(map, goal);
  // Furthest path cell up to the waypoint in plain view. Scanning back from the waypoint keeps an
  // occluded cell behind the agent (possible when it stands on a cell edge) from pinning the aim.
  auto visible = [&](std::size_t i) {
    bool clear = true;
    trace_segment(pose.position, cell_center(plan.path[i]), [&](Cell c) {
      clear = !blocked(c);
      return clear;
    });
    return clear;
  };
  std::size_t aim = plan.path_cursor;
  for (std::size_t i = plan.waypoint_indices[plan.current]; i > plan.path_cursor; --i) {
    if (visible(i)) {
      aim = i;
      break;
    }
  }
  out.action = steer(pose, cell_center(plan.path[aim]), blocked, 90.0);
  return out;
}

EscapeResult near_frontier_escape(const Observation& obs, const VisibilityMap& map, Cell frontier, int steps_taken,
                                  Reasoner& reasoner, const std::string& target, const EscapeConfig& cfg) {
  EscapeResult out;
  if ((cell_center(frontier) - obs.pose.position).norm() <= cfg.capture_radius_m + 1e-9) {
    out.done = true;
    return out;
  }
  if (steps_taken >= cfg.max_escape_steps) {
    out.done = true;
    out.blacklist = true;
    return out;
  }
  const LocalSketch sketch = make_local_sketch(map, obs.pose, frontier, cfg.sketch_margin);
  out.decision = reasoner.decide(fine_action_query(sketch, target));
  out.action = fine_action_candidates().at(static_cast<std::size_t>(out.decision->chosen().value_or(0)));
  return out;
}

}  // namespace aerr
