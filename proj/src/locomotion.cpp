#include "aerr/locomotion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

namespace aerr {

Action turn_toward(int current_heading_deg, int desired_heading_deg) {
  const double diff = wrap_degrees(desired_heading_deg - current_heading_deg);
  // TurnLeft decreases the heading.
  return diff > 0.0 ? Action::TurnRight : Action::TurnLeft;
}

Cell forward_cell(const Pose& pose, int heading_deg) {
  return cell_at(pose.position + kCellSize * heading_vector(heading_deg));
}

double bearing_deg(const Pose& pose, const Eigen::Vector2d& target) {
  const Eigen::Vector2d v = target - pose.position;
  double deg = std::atan2(v.y(), v.x()) * 180.0 / kPi;
  if (deg < 0) deg += 360.0;
  return deg;
}

std::optional<int> best_heading(const Pose& pose, const Eigen::Vector2d& target, const BlockedFn& blocked,
                                double max_deviation_deg) {
  const double bearing = bearing_deg(pose, target);
  std::optional<int> best;
  double best_dev = std::numeric_limits<double>::infinity();
  int best_turns = 0;
  bool best_left = false;
  for (int i = 0; i < kHeadingCount; ++i) {
    const int h = i * kHeadingStepDeg;
    const double dev = std::abs(wrap_degrees(h - bearing));
    if (dev > max_deviation_deg + 1e-9) continue;
    if (blocked(forward_cell(pose, h))) continue;
    const double turn = wrap_degrees(h - pose.heading_deg);
    const int turns = static_cast<int>(std::lround(std::abs(turn) / kHeadingStepDeg));
    const bool left = turn < 0.0;
    bool better = false;
    if (!best || dev < best_dev - 1e-9) {
      better = true;
    } else if (std::abs(dev - best_dev) <= 1e-9) {
      if (turns < best_turns || (turns == best_turns && left && !best_left)) better = true;
    }
    if (better) {
      best = h;
      best_dev = dev;
      best_turns = turns;
      best_left = left;
    }
  }
  return best;
}

Action steer(const Pose& pose, const Eigen::Vector2d& target, const BlockedFn& blocked,
             double max_deviation_deg) {
  const auto h = best_heading(pose, target, blocked, max_deviation_deg);
  if (!h) return Action::TurnLeft;
  if (*h == pose.heading_deg) return Action::MoveForward;
  return turn_toward(pose.heading_deg, *h);
}

BlockedFn blocked_on(const VisibilityMap& map, std::optional<Cell> stair_goal) {
  return [&map, stair_goal](Cell c) {
    if (!map.contains(c)) return true;
    const CellState s = map.state(c);
    return s == CellState::Occupied || (s == CellState::Stair && c != stair_goal);
  };
}

std::size_t advance_cursor(const Pose& pose, const std::vector<Cell>& path, std::size_t cursor,
                           std::size_t window) {
  std::size_t best = cursor;
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t end = std::min(path.size(), cursor + window + 1);
  for (std::size_t i = cursor; i < end; ++i) {
    const double d = (cell_center(path[i]) - pose.position).norm();
    if (d < best_d - 1e-12) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t line_of_sight_index(const Pose& pose, const std::vector<Cell>& path, std::size_t from,
                                std::size_t to, const BlockedFn& blocked) {
  std::size_t best = from;
  to = std::min(to, path.size() - 1);
  for (std::size_t i = from; i <= to; ++i) {
    bool clear = true;
    trace_segment(pose.position, cell_center(path[i]), [&](Cell c) {
      if (blocked(c)) {
        clear = false;
        return false;
      }
      return true;
    });
    if (!clear) break;
    best = i;
  }
  return best;
}

std::optional<std::vector<Action>> plan_fine_approach(const Pose& pose, const Eigen::Vector2d& target,
                                                      double radius_m, const BlockedFn& blocked, int max_expansions) {
  struct Node {
    Eigen::Vector2d position;
    int heading;
    int g;
    int parent;
    Action action;
  };
  auto heuristic = [&](const Eigen::Vector2d& p) {
    const double excess = (p - target).norm() - radius_m;
    return excess <= 0.0 ? 0 : static_cast<int>(std::ceil(excess / kCellSize - 1e-9));
  };
  auto key = [](const Eigen::Vector2d& p, int heading) {
    return std::make_tuple(std::llround(p.x() * 1e6), std::llround(p.y() * 1e6), heading);
  };
  using Entry = std::tuple<int, int, int>;  // f, h, node index
  std::vector<Node> nodes{{pose.position, pose.heading_deg, 0, -1, Action::Stop}};
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::set<std::tuple<long long, long long, int>> seen{key(pose.position, pose.heading_deg)};
  open.push({heuristic(pose.position), heuristic(pose.position), 0});
  int expansions = 0;
  while (!open.empty() && expansions < max_expansions) {
    const auto [f, h, idx] = open.top();
    open.pop();
    ++expansions;
    const Node cur = nodes[static_cast<std::size_t>(idx)];
    if ((cur.position - target).norm() <= radius_m + 1e-9) {
      std::vector<Action> actions;
      for (int i = idx; nodes[static_cast<std::size_t>(i)].parent >= 0; i = nodes[static_cast<std::size_t>(i)].parent) {
        actions.push_back(nodes[static_cast<std::size_t>(i)].action);
      }
      std::reverse(actions.begin(), actions.end());
      return actions;
    }
    const std::pair<Action, int> turns[] = {{Action::TurnLeft, (cur.heading + 360 - kHeadingStepDeg) % 360},
                                            {Action::TurnRight, (cur.heading + kHeadingStepDeg) % 360}};
    auto push = [&](const Eigen::Vector2d& p, int heading, Action a) {
      if (!seen.insert(key(p, heading)).second) return;
      nodes.push_back({p, heading, cur.g + 1, idx, a});
      const int nh = heuristic(p);
      open.push({cur.g + 1 + nh, nh, static_cast<int>(nodes.size() - 1)});
    };
    const Eigen::Vector2d next = cur.position + kCellSize * heading_vector(cur.heading);
    if (cell_at(next) == cell_at(cur.position) || !blocked(cell_at(next))) push(next, cur.heading, Action::MoveForward);
    for (const auto& [a, heading] : turns) push(cur.position, heading, a);
  }
  return std::nullopt;
}

}  // namespace aerr
