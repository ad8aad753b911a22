#include "aerr/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace aerr {

namespace {

constexpr std::array<Cell, 4> kNeighbors4 = {Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}};

CellState state_for(const VisibleCell& vc) {
  switch (vc.kind) {
    case CellKind::Free: return CellState::Free;
    case CellKind::Obstacle: return CellState::Occupied;
    case CellKind::Door: return CellState::Door;
    case CellKind::StairUp:
    case CellKind::StairDown: return vc.stair_hidden ? CellState::Occupied : CellState::Stair;
  }
  return CellState::Unknown;
}

}  // namespace

VisibilityMap::VisibilityMap(int floor, int width, int height)
    : floor_(floor),
      states_(width, height, CellState::Unknown),
      labels_(width, height),
      stair_to_(width, height, -1),
      unknown_(static_cast<std::size_t>(width) * height) {}

bool VisibilityMap::mark(Cell c, CellState s, SemanticLabel label, int stair_to) {
  if (!states_.contains(c) || s == CellState::Unknown) return false;
  if (states_[c] != CellState::Unknown) return false;
  states_[c] = s;
  labels_[c] = label;
  stair_to_[c] = s == CellState::Stair ? stair_to : -1;
  --unknown_;
  return true;
}

char state_char(CellState s) {
  switch (s) {
    case CellState::Unknown: return '?';
    case CellState::Free: return '.';
    case CellState::Occupied: return '#';
    case CellState::Door: return 'D';
    case CellState::Stair: return 'S';
  }
  return '?';
}

std::string VisibilityMap::dump() const {
  std::string out;
  out.reserve(static_cast<std::size_t>(width() + 1) * height());
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) out.push_back(state_char(states_[Cell{x, y}]));
    out.push_back('\n');
  }
  return out;
}

VisibilityMap VisibilityMap::parse(int floor, const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = h > 0 ? static_cast<int>(rows.front().size()) : 0;
  VisibilityMap map(floor, w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const char ch = rows[y].at(x);
      switch (ch) {
        case '.': map.mark({x, y}, CellState::Free); break;
        case '#': map.mark({x, y}, CellState::Occupied); break;
        case 'D': map.mark({x, y}, CellState::Door); break;
        case 'S': map.mark({x, y}, CellState::Stair, {}, floor + 1); break;
        default: break;
      }
    }
  }
  return map;
}

std::string_view to_string(KeyPointKind kind) {
  return kind == KeyPointKind::RoomEntrance ? "RoomEntrance" : "OpenFrontier";
}

void integrate(FloorMaps& maps, const Observation& obs) {
  if (obs.floor != maps.floor || obs.floor != maps.visibility.floor()) {
    throw FloorMismatch("observation from floor " + std::to_string(obs.floor) +
                        " integrated into maps of floor " + std::to_string(maps.floor));
  }
  for (const auto& vc : obs.cells) {
    int stair_to = -1;
    if (vc.kind == CellKind::StairUp) stair_to = obs.floor + 1;
    if (vc.kind == CellKind::StairDown) stair_to = obs.floor - 1;
    maps.visibility.mark(vc.cell, state_for(vc), vc.label, stair_to);
  }
}

void mark_collision(FloorMaps& maps, Cell c) {
  if (maps.visibility.contains(c)) maps.visibility.mark(c, CellState::Occupied);
}

bool is_frontier_cell(const VisibilityMap& map, Cell c) {
  if (!map.contains(c) || map.state(c) != CellState::Free) return false;
  for (Cell d : kNeighbors4) {
    const Cell n{c.x + d.x, c.y + d.y};
    if (map.contains(n) && map.state(n) == CellState::Unknown) return true;
  }
  return false;
}

std::vector<Cell> frontier_cells(const VisibilityMap& map) {
  std::vector<Cell> out;
  for (int x = 0; x < map.width(); ++x) {
    for (int y = 0; y < map.height(); ++y) {
      if (is_frontier_cell(map, {x, y})) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<Cell> stair_frontier_cells(const VisibilityMap& map, const std::set<int>& visited_floors) {
  std::vector<Cell> out;
  for (int x = 0; x < map.width(); ++x) {
    for (int y = 0; y < map.height(); ++y) {
      const Cell c{x, y};
      if (map.state(c) == CellState::Stair && !visited_floors.contains(map.stair_destination(c))) {
        out.push_back(c);
      }
    }
  }
  return out;
}

std::vector<Frontier> cluster_frontier_cells(std::span<const Cell> cells, int floor, FrontierKind kind,
                                             int merge_radius) {
  std::vector<Cell> sorted(cells.begin(), cells.end());
  std::sort(sorted.begin(), sorted.end());
  std::set<Cell> pending(sorted.begin(), sorted.end());
  std::vector<Frontier> out;
  for (Cell seed : sorted) {
    if (!pending.contains(seed)) continue;
    Frontier f;
    f.floor = floor;
    f.kind = kind;
    std::queue<Cell> open;
    open.push(seed);
    pending.erase(seed);
    while (!open.empty()) {
      const Cell c = open.front();
      open.pop();
      f.members.push_back(c);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const Cell n{c.x + dx, c.y + dy};
          if (!pending.contains(n) || chebyshev(n, seed) > merge_radius) continue;
          pending.erase(n);
          open.push(n);
        }
      }
    }
    std::sort(f.members.begin(), f.members.end());
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (Cell m : f.members) centroid += Eigen::Vector2d(m.x, m.y);
    centroid /= static_cast<double>(f.members.size());
    double best = std::numeric_limits<double>::infinity();
    for (Cell m : f.members) {
      const double d2 = (Eigen::Vector2d(m.x, m.y) - centroid).squaredNorm();
      if (d2 < best - 1e-12) {
        best = d2;
        f.cell = m;
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Frontier> extract_frontiers(const VisibilityMap& map, const std::set<int>& visited_floors,
                                        int merge_radius) {
  const auto intra = frontier_cells(map);
  auto out = cluster_frontier_cells(intra, map.floor(), FrontierKind::IntraFloor, merge_radius);
  const auto stairs = stair_frontier_cells(map, visited_floors);
  auto stair_clusters = cluster_frontier_cells(stairs, map.floor(), FrontierKind::Stair, merge_radius);
  out.insert(out.end(), std::make_move_iterator(stair_clusters.begin()),
             std::make_move_iterator(stair_clusters.end()));
  return out;
}

double semantic_score(std::span<const std::string> visible_categories, const std::string& target,
                      const PriorTable& priors, std::span<const std::string> scene_categories) {
  if (!priors.has_target(target) &&
      std::find(scene_categories.begin(), scene_categories.end(), target) == scene_categories.end()) {
    throw UnknownTarget("no prior knowledge about target '" + target + "'");
  }
  double best = 0.0;
  for (const auto& c : visible_categories) best = std::max(best, priors.weight(target, c));
  return best;
}

std::vector<int> belief_view_categories(const VisibilityMap& map, Cell from, double range_m) {
  std::vector<int> out;
  const int reach = static_cast<int>(std::ceil(range_m / kCellSize)) + 1;
  const Eigen::Vector2d origin = cell_center(from);
  for (int y = std::max(0, from.y - reach); y <= std::min(map.height() - 1, from.y + reach); ++y) {
    for (int x = std::max(0, from.x - reach); x <= std::min(map.width() - 1, from.x + reach); ++x) {
      const Cell c{x, y};
      if (map.state(c) == CellState::Unknown || map.label(c).category < 0) continue;
      if ((cell_center(c) - origin).norm() > range_m + 1e-9) continue;
      bool clear = true;
      trace_segment(origin, cell_center(c), [&](Cell t) {
        if (t == c) return false;
        if (t != from && map.state(t) == CellState::Occupied) {
          clear = false;
          return false;
        }
        return true;
      });
      if (clear) out.push_back(map.label(c).category);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double open_area_m2(const VisibilityMap& map, Cell at, double range_m) {
  const int reach = static_cast<int>(std::ceil(range_m / kCellSize)) + 1;
  const Eigen::Vector2d origin = cell_center(at);
  std::size_t count = 0;
  for (int y = std::max(0, at.y - reach); y <= std::min(map.height() - 1, at.y + reach); ++y) {
    for (int x = std::max(0, at.x - reach); x <= std::min(map.width() - 1, at.x + reach); ++x) {
      const Cell c{x, y};
      if (map.state(c) == CellState::Occupied) continue;
      if ((cell_center(c) - origin).norm() > range_m + 1e-9) continue;
      bool clear = true;
      trace_segment(origin, cell_center(c), [&](Cell t) {
        if (t == c) return false;
        if (map.state(t) == CellState::Occupied) {
          clear = false;
          return false;
        }
        return true;
      });
      if (clear) ++count;
    }
  }
  return static_cast<double>(count) * kCellArea;
}

void update_keypoints(FloorMaps& maps, const Observation& obs, const Pose& pose,
                      std::optional<Cell> frontier_target, int step, const KeypointConfig& cfg) {
  const auto& map = maps.visibility;
  auto duplicate = [&](Cell at, KeyPointKind kind) {
    return std::any_of(maps.keypoints.begin(), maps.keypoints.end(), [&](const KeyPoint& k) {
      return k.kind == kind && (cell_center(k.position) - cell_center(at)).norm() <= cfg.dedup_radius_m + 1e-9;
    });
  };
  auto add = [&](Cell at, KeyPointKind kind, double area) {
    KeyPoint kp;
    kp.id = maps.next_keypoint_id++;
    kp.floor = maps.floor;
    kp.position = at;
    kp.kind = kind;
    kp.open_area_m2 = area;
    kp.snapshot = obs;
    kp.visited_step = step;
    maps.keypoints.push_back(std::move(kp));
  };

  const Cell here = pose.cell();
  bool near_door = false;
  for (int dy = -1; dy <= 1 && !near_door; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const Cell n{here.x + dx, here.y + dy};
      if (map.contains(n) && map.state(n) == CellState::Door) {
        near_door = true;
        break;
      }
    }
  }
  if (near_door && !duplicate(here, KeyPointKind::RoomEntrance)) {
    add(here, KeyPointKind::RoomEntrance, open_area_m2(map, here, cfg.open_area_range_m));
  }

  if (frontier_target && map.contains(*frontier_target)) {
    const double area = open_area_m2(map, *frontier_target, cfg.open_area_range_m);
    if (area >= cfg.open_area_threshold_m2 && !duplicate(*frontier_target, KeyPointKind::OpenFrontier)) {
      add(*frontier_target, KeyPointKind::OpenFrontier, area);
    }
  }
}

bool traversable(const VisibilityMap& map, Cell c, const TraversalRules& rules) {
  if (!map.contains(c)) return false;
  switch (map.state(c)) {
    case CellState::Free:
    case CellState::Door:
    case CellState::Stair: return true;
    case CellState::Unknown: return rules.allow_unknown;
    case CellState::Occupied: return false;
  }
  return false;
}

bool can_step(const VisibilityMap& map, Cell from, Cell to, const TraversalRules& rules) {
  if (!traversable(map, to, rules)) return false;
  const int dx = to.x - from.x;
  const int dy = to.y - from.y;
  if (dx != 0 && dy != 0) {
    return traversable(map, {from.x + dx, from.y}, rules) && traversable(map, {from.x, from.y + dy}, rules);
  }
  return true;
}

Grid<double> distance_field(const VisibilityMap& map, Cell source, const TraversalRules& rules) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Grid<double> dist(map.width(), map.height(), kInf);
  if (!map.contains(source)) return dist;
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[source] = 0.0;
  open.push({0.0, dist.index(source)});
  const double diag = kCellSize * std::sqrt(2.0);
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    const Cell c = dist.cell(idx);
    if (d > dist[c]) continue;
    if (c != source && map.state(c) == CellState::Stair) continue;  // stairs end paths
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{c.x + dx, c.y + dy};
        if (!can_step(map, c, n, rules)) continue;
        const double nd = d + ((dx != 0 && dy != 0) ? diag : kCellSize);
        if (nd < dist[n]) {
          dist[n] = nd;
          open.push({nd, dist.index(n)});
        }
      }
    }
  }
  return dist;
}

std::optional<double> geodesic_distance(const VisibilityMap& map, Cell a, Cell b) {
  if (a == b) return 0.0;
  const TraversalRules rules{.allow_unknown = is_frontier_cell(map, b)};
  const auto field = distance_field(map, a, rules);
  if (!field.contains(b) || !std::isfinite(field[b])) return std::nullopt;
  return field[b];
}

}  // namespace aerr
