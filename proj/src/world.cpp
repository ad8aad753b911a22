#include "aerr/world.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace aerr {

namespace {

constexpr double kSqrt3Half = 0.86602540378443864676;

CellKind parse_legend(char c, int floor, int row) {
  switch (c) {
    case '.': return CellKind::Free;
    case '#': return CellKind::Obstacle;
    case 'D': return CellKind::Door;
    case 'U': return CellKind::StairUp;
    case 'd': return CellKind::StairDown;
    default: {
      std::ostringstream msg;
      msg << "floor " << floor << " row " << row << ": unknown legend character '" << c << "'";
      throw ParseError(msg.str());
    }
  }
}

Cell parse_xy(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [x, y] pair");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

Cell parse_cell_key(const std::string& key) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) throw ParseError("semantics key '" + key + "' is not \"x,y\"");
  try {
    return {std::stoi(key.substr(0, comma)), std::stoi(key.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ParseError("semantics key '" + key + "' is not \"x,y\"");
  }
}

std::string where(int floor, Cell c) {
  std::ostringstream os;
  os << "floor " << floor << " cell (" << c.x << "," << c.y << ")";
  return os.str();
}

constexpr std::array<Cell, 4> kNeighbors4 = {Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}};

void assign_rooms(FloorGrid& fg, int floor, const nlohmann::json& jfloor, LabelTable& labels,
                  int& next_auto_room, std::vector<std::string>& violations) {
  auto flood = [&](Cell seed, int room_id) {
    std::queue<Cell> open;
    open.push(seed);
    fg.labels[seed].room_id = room_id;
    while (!open.empty()) {
      const Cell c = open.front();
      open.pop();
      for (Cell d : kNeighbors4) {
        const Cell n{c.x + d.x, c.y + d.y};
        if (!fg.kinds.contains(n)) continue;
        const CellKind k = fg.kinds[n];
        if (k == CellKind::Obstacle || k == CellKind::Door) continue;
        if (fg.labels[n].room_id != -1) continue;
        fg.labels[n].room_id = room_id;
        open.push(n);
      }
    }
  };

  if (jfloor.contains("rooms")) {
    for (const auto& jr : jfloor.at("rooms")) {
      const int id = jr.at("id").get<int>();
      const Cell seed = parse_xy(jr.at("seed"));
      labels.set_room_type(id, jr.value("type", std::string("room")));
      if (!fg.kinds.contains(seed) || fg.kinds[seed] == CellKind::Obstacle ||
          fg.kinds[seed] == CellKind::Door) {
        violations.push_back("room " + std::to_string(id) + " seed is not a free cell at " +
                             where(floor, seed));
        continue;
      }
      if (fg.labels[seed].room_id != -1) {
        violations.push_back("room " + std::to_string(id) + " seed already belongs to room " +
                             std::to_string(fg.labels[seed].room_id));
        continue;
      }
      flood(seed, id);
    }
  } else {
    for (int y = 0; y < fg.height; ++y) {
      for (int x = 0; x < fg.width; ++x) {
        const Cell c{x, y};
        const CellKind k = fg.kinds[c];
        if (k == CellKind::Obstacle || k == CellKind::Door || fg.labels[c].room_id != -1) continue;
        labels.set_room_type(next_auto_room, "room");
        flood(c, next_auto_room++);
      }
    }
  }
  // Doors join the lowest-id adjacent room.
  for (int y = 0; y < fg.height; ++y) {
    for (int x = 0; x < fg.width; ++x) {
      const Cell c{x, y};
      if (fg.kinds[c] != CellKind::Door) continue;
      int best = -1;
      for (Cell d : kNeighbors4) {
        const Cell n{c.x + d.x, c.y + d.y};
        if (!fg.kinds.contains(n) || fg.kinds[n] == CellKind::Door) continue;
        const int r = fg.labels[n].room_id;
        if (r >= 0 && (best < 0 || r < best)) best = r;
      }
      fg.labels[c].room_id = best;
    }
  }
}

}  // namespace

// Exact unit vectors for the twelve headings so that axis-aligned motion stays on the lattice.
Eigen::Vector2d heading_vector(int heading_deg) {
  static const std::array<Eigen::Vector2d, kHeadingCount> table = {
      Eigen::Vector2d{1.0, 0.0},          Eigen::Vector2d{kSqrt3Half, 0.5},
      Eigen::Vector2d{0.5, kSqrt3Half},   Eigen::Vector2d{0.0, 1.0},
      Eigen::Vector2d{-0.5, kSqrt3Half},  Eigen::Vector2d{-kSqrt3Half, 0.5},
      Eigen::Vector2d{-1.0, 0.0},         Eigen::Vector2d{-kSqrt3Half, -0.5},
      Eigen::Vector2d{-0.5, -kSqrt3Half}, Eigen::Vector2d{0.0, -1.0},
      Eigen::Vector2d{0.5, -kSqrt3Half},  Eigen::Vector2d{kSqrt3Half, -0.5}};
  const int idx = ((heading_deg / kHeadingStepDeg) % kHeadingCount + kHeadingCount) % kHeadingCount;
  return table[idx];
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Free: return "Free";
    case CellKind::Obstacle: return "Obstacle";
    case CellKind::Door: return "Door";
    case CellKind::StairUp: return "StairUp";
    case CellKind::StairDown: return "StairDown";
  }
  return "?";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::MoveForward: return "MOVE_FORWARD";
    case Action::TurnLeft: return "TURN_LEFT";
    case Action::TurnRight: return "TURN_RIGHT";
    case Action::LookUp: return "LOOK_UP";
    case Action::LookDown: return "LOOK_DOWN";
    case Action::Stop: return "STOP";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view name) {
  for (Action a : {Action::MoveForward, Action::TurnLeft, Action::TurnRight, Action::LookUp,
                   Action::LookDown, Action::Stop}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

int LabelTable::intern_category(const std::string& name) {
  if (auto id = find_category(name)) return *id;
  categories_.push_back(name);
  return static_cast<int>(categories_.size()) - 1;
}

std::optional<int> LabelTable::find_category(std::string_view name) const {
  const auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) return std::nullopt;
  return static_cast<int>(it - categories_.begin());
}

const std::string& LabelTable::category_name(int id) const {
  static const std::string empty;
  if (id < 0 || id >= static_cast<int>(categories_.size())) return empty;
  return categories_[id];
}

const std::string& LabelTable::room_type(int room_id) const {
  static const std::string unknown = "unknown";
  const auto it = room_types_.find(room_id);
  return it == room_types_.end() ? unknown : it->second;
}

Eigen::Vector2d Pose::direction() const { return heading_vector(heading_deg); }

Pose pose_at_cell(int floor, Cell c, int heading_deg) {
  Pose p;
  p.floor = floor;
  p.position = cell_center(c);
  p.heading_deg = ((heading_deg % 360) + 360) % 360;
  return p;
}

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "scenario validation failed:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

const StairLink* MultiFloorWorld::stair_link(int floor, Cell c) const {
  const auto& stairs = floors.at(floor).stairs;
  const auto it = stairs.find(c);
  return it == stairs.end() ? nullptr : &it->second;
}

std::vector<FloorCell> MultiFloorWorld::target_cells() const {
  std::vector<FloorCell> out;
  for (int f = 0; f < static_cast<int>(floors.size()); ++f) {
    const auto& fg = floors[f];
    for (int y = 0; y < fg.height; ++y) {
      for (int x = 0; x < fg.width; ++x) {
        const Cell c{x, y};
        if (fg.labels[c].category == target_category_id && fg.kinds[c] != CellKind::Obstacle) {
          out.push_back({f, c});
        }
      }
    }
  }
  return out;
}

MultiFloorWorld load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  MultiFloorWorld world = parse_scenario(doc);
  if (world.name.empty()) world.name = path.stem().string();
  return world;
}

MultiFloorWorld parse_scenario(const nlohmann::json& doc) {
  MultiFloorWorld world;
  std::vector<std::string> violations;
  try {
    world.name = doc.value("name", std::string{});
    if (doc.contains("tags")) world.tags = doc.at("tags").get<std::vector<std::string>>();
    const auto& jfloors = doc.at("floors");
    if (!jfloors.is_array() || jfloors.empty()) throw ParseError("'floors' must be a non-empty list");

    int next_auto_room = 0;
    for (const auto& jf : jfloors) {
      const int f = static_cast<int>(world.floors.size());
      const auto rows = jf.at("grid").get<std::vector<std::string>>();
      if (rows.empty() || rows.front().empty()) throw ParseError("floor grid is empty");
      FloorGrid fg;
      fg.width = static_cast<int>(rows.front().size());
      fg.height = static_cast<int>(rows.size());
      fg.kinds = Grid<CellKind>(fg.width, fg.height, CellKind::Obstacle);
      fg.labels = Grid<SemanticLabel>(fg.width, fg.height);
      for (int y = 0; y < fg.height; ++y) {
        if (static_cast<int>(rows[y].size()) != fg.width) {
          throw ParseError("floor " + std::to_string(f) + " row " + std::to_string(y) +
                           " has inconsistent width");
        }
        for (int x = 0; x < fg.width; ++x) fg.kinds[Cell{x, y}] = parse_legend(rows[y][x], f, y);
      }
      world.floors.push_back(std::move(fg));
    }

    // Semantics and rooms.
    for (int f = 0; f < static_cast<int>(world.floors.size()); ++f) {
      auto& fg = world.floors[f];
      const auto& jf = jfloors.at(f);
      if (jf.contains("semantics")) {
        for (const auto& [key, value] : jf.at("semantics").items()) {
          const Cell c = parse_cell_key(key);
          if (!fg.kinds.contains(c)) {
            violations.push_back("semantics entry outside grid at " + where(f, c));
            continue;
          }
          if (value.contains("category")) {
            fg.labels[c].category = world.labels.intern_category(value.at("category").get<std::string>());
          }
          if (value.contains("room_id")) {
            fg.labels[c].room_id = value.at("room_id").get<int>();
            if (value.contains("room_type")) {
              world.labels.set_room_type(fg.labels[c].room_id, value.at("room_type").get<std::string>());
            }
          }
        }
      }
      assign_rooms(fg, f, jf, world.labels, next_auto_room, violations);
      for (int y = 0; y < fg.height; ++y) {
        for (int x = 0; x < fg.width; ++x) {
          const Cell c{x, y};
          if (fg.kinds[c] != CellKind::Obstacle && fg.labels[c].room_id < 0) {
            violations.push_back("cell without room at " + where(f, c));
          }
        }
      }
    }

    // Stairs: links may be declared from either end; both ends must agree.
    for (int f = 0; f < static_cast<int>(world.floors.size()); ++f) {
      const auto& jf = jfloors.at(f);
      if (!jf.contains("stairs")) continue;
      for (const auto& js : jf.at("stairs")) {
        const Cell from = parse_xy(js.at("from"));
        const int to_floor = js.at("to_floor").get<int>();
        const Cell to = parse_xy(js.at("to"));
        const bool hidden = js.value("hidden", false);
        if (!world.contains(f, from) || !world.contains(to_floor, to)) {
          violations.push_back("stair link out of bounds at " + where(f, from));
          continue;
        }
        const CellKind kf = world.floors[f].kinds[from];
        const CellKind kt = world.floors[to_floor].kinds[to];
        const bool up_ok = kf == CellKind::StairUp && kt == CellKind::StairDown && to_floor == f + 1;
        const bool down_ok = kf == CellKind::StairDown && kt == CellKind::StairUp && to_floor == f - 1;
        if (!up_ok && !down_ok) {
          violations.push_back("unmatched stair: link from " + where(f, from) + " to " +
                               where(to_floor, to) + " does not join StairUp to StairDown on adjacent floors");
          continue;
        }
        auto add = [&](int fl, Cell a, int tf, Cell b) {
          auto& stairs = world.floors[fl].stairs;
          auto it = stairs.find(a);
          if (it != stairs.end() && (it->second.to_floor != tf || it->second.to != b)) {
            violations.push_back("unmatched stair: conflicting links at " + where(fl, a));
            return;
          }
          stairs[a] = StairLink{tf, b, hidden || (it != stairs.end() && it->second.hidden)};
        };
        add(f, from, to_floor, to);
        add(to_floor, to, f, from);
      }
    }
    for (int f = 0; f < static_cast<int>(world.floors.size()); ++f) {
      const auto& fg = world.floors[f];
      for (int y = 0; y < fg.height; ++y) {
        for (int x = 0; x < fg.width; ++x) {
          const Cell c{x, y};
          if (is_stair(fg.kinds[c]) && !fg.stairs.contains(c)) {
            violations.push_back(std::string("unmatched stair: ") + std::string(to_string(fg.kinds[c])) +
                                 " at " + where(f, c) + " has no linked stair on the " +
                                 (fg.kinds[c] == CellKind::StairUp ? "floor above" : "floor below"));
          }
        }
      }
    }

    const auto& js = doc.at("start");
    const int sf = js.at("floor").get<int>();
    const Cell sc{js.at("x").get<int>(), js.at("y").get<int>()};
    const int heading = js.value("heading_deg", 0);
    if (heading % kHeadingStepDeg != 0) violations.push_back("start heading must be a multiple of 30");
    world.start = pose_at_cell(sf, sc, heading);
    if (!world.contains(sf, sc)) {
      violations.push_back("start cell out of bounds");
    } else if (!is_passable(world.kind(sf, sc)) || is_stair(world.kind(sf, sc))) {
      violations.push_back("start cell is not free at " + where(sf, sc));
    }

    world.target_category = doc.at("target_category").get<std::string>();
    if (doc.contains("optimal_path_length_m")) {
      world.optimal_path_length_m = doc.at("optimal_path_length_m").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scenario: ") + e.what());
  }

  if (auto id = world.labels.find_category(world.target_category)) world.target_category_id = *id;
  if (world.target_cells().empty()) {
    violations.push_back("missing target: category '" + world.target_category +
                         "' does not label any traversable cell");
  }
  if (violations.empty() && !ground_truth_shortest_path(world)) {
    violations.push_back("disconnected start cell: no target reachable from the start");
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return world;
}

Observation sense(const MultiFloorWorld& world, const Pose& pose, double fov_deg, double range_m) {
  Observation obs;
  obs.floor = pose.floor;
  obs.pose = pose;
  const FloorGrid& fg = world.floors.at(pose.floor);
  const Cell here = pose.cell();

  auto record = [&](Cell c) {
    VisibleCell vc;
    vc.cell = c;
    vc.kind = fg.kinds[c];
    vc.label = fg.labels[c];
    if (is_stair(vc.kind)) {
      const auto* link = world.stair_link(pose.floor, c);
      vc.stair_hidden = link != nullptr && link->hidden;
    }
    obs.cells.push_back(vc);
    if (vc.kind == CellKind::Door) obs.doors_in_view.push_back(c);
  };

  const double half_fov = fov_deg / 2.0;
  const bool full_circle = fov_deg >= 360.0;
  const int reach = static_cast<int>(std::ceil(range_m / kCellSize)) + 1;
  const Eigen::Vector2d dir = pose.direction();
  for (int y = std::max(0, here.y - reach); y <= std::min(fg.height - 1, here.y + reach); ++y) {
    for (int x = std::max(0, here.x - reach); x <= std::min(fg.width - 1, here.x + reach); ++x) {
      const Cell c{x, y};
      if (c == here) {
        record(c);
        continue;
      }
      if (fov_deg <= 0.0) continue;
      const Eigen::Vector2d v = cell_center(c) - pose.position;
      const double dist = v.norm();
      if (dist > range_m + 1e-9) continue;
      if (!full_circle) {
        const double cosang = std::clamp(v.dot(dir) / dist, -1.0, 1.0);
        const double ang = std::acos(cosang) * 180.0 / kPi;
        if (ang > half_fov + 1e-9) continue;
      }
      bool clear = true;
      trace_segment(pose.position, cell_center(c), [&](Cell t) {
        if (t == c) return false;
        if (t != here && (!fg.kinds.contains(t) || fg.kinds[t] == CellKind::Obstacle)) {
          clear = false;
          return false;
        }
        return true;
      });
      if (clear) record(c);
    }
  }
  return obs;
}

StepOutcome step(const MultiFloorWorld& world, const Pose& pose, Action action) {
  StepOutcome out;
  out.pose = pose;
  switch (action) {
    case Action::TurnLeft:
      out.pose.heading_deg = (pose.heading_deg + 360 - kHeadingStepDeg) % 360;
      return out;
    case Action::TurnRight:
      out.pose.heading_deg = (pose.heading_deg + kHeadingStepDeg) % 360;
      return out;
    case Action::LookUp:
    case Action::LookDown:
    case Action::Stop:
      return out;
    case Action::MoveForward:
      break;
  }
  const Eigen::Vector2d next = pose.position + kCellSize * heading_vector(pose.heading_deg);
  const Cell from = pose.cell();
  const Cell to = cell_at(next);
  if (!world.contains(pose.floor, to) || world.kind(pose.floor, to) == CellKind::Obstacle) {
    out.collided = true;
    return out;
  }
  out.distance_m = kCellSize;
  if (to != from && is_stair(world.kind(pose.floor, to))) {
    const StairLink* link = world.stair_link(pose.floor, to);
    out.pose = pose_at_cell(link->to_floor, link->to, pose.heading_deg);
    out.floor_changed = true;
    return out;
  }
  out.pose.position = next;
  return out;
}

double distance_to_category(const MultiFloorWorld& world, const Pose& pose, int category_id) {
  double best = std::numeric_limits<double>::infinity();
  if (category_id < 0) return best;
  const FloorGrid& fg = world.floors.at(pose.floor);
  for (int y = 0; y < fg.height; ++y) {
    for (int x = 0; x < fg.width; ++x) {
      const Cell c{x, y};
      if (fg.labels[c].category != category_id) continue;
      best = std::min(best, (cell_center(c) - pose.position).norm());
    }
  }
  return best;
}

bool is_success(const MultiFloorWorld& world, const Pose& pose, std::string_view target_category,
                bool stop_issued, double success_radius_m) {
  if (!stop_issued) return false;
  const auto id = world.labels.find_category(target_category);
  if (!id) return false;
  return distance_to_category(world, pose, *id) <= success_radius_m + 1e-9;
}

std::optional<double> ground_truth_shortest_path(const MultiFloorWorld& world) {
  if (world.target_category_id < 0) return std::nullopt;
  using Node = std::pair<double, FloorCell>;
  std::map<FloorCell, double> dist;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  const FloorCell start{world.start.floor, world.start.cell()};
  dist[start] = 0.0;
  open.push({0.0, start});
  std::set<FloorCell> closed;
  while (!open.empty()) {
    const auto [d, node] = open.top();
    open.pop();
    if (closed.contains(node)) continue;
    closed.insert(node);
    const FloorGrid& fg = world.floors[node.floor];
    if (fg.labels[node.cell].category == world.target_category_id) return d;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell n{node.cell.x + dx, node.cell.y + dy};
        if (!fg.kinds.contains(n) || fg.kinds[n] == CellKind::Obstacle) continue;
        if (dx != 0 && dy != 0) {
          if (fg.kinds[Cell{node.cell.x + dx, node.cell.y}] == CellKind::Obstacle ||
              fg.kinds[Cell{node.cell.x, node.cell.y + dy}] == CellKind::Obstacle) {
            continue;
          }
        }
        const double step_cost = (dx != 0 && dy != 0) ? kCellSize * std::sqrt(2.0) : kCellSize;
        FloorCell next{node.floor, n};
        if (is_stair(fg.kinds[n])) {
          const StairLink& link = fg.stairs.at(n);
          next = FloorCell{link.to_floor, link.to};
        }
        const double nd = d + step_cost;
        auto it = dist.find(next);
        if (it == dist.end() || nd < it->second) {
          dist[next] = nd;
          open.push({nd, next});
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace aerr
