#pragma once

#include "aerr/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aerr {

enum class CellKind : std::uint8_t { Free, Obstacle, Door, StairUp, StairDown };

enum class Action : std::uint8_t { MoveForward, TurnLeft, TurnRight, LookUp, LookDown, Stop };

inline constexpr int kHeadingStepDeg = 30;
inline constexpr int kHeadingCount = 12;

/// Exact unit vector of a heading; axis-aligned headings have exact zero components.
Eigen::Vector2d heading_vector(int heading_deg);

std::string_view to_string(CellKind kind);
std::string_view to_string(Action action);
std::optional<Action> parse_action(std::string_view name);

inline bool is_stair(CellKind k) { return k == CellKind::StairUp || k == CellKind::StairDown; }
inline bool is_passable(CellKind k) { return k != CellKind::Obstacle; }

/// Interned semantic annotation; names live in the world's LabelTable.
struct SemanticLabel {
  int category = -1;  ///< -1: no object category
  int room_id = -1;   ///< -1: not part of a room (walls)

  friend bool operator==(const SemanticLabel&, const SemanticLabel&) = default;
};

class LabelTable {
 public:
  int intern_category(const std::string& name);
  std::optional<int> find_category(std::string_view name) const;
  const std::string& category_name(int id) const;
  void set_room_type(int room_id, std::string type) { room_types_[room_id] = std::move(type); }
  const std::string& room_type(int room_id) const;
  const std::vector<std::string>& categories() const { return categories_; }
  const std::map<int, std::string>& room_types() const { return room_types_; }

 private:
  std::vector<std::string> categories_;
  std::map<int, std::string> room_types_;
};

struct Pose {
  int floor = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  ///< meters
  int heading_deg = 0;  ///< multiple of 30; direction (cos, sin) in lattice coordinates

  Cell cell() const { return cell_at(position); }
  Eigen::Vector2d direction() const;
  friend bool operator==(const Pose& a, const Pose& b) {
    return a.floor == b.floor && a.position == b.position && a.heading_deg == b.heading_deg;
  }
};

Pose pose_at_cell(int floor, Cell c, int heading_deg);

struct StairLink {
  int to_floor = 0;
  Cell to;
  bool hidden = false;  ///< geometric stair detection misses this entrance
};

struct VisibleCell {
  Cell cell;
  CellKind kind = CellKind::Free;
  SemanticLabel label;
  bool stair_hidden = false;
};

struct Observation {
  int floor = 0;
  Pose pose;
  std::vector<VisibleCell> cells;  ///< row-major order
  std::vector<Cell> doors_in_view;
};

struct FloorGrid {
  int width = 0;
  int height = 0;
  Grid<CellKind> kinds;
  Grid<SemanticLabel> labels;
  std::map<Cell, StairLink> stairs;
};

/// Ground-truth scenario; immutable after loading.
struct MultiFloorWorld {
  std::string name;
  std::vector<std::string> tags;
  std::vector<FloorGrid> floors;
  LabelTable labels;
  Pose start;
  std::string target_category;
  int target_category_id = -1;
  std::optional<double> optimal_path_length_m;

  bool contains(int floor, Cell c) const {
    return floor >= 0 && floor < static_cast<int>(floors.size()) && floors[floor].kinds.contains(c);
  }
  CellKind kind(int floor, Cell c) const { return floors[floor].kinds[c]; }
  const SemanticLabel& label(int floor, Cell c) const { return floors[floor].labels[c]; }
  const StairLink* stair_link(int floor, Cell c) const;
  std::vector<FloorCell> target_cells() const;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

MultiFloorWorld load_scenario(const std::filesystem::path& path);
MultiFloorWorld parse_scenario(const nlohmann::json& doc);

/// Ray-cast field of view. A cell is visible when its center lies within range and inside the
/// cone, and the segment from the agent to that center crosses no Obstacle before reaching it.
/// The agent's own cell is always visible. fov_deg <= 0 yields only the agent's cell.
Observation sense(const MultiFloorWorld& world, const Pose& pose, double fov_deg, double range_m);

struct StepOutcome {
  Pose pose;
  bool collided = false;
  bool floor_changed = false;
  double distance_m = 0.0;
};

StepOutcome step(const MultiFloorWorld& world, const Pose& pose, Action action);

/// Distance from the pose to the nearest target-category cell center on the same floor.
double distance_to_category(const MultiFloorWorld& world, const Pose& pose, int category_id);

bool is_success(const MultiFloorWorld& world, const Pose& pose, std::string_view target_category,
                bool stop_issued, double success_radius_m);

/// Shortest traversal length from the start pose to the nearest target cell center on the
/// ground-truth world, crossing floors through stair links. nullopt when unreachable.
std::optional<double> ground_truth_shortest_path(const MultiFloorWorld& world);

}  // namespace aerr
