#pragma once

#include "aerr/geometry.hpp"
#include "aerr/priors.hpp"
#include "aerr/world.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aerr {

enum class CellState : std::uint8_t { Unknown, Free, Occupied, Door, Stair };

class FloorMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-floor occupancy belief. Cells only ever leave Unknown.
class VisibilityMap {
 public:
  VisibilityMap() = default;
  VisibilityMap(int floor, int width, int height);

  int floor() const { return floor_; }
  int width() const { return states_.width(); }
  int height() const { return states_.height(); }
  bool contains(Cell c) const { return states_.contains(c); }

  CellState state(Cell c) const { return states_[c]; }
  const SemanticLabel& label(Cell c) const { return labels_[c]; }
  /// Floor a Stair cell leads to, or -1.
  int stair_destination(Cell c) const { return stair_to_[c]; }

  /// Records knowledge about a cell; ignored when the cell is already known.
  bool mark(Cell c, CellState s, SemanticLabel label = {}, int stair_to = -1);

  std::size_t unknown_count() const { return unknown_; }
  std::size_t cell_count() const { return states_.size(); }

  /// One character per cell: '?' unknown, '.' free, '#' occupied, 'D' door, 'S' stair.
  std::string dump() const;
  static VisibilityMap parse(int floor, const std::vector<std::string>& rows);

  friend bool operator==(const VisibilityMap&, const VisibilityMap&) = default;

 private:
  int floor_ = 0;
  Grid<CellState> states_;
  Grid<SemanticLabel> labels_;
  Grid<int> stair_to_;
  std::size_t unknown_ = 0;
};

char state_char(CellState s);

enum class FrontierKind : std::uint8_t { IntraFloor, Stair };

struct Frontier {
  int floor = 0;
  Cell cell;  ///< representative cell of the cluster
  FrontierKind kind = FrontierKind::IntraFloor;
  double s_sem = 0.0;
  double s_dist = 0.0;
  double value = 0.0;
  std::vector<Cell> members;  ///< raw frontier cells of the cluster, sorted
};

enum class KeyPointKind : std::uint8_t { RoomEntrance, OpenFrontier };

std::string_view to_string(KeyPointKind kind);

struct KeyPoint {
  int id = 0;
  int floor = 0;
  Cell position;
  KeyPointKind kind = KeyPointKind::RoomEntrance;
  double open_area_m2 = 0.0;
  Observation snapshot;
  int visited_step = 0;
  bool consumed = false;
};

struct KeypointConfig {
  double open_area_threshold_m2 = 8.0;
  double dedup_radius_m = 0.5;
  double open_area_range_m = 3.0;
};

/// One floor's share of the global representation: visibility, value and keypoint layers.
struct FloorMaps {
  int floor = 0;
  VisibilityMap visibility;
  std::vector<Frontier> frontiers;
  std::vector<KeyPoint> keypoints;
  int next_keypoint_id = 0;

  FloorMaps() = default;
  FloorMaps(int floor_index, int width, int height)
      : floor(floor_index), visibility(floor_index, width, height) {}
};

/// Marks every observed cell. Hidden stair entrances are recorded as Occupied.
void integrate(FloorMaps& maps, const Observation& obs);

/// Bump-sensor update after a collision into an unseen cell.
void mark_collision(FloorMaps& maps, Cell c);

/// Free and 4-adjacent to at least one Unknown cell.
bool is_frontier_cell(const VisibilityMap& map, Cell c);

/// Raw frontier cells in lexicographic order.
std::vector<Cell> frontier_cells(const VisibilityMap& map);

/// Stair cells leading to a floor not yet in `visited_floors`.
std::vector<Cell> stair_frontier_cells(const VisibilityMap& map, const std::set<int>& visited_floors);

/// Groups cells into clusters no wider than `merge_radius` (Chebyshev) around each cluster seed.
/// Seeds are taken in lexicographic order and grow through 8-adjacent cells.
std::vector<Frontier> cluster_frontier_cells(std::span<const Cell> cells, int floor, FrontierKind kind,
                                             int merge_radius);

std::vector<Frontier> extract_frontiers(const VisibilityMap& map, const std::set<int>& visited_floors,
                                        int merge_radius = 3);

/// Best visual cue wins: max prior over the visible categories, 0 when none is related.
/// Throws UnknownTarget when the target is neither in the table nor a known scene category.
double semantic_score(std::span<const std::string> visible_categories, const std::string& target,
                      const PriorTable& priors, std::span<const std::string> scene_categories = {});

/// Known-cell categories visible from `from` on the belief map (Unknown transparent,
/// Occupied opaque but itself seen), as category ids.
std::vector<int> belief_view_categories(const VisibilityMap& map, Cell from, double range_m);

/// Linear decay with geodesic distance, clamped at zero.
template <typename Scalar>
Scalar distance_score(Scalar d, Scalar d_max) {
  return std::max(Scalar(0), Scalar(1) - d / d_max);
}

template <typename Derived>
auto distance_score(const Eigen::ArrayBase<Derived>& d, typename Derived::Scalar d_max) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) - d / d_max).max(Scalar(0));
}

template <typename Scalar>
Scalar frontier_value(Scalar s_sem, Scalar s_dist, Scalar alpha, Scalar beta) {
  return alpha * s_sem + beta * s_dist;
}

template <typename DerivedA, typename DerivedB>
auto frontier_value(const Eigen::ArrayBase<DerivedA>& s_sem, const Eigen::ArrayBase<DerivedB>& s_dist,
                    typename DerivedA::Scalar alpha, typename DerivedA::Scalar beta) {
  return alpha * s_sem + beta * s_dist;
}

/// Unobstructed area around `at`: cells within range with line of sight (Occupied opaque).
double open_area_m2(const VisibilityMap& map, Cell at, double range_m);

void update_keypoints(FloorMaps& maps, const Observation& obs, const Pose& pose,
                      std::optional<Cell> frontier_target, int step, const KeypointConfig& cfg = {});

/// Whether a move between lattice neighbours is allowed on the belief map.
/// Stair cells may only end a path; diagonals may not cut blocked corners.
struct TraversalRules {
  bool allow_unknown = false;
};

bool traversable(const VisibilityMap& map, Cell c, const TraversalRules& rules);
bool can_step(const VisibilityMap& map, Cell from, Cell to, const TraversalRules& rules);

/// Single-source geodesic distances in meters (+inf where unreachable).
Grid<double> distance_field(const VisibilityMap& map, Cell source, const TraversalRules& rules);

/// Shortest 8-connected path length; Unknown cells are usable only when `b` is a frontier cell.
std::optional<double> geodesic_distance(const VisibilityMap& map, Cell a, Cell b);

}  // namespace aerr
