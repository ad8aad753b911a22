#pragma once

#include "aerr/mapping.hpp"
#include "aerr/world.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace aerr {

using BlockedFn = std::function<bool(Cell)>;

/// Single turn that reduces the angular error toward `desired`; a half-turn tie goes left.
Action turn_toward(int current_heading_deg, int desired_heading_deg);

/// Lattice cell a MoveForward along `heading_deg` would land in.
Cell forward_cell(const Pose& pose, int heading_deg);

/// Bearing from the pose to `target`, in degrees within [0, 360).
double bearing_deg(const Pose& pose, const Eigen::Vector2d& target);

/// Heading with the smallest deviation from the bearing to `target` whose forward cell is not
/// blocked, considering only headings within `max_deviation_deg` of the bearing. Ties prefer the
/// current heading, then fewer turns, then the left side.
std::optional<int> best_heading(const Pose& pose, const Eigen::Vector2d& target, const BlockedFn& blocked,
                                double max_deviation_deg = 180.0);

/// Greedy heading-then-move step toward `target`. Turns in place when every admissible heading
/// is blocked.
Action steer(const Pose& pose, const Eigen::Vector2d& target, const BlockedFn& blocked,
             double max_deviation_deg = 180.0);

/// Off the map, Occupied, or a Stair cell other than `stair_goal`: stepping onto a stair
/// changes floors, so only an intended stair is entered.
BlockedFn blocked_on(const VisibilityMap& map, std::optional<Cell> stair_goal = std::nullopt);

/// Nearest path index to the pose among [cursor, cursor + window], never moving backwards.
std::size_t advance_cursor(const Pose& pose, const std::vector<Cell>& path, std::size_t cursor,
                           std::size_t window);

/// Furthest index in [from, to] whose cell center the pose sees without crossing a blocked cell.
std::size_t line_of_sight_index(const Pose& pose, const std::vector<Cell>& path, std::size_t from,
                                std::size_t to, const BlockedFn& blocked);

/// Fewest MoveForward/TurnLeft/TurnRight actions bringing the position within `radius_m` of
/// `target`, searched over continuous poses. nullopt when the expansion budget runs out.
std::optional<std::vector<Action>> plan_fine_approach(const Pose& pose, const Eigen::Vector2d& target,
                                                      double radius_m, const BlockedFn& blocked,
                                                      int max_expansions = 50000);

}  // namespace aerr
