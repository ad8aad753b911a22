#pragma once

#include "aerr/mapping.hpp"
#include "aerr/reasoner.hpp"
#include "aerr/state_machine.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace aerr {

/// Keypoint ids the reasoner wants revisited, in visit order. No query is issued when there
/// are no keypoints.
std::vector<int> verify_targets(std::span<const KeyPoint> keypoints, const std::string& target, Reasoner& reasoner,
                                const LabelTable& labels, const std::set<int>& visited_floors);

class StaircaseNotFound : public std::runtime_error {
 public:
  StaircaseNotFound() : std::runtime_error("no stair frontier and no keypoint left to review") {}
};

struct StairChoice {
  enum class Source { StairFrontier, Keypoint };
  Source source = Source::StairFrontier;
  Cell goal;                      ///< stair cell, or the keypoint position
  std::optional<int> keypoint_id;
  std::vector<Cell> stair_hints;  ///< stair cells seen in the chosen keypoint's snapshot
};

/// Known stair frontiers win without a reasoner call (nearest reachable first); otherwise the
/// reasoner reviews `keypoints`. Throws StaircaseNotFound when neither exists.
StairChoice find_staircase(std::span<const KeyPoint> keypoints, const VisibilityMap& map, Cell agent,
                           const std::set<int>& visited_floors, Reasoner& reasoner, const LabelTable& labels,
                           const std::string& target);

/// Sketch for stair alignment: the belief map with the snapshot's stair cells drawn as 'S'.
LocalSketch stair_alignment_sketch(const VisibilityMap& map, const Pose& pose, Cell stair,
                                   std::span<const Cell> hints, int margin);

/// Allocates maps for a first visit and moves the agent back to Exploration/Fast.
AgentState on_floor_change(const AgentState& state, std::map<int, FloorMaps>& maps, int new_floor, int width,
                           int height);

}  // namespace aerr
