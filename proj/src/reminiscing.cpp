#include "aerr/reminiscing.hpp"

#include <cmath>

namespace aerr {

std::vector<int> verify_targets(std::span<const KeyPoint> keypoints, const std::string& target, Reasoner& reasoner,
                                const LabelTable& labels, const std::set<int>& visited_floors) {
  if (keypoints.empty()) return {};
  std::vector<KeypointSummary> summaries;
  for (const auto& kp : keypoints) summaries.push_back(summarize_keypoint(kp, labels, visited_floors));
  const ReasonerDecision d = reasoner.decide(target_review_query(summaries, target));
  std::vector<int> ids;
  for (int idx : d.selected) ids.push_back(summaries[static_cast<std::size_t>(idx)].id);
  return ids;
}

StairChoice find_staircase(std::span<const KeyPoint> keypoints, const VisibilityMap& map, Cell agent,
                           const std::set<int>& visited_floors, Reasoner& reasoner, const LabelTable& labels,
                           const std::string& target) {
  const auto stairs = stair_frontier_cells(map, visited_floors);
  if (!stairs.empty()) {
    const auto field = distance_field(map, agent, TraversalRules{});
    std::optional<Cell> best;
    for (Cell s : stairs) {
      if (!std::isfinite(field[s])) continue;
      if (!best || field[s] < field[*best]) best = s;
    }
    if (best) return {StairChoice::Source::StairFrontier, *best, std::nullopt, {}};
  }
  if (keypoints.empty()) throw StaircaseNotFound();
  std::vector<KeypointSummary> summaries;
  for (const auto& kp : keypoints) summaries.push_back(summarize_keypoint(kp, labels, visited_floors));
  const ReasonerDecision d = reasoner.decide(stair_review_query(summaries, target));
  const KeypointSummary& pick = summaries.at(static_cast<std::size_t>(d.chosen().value_or(0)));
  return {StairChoice::Source::Keypoint, pick.position, pick.id, pick.stair_cells};
}

LocalSketch stair_alignment_sketch(const VisibilityMap& map, const Pose& pose, Cell stair, std::span<const Cell> hints,
                                   int margin) {
  LocalSketch s = make_local_sketch(map, pose, stair, margin);
  for (Cell h : hints) {
    const int x = h.x - s.origin.x;
    const int y = h.y - s.origin.y;
    if (y >= 0 && y < static_cast<int>(s.rows.size()) && x >= 0 && x < static_cast<int>(s.rows[y].size())) {
      s.rows[y][x] = state_char(CellState::Stair);
    }
  }
  return s;
}

AgentState on_floor_change(const AgentState& state, std::map<int, FloorMaps>& maps, int new_floor, int width,
                           int height) {
  if (!maps.contains(new_floor)) maps.emplace(new_floor, FloorMaps(new_floor, width, height));
  Triggers t;
  t.floor_changed = true;
  return transition(state, t, TransitionContext{});
}

}  // namespace aerr
