#pragma once

#include "aerr/fast_thinking.hpp"
#include "aerr/mapping.hpp"
#include "aerr/reasoner.hpp"
#include "aerr/recovery.hpp"
#include "aerr/state_machine.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace aerr {

struct SensorConfig {
  double fov_deg = 90.0;
  double range_m = 3.0;
};

struct LocomotionConfig {
  double lookahead_m = 2.0;      ///< carrot distance along the path while exploring
  int spin_turns = 9;            ///< in-place turns for a full look-around with the default FOV
  bool initial_spin = true;
  double approach_search_m = 1.0;  ///< switch to the continuous approach search within this range
};

struct PlannerConfig {
  SensorConfig sensor;
  FastThinkingConfig fast;
  StuckDetectorConfig stuck;
  KeypointConfig keypoints;
  FollowConfig follow;
  EscapeConfig escape;
  double waypoint_interval_m = 1.5;
  LocomotionConfig locomotion;
  ScriptedConfig scripted;
};

struct Ablations {
  bool recovery = true;
  bool reminiscing = true;
  bool dynamic_weights = true;
  bool slow_thinking = true;
  double static_alpha = 0.5;  ///< objective weights when dynamic weights are off
  double static_beta = 0.5;
};

enum class ReasonerKind { Scripted, Remote };

struct EpisodeConfig {
  int max_steps = 500;
  double success_radius_m = 0.1;
  std::uint64_t seed = 0;
  double detection_noise = 0.0;  ///< probability a visible category is missed
  ReasonerKind reasoner = ReasonerKind::Scripted;
  RemoteConfig remote;
  Ablations ablations;
  PlannerConfig planner;

  /// Throws std::invalid_argument listing the first violated constraint.
  void validate() const;
};

nlohmann::json to_json(const EpisodeConfig& cfg);
/// Missing keys keep their defaults; values are validated.
EpisodeConfig config_from_json(const nlohmann::json& j);
EpisodeConfig load_config(const std::filesystem::path& path);

/// Stable hex digest of the canonical JSON form.
std::string config_digest(const EpisodeConfig& cfg);

}  // namespace aerr
