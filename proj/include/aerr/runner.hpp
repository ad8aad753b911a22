#pragma once

#include "aerr/config.hpp"
#include "aerr/mapping.hpp"
#include "aerr/priors.hpp"
#include "aerr/reasoner.hpp"
#include "aerr/state_machine.hpp"
#include "aerr/world.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aerr {

struct ReasonerEvent {
  int step = 0;
  QueryKind kind = QueryKind::FrontierChoice;
  std::vector<int> selected;
  double confidence = 0.0;
  bool fallback = false;
  std::string error;
};

struct KeypointMark {
  int id = 0;
  Cell cell;
  KeyPointKind kind = KeyPointKind::RoomEntrance;
};

/// What the agent believed about one floor when the episode ended.
struct FloorSnapshot {
  int floor = 0;
  std::vector<std::string> map_rows;  ///< VisibilityMap::dump rows
  std::vector<Cell> frontiers;        ///< representative cells
  std::vector<KeypointMark> keypoints;
};

struct EpisodeResult {
  std::string scenario;
  std::vector<std::string> tags;
  std::string target;
  bool success = false;
  bool stop_issued = false;
  int steps = 0;
  double path_length_m = 0.0;
  std::optional<double> optimal_length_m;
  double spl_term = 0.0;
  int reasoner_calls = 0;
  int fallbacks = 0;
  int recoveries = 0;
  int blacklisted = 0;
  std::vector<int> floors_visited;
  Pose final_pose;
  std::vector<StateLogEntry> log;
  std::vector<ReasonerEvent> reasoner_events;
  std::vector<FloorSnapshot> floors;
};

/// Scalar fields only, as they appear in reports.
nlohmann::json summary_json(const EpisodeResult& r);

/// Runs one episode until Stop or the step budget. Deterministic for a deterministic reasoner.
EpisodeResult run_episode(const MultiFloorWorld& world, const EpisodeConfig& cfg, const PriorTable& priors,
                          Reasoner& reasoner);

/// The reasoner selected by the config: scripted, or remote with scripted fallback.
std::unique_ptr<Reasoner> make_reasoner(const EpisodeConfig& cfg, const PriorTable& priors);

class MissingOptimal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplSummary {
  double sr = 0.0;
  double spl = 0.0;
  std::size_t episodes = 0;
};

/// SR = mean success; SPL = mean success * L* / max(L, L*). Throws MissingOptimal when a result
/// has no positive optimal length.
SplSummary compute_spl(std::span<const EpisodeResult> results);

class NoScenarios : public std::runtime_error {
 public:
  NoScenarios() : std::runtime_error("no scenarios") {}
};

/// *.json files of a directory in name order.
std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir);

struct BatchOutcome {
  nlohmann::json report;
  std::vector<EpisodeResult> results;  ///< executed episodes, in scenario order
  bool all_executed = true;
};

/// Runs every scenario with `jobs` worker threads. A scenario that fails to load or run is
/// reported under "errors" and the batch continues.
BatchOutcome run_batch(const std::vector<std::filesystem::path>& scenarios, const EpisodeConfig& cfg,
                       const PriorTable& priors, int jobs);

/// JSONL episode log: header, step lines, reasoner lines, summary.
void write_episode_log(std::ostream& out, const EpisodeResult& r, const EpisodeConfig& cfg,
                       const std::string& scenario_path);

struct EpisodeLog {
  nlohmann::json header;
  std::vector<StateLogEntry> entries;
  std::vector<nlohmann::json> reasoner_lines;
  nlohmann::json summary;
};

/// Throws std::runtime_error naming the offending line.
EpisodeLog read_episode_log(std::istream& in);

}  // namespace aerr
