#pragma once

#include "aerr/geometry.hpp"
#include "aerr/world.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aerr {

enum class ExplorationMode { Fast, Slow };
enum class RecoveryMode { FarFrontier, NearFrontier };
enum class ReminiscingStage { TargetVerify, StaircaseSearch };

struct ExplorationState {
  ExplorationMode mode = ExplorationMode::Fast;
  friend bool operator==(const ExplorationState&, const ExplorationState&) = default;
};

struct RecoveryState {
  RecoveryMode mode = RecoveryMode::FarFrontier;
  Cell frontier;      ///< the frontier being recovered toward
  int progress = 0;   ///< steps spent in this recovery
  friend bool operator==(const RecoveryState&, const RecoveryState&) = default;
};

struct ReminiscingState {
  ReminiscingStage stage = ReminiscingStage::TargetVerify;
  friend bool operator==(const ReminiscingState&, const ReminiscingState&) = default;
};

using AgentState = std::variant<ExplorationState, RecoveryState, ReminiscingState>;

inline AgentState initial_state() { return ExplorationState{ExplorationMode::Fast}; }

/// "Exploration/Fast", "Recovery/FarFrontier", "Reminiscing/StaircaseSearch", ...
std::string state_name(const AgentState& s);
std::optional<AgentState> parse_state_name(const std::string& name);
std::vector<AgentState> all_state_labels();

struct Triggers {
  bool stuck = false;
  bool exhausted = false;
  bool recovery_done = false;
  bool reminisce_done = false;  ///< target verification found nothing
  bool floor_changed = false;   ///< a staircase was traversed
  bool door_seen = false;
  bool slow_decision_done = false;

  friend bool operator==(const Triggers&, const Triggers&) = default;
};

nlohmann::json to_json(const Triggers& t);
Triggers triggers_from_json(const nlohmann::json& j);

/// Facts about the active frontier needed to pick a recovery mode.
struct TransitionContext {
  std::optional<Cell> frontier;
  double frontier_distance_m = 0.0;
  double d_split_m = 3.0;
};

/// Priority: stuck, exhausted, recovery_done, reminisce_done, floor_changed, door_seen,
/// slow_decision_done. Triggers that do not apply to the current state are ignored.
AgentState transition(const AgentState& state, const Triggers& triggers, const TransitionContext& ctx);

struct StuckDetectorConfig {
  int n_rec = 20;
  double d_rec_m = 0.5;
  double d_split_m = 3.0;

  void validate() const;
};

class InsufficientHistory : public std::runtime_error {
 public:
  InsufficientHistory() : std::runtime_error("pose history shorter than N_rec + 1") {}
};

/// Ring buffer of the last N_rec + 1 positions.
class PoseHistory {
 public:
  explicit PoseHistory(int n_rec) : capacity_(static_cast<std::size_t>(n_rec) + 1) {}

  void push(const Eigen::Vector2d& p);
  void clear() { positions_.clear(); }
  bool full() const { return positions_.size() == capacity_; }
  std::size_t size() const { return positions_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Oldest first.
  const std::deque<Eigen::Vector2d>& positions() const { return positions_; }

 private:
  std::size_t capacity_;
  std::deque<Eigen::Vector2d> positions_;
};

/// True when the mean of the last N_rec positions lies within D_rec of the position N_rec steps ago.
bool detect_stuck(const PoseHistory& history, const StuckDetectorConfig& cfg);

/// One state-log record: the triggers evaluated, the state they produced and the context.
struct StateLogEntry {
  int step = 0;
  int tick = 0;  ///< several transitions may happen within one step
  Triggers triggers;
  std::optional<Cell> frontier;
  double frontier_distance_m = 0.0;
  std::string state;
  Pose pose;
  std::optional<Action> action;
  bool approach = false;
};

nlohmann::json to_json(const StateLogEntry& e);
StateLogEntry log_entry_from_json(const nlohmann::json& j);

/// Replays a state log against `transition`; returns one message per illegal edge.
std::vector<std::string> validate_state_log(const std::vector<StateLogEntry>& entries, double d_split_m);

}  // namespace aerr
