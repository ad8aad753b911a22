#include "aerr/state_machine.hpp"

#include <sstream>

namespace aerr {

std::string state_name(const AgentState& s) {
  if (const auto* e = std::get_if<ExplorationState>(&s)) {
    return e->mode == ExplorationMode::Fast ? "Exploration/Fast" : "Exploration/Slow";
  }
  if (const auto* r = std::get_if<RecoveryState>(&s)) {
    return r->mode == RecoveryMode::FarFrontier ? "Recovery/FarFrontier" : "Recovery/NearFrontier";
  }
  const auto& m = std::get<ReminiscingState>(s);
  return m.stage == ReminiscingStage::TargetVerify ? "Reminiscing/TargetVerify" : "Reminiscing/StaircaseSearch";
}

std::vector<AgentState> all_state_labels() {
  return {ExplorationState{ExplorationMode::Fast},
          ExplorationState{ExplorationMode::Slow},
          RecoveryState{RecoveryMode::FarFrontier, {}, 0},
          RecoveryState{RecoveryMode::NearFrontier, {}, 0},
          ReminiscingState{ReminiscingStage::TargetVerify},
          ReminiscingState{ReminiscingStage::StaircaseSearch}};
}

std::optional<AgentState> parse_state_name(const std::string& name) {
  for (const auto& s : all_state_labels()) {
    if (state_name(s) == name) return s;
  }
  return std::nullopt;
}

nlohmann::json to_json(const Triggers& t) {
  return {{"stuck", t.stuck},
          {"exhausted", t.exhausted},
          {"recovery_done", t.recovery_done},
          {"reminisce_done", t.reminisce_done},
          {"floor_changed", t.floor_changed},
          {"door_seen", t.door_seen},
          {"slow_decision_done", t.slow_decision_done}};
}

Triggers triggers_from_json(const nlohmann::json& j) {
  Triggers t;
  t.stuck = j.value("stuck", false);
  t.exhausted = j.value("exhausted", false);
  t.recovery_done = j.value("recovery_done", false);
  t.reminisce_done = j.value("reminisce_done", false);
  t.floor_changed = j.value("floor_changed", false);
  t.door_seen = j.value("door_seen", false);
  t.slow_decision_done = j.value("slow_decision_done", false);
  return t;
}

AgentState transition(const AgentState& state, const Triggers& t, const TransitionContext& ctx) {
  const bool exploring = std::holds_alternative<ExplorationState>(state);
  const bool recovering = std::holds_alternative<RecoveryState>(state);
  const auto* reminiscing = std::get_if<ReminiscingState>(&state);

  if (t.stuck && !recovering && ctx.frontier) {
    RecoveryState r;
    r.mode = ctx.frontier_distance_m > ctx.d_split_m ? RecoveryMode::FarFrontier : RecoveryMode::NearFrontier;
    r.frontier = *ctx.frontier;
    return r;
  }
  if (t.exhausted && exploring) return ReminiscingState{ReminiscingStage::TargetVerify};
  if (t.recovery_done && recovering) return ExplorationState{ExplorationMode::Fast};
  if (t.reminisce_done && reminiscing && reminiscing->stage == ReminiscingStage::TargetVerify) {
    return ReminiscingState{ReminiscingStage::StaircaseSearch};
  }
  if (t.floor_changed) return ExplorationState{ExplorationMode::Fast};
  if (const auto* e = std::get_if<ExplorationState>(&state)) {
    if (t.door_seen && e->mode == ExplorationMode::Fast) return ExplorationState{ExplorationMode::Slow};
    if (t.slow_decision_done && e->mode == ExplorationMode::Slow) return ExplorationState{ExplorationMode::Fast};
  }
  return state;
}

void StuckDetectorConfig::validate() const {
  if (n_rec < 2) throw std::invalid_argument("N_rec must be at least 2");
  if (d_rec_m <= 0) throw std::invalid_argument("D_rec must be positive");
  if (d_split_m <= 0) throw std::invalid_argument("D_split must be positive");
}

void PoseHistory::push(const Eigen::Vector2d& p) {
  positions_.push_back(p);
  while (positions_.size() > capacity_) positions_.pop_front();
}

bool detect_stuck(const PoseHistory& history, const StuckDetectorConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.n_rec);
  const auto& pos = history.positions();
  if (pos.size() < n + 1) throw InsufficientHistory();
  const std::size_t first = pos.size() - n;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (std::size_t i = first; i < pos.size(); ++i) mean += pos[i];
  mean /= static_cast<double>(n);
  const Eigen::Vector2d& anchor = pos[first - 1];
  return (mean - anchor).norm() < cfg.d_rec_m;
}

nlohmann::json to_json(const StateLogEntry& e) {
  nlohmann::json j;
  j["type"] = "step";
  j["step"] = e.step;
  j["tick"] = e.tick;
  j["triggers"] = to_json(e.triggers);
  j["state"] = e.state;
  j["pose"] = {{"floor", e.pose.floor},
               {"x", e.pose.position.x()},
               {"y", e.pose.position.y()},
               {"heading_deg", e.pose.heading_deg}};
  j["frontier"] = e.frontier ? nlohmann::json::array({e.frontier->x, e.frontier->y}) : nlohmann::json(nullptr);
  j["frontier_distance_m"] = e.frontier_distance_m;
  j["action"] = e.action ? nlohmann::json(std::string(to_string(*e.action))) : nlohmann::json(nullptr);
  if (e.approach) j["approach"] = true;
  return j;
}

StateLogEntry log_entry_from_json(const nlohmann::json& j) {
  StateLogEntry e;
  e.step = j.at("step").get<int>();
  e.tick = j.value("tick", 0);
  e.triggers = triggers_from_json(j.at("triggers"));
  e.state = j.at("state").get<std::string>();
  const auto& p = j.at("pose");
  e.pose.floor = p.at("floor").get<int>();
  e.pose.position = {p.at("x").get<double>(), p.at("y").get<double>()};
  e.pose.heading_deg = p.at("heading_deg").get<int>();
  if (j.contains("frontier") && !j.at("frontier").is_null()) {
    e.frontier = Cell{j.at("frontier").at(0).get<int>(), j.at("frontier").at(1).get<int>()};
  }
  e.frontier_distance_m = j.value("frontier_distance_m", 0.0);
  if (j.contains("action") && !j.at("action").is_null()) e.action = parse_action(j.at("action").get<std::string>());
  e.approach = j.value("approach", false);
  return e;
}

std::vector<std::string> validate_state_log(const std::vector<StateLogEntry>& entries, double d_split_m) {
  std::vector<std::string> errors;
  AgentState current = initial_state();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto logged = parse_state_name(e.state);
    if (!logged) {
      errors.push_back("line " + std::to_string(i + 1) + ": unknown state '" + e.state + "'");
      break;
    }
    TransitionContext ctx{e.frontier, e.frontier_distance_m, d_split_m};
    const AgentState expected = transition(current, e.triggers, ctx);
    if (state_name(expected) != e.state) {
      std::ostringstream os;
      os << "line " << i + 1 << " (step " << e.step << "): illegal edge " << state_name(current) << " -> "
         << e.state << " under triggers " << to_json(e.triggers).dump() << " (expected " << state_name(expected)
         << ")";
      errors.push_back(os.str());
    }
    current = *logged;
    if (auto* r = std::get_if<RecoveryState>(&current); r && e.frontier) r->frontier = *e.frontier;
  }
  return errors;
}

}  // namespace aerr
