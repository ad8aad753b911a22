#include "aerr/runner.hpp"

#include "aerr/assets.hpp"
#include "aerr/fast_thinking.hpp"
#include "aerr/locomotion.hpp"
#include "aerr/recovery.hpp"
#include "aerr/reminiscing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace aerr {

namespace {

constexpr int kMaxTicks = 8;
constexpr double kFarDistance = 1e9;

nlohmann::json pose_json(const Pose& p) {
  return {{"floor", p.floor}, {"x", p.position.x()}, {"y", p.position.y()}, {"heading_deg", p.heading_deg}};
}

nlohmann::json cell_json(Cell c) { return nlohmann::json::array({c.x, c.y}); }

/// Forwards to another reasoner and records every decision against the current step.
class RecordingReasoner : public Reasoner {
 public:
  RecordingReasoner(Reasoner& inner, const int& step, std::vector<ReasonerEvent>& events)
      : inner_(inner), step_(step), events_(events) {}

 protected:
  ReasonerDecision do_decide(const ReasonerQuery& query) override {
    ReasonerDecision d = inner_.decide(query);
    events_.push_back({step_, query.kind, d.selected, d.confidence, d.fallback, d.error});
    return d;
  }

 private:
  Reasoner& inner_;
  const int& step_;
  std::vector<ReasonerEvent>& events_;
};

/// What one dispatch produced: an action, or completion triggers for the next tick.
struct Dispatch {
  std::optional<Action> action;
  Triggers triggers;
};

Dispatch act(Action a) { return {a, {}}; }

class Episode {
 public:
  Episode(const MultiFloorWorld& world, const EpisodeConfig& cfg, const PriorTable& priors, Reasoner& reasoner)
      : world_(world),
        cfg_(cfg),
        pcfg_(cfg.planner),
        reasoner_(reasoner, step_, result_.reasoner_events),
        history_(cfg.planner.stuck.n_rec),
        rng_(cfg.seed) {
    pcfg_.fast.er.k_max = cfg.max_steps;
    category_weights_ = priors.category_weights(world.target_category, world.labels);
    pose_ = world.start;
    enter_floor(pose_.floor);
  }

  EpisodeResult run() {
    for (step_ = 0; step_ < cfg_.max_steps && !stop_issued_; ++step_) {
      perceive();
      const Action a = decide();
      execute(a);
      ++result_.steps;
    }
    return finish();
  }

 private:
  // ---- per-floor bookkeeping ----

  FloorMaps& maps() { return maps_.at(pose_.floor); }
  const VisibilityMap& map() { return maps().visibility; }

  void enter_floor(int floor) {
    const auto& g = world_.floors.at(static_cast<std::size_t>(floor));
    if (!maps_.contains(floor)) maps_.emplace(floor, FloorMaps(floor, g.width, g.height));
    const bool first_visit = visited_.insert(floor).second;
    if (first_visit && pcfg_.locomotion.initial_spin) spin_left_ = pcfg_.locomotion.spin_turns;
    n_total_ = 1;
    clear_target();
    rec_plan_.reset();
    verify_ = {};
    stair_ = {};
    history_.clear();
  }

  void clear_target() {
    target_.reset();
    target_members_.clear();
    target_is_frontier_ = false;
  }

  // ---- perception ----

  void perceive() {
    obs_ = sense(world_, pose_, pcfg_.sensor.fov_deg, pcfg_.sensor.range_m);
    if (cfg_.detection_noise > 0.0) {
      std::bernoulli_distribution miss(cfg_.detection_noise);
      for (auto& vc : obs_.cells) {
        if (vc.label.category >= 0 && miss(rng_)) vc.label.category = -1;
      }
    }
    new_door_ = false;
    for (const auto& vc : obs_.cells) {
      if (vc.kind == CellKind::Door && map().state(vc.cell) == CellState::Unknown) new_door_ = true;
    }
    integrate(maps(), obs_);
    target_seen_ = std::any_of(obs_.cells.begin(), obs_.cells.end(), [&](const VisibleCell& vc) {
      return vc.label.category == world_.target_category_id && world_.target_category_id >= 0;
    });
    geo_ = distance_field(map(), pose_.cell(), TraversalRules{.allow_unknown = true});
    refresh_frontiers();
    std::optional<Cell> kp_frontier;
    if (target_ && target_is_frontier_) kp_frontier = target_;
    update_keypoints(maps(), obs_, pose_, kp_frontier, step_, pcfg_.keypoints);
  }

  /// Intra-floor clusters without blacklisted or already reached cells, reachable on the belief map.
  void refresh_frontiers() {
    std::vector<Cell> raw;
    for (Cell c : frontier_cells(map())) {
      const FloorCell fc{pose_.floor, c};
      if (!blacklist_.contains(fc) && !reached_.contains(fc)) raw.push_back(c);
    }
    frontiers_.clear();
    for (auto& f : cluster_frontier_cells(raw, pose_.floor, FrontierKind::IntraFloor, pcfg_.fast.merge_radius)) {
      if (std::isfinite(geo_[f.cell])) frontiers_.push_back(std::move(f));
    }
    n_total_ = std::max(n_total_, static_cast<int>(frontiers_.size()));
  }

  // ---- decision ----

  Action decide() {
    int tick = 0;
    if (floor_changed_) {
      floor_changed_ = false;
      Triggers t;
      t.floor_changed = true;
      const auto& g = world_.floors.at(static_cast<std::size_t>(pose_.floor));
      set_state(on_floor_change(state_, maps_, pose_.floor, g.width, g.height));
      log(tick++, t, context(), std::nullopt, false);
    }

    if (target_seen_) approaching_ = true;
    if (approaching_) {
      const Action a = approach();
      log(tick, {}, context(), a, true);
      return a;
    }

    Triggers trig;
    const bool exploring = std::holds_alternative<ExplorationState>(state_);
    trig.stuck = cfg_.ablations.recovery && exploring && spin_left_ == 0 && target_.has_value() && history_.full() &&
                 detect_stuck(history_, pcfg_.stuck);
    trig.exhausted = cfg_.ablations.reminiscing && exploring && spin_left_ == 0 && frontiers_.empty() &&
                     !(target_ && !target_is_frontier_);
    trig.door_seen = cfg_.ablations.slow_thinking && new_door_ && exploring &&
                     distinct_room_count(build_scene_description(obs_, world_.labels, world_.target_category)) >= 2;

    for (; tick < kMaxTicks; ++tick) {
      const TransitionContext ctx = context();
      set_state(transition(state_, trig, ctx));
      const Dispatch d = dispatch();
      log(tick, trig, ctx, d.action, false);
      if (d.action) return *d.action;
      trig = d.triggers;
    }
    return Action::TurnLeft;
  }

  TransitionContext context() const {
    TransitionContext ctx;
    ctx.d_split_m = pcfg_.stuck.d_split_m;
    if (target_) {
      ctx.frontier = target_;
      const double d = geo_[*target_];
      ctx.frontier_distance_m = std::isfinite(d) ? d : kFarDistance;
    }
    return ctx;
  }

  void set_state(const AgentState& next) {
    if (state_name(next) != state_name(state_)) {
      history_.clear();
      if (std::holds_alternative<RecoveryState>(next)) {
        ++result_.recoveries;
        rec_plan_.reset();
        rec_steps_ = 0;
        escape_steps_ = 0;
      }
      if (const auto* r = std::get_if<ReminiscingState>(&next)) {
        if (r->stage == ReminiscingStage::TargetVerify) verify_ = {};
        if (r->stage == ReminiscingStage::StaircaseSearch) {
          const auto tried = std::move(stair_.tried);
          stair_ = {};
          stair_.tried = tried;
        }
      }
    }
    state_ = next;
  }

  void log(int tick, const Triggers& t, const TransitionContext& ctx, std::optional<Action> a, bool approach) {
    StateLogEntry e;
    e.step = step_;
    e.tick = tick;
    e.triggers = t;
    e.frontier = ctx.frontier;
    e.frontier_distance_m = ctx.frontier_distance_m;
    e.state = state_name(state_);
    e.pose = pose_;
    e.action = a;
    e.approach = approach;
    result_.log.push_back(std::move(e));
  }

  Dispatch dispatch() {
    if (const auto* e = std::get_if<ExplorationState>(&state_)) {
      return e->mode == ExplorationMode::Fast ? explore_fast() : explore_slow();
    }
    if (const auto* r = std::get_if<RecoveryState>(&state_)) {
      return r->mode == RecoveryMode::FarFrontier ? recover_far() : recover_near();
    }
    const auto& m = std::get<ReminiscingState>(state_);
    return m.stage == ReminiscingStage::TargetVerify ? verify() : staircase();
  }

  // ---- exploration ----

  bool target_valid() {
    if (!target_) return false;
    if (blacklist_.contains({pose_.floor, *target_})) return false;
    if (target_is_frontier_ && !is_frontier_cell(map(), *target_)) return false;
    if (pose_.cell() == *target_) {
      if (!target_is_frontier_) return false;
      // Standing on a frontier that is still open: look around once before giving it up.
      if (looked_at_ != FloorCell{pose_.floor, *target_}) {
        looked_at_ = FloorCell{pose_.floor, *target_};
        spin_left_ = pcfg_.locomotion.spin_turns;
        return true;
      }
      mark_reached();
      return false;
    }
    return std::isfinite(geo_[*target_]);
  }

  void mark_reached() {
    if (!target_) return;
    // Only the cells around the agent count as visited; the rest of the cluster re-clusters.
    reached_.insert({pose_.floor, *target_});
    const Cell here = pose_.cell();
    for (Cell c : target_members_) {
      if (std::max(std::abs(c.x - here.x), std::abs(c.y - here.y)) <= 1) reached_.insert({pose_.floor, c});
    }
  }

  void blacklist_target() {
    if (!target_) return;
    ++result_.blacklisted;
    blacklist_.insert({pose_.floor, *target_});
    for (Cell c : target_members_) blacklist_.insert({pose_.floor, c});
    refresh_frontiers();
  }

  Weights current_weights() const {
    if (!cfg_.ablations.dynamic_weights) return {cfg_.ablations.static_alpha, cfg_.ablations.static_beta};
    const auto& m = maps_.at(pose_.floor).visibility;
    ERInputs in;
    in.unexplored_ratio = static_cast<double>(m.unknown_count()) / static_cast<double>(m.cell_count());
    in.frontier_density = static_cast<double>(frontiers_.size()) / static_cast<double>(std::max(1, n_total_));
    in.k = step_;
    return update_weights(exploration_reward(in, pcfg_.fast.er), pcfg_.fast.er);
  }

  void select_target() {
    clear_target();
    if (frontiers_.empty()) return;
    const auto scores = evaluate_frontiers(map(), frontiers_, geo_, category_weights_, pcfg_.fast);
    const std::size_t i = select_frontier(scores, current_weights());
    target_ = frontiers_[i].cell;
    target_members_ = frontiers_[i].members;
    target_is_frontier_ = true;
  }

  Dispatch explore_fast() {
    if (spin_left_ > 0) {
      if (--spin_left_ == 0) history_.clear();
      return act(Action::TurnLeft);
    }
    if (!target_valid()) select_target();
    if (!target_) return act(Action::TurnLeft);
    if (spin_left_ > 0) {
      --spin_left_;
      return act(Action::TurnLeft);
    }
    return act(chase(*target_));
  }

  /// Carrot chasing: steer at the path cell roughly `lookahead_m` ahead, replanned every step.
  Action chase(Cell goal) {
    auto path = astar(map(), pose_.cell(), goal, TraversalRules{});
    if (!path) path = astar(map(), pose_.cell(), goal, TraversalRules{.allow_unknown = true});
    if (!path) {
      blacklist_target();
      clear_target();
      return Action::TurnLeft;
    }
    std::size_t k = 0;
    double acc = 0.0;
    while (k + 1 < path->size() && acc < pcfg_.locomotion.lookahead_m) {
      acc += octile_distance((*path)[k], (*path)[k + 1]);
      ++k;
    }
    return steer(pose_, cell_center((*path)[k]), blocked_on(map()), 90.0);
  }

  Dispatch explore_slow() {
    const SceneDescription scene = build_scene_description(obs_, world_.labels, world_.target_category);
    Dispatch out;
    out.triggers.slow_decision_done = true;
    if (scene.rooms.empty()) return out;
    const ReasonerDecision d = reasoner_.decide(frontier_choice_query(scene));
    const RoomEntry& room = scene.rooms.at(static_cast<std::size_t>(d.chosen().value_or(0)));
    const Frontier* best = nullptr;
    for (const auto& f : frontiers_) {
      if (map().label(f.cell).room_id != room.room_id) continue;
      if (!best || geo_[f.cell] < geo_[best->cell]) best = &f;
    }
    if (best) {
      target_ = best->cell;
      target_members_ = best->members;
      target_is_frontier_ = true;
    } else if (room.via_door && std::isfinite(geo_[*room.via_door])) {
      clear_target();
      target_ = room.via_door;
      target_members_ = {*room.via_door};
    }
    return out;
  }

  // ---- recovery ----

  std::optional<WaypointPlan> plan_to(Cell goal) {
    auto path = astar(map(), pose_.cell(), goal, TraversalRules{});
    if (!path) path = astar(map(), pose_.cell(), goal, TraversalRules{.allow_unknown = true});
    if (!path) return std::nullopt;
    return segment_waypoints(std::move(*path), pcfg_.waypoint_interval_m);
  }

  Dispatch recovery_finished(bool blacklist) {
    if (blacklist) blacklist_target();
    clear_target();
    rec_plan_.reset();
    Dispatch out;
    out.triggers.recovery_done = true;
    return out;
  }

  Dispatch recover_far() {
    const Cell goal = std::get<RecoveryState>(state_).frontier;
    if (!rec_plan_) {
      rec_plan_ = plan_to(goal);
      if (!rec_plan_) return recovery_finished(true);
      rec_budget_ = 3 * static_cast<int>(rec_plan_->path.size()) + 20;
    }
    if (++rec_steps_ > rec_budget_) return recovery_finished(true);
    try {
      const FollowResult f = follow_plan(*rec_plan_, pose_, map(), pcfg_.follow);
      if (f.done || !f.action) return recovery_finished(false);
      return act(*f.action);
    } catch (const PlanInvalidated&) {
      return recovery_finished(true);
    }
  }

  Dispatch recover_near() {
    const Cell goal = std::get<RecoveryState>(state_).frontier;
    if (target_is_frontier_ && !is_frontier_cell(map(), goal)) return recovery_finished(false);
    const EscapeResult e =
        near_frontier_escape(obs_, map(), goal, escape_steps_, reasoner_, world_.target_category, pcfg_.escape);
    if (e.done) return recovery_finished(e.blacklist);
    ++escape_steps_;
    return act(e.action.value_or(Action::TurnLeft));
  }

  // ---- reminiscing ----

  struct VerifyState {
    bool started = false;
    std::deque<int> queue;
    std::optional<WaypointPlan> plan;
    int spin_left = -1;
  };

  struct StairState {
    std::optional<StairChoice> choice;
    std::optional<WaypointPlan> plan;
    bool arrived = false;
    int align_steps = 0;
    int spin_left = -1;
    std::set<int> tried;
    bool not_found = false;
  };

  KeyPoint* keypoint(int id) {
    for (auto& kp : maps().keypoints) {
      if (kp.id == id) return &kp;
    }
    return nullptr;
  }

  /// Navigates with the waypoint follower. Returns an action, or nullopt on arrival or failure.
  std::optional<Action> navigate(std::optional<WaypointPlan>& plan, Cell goal, bool& failed) {
    failed = false;
    if (!plan) {
      plan = plan_to(goal);
      if (!plan) {
        failed = true;
        return std::nullopt;
      }
    }
    try {
      const FollowResult f = follow_plan(*plan, pose_, map(), pcfg_.follow);
      if (f.done) return std::nullopt;
      return f.action;
    } catch (const PlanInvalidated&) {
      failed = true;
      return std::nullopt;
    }
  }

  Dispatch verify() {
    if (!verify_.started) {
      verify_.started = true;
      std::vector<KeyPoint> open;
      for (const auto& kp : maps().keypoints) {
        if (!kp.consumed) open.push_back(kp);
      }
      for (int id : verify_targets(open, world_.target_category, reasoner_, world_.labels, visited_)) {
        verify_.queue.push_back(id);
      }
    }
    while (!verify_.queue.empty()) {
      KeyPoint* kp = keypoint(verify_.queue.front());
      auto next = [&] {
        if (kp) kp->consumed = true;
        verify_.queue.pop_front();
        verify_.plan.reset();
        verify_.spin_left = -1;
      };
      if (!kp) {
        next();
        continue;
      }
      if (verify_.spin_left < 0) {
        bool failed = false;
        if (auto a = navigate(verify_.plan, kp->position, failed)) return act(*a);
        if (failed) {
          next();
          continue;
        }
        verify_.spin_left = pcfg_.locomotion.spin_turns;
      }
      if (verify_.spin_left > 0) {
        --verify_.spin_left;
        return act(Action::TurnLeft);
      }
      next();
    }
    Dispatch out;
    out.triggers.reminisce_done = true;
    return out;
  }

  Dispatch staircase() {
    for (int guard = 0; guard < 64; ++guard) {
      if (stair_.not_found) return act(Action::TurnLeft);
      if (!stair_.choice) {
        std::vector<KeyPoint> open;
        for (const auto& kp : maps().keypoints) {
          if (!stair_.tried.contains(kp.id)) open.push_back(kp);
        }
        try {
          stair_.choice = find_staircase(open, map(), pose_.cell(), visited_, reasoner_, world_.labels,
                                         world_.target_category);
        } catch (const StaircaseNotFound&) {
          stair_.not_found = true;
          continue;
        }
        stair_.plan.reset();
        stair_.arrived = false;
        stair_.align_steps = 0;
        stair_.spin_left = -1;
      }
      const StairChoice& c = *stair_.choice;
      if (c.source == StairChoice::Source::StairFrontier) {
        bool failed = false;
        if (!stair_.arrived) {
          if (auto a = navigate(stair_.plan, c.goal, failed)) return act(*a);
          if (failed) {
            stair_.not_found = true;
            continue;
          }
          stair_.arrived = true;
        }
        return act(steer(pose_, cell_center(c.goal), blocked_on(map(), c.goal)));
      }

      if (!stair_.arrived) {
        bool failed = false;
        if (auto a = navigate(stair_.plan, c.goal, failed)) return act(*a);
        stair_.arrived = true;
      }
      if (c.stair_hints.empty()) {
        if (stair_.spin_left < 0) stair_.spin_left = pcfg_.locomotion.spin_turns;
        if (stair_.spin_left > 0) {
          --stair_.spin_left;
          return act(Action::TurnLeft);
        }
      } else if (stair_.align_steps < pcfg_.escape.max_escape_steps) {
        ++stair_.align_steps;
        const Cell stair = nearest(c.stair_hints);
        const LocalSketch sketch = stair_alignment_sketch(map(), pose_, stair, c.stair_hints, pcfg_.escape.sketch_margin);
        const ReasonerDecision d = reasoner_.decide(fine_action_query(sketch, world_.target_category));
        return act(fine_action_candidates().at(static_cast<std::size_t>(d.chosen().value_or(0))));
      }
      if (c.keypoint_id) stair_.tried.insert(*c.keypoint_id);
      stair_.choice.reset();
    }
    return act(Action::TurnLeft);
  }

  Cell nearest(const std::vector<Cell>& cells) const {
    Cell best = cells.front();
    double best_d = (cell_center(best) - pose_.position).norm();
    for (Cell c : cells) {
      const double d = (cell_center(c) - pose_.position).norm();
      if (d < best_d) {
        best = c;
        best_d = d;
      }
    }
    return best;
  }

  // ---- approach ----

  bool approach_blocked(Cell c) {
    if (!map().contains(c)) return true;
    const CellState s = map().state(c);
    return s == CellState::Occupied || s == CellState::Unknown || s == CellState::Stair;
  }

  std::optional<Cell> approach_goal() {
    std::optional<Cell> best;
    double best_d = 0.0;
    const auto& m = map();
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        const Cell c{x, y};
        if (m.state(c) == CellState::Unknown || m.label(c).category != world_.target_category_id) continue;
        double d = geo_[c];
        if (!std::isfinite(d)) d = kFarDistance + octile_distance(pose_.cell(), c);
        if (!best || d < best_d) {
          best = c;
          best_d = d;
        }
      }
    }
    return best;
  }

  Action approach() {
    if (!approach_script_.empty()) {
      const Action a = approach_script_.front();
      approach_script_.pop_front();
      return a;
    }
    const auto goal = approach_goal();
    if (!goal) return Action::TurnLeft;
    const Eigen::Vector2d target = cell_center(*goal);
    const double d = (target - pose_.position).norm();
    if (d <= cfg_.success_radius_m) return Action::Stop;

    const BlockedFn blocked = [this](Cell c) { return approach_blocked(c); };
    if (d <= pcfg_.locomotion.approach_search_m) {
      bool clear = true;
      trace_segment(pose_.position, target, [&](Cell c) {
        if (c != pose_.cell() && blocked(c)) clear = false;
        return clear;
      });
      if (clear) {
        if (auto script = plan_fine_approach(pose_, target, cfg_.success_radius_m, blocked)) {
          if (script->empty()) return Action::Stop;
          approach_script_.assign(script->begin() + 1, script->end());
          approach_script_.push_back(Action::Stop);
          return script->front();
        }
      }
    }
    auto path = astar(map(), pose_.cell(), *goal, TraversalRules{});
    if (!path) path = astar(map(), pose_.cell(), *goal, TraversalRules{.allow_unknown = true});
    if (!path) return Action::TurnLeft;
    const std::size_t last = std::min<std::size_t>(path->size() - 1, 8);
    const std::size_t aim = line_of_sight_index(pose_, *path, 0, last, blocked);
    return steer(pose_, cell_center((*path)[aim]), blocked, 90.0);
  }

  // ---- actuation ----

  void execute(Action a) {
    const bool spinning = spin_left_ > 0 && std::holds_alternative<ExplorationState>(state_) && !approaching_;
    const StepOutcome out = step(world_, pose_, a);
    result_.path_length_m += out.distance_m;
    if (a == Action::Stop) stop_issued_ = true;
    if (out.collided) {
      const Cell ahead = forward_cell(pose_, pose_.heading_deg);
      if (map().contains(ahead)) mark_collision(maps(), ahead);
      approach_script_.clear();
    }
    pose_ = out.pose;
    if (out.floor_changed) {
      floor_changed_ = true;
      approaching_ = false;
      approach_script_.clear();
      enter_floor(pose_.floor);
      return;
    }
    if (!spinning) history_.push(pose_.position);
  }

  EpisodeResult finish() {
    result_.scenario = world_.name;
    result_.tags = world_.tags;
    result_.target = world_.target_category;
    result_.stop_issued = stop_issued_;
    result_.success = is_success(world_, pose_, world_.target_category, stop_issued_, cfg_.success_radius_m);
    result_.optimal_length_m = world_.optimal_path_length_m ? world_.optimal_path_length_m
                                                            : ground_truth_shortest_path(world_);
    if (result_.success && result_.optimal_length_m && *result_.optimal_length_m > 0.0) {
      const double opt = *result_.optimal_length_m;
      result_.spl_term = opt / std::max(result_.path_length_m, opt);
    }
    result_.final_pose = pose_;
    result_.floors_visited.assign(visited_.begin(), visited_.end());
    result_.reasoner_calls = static_cast<int>(result_.reasoner_events.size());
    result_.fallbacks = static_cast<int>(std::count_if(result_.reasoner_events.begin(), result_.reasoner_events.end(),
                                                       [](const ReasonerEvent& e) { return e.fallback; }));
    for (const auto& [floor, fm] : maps_) {
      FloorSnapshot snap;
      snap.floor = floor;
      std::istringstream rows(fm.visibility.dump());
      for (std::string row; std::getline(rows, row);) snap.map_rows.push_back(row);
      for (const auto& f : extract_frontiers(fm.visibility, visited_, pcfg_.fast.merge_radius)) {
        snap.frontiers.push_back(f.cell);
      }
      for (const auto& kp : fm.keypoints) snap.keypoints.push_back({kp.id, kp.position, kp.kind});
      result_.floors.push_back(std::move(snap));
    }
    return std::move(result_);
  }

  const MultiFloorWorld& world_;
  const EpisodeConfig& cfg_;
  PlannerConfig pcfg_;
  int step_ = 0;
  EpisodeResult result_;
  RecordingReasoner reasoner_;
  PoseHistory history_;
  std::mt19937_64 rng_;
  std::vector<double> category_weights_;

  Pose pose_;
  AgentState state_ = initial_state();
  std::map<int, FloorMaps> maps_;
  std::set<int> visited_;
  bool stop_issued_ = false;

  Observation obs_;
  bool new_door_ = false;
  bool target_seen_ = false;
  bool floor_changed_ = false;
  Grid<double> geo_;
  std::vector<Frontier> frontiers_;
  int n_total_ = 1;

  std::optional<Cell> target_;
  std::vector<Cell> target_members_;
  bool target_is_frontier_ = false;
  std::set<FloorCell> blacklist_;
  std::set<FloorCell> reached_;
  int spin_left_ = 0;
  std::optional<FloorCell> looked_at_;

  std::optional<WaypointPlan> rec_plan_;
  int rec_steps_ = 0;
  int rec_budget_ = 0;
  int escape_steps_ = 0;

  VerifyState verify_;
  StairState stair_;

  bool approaching_ = false;
  std::deque<Action> approach_script_;
};

nlohmann::json aggregate_json(const std::vector<const EpisodeResult*>& rs, int max_steps) {
  nlohmann::json j;
  j["episodes"] = rs.size();
  if (rs.empty()) {
    j["sr"] = 0.0;
    j["spl"] = 0.0;
    j["mean_steps_to_success"] = 0.0;
    j["mean_steps"] = 0.0;
    return j;
  }
  double steps = 0.0;
  double to_success = 0.0;
  for (const auto* r : rs) {
    steps += r->steps;
    to_success += r->success ? r->steps : max_steps;
  }
  const double n = static_cast<double>(rs.size());
  double sr = 0.0;
  double spl = 0.0;
  bool spl_ok = true;
  for (const auto* r : rs) {
    sr += r->success ? 1.0 : 0.0;
    if (!r->optimal_length_m || !(*r->optimal_length_m > 0.0)) spl_ok = false;
    spl += r->spl_term;
  }
  j["sr"] = sr / n;
  j["spl"] = spl_ok ? nlohmann::json(spl / n) : nlohmann::json(nullptr);
  j["mean_steps_to_success"] = to_success / n;
  j["mean_steps"] = steps / n;
  return j;
}

}  // namespace

nlohmann::json summary_json(const EpisodeResult& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["tags"] = r.tags;
  j["target"] = r.target;
  j["success"] = r.success;
  j["stop_issued"] = r.stop_issued;
  j["steps"] = r.steps;
  j["path_length_m"] = r.path_length_m;
  j["optimal_length_m"] = r.optimal_length_m ? nlohmann::json(*r.optimal_length_m) : nlohmann::json(nullptr);
  j["spl_term"] = r.spl_term;
  j["reasoner_calls"] = r.reasoner_calls;
  j["fallbacks"] = r.fallbacks;
  j["recoveries"] = r.recoveries;
  j["blacklisted"] = r.blacklisted;
  j["floors_visited"] = r.floors_visited;
  j["final_pose"] = pose_json(r.final_pose);
  return j;
}

EpisodeResult run_episode(const MultiFloorWorld& world, const EpisodeConfig& cfg, const PriorTable& priors,
                          Reasoner& reasoner) {
  cfg.validate();
  return Episode(world, cfg, priors, reasoner).run();
}

std::unique_ptr<Reasoner> make_reasoner(const EpisodeConfig& cfg, const PriorTable& priors) {
  if (cfg.reasoner == ReasonerKind::Scripted) return std::make_unique<ScriptedReasoner>(priors, cfg.planner.scripted);
  RemoteConfig rc = cfg.remote;
  if (rc.prompts_dir.empty()) rc.prompts_dir = asset_dir() / "prompts";
  return std::make_unique<RemoteReasoner>(rc, std::make_shared<HttplibTransport>(rc.timeout_s), priors,
                                          cfg.planner.scripted);
}

SplSummary compute_spl(std::span<const EpisodeResult> results) {
  SplSummary s;
  s.episodes = results.size();
  if (results.empty()) return s;
  for (const auto& r : results) {
    if (!r.optimal_length_m || !(*r.optimal_length_m > 0.0)) {
      throw MissingOptimal("episode '" + r.scenario + "' has no positive optimal path length");
    }
    const double opt = *r.optimal_length_m;
    s.sr += r.success ? 1.0 : 0.0;
    s.spl += r.success ? opt / std::max(r.path_length_m, opt) : 0.0;
  }
  s.sr /= static_cast<double>(results.size());
  s.spl /= static_cast<double>(results.size());
  return s;
}

std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

BatchOutcome run_batch(const std::vector<std::filesystem::path>& scenarios, const EpisodeConfig& cfg,
                       const PriorTable& priors, int jobs) {
  if (scenarios.empty()) throw NoScenarios();
  cfg.validate();
  const std::size_t n = scenarios.size();
  std::vector<std::optional<EpisodeResult>> results(n);
  std::vector<std::string> errors(n);
  const auto reasoner = make_reasoner(cfg, priors);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const MultiFloorWorld world = load_scenario(scenarios[i]);
        results[i] = run_episode(world, cfg, priors, *reasoner);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BatchOutcome out;
  nlohmann::json episodes = nlohmann::json::array();
  nlohmann::json errs = nlohmann::json::array();
  std::vector<const EpisodeResult*> all;
  std::map<std::string, std::vector<const EpisodeResult*>> by_tag;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) out.results.push_back(std::move(*results[i]));
    else {
      out.all_executed = false;
      errs.push_back({{"scenario", scenarios[i].filename().string()}, {"error", errors[i]}});
    }
  }
  for (const auto& r : out.results) {
    auto s = summary_json(r);
    episodes.push_back(std::move(s));
    all.push_back(&r);
    for (const auto& t : r.tags) by_tag[t].push_back(&r);
  }
  out.report["config_digest"] = config_digest(cfg);
  out.report["episodes"] = std::move(episodes);
  out.report["errors"] = std::move(errs);
  out.report["aggregate"] = aggregate_json(all, cfg.max_steps);
  nlohmann::json tags = nlohmann::json::object();
  for (const auto& [tag, rs] : by_tag) tags[tag] = aggregate_json(rs, cfg.max_steps);
  out.report["by_tag"] = std::move(tags);
  return out;
}

void write_episode_log(std::ostream& out, const EpisodeResult& r, const EpisodeConfig& cfg,
                       const std::string& scenario_path) {
  nlohmann::json header;
  header["type"] = "header";
  header["scenario"] = r.scenario;
  header["scenario_path"] = scenario_path;
  header["target"] = r.target;
  header["tags"] = r.tags;
  header["config_digest"] = config_digest(cfg);
  header["d_split_m"] = cfg.planner.stuck.d_split_m;
  header["lambda_overlap"] = cfg.planner.fast.lambda_overlap;
  header["max_steps"] = cfg.max_steps;
  header["success_radius_m"] = cfg.success_radius_m;
  out << header.dump() << '\n';

  std::size_t ev = 0;
  auto flush_events = [&](int upto) {
    for (; ev < r.reasoner_events.size() && r.reasoner_events[ev].step <= upto; ++ev) {
      const auto& e = r.reasoner_events[ev];
      nlohmann::json j;
      j["type"] = "reasoner";
      j["step"] = e.step;
      j["kind"] = std::string(to_string(e.kind));
      j["selected"] = e.selected;
      j["confidence"] = e.confidence;
      j["fallback"] = e.fallback;
      j["error"] = e.error;
      out << j.dump() << '\n';
    }
  };
  for (const auto& e : r.log) {
    flush_events(e.step - 1);
    out << to_json(e).dump() << '\n';
  }
  flush_events(std::numeric_limits<int>::max());

  nlohmann::json summary;
  summary["type"] = "summary";
  summary["result"] = summary_json(r);
  nlohmann::json floors = nlohmann::json::array();
  for (const auto& f : r.floors) {
    nlohmann::json fj;
    fj["floor"] = f.floor;
    fj["map"] = f.map_rows;
    nlohmann::json fr = nlohmann::json::array();
    for (Cell c : f.frontiers) fr.push_back(cell_json(c));
    fj["frontiers"] = std::move(fr);
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& k : f.keypoints) {
      kps.push_back({{"id", k.id}, {"cell", cell_json(k.cell)}, {"kind", std::string(to_string(k.kind))}});
    }
    fj["keypoints"] = std::move(kps);
    floors.push_back(std::move(fj));
  }
  summary["floors"] = std::move(floors);
  out << summary.dump() << '\n';
}

EpisodeLog read_episode_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "log line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    const std::string type = j.value("type", std::string{});
    if (!have_header) {
      if (type != "header") throw std::runtime_error(where + ": expected a header line first");
      log.header = std::move(j);
      have_header = true;
      continue;
    }
    try {
      if (type == "step") log.entries.push_back(log_entry_from_json(j));
      else if (type == "reasoner") log.reasoner_lines.push_back(std::move(j));
      else if (type == "summary") log.summary = std::move(j);
      else throw std::runtime_error("unknown line type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error("empty log");
  return log;
}

}  // namespace aerr
