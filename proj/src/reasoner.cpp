#include "aerr/reasoner.hpp"

#include "aerr/locomotion.hpp"
#include "aerr/recovery.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace aerr {

namespace {

constexpr const char* kSystemPrompt =
    "You are the decision module of an indoor object-search robot. Answer with a single JSON object.";

constexpr const char* kFormatReminder =
    "Your previous reply could not be parsed. Reply with only a JSON object of the form "
    "{\"chosen\": <candidate index or list of indices>, \"confidence\": <number in [0,1]>, "
    "\"rationale\": \"<short reason>\"}.";

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string cell_text(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string keypoint_label(const KeypointSummary& k) {
  return "keypoint " + std::to_string(k.id) + " at " + cell_text(k.position) + " (" + std::string(to_string(k.kind)) +
         ")";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

SceneDescription build_scene_description(const Observation& obs, const LabelTable& labels, const std::string& target) {
  SceneDescription scene;
  scene.pose = obs.pose;
  scene.target = target;
  const Cell here = obs.pose.cell();

  std::map<Cell, CellKind> kinds;
  for (const auto& vc : obs.cells) kinds[vc.cell] = vc.kind;

  struct Partition {
    std::map<int, int> room_votes;
    std::set<std::string> categories;
  };
  std::map<std::optional<Cell>, Partition> parts;
  for (const auto& vc : obs.cells) {
    if (vc.kind == CellKind::Door || vc.kind == CellKind::Obstacle) continue;
    std::optional<Cell> door;
    if (vc.cell != here) {
      trace_segment(obs.pose.position, cell_center(vc.cell), [&](Cell t) {
        if (t == vc.cell) return false;
        auto it = kinds.find(t);
        if (t != here && it != kinds.end() && it->second == CellKind::Door) {
          door = t;
          return false;
        }
        return true;
      });
    }
    Partition& p = parts[door];
    if (vc.label.room_id >= 0) ++p.room_votes[vc.label.room_id];
    if (vc.label.category >= 0) p.categories.insert(labels.category_name(vc.label.category));
  }

  // std::optional orders nullopt first, so the agent's own partition leads.
  std::map<int, std::size_t> by_room;
  for (const auto& [door, p] : parts) {
    if (p.room_votes.empty()) continue;
    int room = -1;
    int votes = -1;
    for (const auto& [id, n] : p.room_votes) {
      if (n > votes) {
        room = id;
        votes = n;
      }
    }
    auto it = by_room.find(room);
    if (it == by_room.end()) {
      RoomEntry e;
      e.room_id = room;
      e.room_type = labels.room_type(room);
      e.via_door = door;
      by_room[room] = scene.rooms.size();
      scene.rooms.push_back(std::move(e));
      it = by_room.find(room);
    }
    RoomEntry& e = scene.rooms[it->second];
    std::set<std::string> merged(e.object_categories.begin(), e.object_categories.end());
    merged.insert(p.categories.begin(), p.categories.end());
    e.object_categories.assign(merged.begin(), merged.end());
  }
  return scene;
}

std::size_t distinct_room_count(const SceneDescription& scene) {
  std::set<int> ids;
  for (const auto& r : scene.rooms) ids.insert(r.room_id);
  return ids.size();
}

KeypointSummary summarize_keypoint(const KeyPoint& kp, const LabelTable& labels, const std::set<int>& visited_floors) {
  KeypointSummary s;
  s.id = kp.id;
  s.floor = kp.floor;
  s.position = kp.position;
  s.kind = kp.kind;
  s.open_area_m2 = kp.open_area_m2;
  std::set<std::string> cats;
  for (const auto& vc : kp.snapshot.cells) {
    if (vc.label.category >= 0) cats.insert(labels.category_name(vc.label.category));
    if (is_stair(vc.kind)) {
      const int to = kp.floor + (vc.kind == CellKind::StairUp ? 1 : -1);
      if (!visited_floors.contains(to)) s.stair_cells.push_back(vc.cell);
    }
  }
  s.categories.assign(cats.begin(), cats.end());
  std::sort(s.stair_cells.begin(), s.stair_cells.end());
  return s;
}

LocalSketch make_local_sketch(const VisibilityMap& map, const Pose& pose, Cell goal, int margin) {
  const Cell a = pose.cell();
  const int x0 = std::max(0, std::min(a.x, goal.x) - margin);
  const int y0 = std::max(0, std::min(a.y, goal.y) - margin);
  const int x1 = std::min(map.width() - 1, std::max(a.x, goal.x) + margin);
  const int y1 = std::min(map.height() - 1, std::max(a.y, goal.y) + margin);
  LocalSketch s;
  s.origin = {x0, y0};
  s.pose = pose;
  s.goal = goal;
  for (int y = y0; y <= y1; ++y) {
    std::string row;
    for (int x = x0; x <= x1; ++x) row += state_char(map.state({x, y}));
    s.rows.push_back(std::move(row));
  }
  return s;
}

std::string_view to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::FrontierChoice: return "FrontierChoice";
    case QueryKind::FineAction: return "FineAction";
    case QueryKind::KeypointTargetReview: return "KeypointTargetReview";
    case QueryKind::KeypointStairReview: return "KeypointStairReview";
  }
  return "?";
}

void ReasonerQuery::validate() const {
  if (candidates.empty()) throw std::invalid_argument("reasoner query without candidates");
  switch (kind) {
    case QueryKind::FrontierChoice:
      if (!scene || scene->rooms.size() != candidates.size()) {
        throw std::invalid_argument("FrontierChoice candidates must match the scene's rooms");
      }
      break;
    case QueryKind::FineAction:
      if (!sketch || candidates.size() != fine_action_candidates().size()) {
        throw std::invalid_argument("FineAction needs a local sketch and the movement candidates");
      }
      break;
    case QueryKind::KeypointTargetReview:
    case QueryKind::KeypointStairReview:
      if (keypoints.size() != candidates.size()) {
        throw std::invalid_argument("keypoint review candidates must match the keypoints");
      }
      break;
  }
}

ReasonerQuery frontier_choice_query(const SceneDescription& scene) {
  ReasonerQuery q;
  q.kind = QueryKind::FrontierChoice;
  q.target = scene.target;
  q.scene = scene;
  for (const auto& r : scene.rooms) {
    q.candidates.push_back(r.room_type + (r.via_door ? " via door " + cell_text(*r.via_door) : " (current room)"));
  }
  return q;
}

ReasonerQuery fine_action_query(const LocalSketch& sketch, const std::string& target) {
  ReasonerQuery q;
  q.kind = QueryKind::FineAction;
  q.target = target;
  q.sketch = sketch;
  for (Action a : fine_action_candidates()) q.candidates.emplace_back(to_string(a));
  return q;
}

ReasonerQuery target_review_query(std::vector<KeypointSummary> keypoints, const std::string& target) {
  ReasonerQuery q;
  q.kind = QueryKind::KeypointTargetReview;
  q.target = target;
  for (const auto& k : keypoints) q.candidates.push_back(keypoint_label(k));
  q.keypoints = std::move(keypoints);
  return q;
}

ReasonerQuery stair_review_query(std::vector<KeypointSummary> keypoints, const std::string& target) {
  ReasonerQuery q = target_review_query(std::move(keypoints), target);
  q.kind = QueryKind::KeypointStairReview;
  return q;
}

const std::vector<Action>& fine_action_candidates() {
  static const std::vector<Action> actions = {Action::MoveForward, Action::TurnLeft, Action::TurnRight,
                                              Action::LookUp, Action::LookDown};
  return actions;
}

ReasonerDecision Reasoner::decide(const ReasonerQuery& query) {
  query.validate();
  ++calls_;
  return do_decide(query);
}

ReasonerDecision ScriptedReasoner::decide_scripted(const ReasonerQuery& query) const {
  ReasonerDecision d;
  switch (query.kind) {
    case QueryKind::FrontierChoice: {
      int best = 0;
      double best_w = -1.0;
      for (std::size_t i = 0; i < query.scene->rooms.size(); ++i) {
        const double w = priors_.weight(query.target, query.scene->rooms[i].room_type);
        if (w > best_w) {
          best_w = w;
          best = static_cast<int>(i);
        }
      }
      d.selected = {best};
      d.confidence = std::clamp(best_w, 0.0, 1.0);
      d.rationale = "a " + query.target + " is most likely in the " + query.scene->rooms[best].room_type +
                    " (prior " + fixed2(best_w) + ")";
      break;
    }
    case QueryKind::FineAction: {
      const Action a = scripted_fine_action(*query.sketch);
      const auto& actions = fine_action_candidates();
      d.selected = {static_cast<int>(std::find(actions.begin(), actions.end(), a) - actions.begin())};
      d.confidence = 1.0;
      d.rationale = "local path toward the goal cell";
      break;
    }
    case QueryKind::KeypointTargetReview: {
      std::vector<std::pair<double, int>> hits;
      for (std::size_t i = 0; i < query.keypoints.size(); ++i) {
        double score = 0.0;
        for (const auto& c : query.keypoints[i].categories) score = std::max(score, priors_.weight(query.target, c));
        if (score >= cfg_.review_threshold) hits.emplace_back(score, static_cast<int>(i));
      }
      std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      for (const auto& h : hits) d.selected.push_back(h.second);
      d.confidence = hits.empty() ? 0.0 : hits.front().first;
      d.rationale = hits.empty() ? "no snapshot shows anything related to the " + query.target
                                 : std::to_string(hits.size()) + " snapshot(s) show objects related to the " +
                                       query.target;
      break;
    }
    case QueryKind::KeypointStairReview: {
      int best = -1;
      bool best_stairs = false;
      double best_area = -1.0;
      for (std::size_t i = 0; i < query.keypoints.size(); ++i) {
        const auto& k = query.keypoints[i];
        const bool stairs = !k.stair_cells.empty();
        if (best < 0 || (stairs && !best_stairs) || (stairs == best_stairs && k.open_area_m2 > best_area)) {
          best = static_cast<int>(i);
          best_stairs = stairs;
          best_area = k.open_area_m2;
        }
      }
      d.selected = {best};
      d.confidence = best_stairs ? 0.9 : 0.3;
      d.rationale = best_stairs ? "snapshot shows a staircase" : "no staircase seen; widest open view";
      break;
    }
  }
  return d;
}

Action scripted_fine_action(const LocalSketch& sketch) {
  const VisibilityMap local = VisibilityMap::parse(0, sketch.rows);
  const Eigen::Vector2d shift(sketch.origin.x * kCellSize, sketch.origin.y * kCellSize);
  Pose pose = sketch.pose;
  pose.floor = 0;
  pose.position -= shift;
  const Cell goal{sketch.goal.x - sketch.origin.x, sketch.goal.y - sketch.origin.y};
  const BlockedFn blocked = blocked_on(local, goal);
  // Search over continuous poses first; it threads 1-cell gaps the greedy step cannot.
  if (auto plan = plan_fine_approach(pose, cell_center(goal), kFineGoalRadiusM, blocked, 20000); plan && !plan->empty()) {
    return plan->front();
  }
  Eigen::Vector2d aim = cell_center(goal);
  if (auto path = astar(local, pose.cell(), goal, TraversalRules{.allow_unknown = true})) {
    const std::size_t cursor = advance_cursor(pose, *path, 0, path->size());
    aim = cell_center((*path)[line_of_sight_index(pose, *path, cursor, cursor + 4, blocked)]);
  }
  return steer(pose, aim, blocked, 90.0);
}

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::map<std::string, std::string>& headers) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw NetworkError("invalid endpoint URL: " + url);
  httplib::Client cli(m[1].str());
  if (!cli.is_valid()) throw NetworkError("cannot open a client for " + m[1].str());
  const auto sec = static_cast<time_t>(timeout_s_);
  const auto usec = static_cast<time_t>((timeout_s_ - static_cast<double>(sec)) * 1e6);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  const std::string path = m[2].matched ? m[2].str() : "/";
  auto res = cli.Post(path, h, body, "application/json");
  if (!res) throw NetworkError("request to " + url + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  static const std::pair<QueryKind, const char*> files[] = {
      {QueryKind::FrontierChoice, "frontier_choice.txt"},
      {QueryKind::FineAction, "fine_action.txt"},
      {QueryKind::KeypointTargetReview, "keypoint_target_review.txt"},
      {QueryKind::KeypointStairReview, "keypoint_stair_review.txt"}};
  PromptTemplates t;
  for (const auto& [kind, name] : files) {
    std::ifstream in(dir / name);
    if (!in) throw std::runtime_error("cannot read prompt template " + (dir / name).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    t.templates[kind] = ss.str();
  }
  return t;
}

std::string PromptTemplates::render(const ReasonerQuery& query) const {
  std::string out = templates.at(query.kind);
  replace_all(out, "{{target}}", query.target);
  replace_all(out, "{{scene}}", query.scene ? render_scene(*query.scene) : "");
  replace_all(out, "{{keypoints}}", render_keypoints(query.keypoints));
  replace_all(out, "{{map}}", query.sketch ? render_sketch(*query.sketch) : "");
  replace_all(out, "{{candidates}}", render_candidates(query.candidates));
  return out;
}

std::string render_scene(const SceneDescription& scene) {
  std::ostringstream os;
  os << "agent: floor " << scene.pose.floor << ", position (" << fixed2(scene.pose.position.x()) << ", "
     << fixed2(scene.pose.position.y()) << ") m, heading " << scene.pose.heading_deg << " deg\n";
  for (std::size_t i = 0; i < scene.rooms.size(); ++i) {
    const auto& r = scene.rooms[i];
    os << "region " << i << ": " << r.room_type;
    os << (r.via_door ? " seen through door " + cell_text(*r.via_door) : std::string(" (agent is here)"));
    os << "; objects: [" << join(r.object_categories, ", ") << "]\n";
  }
  return os.str();
}

std::string render_keypoints(const std::vector<KeypointSummary>& keypoints) {
  std::ostringstream os;
  for (const auto& k : keypoints) {
    os << "keypoint " << k.id << ": floor " << k.floor << ", cell " << cell_text(k.position) << ", "
       << to_string(k.kind) << ", open area " << fixed2(k.open_area_m2) << " m2; objects: ["
       << join(k.categories, ", ") << "]";
    if (!k.stair_cells.empty()) {
      std::vector<std::string> cells;
      for (Cell c : k.stair_cells) cells.push_back(cell_text(c));
      os << "; staircase cells: [" << join(cells, ", ") << "]";
    }
    os << "\n";
  }
  return os.str();
}

std::string render_sketch(const LocalSketch& sketch) {
  std::vector<std::string> rows = sketch.rows;
  const Cell a = sketch.pose.cell();
  auto put = [&](Cell c, char ch) {
    const int x = c.x - sketch.origin.x;
    const int y = c.y - sketch.origin.y;
    if (y >= 0 && y < static_cast<int>(rows.size()) && x >= 0 && x < static_cast<int>(rows[y].size())) rows[y][x] = ch;
  };
  put(sketch.goal, 'G');
  put(a, 'A');
  std::ostringstream os;
  os << "legend: ? unknown, . free, # occupied, D door, S stair, A agent, G goal\n";
  os << "agent heading " << sketch.pose.heading_deg << " deg (0 = +x, 90 = +y, rows grow in +y)\n";
  for (const auto& r : rows) os << r << "\n";
  return os.str();
}

std::string render_candidates(const std::vector<std::string>& candidates) {
  std::ostringstream os;
  for (std::size_t i = 0; i < candidates.size(); ++i) os << i << ": " << candidates[i] << "\n";
  return os.str();
}

ReasonerDecision parse_decision(const std::string& content, const ReasonerQuery& query) {
  const auto open = content.find('{');
  const auto close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw MalformedResponse("reply contains no JSON object");
  }
  const auto j = nlohmann::json::parse(content.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedResponse("reply is not a JSON object");
  if (!j.contains("chosen")) throw MalformedResponse("reply lacks \"chosen\"");

  ReasonerDecision d;
  const auto& chosen = j.at("chosen");
  if (chosen.is_number_integer()) {
    d.selected.push_back(chosen.get<int>());
  } else if (chosen.is_array()) {
    for (const auto& v : chosen) {
      if (!v.is_number_integer()) throw MalformedResponse("\"chosen\" holds a non-integer");
      const int idx = v.get<int>();
      if (std::find(d.selected.begin(), d.selected.end(), idx) == d.selected.end()) d.selected.push_back(idx);
    }
  } else {
    throw MalformedResponse("\"chosen\" is neither an index nor a list of indices");
  }
  const int n = static_cast<int>(query.candidates.size());
  for (int idx : d.selected) {
    if (idx < 0 || idx >= n) throw MalformedResponse("chosen index " + std::to_string(idx) + " out of range");
  }
  if (query.kind != QueryKind::KeypointTargetReview && d.selected.size() != 1) {
    throw MalformedResponse("exactly one candidate must be chosen");
  }
  if (j.contains("confidence")) {
    if (!j.at("confidence").is_number()) throw MalformedResponse("\"confidence\" is not a number");
    d.confidence = j.at("confidence").get<double>();
    if (d.confidence < 0.0 || d.confidence > 1.0) throw MalformedResponse("\"confidence\" outside [0, 1]");
  }
  if (j.contains("rationale") && j.at("rationale").is_string()) d.rationale = j.at("rationale").get<std::string>();
  return d;
}

RemoteReasoner::RemoteReasoner(RemoteConfig cfg, std::shared_ptr<HttpTransport> transport, PriorTable priors,
                               ScriptedConfig scripted)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      fallback_(std::move(priors), scripted),
      prompts_(PromptTemplates::load(cfg_.prompts_dir)) {}

std::string RemoteReasoner::chat(const nlohmann::json& messages) const {
  nlohmann::json request = {{"model", cfg_.model}, {"messages", messages}, {"temperature", 0}};
  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers["Authorization"] = std::string("Bearer ") + key;
  }
  const HttpResponse res = transport_->post(cfg_.url, request.dump(), headers);
  if (res.status == 401 || res.status == 403) throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res.status) + ")");
  if (res.status != 200) throw NetworkError("endpoint returned HTTP " + std::to_string(res.status));
  const auto body = nlohmann::json::parse(res.body, nullptr, false);
  if (body.is_discarded()) throw MalformedResponse("response body is not JSON");
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponse("response lacks choices[0].message.content");
  }
}

ReasonerDecision RemoteReasoner::do_decide(const ReasonerQuery& query) {
  auto fallback = [&](const std::string& why) {
    ReasonerDecision d = fallback_.decide_scripted(query);
    d.fallback = true;
    d.error = why;
    return d;
  };
  try {
    nlohmann::json messages = nlohmann::json::array(
        {{{"role", "system"}, {"content", kSystemPrompt}}, {{"role", "user"}, {"content", prompts_.render(query)}}});
    std::string content;
    try {
      content = chat(messages);
      return parse_decision(content, query);
    } catch (const MalformedResponse&) {
      if (!content.empty()) messages.push_back({{"role", "assistant"}, {"content", content}});
      messages.push_back({{"role", "user"}, {"content", kFormatReminder}});
      return parse_decision(chat(messages), query);
    }
  } catch (const NetworkError& e) {
    return fallback(std::string("NetworkError: ") + e.what());
  } catch (const AuthError& e) {
    return fallback(std::string("AuthError: ") + e.what());
  } catch (const MalformedResponse& e) {
    return fallback(std::string("MalformedResponse: ") + e.what());
  }
}

}  // namespace aerr
