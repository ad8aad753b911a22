#pragma once

#include "aerr/mapping.hpp"
#include "aerr/priors.hpp"
#include "aerr/world.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace aerr {

struct RoomEntry {
  int room_id = -1;
  std::string room_type;
  std::vector<std::string> object_categories;  ///< sorted, unique
  std::optional<Cell> via_door;                ///< empty for the room the agent stands in
};

struct SceneDescription {
  std::vector<RoomEntry> rooms;
  Pose pose;
  std::string target;
};

/// Splits the visible cells by the first door their line of sight crosses. Room types come from
/// the scenario annotation.
SceneDescription build_scene_description(const Observation& obs, const LabelTable& labels,
                                         const std::string& target);

std::size_t distinct_room_count(const SceneDescription& scene);

struct KeypointSummary {
  int id = 0;
  int floor = 0;
  Cell position;
  KeyPointKind kind = KeyPointKind::RoomEntrance;
  double open_area_m2 = 0.0;
  std::vector<std::string> categories;  ///< categories visible in the snapshot, sorted
  std::vector<Cell> stair_cells;        ///< stair cells in the snapshot leading somewhere new
};

/// Stairs in a snapshot lead one floor up (StairUp) or down (StairDown).
KeypointSummary summarize_keypoint(const KeyPoint& kp, const LabelTable& labels,
                                   const std::set<int>& visited_floors);

/// Local map for fine-grained control: the box around agent and goal grown by a margin,
/// rows in VisibilityMap::dump characters.
struct LocalSketch {
  Cell origin;  ///< map cell of row 0, column 0
  std::vector<std::string> rows;
  Pose pose;
  Cell goal;  ///< map coordinates
};

LocalSketch make_local_sketch(const VisibilityMap& map, const Pose& pose, Cell goal, int margin);

enum class QueryKind { FrontierChoice, FineAction, KeypointTargetReview, KeypointStairReview };

std::string_view to_string(QueryKind kind);

struct ReasonerQuery {
  QueryKind kind = QueryKind::FrontierChoice;
  std::string target;
  std::optional<SceneDescription> scene;  ///< FrontierChoice
  std::vector<KeypointSummary> keypoints; ///< keypoint reviews
  std::optional<LocalSketch> sketch;      ///< FineAction
  std::vector<std::string> candidates;    ///< labels, one per choosable item

  /// Throws std::invalid_argument when candidates are empty or inconsistent with the payload.
  void validate() const;
};

ReasonerQuery frontier_choice_query(const SceneDescription& scene);
ReasonerQuery fine_action_query(const LocalSketch& sketch, const std::string& target);
ReasonerQuery target_review_query(std::vector<KeypointSummary> keypoints, const std::string& target);
ReasonerQuery stair_review_query(std::vector<KeypointSummary> keypoints, const std::string& target);

/// Candidates offered to FineAction queries, in candidate order.
const std::vector<Action>& fine_action_candidates();

struct ReasonerDecision {
  std::vector<int> selected;  ///< candidate indices; KeypointTargetReview may select several or none
  double confidence = 0.0;
  std::string rationale;
  bool fallback = false;
  std::string error;  ///< failure that triggered the fallback

  std::optional<int> chosen() const {
    return selected.empty() ? std::nullopt : std::optional<int>(selected.front());
  }
};

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  ReasonerDecision decide(const ReasonerQuery& query);
  long calls() const { return calls_.load(); }

 protected:
  virtual ReasonerDecision do_decide(const ReasonerQuery& query) = 0;

 private:
  std::atomic<long> calls_{0};
};

struct ScriptedConfig {
  double review_threshold = 0.7;
};

/// Deterministic rule-based stand-in for the multimodal model.
class ScriptedReasoner : public Reasoner {
 public:
  ScriptedReasoner(PriorTable priors, ScriptedConfig cfg = {}) : priors_(std::move(priors)), cfg_(cfg) {}

  /// Pure: identical queries give identical decisions.
  ReasonerDecision decide_scripted(const ReasonerQuery& query) const;

 protected:
  ReasonerDecision do_decide(const ReasonerQuery& query) override { return decide_scripted(query); }

 private:
  PriorTable priors_;
  ScriptedConfig cfg_;
};

inline constexpr double kFineGoalRadiusM = 0.3;

/// First action of the shortest action sequence reaching the goal on the sketch; falls back to
/// local A* plus a greedy heading-then-move step when that search gives up.
Action scripted_fine_action(const LocalSketch& sketch);

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POST transport. Implementations throw NetworkError when no response arrives.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(double timeout_s = 30.0) : timeout_s_(timeout_s) {}
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  double timeout_s_;
};

struct PromptTemplates {
  std::map<QueryKind, std::string> templates;

  /// Reads frontier_choice.txt, fine_action.txt, keypoint_target_review.txt and
  /// keypoint_stair_review.txt. Placeholders: {{target}} {{scene}} {{keypoints}} {{map}} {{candidates}}.
  static PromptTemplates load(const std::filesystem::path& dir);
  std::string render(const ReasonerQuery& query) const;
};

/// Textual rendering of the query payload used by the templates.
std::string render_scene(const SceneDescription& scene);
std::string render_keypoints(const std::vector<KeypointSummary>& keypoints);
std::string render_sketch(const LocalSketch& sketch);
std::string render_candidates(const std::vector<std::string>& candidates);

struct RemoteConfig {
  std::string url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "AERR_REASONER_KEY";
  double timeout_s = 30.0;
  std::filesystem::path prompts_dir;
};

/// Parses {"chosen": int | [int...], "confidence": float, "rationale": string} and checks indices.
ReasonerDecision parse_decision(const std::string& content, const ReasonerQuery& query);

class RemoteReasoner : public Reasoner {
 public:
  RemoteReasoner(RemoteConfig cfg, std::shared_ptr<HttpTransport> transport, PriorTable priors,
                 ScriptedConfig scripted = {});

  const RemoteConfig& config() const { return cfg_; }

 protected:
  ReasonerDecision do_decide(const ReasonerQuery& query) override;

 private:
  std::string chat(const nlohmann::json& messages) const;

  RemoteConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  ScriptedReasoner fallback_;
  PromptTemplates prompts_;
};

}  // namespace aerr
