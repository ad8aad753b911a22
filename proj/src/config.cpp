#include "aerr/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace aerr {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw std::invalid_argument(std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
}

}  // namespace

void EpisodeConfig::validate() const {
  require(max_steps > 0, "max_steps must be positive");
  require(success_radius_m >= 0.0, "success_radius_m must be non-negative");
  require(detection_noise >= 0.0 && detection_noise <= 1.0, "detection_noise must lie in [0, 1]");
  require(planner.sensor.range_m > 0.0, "sensor range must be positive");
  require(planner.sensor.fov_deg >= 0.0 && planner.sensor.fov_deg <= 360.0, "fov must lie in [0, 360]");
  require(planner.fast.value_alpha >= 0.0 && planner.fast.value_beta >= 0.0, "value map weights must be non-negative");
  require(planner.fast.d_max_m > 0.0, "d_max must be positive");
  require(planner.fast.sigma_g_m > 0.0, "sigma_g must be positive");
  require(planner.fast.merge_radius >= 0, "merge_radius must be non-negative");
  require(planner.waypoint_interval_m > 0.0, "waypoint interval must be positive");
  require(planner.escape.max_escape_steps > 0, "max_escape_steps must be positive");
  require(ablations.static_alpha >= 0.0 && ablations.static_beta >= 0.0, "static weights must be non-negative");
  planner.fast.er.validate();
  planner.stuck.validate();
}

nlohmann::json to_json(const EpisodeConfig& c) {
  const auto& p = c.planner;
  const auto& f = p.fast;
  return {
      {"max_steps", c.max_steps},
      {"success_radius_m", c.success_radius_m},
      {"seed", c.seed},
      {"detection_noise", c.detection_noise},
      {"reasoner", c.reasoner == ReasonerKind::Scripted ? "scripted" : "remote"},
      {"remote",
       {{"url", c.remote.url},
        {"model", c.remote.model},
        {"api_key_env", c.remote.api_key_env},
        {"timeout_s", c.remote.timeout_s},
        {"prompts_dir", c.remote.prompts_dir.string()}}},
      {"ablations",
       {{"recovery", c.ablations.recovery},
        {"reminiscing", c.ablations.reminiscing},
        {"dynamic_weights", c.ablations.dynamic_weights},
        {"slow_thinking", c.ablations.slow_thinking},
        {"static_alpha", c.ablations.static_alpha},
        {"static_beta", c.ablations.static_beta}}},
      {"sensor", {{"fov_deg", p.sensor.fov_deg}, {"range_m", p.sensor.range_m}}},
      {"value_map", {{"alpha", f.value_alpha}, {"beta", f.value_beta}, {"d_max_m", f.d_max_m}}},
      {"fast_thinking",
       {{"sigma_g_m", f.sigma_g_m},
        {"lambda_overlap", f.lambda_overlap},
        {"coverage_range_m", f.coverage_range_m},
        {"boundary_score_floor", f.boundary_score_floor},
        {"merge_radius", f.merge_radius},
        {"sigma", {f.er.sigma1, f.er.sigma2, f.er.sigma3}},
        {"alpha_min", f.er.alpha_min},
        {"beta_max", f.er.beta_max}}},
      {"stuck", {{"n_rec", p.stuck.n_rec}, {"d_rec_m", p.stuck.d_rec_m}, {"d_split_m", p.stuck.d_split_m}}},
      {"keypoints",
       {{"open_area_threshold_m2", p.keypoints.open_area_threshold_m2},
        {"dedup_radius_m", p.keypoints.dedup_radius_m},
        {"open_area_range_m", p.keypoints.open_area_range_m}}},
      {"recovery",
       {{"waypoint_interval_m", p.waypoint_interval_m},
        {"capture_radius_m", p.follow.capture_radius_m},
        {"max_escape_steps", p.escape.max_escape_steps},
        {"sketch_margin", p.escape.sketch_margin}}},
      {"locomotion",
       {{"lookahead_m", p.locomotion.lookahead_m},
        {"spin_turns", p.locomotion.spin_turns},
        {"initial_spin", p.locomotion.initial_spin},
        {"approach_search_m", p.locomotion.approach_search_m}}},
      {"review_threshold", p.scripted.review_threshold},
  };
}

EpisodeConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  EpisodeConfig c;
  try {
    read(j, "max_steps", c.max_steps);
    read(j, "success_radius_m", c.success_radius_m);
    read(j, "seed", c.seed);
    read(j, "detection_noise", c.detection_noise);
    if (j.contains("reasoner")) {
      const auto r = j.at("reasoner").get<std::string>();
      if (r == "scripted") {
        c.reasoner = ReasonerKind::Scripted;
      } else if (r == "remote") {
        c.reasoner = ReasonerKind::Remote;
      } else {
        throw std::invalid_argument("reasoner must be \"scripted\" or \"remote\"");
      }
    }
    const auto& remote = section(j, "remote");
    read(remote, "url", c.remote.url);
    read(remote, "model", c.remote.model);
    read(remote, "api_key_env", c.remote.api_key_env);
    read(remote, "timeout_s", c.remote.timeout_s);
    if (remote.contains("prompts_dir")) c.remote.prompts_dir = remote.at("prompts_dir").get<std::string>();

    const auto& ab = section(j, "ablations");
    read(ab, "recovery", c.ablations.recovery);
    read(ab, "reminiscing", c.ablations.reminiscing);
    read(ab, "dynamic_weights", c.ablations.dynamic_weights);
    read(ab, "slow_thinking", c.ablations.slow_thinking);
    read(ab, "static_alpha", c.ablations.static_alpha);
    read(ab, "static_beta", c.ablations.static_beta);

    auto& p = c.planner;
    const auto& sensor = section(j, "sensor");
    read(sensor, "fov_deg", p.sensor.fov_deg);
    read(sensor, "range_m", p.sensor.range_m);
    const auto& vm = section(j, "value_map");
    read(vm, "alpha", p.fast.value_alpha);
    read(vm, "beta", p.fast.value_beta);
    read(vm, "d_max_m", p.fast.d_max_m);
    const auto& ft = section(j, "fast_thinking");
    read(ft, "sigma_g_m", p.fast.sigma_g_m);
    read(ft, "lambda_overlap", p.fast.lambda_overlap);
    read(ft, "coverage_range_m", p.fast.coverage_range_m);
    read(ft, "boundary_score_floor", p.fast.boundary_score_floor);
    read(ft, "merge_radius", p.fast.merge_radius);
    read(ft, "alpha_min", p.fast.er.alpha_min);
    read(ft, "beta_max", p.fast.er.beta_max);
    if (ft.contains("sigma")) {
      const auto s = ft.at("sigma").get<std::vector<double>>();
      if (s.size() != 3) throw std::invalid_argument("fast_thinking.sigma needs three weights");
      p.fast.er.sigma1 = s[0];
      p.fast.er.sigma2 = s[1];
      p.fast.er.sigma3 = s[2];
    }
    const auto& st = section(j, "stuck");
    read(st, "n_rec", p.stuck.n_rec);
    read(st, "d_rec_m", p.stuck.d_rec_m);
    read(st, "d_split_m", p.stuck.d_split_m);
    const auto& kp = section(j, "keypoints");
    read(kp, "open_area_threshold_m2", p.keypoints.open_area_threshold_m2);
    read(kp, "dedup_radius_m", p.keypoints.dedup_radius_m);
    read(kp, "open_area_range_m", p.keypoints.open_area_range_m);
    const auto& rec = section(j, "recovery");
    read(rec, "waypoint_interval_m", p.waypoint_interval_m);
    read(rec, "capture_radius_m", p.follow.capture_radius_m);
    p.escape.capture_radius_m = p.follow.capture_radius_m;
    read(rec, "max_escape_steps", p.escape.max_escape_steps);
    read(rec, "sketch_margin", p.escape.sketch_margin);
    const auto& loc = section(j, "locomotion");
    read(loc, "lookahead_m", p.locomotion.lookahead_m);
    read(loc, "spin_turns", p.locomotion.spin_turns);
    read(loc, "initial_spin", p.locomotion.initial_spin);
    read(loc, "approach_search_m", p.locomotion.approach_search_m);
    read(j, "review_threshold", p.scripted.review_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

EpisodeConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("config " + path.string() + " is not valid JSON");
  return config_from_json(j);
}

std::string config_digest(const EpisodeConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aerr
