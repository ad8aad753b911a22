// Acceptance run: one line per criterion, nonzero exit when any fails.

#include "aerr/fast_thinking.hpp"
#include "aerr/recovery.hpp"
#include "aerr/runner.hpp"
#include "aerr/state_machine.hpp"

#include "mock_llm.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

using namespace aerr;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << std::fixed << v;
  return os.str();
}

EpisodeConfig cfg_with(const std::function<void(EpisodeConfig&)>& edit) {
  EpisodeConfig cfg = aerr::test::bundled_config();
  edit(cfg);
  return cfg;
}

EpisodeResult run(const std::string& stem, const EpisodeConfig& cfg) {
  const auto world = load_scenario(aerr::test::scenario_path(stem));
  const auto priors = aerr::test::bundled_priors();
  const auto reasoner = make_reasoner(cfg, priors);
  return run_episode(world, cfg, priors, *reasoner);
}

std::vector<std::filesystem::path> corpus() { return list_scenarios(asset_dir() / "scenarios"); }

Verdict equations() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  auto check = [&](double got, double want, const char* name) {
    worst = std::max(worst, std::abs(got - want));
    v.require(std::abs(got - want) <= 1e-12, name);
  };
  for (int t = 0; t < 1000; ++t) {
    const double d_max = 0.5 + 20.0 * u(rng);
    const double d = 1.5 * d_max * u(rng);
    check(distance_score(d, d_max), d < d_max ? 1.0 - d / d_max : 0.0, "distance_score");

    const double sem = u(rng), dist = u(rng), a = u(rng), b = u(rng);
    check(frontier_value(sem, dist, a, b), a * sem + b * dist, "frontier_value");

    const double s1 = u(rng), s2 = u(rng) * (1.0 - s1), s3 = 1.0 - s1 - s2;
    const ERConfig er{.sigma1 = s1, .sigma2 = s2, .sigma3 = s3, .k_max = 1 + static_cast<int>(rng() % 1000),
                      .alpha_min = u(rng), .beta_max = u(rng)};
    const double ur = u(rng), fd = u(rng);
    const int k = static_cast<int>(rng() % static_cast<unsigned>(er.k_max + 1));
    const double want_er = s1 * ur + s2 * fd + s3 * (1.0 - static_cast<double>(k) / er.k_max);
    check(exploration_reward({ur, fd, k}, er), want_er, "exploration_reward");

    const double e = u(rng);
    const Weights w = update_weights(e, er);
    check(w.alpha, er.alpha_min * (1.0 - e), "update_weights alpha");
    check(w.beta, er.beta_max * e, "update_weights beta");

    const double val = u(rng), info = u(rng), al = u(rng), be = u(rng);
    check(objective(val, info, al, be), al * val + be * info, "objective");
  }
  if (v.pass) {
    std::ostringstream os;
    os << "5 x 1000 inputs, max error " << std::scientific << std::setprecision(1) << worst;
    v.detail = os.str();
  }
  return v;
}

Verdict frontier_oracle() {
  Verdict v;
  std::mt19937_64 rng(40);
  const FastThinkingConfig cfg;
  int maps = 0;
  int argmax_checks = 0;
  for (double density : {0.05, 0.15, 0.25, 0.35}) {
    for (int seed = 0; seed < 25; ++seed) {
      const auto m = aerr::test::random_belief(rng, 40, 40, density, 0.5);
      ++maps;
      v.require(frontier_cells(m) == aerr::test::brute_frontier_cells(m), "frontier cells differ from brute force");
      auto frontiers = extract_frontiers(m, {0}, cfg.merge_radius);
      std::erase_if(frontiers, [](const Frontier& f) { return f.kind != FrontierKind::IntraFloor; });
      if (frontiers.empty()) continue;
      const Cell robot = frontiers.front().members.front();
      Grid<double> geo = distance_field(m, robot, TraversalRules{.allow_unknown = false});
      for (const auto& f : frontiers) {
        if (!std::isfinite(geo[f.cell])) geo[f.cell] = 100.0;
      }
      const std::vector<double> weights(8, 0.3);
      const auto cands = evaluate_frontiers(m, frontiers, geo, weights, cfg);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const Weights w{u(rng), u(rng)};
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& c : cands) lo = std::min(lo, c.info_gain), hi = std::max(hi, c.info_gain);
      std::size_t best = 0;
      double best_j = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const double in = hi > lo ? (cands[i].info_gain - lo) / (hi - lo) : (hi > 0 ? 1.0 : 0.0);
        const double j = w.alpha * cands[i].value + w.beta * in;
        if (j > best_j + 1e-9 || (std::abs(j - best_j) <= 1e-9 && std::tie(cands[i].geodesic_m, cands[i].cell) <
                                                                       std::tie(cands[best].geodesic_m, cands[best].cell))) {
          best = i;
          best_j = j;
        }
      }
      v.require(select_frontier(cands, w) == best, "select_frontier differs from exhaustive argmax");
      ++argmax_checks;
    }
  }
  if (v.pass) v.detail = std::to_string(maps) + " maps, " + std::to_string(argmax_checks) + " argmax checks";
  return v;
}

Verdict path_oracle() {
  Verdict v;
  std::mt19937_64 rng(300);
  int solved = 0;
  for (int t = 0; t < 100;) {
    const auto m = aerr::test::random_known(rng, 30, 30, 0.1 + 0.1 * (t % 3));
    const Cell s{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    const Cell g{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    if (m.state(s) != CellState::Free || m.state(g) != CellState::Free) continue;
    ++t;
    const double want = aerr::test::relaxation_oracle(m, s, g);
    const auto path = astar(m, s, g);
    v.require(path.has_value() == std::isfinite(want), "reachability disagrees with oracle");
    if (!path) continue;
    ++solved;
    v.require(std::abs(path_length_m(*path) - want) <= 1e-9, "A* cost differs from oracle");
  }
  if (v.pass) v.detail = "100 grids, " + std::to_string(solved) + " reachable";
  return v;
}

Triggers triggers_from_bits(unsigned bits) {
  Triggers t;
  t.stuck = bits & 1u;
  t.exhausted = bits & 2u;
  t.recovery_done = bits & 4u;
  t.reminisce_done = bits & 8u;
  t.floor_changed = bits & 16u;
  t.door_seen = bits & 32u;
  t.slow_decision_done = bits & 64u;
  return t;
}

std::string table_oracle(const std::string& s, const Triggers& t, bool has_frontier, bool far) {
  const bool exploring = s.rfind("Exploration", 0) == 0;
  const bool recovering = s.rfind("Recovery", 0) == 0;
  if (t.stuck && !recovering && has_frontier) return far ? "Recovery/FarFrontier" : "Recovery/NearFrontier";
  if (t.exhausted && exploring) return "Reminiscing/TargetVerify";
  if (t.recovery_done && recovering) return "Exploration/Fast";
  if (t.reminisce_done && s == "Reminiscing/TargetVerify") return "Reminiscing/StaircaseSearch";
  if (t.floor_changed) return "Exploration/Fast";
  if (t.door_seen && s == "Exploration/Fast") return "Exploration/Slow";
  if (t.slow_decision_done && s == "Exploration/Slow") return "Exploration/Fast";
  return s;
}

Verdict state_machine(const std::vector<StateLogEntry>& log) {
  Verdict v;
  int cases = 0;
  for (const auto& s : all_state_labels()) {
    for (unsigned bits = 0; bits < 128; ++bits) {
      for (int ctx_kind = 0; ctx_kind < 3; ++ctx_kind) {
        TransitionContext ctx;
        ctx.d_split_m = 3.0;
        if (ctx_kind > 0) ctx.frontier = Cell{4, 4};
        ctx.frontier_distance_m = ctx_kind == 2 ? 6.0 : 1.0;
        const Triggers t = triggers_from_bits(bits);
        v.require(state_name(transition(s, t, ctx)) == table_oracle(state_name(s), t, ctx_kind > 0, ctx_kind == 2),
                  "transition disagrees with table");
        ++cases;
      }
    }
  }
  const double d_split = StuckDetectorConfig{}.d_split_m;
  v.require(validate_state_log(log, d_split).empty(), "valid log rejected");
  int mutations = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    for (const auto& label : all_state_labels()) {
      if (state_name(label) == log[i].state) continue;
      auto mutated = log;
      mutated[i].state = state_name(label);
      v.require(!validate_state_log(mutated, d_split).empty(), "mutation accepted at entry " + std::to_string(i));
      ++mutations;
    }
  }
  if (v.pass) v.detail = std::to_string(cases) + " table cases, " + std::to_string(mutations) + " mutations rejected";
  return v;
}

Verdict stuck_detector() {
  Verdict v;
  const StuckDetectorConfig cfg;
  auto first_trigger = [&](const std::function<Eigen::Vector2d(int)>& at, int steps) {
    PoseHistory h(cfg.n_rec);
    for (int i = 0; i < steps; ++i) {
      h.push(at(i));
      if (h.full() && detect_stuck(h, cfg)) return i;
    }
    return -1;
  };
  const int stationary = first_trigger([](int) { return Eigen::Vector2d(1.0, 1.0); }, 100);
  const int oscillation = first_trigger([](int i) { return Eigen::Vector2d(i % 2 ? 1.25 : 1.0, 1.0); }, 100);
  const int straight = first_trigger([](int i) { return Eigen::Vector2d(0.125 + 0.25 * i, 0.125); }, 400);
  v.require(stationary >= 0 && stationary <= cfg.n_rec, "stationary did not trigger within N_rec");
  v.require(oscillation >= 0 && oscillation <= cfg.n_rec, "oscillation did not trigger within N_rec");
  v.require(straight < 0, "straight line triggered");
  if (v.pass) {
    v.detail = "stationary at step " + std::to_string(stationary) + ", oscillation at step " +
               std::to_string(oscillation) + ", straight never";
  }
  return v;
}

Verdict trap(const EpisodeResult& full) {
  Verdict v;
  const auto no_rec = cfg_with([](EpisodeConfig& c) { c.ablations.recovery = false; });
  auto t0 = Clock::now();
  const auto again = run("02_trap_narrow_passage", aerr::test::bundled_config());
  const double t_full = seconds_since(t0);
  t0 = Clock::now();
  const auto ablated = run("02_trap_narrow_passage", no_rec);
  const double t_ablated = seconds_since(t0);
  const auto ablated2 = run("02_trap_narrow_passage", no_rec);
  v.require(full.success && full.steps <= 500, "full agent did not succeed");
  v.require(full.recoveries > 0, "full agent never entered recovery");
  v.require(!ablated.success, "--no-recovery succeeded");
  v.require(summary_json(full) == summary_json(again) && summary_json(ablated) == summary_json(ablated2),
            "nondeterministic");
  v.require(t_full < 5.0 && t_ablated < 5.0, "over 5 s");
  if (v.pass) {
    v.detail = "full: success in " + std::to_string(full.steps) + " steps, " + std::to_string(full.recoveries) +
               " recoveries; no-recovery: fails at " + std::to_string(ablated.steps);
  }
  return v;
}

Verdict two_floor() {
  Verdict v;
  const auto no_rem = cfg_with([](EpisodeConfig& c) { c.ablations.reminiscing = false; });
  auto t0 = Clock::now();
  const auto full = run("03_two_floor_hidden_stair", aerr::test::bundled_config());
  const double t_full = seconds_since(t0);
  t0 = Clock::now();
  const auto ablated = run("03_two_floor_hidden_stair", no_rem);
  const double t_ablated = seconds_since(t0);
  const auto full2 = run("03_two_floor_hidden_stair", aerr::test::bundled_config());
  const auto ablated2 = run("03_two_floor_hidden_stair", no_rem);
  v.require(full.success, "full agent did not succeed");
  v.require(full.floors_visited.size() >= 2, "full agent never changed floors");
  v.require(!ablated.success && ablated.steps == no_rem.max_steps, "--no-reminiscing did not fail at budget");
  v.require(summary_json(full) == summary_json(full2) && summary_json(ablated) == summary_json(ablated2),
            "nondeterministic");
  v.require(t_full < 5.0 && t_ablated < 5.0, "over 5 s");
  if (v.pass) {
    v.detail = "full: success in " + std::to_string(full.steps) + " steps over " +
               std::to_string(full.floors_visited.size()) + " floors; no-reminiscing: fails at " +
               std::to_string(ablated.steps);
  }
  return v;
}

double mean_steps_successful(const BatchOutcome& b) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : b.results) {
    if (r.success) sum += r.steps, ++n;
  }
  return n ? sum / n : 0.0;
}

Verdict adaptive_weights(const BatchOutcome& dynamic, const BatchOutcome& fixed) {
  Verdict v;
  const auto& d = dynamic.report.at("aggregate");
  const auto& s = fixed.report.at("aggregate");
  const double d_sr = d.at("sr").get<double>(), s_sr = s.at("sr").get<double>();
  const double d_steps = d.at("mean_steps_to_success").get<double>();
  const double s_steps = s.at("mean_steps_to_success").get<double>();
  int separating = 0;
  for (std::size_t i = 0; i < dynamic.results.size() && i < fixed.results.size(); ++i) {
    const auto& a = dynamic.results[i];
    const auto& b = fixed.results[i];
    if (a.success != b.success || a.steps != b.steps) ++separating;
  }
  v.require(dynamic.results.size() == 10 && fixed.results.size() == 10, "corpus is not 10 scenarios");
  v.require(d_sr >= s_sr, "dynamic SR below static SR");
  v.require(d_steps < s_steps, "dynamic mean steps-to-success not lower");
  v.require(separating >= 2, "fewer than 2 scenarios separate the policies");
  v.detail = "SR " + num(d_sr, 2) + " vs " + num(s_sr, 2) + ", mean steps-to-success (failures at budget) " +
             num(d_steps, 1) + " vs " + num(s_steps, 1) + ", over successes only " +
             num(mean_steps_successful(dynamic), 1) + " vs " + num(mean_steps_successful(fixed), 1) + ", " +
             std::to_string(separating) + " scenarios separate" + (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict metric_identities(const std::vector<const BatchOutcome*>& batches) {
  Verdict v;
  auto scored = [](bool ok, double path, double opt) {
    EpisodeResult r;
    r.success = ok;
    r.path_length_m = path;
    r.optimal_length_m = opt;
    return r;
  };
  const auto a = compute_spl(std::vector<EpisodeResult>{scored(true, 5.0, 5.0)});
  const auto b = compute_spl(std::vector<EpisodeResult>{scored(false, 3.0, 5.0)});
  const auto c = compute_spl(std::vector<EpisodeResult>{scored(true, 10.0, 5.0), scored(false, 2.0, 5.0)});
  v.require(a.sr == 1.0 && a.spl == 1.0, "example (1, 1)");
  v.require(b.sr == 0.0 && b.spl == 0.0, "example (0, 0)");
  v.require(c.sr == 0.5 && c.spl == 0.25, "example (0.5, 0.25)");
  int checked = 0;
  for (const auto* batch : batches) {
    const auto s = compute_spl(batch->results);
    v.require(s.spl <= s.sr + 1e-12, "SPL above SR");
    const auto& agg = batch->report.at("aggregate");
    v.require(agg.at("spl").get<double>() <= agg.at("sr").get<double>() + 1e-12, "report SPL above SR");
    for (const auto& [tag, t] : batch->report.at("by_tag").items()) {
      v.require(t.at("spl").get<double>() <= t.at("sr").get<double>() + 1e-12, "tag SPL above SR: " + tag);
    }
    ++checked;
  }
  if (v.pass) v.detail = "3 worked examples, " + std::to_string(checked) + " batches";
  return v;
}

Verdict swap_property() {
  Verdict v;
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ERConfig cfg;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 10;
    std::vector<CandidateScore> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = {{static_cast<int>(i), 0}, 0.8 * u(rng), 0.8 * u(rng), u(rng)};
    const std::size_t a = rng() % n;
    std::size_t b = rng() % n;
    if (b == a) b = (a + 1) % n;
    c[a].info_gain = 1.0;  // information maximizer
    c[b].value = 0.9;      // value maximizer
    v.require(select_frontier(c, update_weights(1.0, cfg)) == a, "ER=1 does not pick the information maximizer");
    v.require(select_frontier(c, update_weights(0.0, cfg)) == b, "ER=0 does not pick the value maximizer");
  }
  if (v.pass) v.detail = "100 constructed pairs";
  return v;
}

Verdict determinism(const BatchOutcome& serial) {
  Verdict v;
  const auto cfg = aerr::test::bundled_config();
  const auto priors = aerr::test::bundled_priors();
  const auto again = run_batch(corpus(), cfg, priors, 1);
  const auto parallel = run_batch(corpus(), cfg, priors, 8);
  v.require(serial.report.dump() == again.report.dump(), "repeated batch differs");
  v.require(serial.report.dump() == parallel.report.dump(), "--jobs 8 differs from --jobs 1");
  for (std::size_t i = 0; i < serial.results.size() && v.pass; ++i) {
    std::ostringstream a, b;
    write_episode_log(a, serial.results[i], cfg, serial.results[i].scenario);
    write_episode_log(b, parallel.results[i], cfg, parallel.results[i].scenario);
    v.require(a.str() == b.str(), "episode log differs for " + serial.results[i].scenario);
  }
  if (v.pass) v.detail = "reports and logs byte-identical across repeats and 1 vs 8 jobs";
  return v;
}

Verdict remote_resilience() {
  Verdict v;
  const auto scripted = run("01_demo_two_rooms", aerr::test::bundled_config());
  aerr::test::MockLlm prose({{200, "Probably the bedroom, it usually has a bed."}});
  auto remote_to = [](const std::string& url) {
    return cfg_with([&](EpisodeConfig& c) {
      c.reasoner = ReasonerKind::Remote;
      c.remote.url = url;
      c.remote.timeout_s = 2.0;
    });
  };
  const auto malformed = run("01_demo_two_rooms", remote_to(prose.url()));
  const auto malformed2 = run("01_demo_two_rooms", remote_to(prose.url()));
  const auto dead = run("01_demo_two_rooms", remote_to("http://127.0.0.1:1/v1/chat/completions"));
  auto all_fallback = [](const EpisodeResult& r, const std::string& error) {
    if (r.reasoner_events.empty() || r.fallbacks != r.reasoner_calls) return false;
    for (const auto& e : r.reasoner_events) {
      if (!e.fallback || e.error.rfind(error, 0) != 0) return false;
    }
    return true;
  };
  auto same_trajectory = [&](const EpisodeResult& r) {
    if (r.log.size() != scripted.log.size() || r.success != scripted.success) return false;
    for (std::size_t i = 0; i < r.log.size(); ++i) {
      if (r.log[i].state != scripted.log[i].state || !(r.log[i].pose == scripted.log[i].pose)) return false;
    }
    return true;
  };
  v.require(malformed.steps > 0 && dead.steps > 0, "episode did not run");
  v.require(all_fallback(malformed, "MalformedResponse"), "malformed replies not flagged as fallback");
  v.require(all_fallback(dead, "NetworkError"), "unreachable endpoint not flagged as fallback");
  v.require(prose.request_count() == 2 * static_cast<std::size_t>(malformed.reasoner_calls + malformed2.reasoner_calls),
            "malformed path did not retry exactly once");
  v.require(same_trajectory(malformed) && same_trajectory(dead) && same_trajectory(malformed2),
            "fallback episode differs from the scripted episode");
  if (v.pass) {
    v.detail = "malformed: " + std::to_string(malformed.fallbacks) + " fallbacks, unreachable: " +
               std::to_string(dead.fallbacks) + " fallbacks, both " + (dead.success ? "succeed" : "complete");
  }
  return v;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const char* name, double limit_s, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double took = seconds_since(t0);
    if (limit_s > 0 && took >= limit_s) {
      v.pass = false;
      v.detail += " (over " + num(limit_s, 0) + " s)";
    }
    failed += v.pass ? 0 : 1;
    std::printf("criterion %2d %-28s %s  %s  [%.2f s]\n", n, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), took);
    std::fflush(stdout);
  };

  const auto cfg = aerr::test::bundled_config();
  const auto priors = aerr::test::bundled_priors();
  const auto trap_full = run("02_trap_narrow_passage", cfg);

  std::optional<BatchOutcome> dynamic, fixed;
  report(1, "equation exactness", 1.0, equations);
  report(2, "frontier oracle", 10.0, frontier_oracle);
  report(3, "path oracle", 10.0, path_oracle);
  report(4, "state-machine relation", 1.0, [&] { return state_machine(trap_full.log); });
  report(5, "stuck detector", 0.0, stuck_detector);
  report(6, "recovery contract", 0.0, [&] { return trap(trap_full); });
  report(7, "reminiscing contract", 0.0, two_floor);
  report(8, "adaptive weights", 120.0, [&] {
    dynamic = run_batch(corpus(), cfg, priors, 1);
    fixed = run_batch(corpus(), cfg_with([](EpisodeConfig& c) { c.ablations.dynamic_weights = false; }), priors, 1);
    return adaptive_weights(*dynamic, *fixed);
  });
  report(9, "metric identities", 0.0, [&] {
    if (!dynamic || !fixed) return Verdict{false, "batches from criterion 8 missing"};
    std::vector<BatchOutcome> ablations;
    for (const auto& edit : std::vector<std::function<void(EpisodeConfig&)>>{
             [](EpisodeConfig& c) { c.ablations.recovery = false; },
             [](EpisodeConfig& c) { c.ablations.reminiscing = false; },
             [](EpisodeConfig& c) { c.ablations.slow_thinking = false; }}) {
      ablations.push_back(run_batch(corpus(), cfg_with(edit), priors, 4));
    }
    std::vector<const BatchOutcome*> all{&*dynamic, &*fixed};
    for (const auto& b : ablations) all.push_back(&b);
    return metric_identities(all);
  });
  report(10, "ER swap property", 0.0, swap_property);
  report(11, "determinism and jobs", 0.0, [&] {
    if (!dynamic) return Verdict{false, "batch from criterion 8 missing"};
    return determinism(*dynamic);
  });
  report(12, "remote reasoner resilience", 0.0, remote_resilience);

  std::printf("%d of 12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
