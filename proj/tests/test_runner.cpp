#include "aerr/render.hpp"
#include "aerr/runner.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

using namespace aerr;

namespace {

EpisodeResult scored(bool success, double path, std::optional<double> optimal) {
  EpisodeResult r;
  r.success = success;
  r.path_length_m = path;
  r.optimal_length_m = optimal;
  return r;
}

EpisodeResult run_scenario(const std::string& stem, EpisodeConfig cfg = aerr::test::bundled_config()) {
  const auto world = load_scenario(aerr::test::scenario_path(stem));
  const auto priors = aerr::test::bundled_priors();
  ScriptedReasoner reasoner(priors, cfg.planner.scripted);
  return run_episode(world, cfg, priors, reasoner);
}

std::vector<std::filesystem::path> corpus() { return list_scenarios(asset_dir() / "scenarios"); }

// Element nesting check: every opened tag closes in order.
bool balanced_xml(const std::string& text) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([A-Za-z][\w:-]*)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (!m[3].str().empty()) continue;
    if (m[1].str().empty()) {
      stack.push_back(m[2]);
    } else {
      if (stack.empty() || stack.back() != m[2].str()) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

}  // namespace

TEST(Runner, SplExamples) {
  const std::vector<EpisodeResult> one{scored(true, 5.0, 5.0)};
  EXPECT_DOUBLE_EQ(compute_spl(one).sr, 1.0);
  EXPECT_DOUBLE_EQ(compute_spl(one).spl, 1.0);
  const std::vector<EpisodeResult> fail{scored(false, 3.0, 5.0)};
  EXPECT_DOUBLE_EQ(compute_spl(fail).sr, 0.0);
  EXPECT_DOUBLE_EQ(compute_spl(fail).spl, 0.0);
  const std::vector<EpisodeResult> half{scored(true, 10.0, 5.0), scored(false, 2.0, 5.0)};
  EXPECT_DOUBLE_EQ(compute_spl(half).sr, 0.5);
  EXPECT_DOUBLE_EQ(compute_spl(half).spl, 0.25);
  // a path shorter than the optimum counts as optimal
  const std::vector<EpisodeResult> short_path{scored(true, 4.0, 5.0)};
  EXPECT_DOUBLE_EQ(compute_spl(short_path).spl, 1.0);
  EXPECT_EQ(compute_spl(std::vector<EpisodeResult>{}).episodes, 0u);
  EXPECT_THROW(compute_spl(std::vector<EpisodeResult>{scored(true, 1.0, std::nullopt)}), MissingOptimal);
  EXPECT_THROW(compute_spl(std::vector<EpisodeResult>{scored(false, 1.0, 0.0)}), MissingOptimal);
}

TEST(Runner, SplBoundedBySr) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> len(0.1, 20.0);
  std::bernoulli_distribution ok(0.6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EpisodeResult> rs;
    for (int i = 0; i < 1 + trial % 9; ++i) rs.push_back(scored(ok(rng), len(rng), len(rng)));
    const auto s = compute_spl(rs);
    EXPECT_GE(s.spl, 0.0);
    EXPECT_LE(s.spl, s.sr + 1e-12);
    EXPECT_LE(s.sr, 1.0);
  }
}

TEST(Runner, TargetInStartRoom) {
  using aerr::test::open_room;
  const auto world = aerr::test::world_from_rows(open_room(8, 6), {2, 2}, 0, "bed", {{{5, 2}, "bed"}});
  const auto cfg = aerr::test::bundled_config();
  const auto priors = aerr::test::bundled_priors();
  ScriptedReasoner reasoner(priors);
  const auto r = run_episode(world, cfg, priors, reasoner);
  EXPECT_TRUE(r.success);
  EXPECT_TRUE(r.stop_issued);
  EXPECT_LT(r.steps, 30);
  ASSERT_TRUE(r.optimal_length_m.has_value());
  EXPECT_GE(r.path_length_m + 1e-9, *r.optimal_length_m);
  EXPECT_NEAR(r.spl_term, *r.optimal_length_m / r.path_length_m, 1e-12);
}

TEST(Runner, BudgetRespected) {
  auto cfg = aerr::test::bundled_config();
  cfg.max_steps = 12;
  const auto r = run_scenario("04_three_floor_maze", cfg);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.steps, 12);
  EXPECT_EQ(r.spl_term, 0.0);
  // one line per decision tick; ticks without an action do not spend budget
  int acted = 0;
  for (const auto& e : r.log) acted += e.action.has_value() ? 1 : 0;
  EXPECT_EQ(acted, 12);
  EXPECT_LE(r.log.back().step, 12);
  for (const auto& path : corpus()) {
    const auto full = run_scenario(path.stem().string());
    EXPECT_LE(full.steps, aerr::test::bundled_config().max_steps) << path;
    if (full.success) EXPECT_TRUE(full.stop_issued) << path;
    EXPECT_EQ(full.reasoner_calls, static_cast<int>(full.reasoner_events.size())) << path;
  }
}

TEST(Runner, DeterministicEpisodes) {
  for (const char* stem : {"01_demo_two_rooms", "02_trap_narrow_passage", "03_two_floor_hidden_stair"}) {
    const auto a = run_scenario(stem);
    const auto b = run_scenario(stem);
    EXPECT_EQ(summary_json(a), summary_json(b)) << stem;
    std::ostringstream la;
    std::ostringstream lb;
    write_episode_log(la, a, aerr::test::bundled_config(), stem);
    write_episode_log(lb, b, aerr::test::bundled_config(), stem);
    EXPECT_EQ(la.str(), lb.str()) << stem;
  }
}

TEST(Runner, BatchJobsEquivalent) {
  const auto cfg = aerr::test::bundled_config();
  const auto priors = aerr::test::bundled_priors();
  const auto paths = corpus();
  ASSERT_GE(paths.size(), 10u);
  const auto serial = run_batch(paths, cfg, priors, 1);
  const auto parallel = run_batch(paths, cfg, priors, 8);
  EXPECT_EQ(serial.report.dump(), parallel.report.dump());
  EXPECT_TRUE(serial.all_executed);
  const auto& agg = serial.report.at("aggregate");
  EXPECT_LE(agg.at("spl").get<double>(), agg.at("sr").get<double>() + 1e-12);

  // by_tag aggregates only the episodes carrying the tag
  for (const auto& [tag, t] : serial.report.at("by_tag").items()) {
    std::vector<EpisodeResult> subset;
    for (const auto& r : serial.results) {
      if (std::find(r.tags.begin(), r.tags.end(), tag) != r.tags.end()) subset.push_back(r);
    }
    const auto s = compute_spl(subset);
    EXPECT_NEAR(t.at("sr").get<double>(), s.sr, 1e-12) << tag;
    EXPECT_NEAR(t.at("spl").get<double>(), s.spl, 1e-12) << tag;
  }

  const auto single = run_batch({paths.front()}, cfg, priors, 8);
  ASSERT_EQ(single.results.size(), 1u);
  EXPECT_EQ(summary_json(single.results.front()), summary_json(serial.results.front()));
}

TEST(Runner, BatchReportsBrokenScenario) {
  const auto dir = std::filesystem::temp_directory_path() / "aerr_batch_broken";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ not json";
  std::filesystem::copy_file(aerr::test::scenario_path("01_demo_two_rooms"), dir / "good.json",
                             std::filesystem::copy_options::overwrite_existing);
  const auto out = run_batch(list_scenarios(dir), aerr::test::bundled_config(), aerr::test::bundled_priors(), 2);
  EXPECT_FALSE(out.all_executed);
  EXPECT_EQ(out.results.size(), 1u);
  ASSERT_EQ(out.report.at("errors").size(), 1u);
  EXPECT_EQ(out.report.at("errors")[0].at("scenario"), "bad.json");
  std::filesystem::remove_all(dir);
  EXPECT_TRUE(list_scenarios(dir).empty());
}

TEST(Runner, LogRoundTrip) {
  const auto r = run_scenario("03_two_floor_hidden_stair");
  std::stringstream log;
  write_episode_log(log, r, aerr::test::bundled_config(), "03.json");
  const auto back = read_episode_log(log);
  EXPECT_EQ(back.header.at("target"), r.target);
  ASSERT_EQ(back.entries.size(), r.log.size());
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(back.entries[i].state, r.log[i].state);
    EXPECT_EQ(back.entries[i].pose, r.log[i].pose);
    EXPECT_EQ(back.entries[i].triggers, r.log[i].triggers);
  }
  EXPECT_EQ(back.reasoner_lines.size(), r.reasoner_events.size());
  EXPECT_EQ(back.summary.at("result").at("steps"), r.steps);
  EXPECT_TRUE(validate_state_log(back.entries, back.header.at("d_split_m").get<double>()).empty());

  std::istringstream garbage("{\"type\": \"header\"}\nnot json\n");
  EXPECT_THROW(read_episode_log(garbage), std::runtime_error);
}

TEST(Runner, SvgWellFormedAndStable) {
  const auto world = load_scenario(aerr::test::scenario_path("03_two_floor_hidden_stair"));
  const auto r = run_scenario("03_two_floor_hidden_stair");
  std::stringstream log;
  write_episode_log(log, r, aerr::test::bundled_config(), "03.json");
  const auto parsed = read_episode_log(log);
  const auto svg = render_svg(parsed, &world);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_TRUE(balanced_xml(svg));
  EXPECT_EQ(svg, render_svg(parsed, &world));
  const auto bare = render_svg(parsed);
  EXPECT_TRUE(balanced_xml(bare));
}
