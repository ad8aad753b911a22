#include "aerr/assets.hpp"
#include "aerr/config.hpp"
#include "aerr/render.hpp"
#include "aerr/runner.hpp"
#include "aerr/world.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace aerr;

namespace {

struct CommonFlags {
  std::string config;
  std::string priors;
  std::string reasoner;
  std::optional<std::uint64_t> seed;
  bool no_recovery = false;
  bool no_reminiscing = false;
  bool static_weights = false;
  bool no_slow_thinking = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Config JSON (default: bundled config.json)");
  cmd->add_option("--priors", f.priors, "Prior table JSON (default: bundled priors.json)");
  cmd->add_option("--reasoner", f.reasoner, "scripted | remote")->check(CLI::IsMember({"scripted", "remote"}));
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_flag("--no-recovery", f.no_recovery, "Disable the recovery state");
  cmd->add_flag("--no-reminiscing", f.no_reminiscing, "Disable the reminiscing state");
  cmd->add_flag("--static-weights", f.static_weights, "Fixed alpha = beta = 0.5");
  cmd->add_flag("--no-slow-thinking", f.no_slow_thinking, "Disable reasoner frontier choice at doors");
}

void apply_overrides(EpisodeConfig& cfg, const CommonFlags& f) {
  if (f.reasoner == "scripted") cfg.reasoner = ReasonerKind::Scripted;
  if (f.reasoner == "remote") cfg.reasoner = ReasonerKind::Remote;
  if (f.seed) cfg.seed = *f.seed;
  if (f.no_recovery) cfg.ablations.recovery = false;
  if (f.no_reminiscing) cfg.ablations.reminiscing = false;
  if (f.static_weights) cfg.ablations.dynamic_weights = false;
  if (f.no_slow_thinking) cfg.ablations.slow_thinking = false;
  if (const char* url = std::getenv("AERR_REASONER_URL"); url && *url) cfg.remote.url = url;
  cfg.validate();
}

EpisodeConfig load_base_config(const std::string& path) {
  if (!path.empty()) return load_config(path);
  const fs::path bundled = asset_dir() / "config.json";
  if (fs::exists(bundled)) return load_config(bundled);
  return EpisodeConfig{};
}

PriorTable load_priors(const std::string& path) {
  return PriorTable::load(path.empty() ? asset_dir() / "priors.json" : fs::path(path));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string fmt(const nlohmann::json& v) {
  if (!v.is_number()) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v.get<double>() * 100.0;
  return os.str();
}

std::string sr_spl(const nlohmann::json& agg) { return fmt(agg.at("sr")) + " / " + fmt(agg.at("spl")); }

void print_table(const std::vector<std::pair<std::string, nlohmann::json>>& runs) {
  std::set<std::string> tags;
  std::size_t name_w = 8;
  for (const auto& [name, report] : runs) {
    name_w = std::max(name_w, name.size());
    for (const auto& [tag, agg] : report.at("by_tag").items()) tags.insert(tag);
  }
  std::vector<std::pair<std::string, std::size_t>> cols{{"overall", 0}};
  for (const auto& t : tags) cols.emplace_back(t, 0);
  for (auto& [title, w] : cols) w = std::max<std::size_t>(title.size(), 13);  // "100.0 / 100.0"

  std::ostringstream head;
  head << std::left << std::setw(static_cast<int>(name_w)) << "config";
  for (const auto& [title, w] : cols) head << " | " << std::right << std::setw(static_cast<int>(w)) << title;
  std::cout << head.str() << '\n' << std::string(head.str().size(), '-') << '\n';
  for (const auto& [name, report] : runs) {
    std::cout << std::left << std::setw(static_cast<int>(name_w)) << name;
    for (const auto& [title, w] : cols) {
      std::string cell = "-";
      if (title == "overall") cell = sr_spl(report.at("aggregate"));
      else if (report.at("by_tag").contains(title)) cell = sr_spl(report.at("by_tag").at(title));
      std::cout << " | " << std::right << std::setw(static_cast<int>(w)) << cell;
    }
    std::cout << '\n';
  }
  std::cout << "(SR / SPL, percent)\n";
}

int cmd_run(const std::string& scenario, const CommonFlags& flags, const std::string& render, const std::string& log) {
  EpisodeConfig cfg = load_base_config(flags.config);
  apply_overrides(cfg, flags);
  const PriorTable priors = load_priors(flags.priors);
  const MultiFloorWorld world = load_scenario(scenario);
  const auto reasoner = make_reasoner(cfg, priors);
  const EpisodeResult r = run_episode(world, cfg, priors, *reasoner);

  std::ostringstream log_text;
  write_episode_log(log_text, r, cfg, scenario);
  if (!log.empty()) write_file(log, log_text.str());
  if (!render.empty()) {
    std::istringstream in(log_text.str());
    write_file(render, render_svg(read_episode_log(in), &world));
  }
  std::cout << summary_json(r).dump(2) << '\n';
  return 0;
}

int cmd_bench(const std::string& dir, const std::string& matrix, int jobs, const std::string& out,
              const CommonFlags& flags) {
  const auto scenarios = list_scenarios(dir);
  if (scenarios.empty()) throw NoScenarios();
  const PriorTable priors = load_priors(flags.priors);

  std::vector<std::pair<std::string, nlohmann::json>> runs;
  bool all_executed = true;
  auto run_one = [&](const std::string& name, EpisodeConfig cfg) {
    apply_overrides(cfg, flags);
    BatchOutcome b = run_batch(scenarios, cfg, priors, jobs);
    all_executed = all_executed && b.all_executed;
    for (const auto& e : b.report.at("errors")) {
      std::cerr << "error: " << e.at("scenario").get<std::string>() << ": " << e.at("error").get<std::string>()
                << '\n';
    }
    runs.emplace_back(name, std::move(b.report));
  };

  nlohmann::json report;
  if (!matrix.empty()) {
    const auto configs = list_scenarios(matrix);
    if (configs.empty()) throw std::runtime_error("no configs in " + matrix);
    for (const auto& c : configs) run_one(c.stem().string(), load_config(c));
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [name, rep] : runs) arr.push_back({{"config", name}, {"report", rep}});
    report["runs"] = std::move(arr);
  } else {
    run_one(flags.config.empty() ? "default" : fs::path(flags.config).stem().string(),
            load_base_config(flags.config));
    report = runs.front().second;
  }
  print_table(runs);
  if (!out.empty()) write_file(out, report.dump(2) + "\n");
  return all_executed ? 0 : 1;
}

int cmd_validate(const std::string& path) {
  try {
    const MultiFloorWorld w = load_scenario(path);
    std::cout << "ok: " << w.name << " (" << w.floors.size() << " floor" << (w.floors.size() == 1 ? "" : "s")
              << ", target " << w.target_category << ")\n";
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << path << ": invalid scenario\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
    return 1;
  }
}

int cmd_replay(const std::string& path, const std::string& render, const std::string& scenario) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const EpisodeLog log = read_episode_log(in);
  const double d_split = log.header.value("d_split_m", StuckDetectorConfig{}.d_split_m);
  const auto errors = validate_state_log(log.entries, d_split);
  for (const auto& e : errors) std::cerr << "  - " << e << '\n';
  if (!render.empty()) {
    std::optional<MultiFloorWorld> world;
    if (!scenario.empty()) world = load_scenario(scenario);
    write_file(render, render_svg(log, world ? &*world : nullptr));
  }
  if (!errors.empty()) {
    std::cerr << path << ": " << errors.size() << " illegal transition" << (errors.size() == 1 ? "" : "s") << '\n';
    return 1;
  }
  std::cout << "ok: " << log.entries.size() << " log entries, transitions legal\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-world object navigation planner"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string scenario, render, log;
  auto* run = app.add_subcommand("run", "Run one episode");
  run->add_option("--scenario", scenario, "Scenario JSON")->required();
  run->add_option("--render", render, "Write an SVG of the episode");
  run->add_option("--log", log, "Write the JSONL state log");
  add_common(run, run_flags);

  CommonFlags bench_flags;
  std::string dir, matrix, out;
  int jobs = 1;
  auto* bench = app.add_subcommand("bench", "Run a scenario directory and aggregate SR/SPL");
  bench->add_option("--scenarios", dir, "Scenario directory")->required();
  bench->add_option("--jobs", jobs, "Parallel episodes")->check(CLI::PositiveNumber);
  bench->add_option("--out", out, "Report JSON path");
  bench->add_option("--matrix", matrix, "Directory of configs, one batch each");
  add_common(bench, bench_flags);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("path", validate_path, "Scenario JSON")->required();

  std::string replay_path, replay_render, replay_scenario;
  auto* replay = app.add_subcommand("replay", "Check a state log against the transition relation");
  replay->add_option("log", replay_path, "JSONL log")->required();
  replay->add_option("--render", replay_render, "Re-render the SVG");
  replay->add_option("--scenario", replay_scenario, "Scenario for target overlay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) return cmd_run(scenario, run_flags, render, log);
    if (*bench) return cmd_bench(dir, matrix, jobs, out, bench_flags);
    if (*validate) return cmd_validate(validate_path);
    if (*replay) return cmd_replay(replay_path, replay_render, replay_scenario);
  } catch (const NoScenarios& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
