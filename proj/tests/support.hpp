#pragma once

// Fixtures and independent oracles shared by the test binaries. The oracles deliberately avoid
// the library's own algorithms: brute-force scans, Bellman-Ford relaxation, plain ray marching.

#include "aerr/assets.hpp"
#include "aerr/config.hpp"
#include "aerr/mapping.hpp"
#include "aerr/priors.hpp"
#include "aerr/world.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace aerr::test {

/// Single-floor world from legend rows. Object letters are not interpreted; use `objects`.
inline MultiFloorWorld world_from_rows(const std::vector<std::string>& rows, Cell start, int heading_deg,
                                       const std::string& target,
                                       const std::vector<std::pair<Cell, std::string>>& objects) {
  nlohmann::json floor{{"grid", rows}};
  nlohmann::json sem = nlohmann::json::object();
  for (const auto& [c, cat] : objects) sem[std::to_string(c.x) + "," + std::to_string(c.y)] = {{"category", cat}};
  floor["semantics"] = sem;
  nlohmann::json doc{{"name", "fixture"},
                     {"target_category", target},
                     {"floors", nlohmann::json::array({floor})},
                     {"start", {{"floor", 0}, {"x", start.x}, {"y", start.y}, {"heading_deg", heading_deg}}}};
  return parse_scenario(doc);
}

inline std::vector<std::string> open_room(int w, int h) {
  std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '.'));
  for (int x = 0; x < w; ++x) rows.front()[x] = rows.back()[x] = '#';
  for (auto& r : rows) r.front() = r.back() = '#';
  return rows;
}

/// Random belief map: each cell Occupied with probability `obstacle`, otherwise Free inside a
/// random known blob and Unknown elsewhere.
inline VisibilityMap random_belief(std::mt19937_64& rng, int w, int h, double obstacle, double known = 0.55) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '?'));
  const double cx = u(rng) * w, cy = u(rng) * h;
  const double radius = known * std::max(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in_blob = std::hypot(x - cx, y - cy) < radius * (0.7 + 0.6 * u(rng));
      if (!in_blob) continue;
      rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = u(rng) < obstacle ? '#' : '.';
    }
  }
  return VisibilityMap::parse(0, rows);
}

/// Fully known random obstacle grid.
inline VisibilityMap random_known(std::mt19937_64& rng, int w, int h, double obstacle) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '.'));
  for (auto& r : rows) {
    for (auto& ch : r) ch = u(rng) < obstacle ? '#' : '.';
  }
  return VisibilityMap::parse(0, rows);
}

/// Frontier predicate evaluated cell by cell.
inline std::vector<Cell> brute_frontier_cells(const VisibilityMap& m) {
  std::vector<Cell> out;
  for (int x = 0; x < m.width(); ++x) {
    for (int y = 0; y < m.height(); ++y) {
      if (m.state({x, y}) != CellState::Free) continue;
      const Cell n4[] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      bool open = false;
      for (Cell n : n4) open = open || (m.contains(n) && m.state(n) == CellState::Unknown);
      if (open) out.push_back({x, y});
    }
  }
  return out;
}

/// Shortest path cost by repeated full relaxation until nothing changes (Bellman-Ford).
/// Free/Door/Stair pass, Unknown only when `allow_unknown`; diagonals need both side cells
/// passable; a Stair cell can be entered but not left unless it is the source.
inline double relaxation_oracle(const VisibilityMap& m, Cell s, Cell g, bool allow_unknown = false) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto pass = [&](Cell c) {
    if (!m.contains(c)) return false;
    const CellState st = m.state(c);
    if (st == CellState::Occupied) return false;
    if (st == CellState::Unknown) return allow_unknown;
    return true;
  };
  std::vector<double> d(static_cast<std::size_t>(m.width() * m.height()), kInf);
  auto at = [&](Cell c) -> double& { return d[static_cast<std::size_t>(c.y * m.width() + c.x)]; };
  at(s) = 0.0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        const Cell c{x, y};
        if (!std::isfinite(at(c))) continue;
        if (c != s && m.state(c) == CellState::Stair) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const Cell n{x + dx, y + dy};
            if (!pass(n)) continue;
            if (dx != 0 && dy != 0 && !(pass({x + dx, y}) && pass({x, y + dy}))) continue;
            const double w = (dx != 0 && dy != 0) ? 0.25 * std::sqrt(2.0) : 0.25;
            if (at(c) + w < at(n) - 1e-12) {
              at(n) = at(c) + w;
              changed = true;
            }
          }
        }
      }
    }
  }
  return at(g);
}

/// Fixed-step ray march from `from` to the center of `to` on the ground truth; true when no
/// Obstacle cell other than `to` itself is crossed. Samples lying on a cell edge are skipped, so
/// touching a corner does not count as crossing a cell.
inline bool ray_clear(const MultiFloorWorld& w, int floor, const Eigen::Vector2d& from, Cell to) {
  const Eigen::Vector2d target = cell_center(to);
  const double len = (target - from).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.0005)));
  auto on_edge = [](double v) {
    const double u = v / kCellSize;
    return std::abs(u - std::round(u)) < 1e-9;
  };
  for (int i = 0; i <= n; ++i) {
    const Eigen::Vector2d p = from + (target - from) * (static_cast<double>(i) / n);
    if (on_edge(p.x()) || on_edge(p.y())) continue;
    const Cell c = cell_at(p);
    if (c == to) return true;
    if (w.kind(floor, c) == CellKind::Obstacle) return false;
  }
  return true;
}

inline EpisodeConfig bundled_config() { return load_config(asset_dir() / "config.json"); }
inline PriorTable bundled_priors() { return PriorTable::load(asset_dir() / "priors.json"); }
inline std::filesystem::path scenario_path(const std::string& stem) {
  return asset_dir() / "scenarios" / (stem + ".json");
}

}  // namespace aerr::test
