#include "aerr/fast_thinking.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace aerr {

UncertaintyField build_uncertainty_field(int width, int height, std::span<const BoundaryScore> scores,
                                         double sigma_g_m) {
  UncertaintyField field;
  field.sigma_g_m = sigma_g_m;
  field.density = Eigen::ArrayXXd::Zero(height, width);
  const double cutoff = 4.0 * sigma_g_m;
  const int reach = static_cast<int>(std::ceil(cutoff / kCellSize));
  const double inv_two_var = 1.0 / (2.0 * sigma_g_m * sigma_g_m);
  for (const auto& b : scores) {
    if (b.score == 0.0) continue;
    const Eigen::Vector2d center = cell_center(b.cell);
    for (int y = std::max(0, b.cell.y - reach); y <= std::min(height - 1, b.cell.y + reach); ++y) {
      for (int x = std::max(0, b.cell.x - reach); x <= std::min(width - 1, b.cell.x + reach); ++x) {
        const double r2 = (cell_center({x, y}) - center).squaredNorm();
        if (r2 > cutoff * cutoff) continue;
        field.density(y, x) += b.score * std::exp(-r2 * inv_two_var);
      }
    }
  }
  return field;
}

std::vector<Cell> coverage_area(const VisibilityMap& map, Cell f, double range_m) {
  std::vector<Cell> out;
  const int reach = static_cast<int>(std::ceil(range_m / kCellSize)) + 1;
  const Eigen::Vector2d origin = cell_center(f);
  for (int x = std::max(0, f.x - reach); x <= std::min(map.width() - 1, f.x + reach); ++x) {
    for (int y = std::max(0, f.y - reach); y <= std::min(map.height() - 1, f.y + reach); ++y) {
      const Cell c{x, y};
      if (map.state(c) != CellState::Unknown) continue;
      if ((cell_center(c) - origin).norm() > range_m + 1e-9) continue;
      bool clear = true;
      trace_segment(origin, cell_center(c), [&](Cell t) {
        if (t == c) return false;
        if (t != f && map.state(t) == CellState::Occupied) {
          clear = false;
          return false;
        }
        return true;
      });
      if (clear) out.push_back(c);
    }
  }
  return out;
}

double overlap_area(std::span<const Cell> a, std::span<const Cell> b) {
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(shared) * kCellArea;
}

double info_gain(std::span<const Cell> coverage, std::span<const std::vector<Cell>> other_coverages,
                 const UncertaintyField& field, double lambda_overlap) {
  double density_term = 0.0;
  for (Cell c : coverage) density_term += field.at(c) * kCellArea;
  double overlap = 0.0;
  for (const auto& other : other_coverages) overlap += overlap_area(coverage, other);
  return density_term + lambda_overlap * overlap;
}

void ERConfig::validate() const {
  if (sigma1 < 0 || sigma2 < 0 || sigma3 < 0 || std::abs(sigma1 + sigma2 + sigma3 - 1.0) > 1e-9) {
    throw std::invalid_argument("exploration reward weights must be nonnegative and sum to 1");
  }
  if (k_max <= 0) throw std::invalid_argument("K_max must be positive");
  if (alpha_min <= 0 || beta_max <= 0) throw std::invalid_argument("alpha_min and beta_max must be positive");
}

double exploration_reward(const ERInputs& in, const ERConfig& cfg) {
  const double u = std::clamp(in.unexplored_ratio, 0.0, 1.0);
  const double n = std::clamp(in.frontier_density, 0.0, 1.0);
  const double k = std::clamp(static_cast<double>(in.k), 0.0, static_cast<double>(cfg.k_max));
  return exploration_reward<double>(u, n, k, cfg.k_max, cfg.sigma1, cfg.sigma2, cfg.sigma3);
}

Weights update_weights(double er, const ERConfig& cfg) {
  return {cfg.alpha_min * (1.0 - er), cfg.beta_max * er};
}

std::vector<double> normalize_info_gain(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (range > 0.0) {
      out[i] = (raw[i] - *lo) / range;
    } else {
      out[i] = *hi > 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

std::size_t select_frontier(std::span<const CandidateScore> candidates, const Weights& w) {
  if (candidates.empty()) throw NoFrontiers();
  std::vector<double> raw;
  raw.reserve(candidates.size());
  for (const auto& c : candidates) raw.push_back(c.info_gain);
  const auto info = normalize_info_gain(raw);

  std::vector<double> j(candidates.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    j[i] = objective(candidates[i].value, info[i], w.alpha, w.beta);
    scale = std::max(scale, std::abs(j[i]));
  }
  const double tie = 1e-12 * scale;
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i];
    const auto& b = candidates[best];
    if (j[i] > j[best] + tie) {
      best = i;
    } else if (std::abs(j[i] - j[best]) <= tie) {
      if (a.geodesic_m < b.geodesic_m || (a.geodesic_m == b.geodesic_m && a.cell < b.cell)) best = i;
    }
  }
  return best;
}

std::vector<CandidateScore> evaluate_frontiers(const VisibilityMap& map, std::vector<Frontier>& frontiers,
                                               const Grid<double>& geodesic_from_robot,
                                               std::span<const double> category_weights,
                                               const FastThinkingConfig& cfg) {
  std::vector<std::vector<Cell>> coverages;
  coverages.reserve(frontiers.size());
  std::vector<BoundaryScore> boundary;
  for (auto& f : frontiers) {
    double sem = 0.0;
    for (int id : belief_view_categories(map, f.cell, cfg.coverage_range_m)) {
      if (id >= 0 && id < static_cast<int>(category_weights.size())) sem = std::max(sem, category_weights[id]);
    }
    f.s_sem = sem;
    const double d = geodesic_from_robot[f.cell];
    f.s_dist = std::isfinite(d) ? distance_score(d, cfg.d_max_m) : 0.0;
    f.value = frontier_value(f.s_sem, f.s_dist, cfg.value_alpha, cfg.value_beta);
    const double b = cfg.boundary_score_floor + (1.0 - cfg.boundary_score_floor) * sem;
    for (Cell m : f.members) boundary.push_back({m, b});
    coverages.push_back(coverage_area(map, f.cell, cfg.coverage_range_m));
  }
  const auto field = build_uncertainty_field(map.width(), map.height(), boundary, cfg.sigma_g_m);

  const std::size_t n = frontiers.size();
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      overlap(i, k) = overlap(k, i) = overlap_area(coverages[i], coverages[k]);
    }
  }

  std::vector<CandidateScore> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double density_term = 0.0;
    for (Cell c : coverages[i]) density_term += field.at(c) * kCellArea;
    CandidateScore s;
    s.cell = frontiers[i].cell;
    s.value = frontiers[i].value;
    s.info_gain = density_term + cfg.lambda_overlap * overlap.row(static_cast<Eigen::Index>(i)).sum();
    s.geodesic_m = geodesic_from_robot[frontiers[i].cell];
    out.push_back(s);
  }
  return out;
}

}  // namespace aerr
