#pragma once

#include "aerr/geometry.hpp"
#include "aerr/mapping.hpp"

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace aerr {

class NoFrontiers : public std::runtime_error {
 public:
  NoFrontiers() : std::runtime_error("no intra-floor frontier to select") {}
};

/// A semantic score anchored at a boundary cell of the known region.
struct BoundaryScore {
  Cell cell;
  double score = 0.0;
};

/// Spatial information density on the floor lattice, d(p) = sum of truncated Gaussians.
struct UncertaintyField {
  Eigen::ArrayXXd density;  ///< rows index y, columns index x
  double sigma_g_m = 1.0;

  double at(Cell c) const { return density(c.y, c.x); }
};

/// Kernel support is cut at 4 sigma so density is exactly zero beyond it.
UncertaintyField build_uncertainty_field(int width, int height, std::span<const BoundaryScore> scores,
                                         double sigma_g_m);

/// Unknown cells a 360 degree sweep from `f` could reveal: Unknown is transparent,
/// Occupied opaque. Sorted lexicographically.
std::vector<Cell> coverage_area(const VisibilityMap& map, Cell f, double range_m);

/// Area shared by two sorted coverage sets, in square meters.
double overlap_area(std::span<const Cell> a, std::span<const Cell> b);

/// Expected uncertainty reduction: density integrated over the coverage plus a signed
/// overlap term against every other frontier's coverage.
double info_gain(std::span<const Cell> coverage, std::span<const std::vector<Cell>> other_coverages,
                 const UncertaintyField& field, double lambda_overlap);

struct ERConfig {
  double sigma1 = 1.0 / 3.0;
  double sigma2 = 1.0 / 3.0;
  double sigma3 = 1.0 / 3.0;
  int k_max = 500;
  double alpha_min = 1.0;
  double beta_max = 1.0;

  /// Throws std::invalid_argument when the weights are not a convex combination.
  void validate() const;
};

struct ERInputs {
  double unexplored_ratio = 0.0;  ///< |U(k)| / |E|
  double frontier_density = 0.0;  ///< N_frontier(k) / N_total
  int k = 0;
};

struct Weights {
  double alpha = 0.5;
  double beta = 0.5;
};

/// Ratios and k are clamped to their domains, so the result lies in [0, 1].
double exploration_reward(const ERInputs& in, const ERConfig& cfg);

template <typename Scalar>
Scalar exploration_reward(Scalar unexplored_ratio, Scalar frontier_density, Scalar k, Scalar k_max,
                          Scalar sigma1, Scalar sigma2, Scalar sigma3) {
  return sigma1 * unexplored_ratio + sigma2 * frontier_density + sigma3 * (Scalar(1) - k / k_max);
}

Weights update_weights(double er, const ERConfig& cfg);

template <typename Scalar>
Scalar objective(Scalar value, Scalar info, Scalar alpha, Scalar beta) {
  return alpha * value + beta * info;
}

template <typename DerivedV, typename DerivedI>
auto objective(const Eigen::ArrayBase<DerivedV>& value, const Eigen::ArrayBase<DerivedI>& info,
               typename DerivedV::Scalar alpha, typename DerivedV::Scalar beta) {
  return alpha * value + beta * info;
}

struct FastThinkingConfig {
  double value_alpha = 0.5;  ///< static semantic weight of the value map
  double value_beta = 0.5;   ///< static distance weight of the value map
  double d_max_m = 10.0;
  double sigma_g_m = 1.0;
  double lambda_overlap = -1.0;
  double coverage_range_m = 3.0;
  /// Baseline score of an unexplored boundary; semantic relevance raises it toward 1.
  double boundary_score_floor = 0.5;
  int merge_radius = 3;
  ERConfig er;
};

/// Everything the optimizer needs about one decision step's candidates.
struct CandidateScore {
  Cell cell;
  double value = 0.0;      ///< V(f)
  double info_gain = 0.0;  ///< raw I(f|F)
  double geodesic_m = 0.0;
};

/// Rescales raw gains to [0, 1] by min-max over the candidate set; a constant set maps to 1
/// when positive and 0 otherwise.
std::vector<double> normalize_info_gain(std::span<const double> raw);

/// Index of argmax J over the candidates; ties go to the shorter geodesic, then the smaller cell.
std::size_t select_frontier(std::span<const CandidateScore> candidates, const Weights& w);

/// Fills s_sem, s_dist and value of each intra-floor frontier and computes its raw info gain.
/// `category_weights[id]` is the target prior of category id.
std::vector<CandidateScore> evaluate_frontiers(const VisibilityMap& map, std::vector<Frontier>& frontiers,
                                               const Grid<double>& geodesic_from_robot,
                                               std::span<const double> category_weights,
                                               const FastThinkingConfig& cfg);

}  // namespace aerr
