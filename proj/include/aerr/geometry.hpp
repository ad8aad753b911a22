#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <vector>

namespace aerr {

/// Edge length of one lattice cell. One MoveForward crosses one cell.
inline constexpr double kCellSize = 0.25;
inline constexpr double kCellArea = kCellSize * kCellSize;
inline constexpr double kPi = 3.14159265358979323846;

/// Integer lattice coordinate; x is the column, y the row. Ordered lexicographically by (x, y).
struct Cell {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct FloorCell {
  int floor = 0;
  Cell cell;

  friend auto operator<=>(const FloorCell&, const FloorCell&) = default;
};

inline Eigen::Vector2d cell_center(Cell c) {
  return {(c.x + 0.5) * kCellSize, (c.y + 0.5) * kCellSize};
}

inline Cell cell_at(const Eigen::Vector2d& p) {
  return {static_cast<int>(std::floor(p.x() / kCellSize)),
          static_cast<int>(std::floor(p.y() / kCellSize))};
}

inline int chebyshev(Cell a, Cell b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

/// Octile distance in meters (8-connected lattice metric).
inline double octile_distance(Cell a, Cell b) {
  const int dx = std::abs(a.x - b.x);
  const int dy = std::abs(a.y - b.y);
  const int lo = std::min(dx, dy);
  const int hi = std::max(dx, dy);
  return kCellSize * ((hi - lo) + std::sqrt(2.0) * lo);
}

/// Wraps an angle in degrees into [-180, 180).
inline double wrap_degrees(double deg) {
  double w = std::fmod(deg + 180.0, 360.0);
  if (w < 0) w += 360.0;
  return w - 180.0;
}

/// Dense row-major lattice of values, indexed by Cell.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  std::size_t index(Cell c) const {
    assert(contains(c));
    return static_cast<std::size_t>(c.y) * width_ + c.x;
  }
  Cell cell(std::size_t idx) const {
    return {static_cast<int>(idx % width_), static_cast<int>(idx / width_)};
  }

  decltype(auto) operator[](Cell c) { return data_[index(c)]; }
  decltype(auto) operator[](Cell c) const { return data_[index(c)]; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Visits every lattice cell pierced by the segment a->b (supercover DDA), in order,
/// starting with the cell containing a and ending with the cell containing b.
/// When the segment passes exactly through a cell corner the two side cells are
/// skipped. The visitor returns false to stop early.
template <typename Visitor>
void trace_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, Visitor&& visit) {
  const Eigen::Vector2d pa = a / kCellSize;
  const Eigen::Vector2d pb = b / kCellSize;
  Cell cur{static_cast<int>(std::floor(pa.x())), static_cast<int>(std::floor(pa.y()))};
  const Cell last{static_cast<int>(std::floor(pb.x())), static_cast<int>(std::floor(pb.y()))};
  const Eigen::Vector2d d = pb - pa;
  const int step_x = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
  const int step_y = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double t_delta_x = step_x != 0 ? std::abs(1.0 / d.x()) : kInf;
  const double t_delta_y = step_y != 0 ? std::abs(1.0 / d.y()) : kInf;
  double t_max_x = kInf;
  double t_max_y = kInf;
  if (step_x > 0) t_max_x = (std::floor(pa.x()) + 1.0 - pa.x()) * t_delta_x;
  if (step_x < 0) t_max_x = (pa.x() - std::floor(pa.x())) * t_delta_x;
  if (step_y > 0) t_max_y = (std::floor(pa.y()) + 1.0 - pa.y()) * t_delta_y;
  if (step_y < 0) t_max_y = (pa.y() - std::floor(pa.y())) * t_delta_y;

  if (!visit(cur)) return;
  constexpr double kTieEps = 1e-9;
  const int max_steps = std::abs(last.x - cur.x) + std::abs(last.y - cur.y) + 2;
  for (int i = 0; i < max_steps && cur != last; ++i) {
    if (std::min(t_max_x, t_max_y) > 1.0 + kTieEps) break;
    if (std::abs(t_max_x - t_max_y) <= kTieEps) {
      cur.x += step_x;
      cur.y += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    } else if (t_max_x < t_max_y) {
      cur.x += step_x;
      t_max_x += t_delta_x;
    } else {
      cur.y += step_y;
      t_max_y += t_delta_y;
    }
    if (!visit(cur)) return;
  }
}

}  // namespace aerr
