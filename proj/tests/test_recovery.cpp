#include "aerr/recovery.hpp"
#include "aerr/reasoner.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace aerr;

namespace {

std::vector<Cell> straight(int n) {
  std::vector<Cell> p;
  for (int x = 0; x < n; ++x) p.push_back({x, 0});
  return p;
}

VisibilityMap known(const std::vector<std::string>& rows) { return VisibilityMap::parse(0, rows); }

Observation obs_at(const Pose& p) {
  Observation o;
  o.floor = p.floor;
  o.pose = p;
  return o;
}

}  // namespace

TEST(Recovery, AstarTrivialCases) {
  const auto m = known(std::vector<std::string>(10, std::string(10, '.')));
  const auto self = astar(m, {3, 3}, {3, 3});
  ASSERT_TRUE(self.has_value());
  EXPECT_EQ(*self, (std::vector<Cell>{{3, 3}}));
  const auto diag = astar(m, {0, 0}, {9, 9});
  ASSERT_TRUE(diag.has_value());
  EXPECT_NEAR(path_length_m(*diag), octile_distance({0, 0}, {9, 9}), 1e-12);
  const auto blocked = known({".#.", ".#.", ".#."});
  EXPECT_FALSE(astar(blocked, {0, 0}, {2, 2}).has_value());
}

TEST(Recovery, AstarMatchesOracleOnRandomGrids) {
  std::mt19937_64 rng(300);
  int solved = 0;
  for (int t = 0; t < 100; ++t) {
    const auto m = aerr::test::random_known(rng, 30, 30, 0.1 + 0.2 * (t % 3) / 2.0);
    Cell s{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    Cell g{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    if (m.state(s) != CellState::Free || m.state(g) != CellState::Free) {
      --t;
      continue;
    }
    const double want = aerr::test::relaxation_oracle(m, s, g);
    const auto path = astar(m, s, g);
    ASSERT_EQ(path.has_value(), std::isfinite(want));
    if (!path) continue;
    ++solved;
    EXPECT_NEAR(path_length_m(*path), want, 1e-9);
    EXPECT_EQ(path->front(), s);
    EXPECT_EQ(path->back(), g);
    for (std::size_t i = 1; i < path->size(); ++i) EXPECT_TRUE(can_step(m, (*path)[i - 1], (*path)[i], {}));
    EXPECT_EQ(astar(m, s, g), path);  // deterministic
  }
  EXPECT_GT(solved, 40);
}

TEST(Recovery, SegmentWaypointsExamples) {
  // 16 steps of 0.25 m = 4.0 m
  auto plan = segment_waypoints(straight(17), 1.5);
  EXPECT_EQ(plan.waypoint_indices, (std::vector<std::size_t>{6, 12, 16}));
  // shorter than the interval
  plan = segment_waypoints(straight(4), 1.5);
  EXPECT_EQ(plan.waypoint_indices, (std::vector<std::size_t>{3}));
  // exactly 2 intervals: goal not duplicated
  plan = segment_waypoints(straight(13), 1.5);
  EXPECT_EQ(plan.waypoint_indices, (std::vector<std::size_t>{6, 12}));
  plan = segment_waypoints(straight(2), 1.5);
  EXPECT_EQ(plan.waypoints(), (std::vector<Cell>{{1, 0}}));
  EXPECT_THROW(segment_waypoints({}, 1.5), std::invalid_argument);
  EXPECT_THROW(segment_waypoints(straight(3), 0.0), std::invalid_argument);
}

TEST(Recovery, WaypointSpacingBound) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int t = 0; t < 200; ++t) {
    const auto m = aerr::test::random_known(rng, 30, 30, 0.2);
    const Cell s{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    const Cell g{static_cast<int>(rng() % 30), static_cast<int>(rng() % 30)};
    if (m.state(s) != CellState::Free || m.state(g) != CellState::Free) continue;
    const auto path = astar(m, s, g);
    if (!path) continue;
    const double interval = u(rng);
    const auto plan = segment_waypoints(*path, interval);
    ASSERT_FALSE(plan.waypoint_indices.empty());
    EXPECT_EQ(plan.waypoint_indices.back(), path->size() - 1);
    std::size_t prev = 0;
    for (std::size_t idx : plan.waypoint_indices) {
      if (idx != 0) EXPECT_GT(idx, prev);
      std::vector<Cell> leg(path->begin() + static_cast<long>(prev), path->begin() + static_cast<long>(idx) + 1);
      EXPECT_LE(path_length_m(leg), interval + kCellSize * std::sqrt(2.0) + 1e-9);
      prev = idx;
    }
  }
}

TEST(Recovery, FollowConsumesWaypointAtPose) {
  const auto m = known(std::vector<std::string>(5, std::string(20, '.')));
  auto plan = segment_waypoints(*astar(m, {0, 2}, {16, 2}), 1.5);
  const Pose at_first = pose_at_cell(0, plan.waypoint(0), 0);
  const auto r = follow_plan(plan, at_first, m);
  EXPECT_EQ(plan.current, 1u);
  EXPECT_FALSE(r.done);
  ASSERT_TRUE(r.action.has_value());
  EXPECT_EQ(*r.action, Action::MoveForward);
  EXPECT_FALSE(follow_plan(plan, pose_at_cell(0, plan.waypoint(1), 0), m).done);
  EXPECT_EQ(plan.current, 2u);
  EXPECT_TRUE(follow_plan(plan, pose_at_cell(0, {16, 2}, 0), m).done);
}

TEST(Recovery, FollowTurnsTowardMisalignedWaypoint) {
  const auto m = known(std::vector<std::string>(20, std::string(20, '.')));
  {
    auto plan = segment_waypoints(*astar(m, {10, 10}, {10, 18}), 1.5);  // +y, 90 degrees clockwise
    EXPECT_EQ(follow_plan(plan, pose_at_cell(0, {10, 10}, 0), m).action, Action::TurnRight);
  }
  {
    auto plan = segment_waypoints(*astar(m, {10, 10}, {10, 2}), 1.5);
    EXPECT_EQ(follow_plan(plan, pose_at_cell(0, {10, 10}, 0), m).action, Action::TurnLeft);
  }
  {
    auto plan = segment_waypoints(*astar(m, {10, 10}, {2, 10}), 1.5);  // directly behind: tie
    EXPECT_EQ(follow_plan(plan, pose_at_cell(0, {10, 10}, 0), m).action, Action::TurnLeft);
  }
}

TEST(Recovery, FollowReplansAroundNewWall) {
  std::vector<std::string> rows(12, std::string(20, '.'));
  const auto open = known(rows);
  auto plan = segment_waypoints(*astar(open, {1, 5}, {18, 5}), 1.5);
  const auto before = plan.waypoints();
  for (int y = 0; y < 10; ++y) rows[static_cast<std::size_t>(y)][9] = '#';
  const auto walled = known(rows);
  const Pose p = pose_at_cell(0, {1, 5}, 0);
  const auto r = follow_plan(plan, p, walled);
  EXPECT_TRUE(r.replanned);
  EXPECT_NE(plan.waypoints(), before);
  EXPECT_EQ(plan.path, *astar(walled, {1, 5}, {18, 5}));
  EXPECT_EQ(plan.replans, 1);
}

TEST(Recovery, FollowThrowsWhenGoalBecomesOccupied) {
  std::vector<std::string> rows(6, std::string(12, '.'));
  auto plan = segment_waypoints(*astar(known(rows), {1, 1}, {10, 4}), 1.5);
  rows[4][10] = '#';
  EXPECT_THROW(follow_plan(plan, pose_at_cell(0, {1, 1}, 0), known(rows)), PlanInvalidated);
  std::vector<std::string> sealed(6, std::string(12, '.'));
  for (int y = 0; y < 6; ++y) sealed[static_cast<std::size_t>(y)][6] = '#';
  auto plan2 = segment_waypoints(*astar(known(std::vector<std::string>(6, std::string(12, '.'))), {1, 1}, {10, 4}), 1.5);
  EXPECT_THROW(follow_plan(plan2, pose_at_cell(0, {1, 1}, 0), known(sealed)), PlanInvalidated);
}

TEST(Recovery, FollowProgressEveryTwoSteps) {
  std::mt19937_64 rng(55);
  int episodes = 0;
  for (int t = 0; t < 60; ++t) {
    auto rows = aerr::test::open_room(24, 18);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int y = 1; y < 17; ++y) {
      for (int x = 1; x < 23; ++x) {
        if (u(rng) < 0.08) rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = '#';
      }
    }
    rows[2][2] = rows[15][21] = '.';
    MultiFloorWorld w;
    try {
      w = aerr::test::world_from_rows(rows, {2, 2}, 0, "bed", {{{21, 15}, "bed"}});
    } catch (const ValidationError&) {
      continue;
    }
    const auto m = known(rows);
    auto path = astar(m, {2, 2}, {21, 15});
    if (!path) continue;
    ++episodes;
    auto plan = segment_waypoints(*path, 1.5);
    Pose p = w.start;
    // (waypoint index, map distance to it); around obstacles the straight-line distance must grow
    // while the path bends away, so progress is measured along the map
    std::vector<std::pair<std::size_t, double>> trace;
    bool done = false;
    for (int i = 0; i < 400 && !done; ++i) {
      const auto r = follow_plan(plan, p, m);
      if (r.done) {
        done = true;
        break;
      }
      trace.emplace_back(plan.current, aerr::test::relaxation_oracle(m, p.cell(), plan.waypoint(plan.current)));
      p = step(w, p, *r.action).pose;
    }
    EXPECT_TRUE(done);
    for (std::size_t i = 0; i + 2 < trace.size(); ++i) {
      if (trace[i + 2].first != trace[i].first) continue;
      EXPECT_LE(trace[i + 2].second, trace[i].second + 1e-9) << "trial " << t << " step " << i;
    }
  }
  EXPECT_GT(episodes, 30);
}

TEST(Recovery, FollowProgressStraightLineInOpenRoom) {
  std::mt19937_64 rng(56);
  const auto rows = aerr::test::open_room(30, 24);
  const auto m = known(rows);
  for (int t = 0; t < 40; ++t) {
    const Cell s{1 + static_cast<int>(rng() % 28), 1 + static_cast<int>(rng() % 22)};
    const Cell g{1 + static_cast<int>(rng() % 28), 1 + static_cast<int>(rng() % 22)};
    if (s == g) continue;
    const auto w = aerr::test::world_from_rows(rows, s, 30 * static_cast<int>(rng() % 12), "bed", {{g, "bed"}});
    auto plan = segment_waypoints(*astar(m, s, g), 1.5);
    Pose p = w.start;
    std::vector<std::pair<std::size_t, double>> trace;
    bool done = false;
    for (int i = 0; i < 400; ++i) {
      const auto r = follow_plan(plan, p, m);
      if (r.done) {
        done = true;
        break;
      }
      trace.emplace_back(plan.current, (cell_center(plan.waypoint(plan.current)) - p.position).norm());
      p = step(w, p, *r.action).pose;
    }
    EXPECT_TRUE(done);
    for (std::size_t i = 0; i + 2 < trace.size(); ++i) {
      if (trace[i + 2].first != trace[i].first) continue;
      EXPECT_LE(trace[i + 2].second, trace[i].second + 1e-9) << "trial " << t << " step " << i;
    }
  }
}

TEST(Recovery, EscapeExamples) {
  ScriptedReasoner reasoner(aerr::test::bundled_priors());
  const auto m = known(std::vector<std::string>(12, std::string(12, '.')));
  {
    const auto r = near_frontier_escape(obs_at(pose_at_cell(0, {3, 6}, 0)), m, {8, 6}, 0, reasoner, "bed");
    ASSERT_TRUE(r.action.has_value());
    EXPECT_EQ(*r.action, Action::MoveForward);
    ASSERT_TRUE(r.decision.has_value());
    EXPECT_FALSE(r.done);
  }
  {
    const auto r = near_frontier_escape(obs_at(pose_at_cell(0, {8, 6}, 0)), m, {3, 6}, 0, reasoner, "bed");
    ASSERT_TRUE(r.action.has_value());
    EXPECT_TRUE(*r.action == Action::TurnLeft || *r.action == Action::TurnRight);
  }
  {
    const long calls = reasoner.calls();
    const auto r = near_frontier_escape(obs_at(pose_at_cell(0, {3, 6}, 0)), m, {8, 6}, 15, reasoner, "bed");
    EXPECT_TRUE(r.done);
    EXPECT_TRUE(r.blacklist);
    EXPECT_FALSE(r.action.has_value());
    EXPECT_EQ(reasoner.calls(), calls);
  }
  {
    const auto r = near_frontier_escape(obs_at(pose_at_cell(0, {3, 6}, 0)), m, {3, 6}, 3, reasoner, "bed");
    EXPECT_TRUE(r.done);
    EXPECT_FALSE(r.blacklist);
  }
}

TEST(Recovery, EscapeReachesNearFrontierThroughGap) {
  // a one-cell gap in a wall, approached at an angle
  std::vector<std::string> rows = aerr::test::open_room(14, 12);
  for (int y = 1; y < 11; ++y) rows[static_cast<std::size_t>(y)][7] = (y == 5 ? '.' : '#');
  const auto w = aerr::test::world_from_rows(rows, {4, 8}, 0, "bed", {{{11, 5}, "bed"}});
  const auto m = known(rows);
  ScriptedReasoner reasoner(aerr::test::bundled_priors());
  Pose p = w.start;
  bool reached = false;
  for (int i = 0; i <= 15 && !reached; ++i) {
    const auto r = near_frontier_escape(obs_at(p), m, {9, 5}, i, reasoner, "bed");
    if (r.done) {
      reached = !r.blacklist;
      break;
    }
    p = step(w, p, *r.action).pose;
  }
  EXPECT_TRUE(reached);
}
