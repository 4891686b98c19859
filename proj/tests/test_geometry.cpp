#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "rsf/geometry.hpp"

using namespace rsf;

TEST_CASE("make_grid produces cell centers in row-major order") {
  auto pts = make_grid(2);
  REQUIRE(pts.size() == 4);
  CHECK(pts[0].x == 0.25);
  CHECK(pts[0].y == 0.25);
  CHECK(pts[1].x == 0.75);
  CHECK(pts[1].y == 0.25);
  CHECK(pts[2].x == 0.25);
  CHECK(pts[2].y == 0.75);
  CHECK(pts[3].x == 0.75);
  CHECK(pts[3].y == 0.75);
  for (int i = 0; i < 4; ++i) CHECK(pts[static_cast<size_t>(i)].index == i);
}

TEST_CASE("make_grid n_side=4 coordinate range") {
  auto pts = make_grid(4);
  REQUIRE(pts.size() == 16);
  double lo = 1.0, hi = 0.0;
  for (const auto& p : pts) {
    lo = std::min({lo, p.x, p.y});
    hi = std::max({hi, p.x, p.y});
  }
  CHECK(lo == 0.125);
  CHECK(hi == 0.875);
}

TEST_CASE("make_grid n_side=64 points distinct with spacing 1/64") {
  auto pts = make_grid(64);
  REQUIRE(pts.size() == 4096);
  std::set<std::pair<double, double>> seen;
  for (const auto& p : pts) seen.emplace(p.x, p.y);
  CHECK(seen.size() == 4096);
  // Adjacent points along a row differ by exactly h (dyadic arithmetic).
  const double h = 1.0 / 64;
  for (int i = 0; i + 1 < 64; ++i) {
    CHECK(pts[static_cast<size_t>(i) + 1].x - pts[static_cast<size_t>(i)].x == h);
  }
}

TEST_CASE("make_grid rejects non-power-of-two sides") {
  CHECK_THROWS_AS(make_grid(3), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(48), std::invalid_argument);
}

TEST_CASE("build_tree picks the smallest sufficient depth") {
  QuadTree t1(make_grid(64), 64);
  CHECK(t1.depth() == 3);
  for (int b = 0; b < t1.boxes_at(3); ++b) CHECK(t1.leaf_points(b).size() == 64);

  QuadTree t2(make_grid(4), 1);
  CHECK(t2.depth() == 2);
  for (int b = 0; b < 16; ++b) CHECK(t2.leaf_points(b).size() == 1);

  QuadTree t3(make_grid(64), 16);
  CHECK(t3.depth() == 4);
  size_t total = 0;
  for (int b = 0; b < t3.boxes_at(4); ++b) {
    CHECK(t3.leaf_points(b).size() == 16);
    total += t3.leaf_points(b).size();
  }
  CHECK(total == 4096);
}

TEST_CASE("build_tree rejects empty input") {
  CHECK_THROWS_AS(QuadTree({}, 8), std::invalid_argument);
}

TEST_CASE("leaf ownership partitions the point set") {
  QuadTree t(make_grid(32), 16);
  std::vector<char> seen(static_cast<size_t>(t.n_points()), 0);
  for (int b = 0; b < t.boxes_at(t.depth()); ++b) {
    for (int idx : t.leaf_points(b)) {
      CHECK(seen[static_cast<size_t>(idx)] == 0);
      seen[static_cast<size_t>(idx)] = 1;
    }
  }
  CHECK(std::count(seen.begin(), seen.end(), 1) == t.n_points());

  // Owned points lie inside the leaf cell.
  for (int b = 0; b < t.boxes_at(t.depth()); ++b) {
    const Box box = t.box(t.depth(), b);
    for (int idx : t.leaf_points(b)) {
      const Point2D& p = t.points()[static_cast<size_t>(idx)];
      CHECK(p.x > box.ix * box.side());
      CHECK(p.x < (box.ix + 1) * box.side());
      CHECK(p.y > box.iy * box.side());
      CHECK(p.y < (box.iy + 1) * box.side());
    }
  }
}

TEST_CASE("neighbor counts: interior 8, corner 3, edge 5") {
  QuadTree t(make_grid(64), 64);  // depth 3: level-3 grid is 8x8
  CHECK(t.neighbors(3, t.box(3, 0).id()).size() == 3);          // corner (0,0)
  CHECK(t.neighbors(3, 3).size() == 5);                          // edge (3,0)
  CHECK(t.neighbors(3, 3 * 8 + 3).size() == 8);                  // interior (3,3)
  for (int b = 0; b < t.boxes_at(3); ++b) {
    CHECK(t.neighbors(3, b).size() <= 8);
  }
}

TEST_CASE("distance-2 neighbor counts and corner enumeration") {
  QuadTree t(make_grid(64), 64);
  CHECK(t.distance2_neighbors(3, 3 * 8 + 3).size() == 16);  // interior of 8x8
  for (int b = 0; b < t.boxes_at(3); ++b) {
    CHECK(t.distance2_neighbors(3, b).size() <= 16);
  }
  // 2x2 level grid has no distance-2 boxes.
  for (int b = 0; b < t.boxes_at(1); ++b) {
    CHECK(t.distance2_neighbors(1, b).empty());
  }
  // Corner of a 4x4 grid: (2,0),(2,1),(2,2),(1,2),(0,2) -> ids 2,6,10,9,8.
  const std::vector<int> got = t.distance2_neighbors(2, 0);
  CHECK(got == std::vector<int>({2, 6, 8, 9, 10}));
}

TEST_CASE("box_distance is the Chebyshev grid metric") {
  QuadTree t(make_grid(64), 64);
  const Box a = t.box(3, 0);
  CHECK(box_distance(a, a) == 0);
  CHECK(box_distance(a, t.box(3, 9)) == 1);   // (1,1) diagonal
  CHECK(box_distance(a, t.box(3, 3)) == 3);   // (3,0)
  CHECK_THROWS_AS(box_distance(t.box(2, 0), t.box(3, 0)), std::invalid_argument);
}

TEST_CASE("metric and adjacency definitions agree; relations symmetric") {
  QuadTree t(make_grid(32), 16);  // depth 4
  for (int level = 1; level <= t.depth(); ++level) {
    const int nb = t.boxes_at(level);
    for (int b = 0; b < nb; ++b) {
      const auto n = t.neighbors(level, b);
      const auto m = t.distance2_neighbors(level, b);
      const std::set<int> ns(n.begin(), n.end());
      const std::set<int> ms(m.begin(), m.end());
      for (int c = 0; c < nb; ++c) {
        const int d = box_distance(t.box(level, b), t.box(level, c));
        CHECK((d == 1) == (ns.count(c) == 1));
        CHECK((d == 2) == (ms.count(c) == 1));
      }
      for (int c : n) {
        const auto nc = t.neighbors(level, c);
        CHECK(std::count(nc.begin(), nc.end(), b) == 1);
      }
      for (int c : m) {
        const auto mc = t.distance2_neighbors(level, c);
        CHECK(std::count(mc.begin(), mc.end(), b) == 1);
      }
    }
  }
}

TEST_CASE("structural merge property at every level") {
  // parent(C) is the parent of B or one of its neighbors, for every C in
  // N(B) u M(B) u {B}.
  QuadTree t(make_grid(32), 4);  // depth 4? 1024/4 = 256 leaves -> depth 4
  REQUIRE(t.depth() == 4);
  for (int level = 1; level <= t.depth(); ++level) {
    for (int b = 0; b < t.boxes_at(level); ++b) {
      const int pb = t.parent_of(level, b);
      std::set<int> allowed{pb};
      for (int q : t.neighbors(level - 1, pb)) allowed.insert(q);
      std::vector<int> family = t.neighbors(level, b);
      const auto m = t.distance2_neighbors(level, b);
      family.insert(family.end(), m.begin(), m.end());
      family.push_back(b);
      for (int c : family) {
        CHECK(allowed.count(t.parent_of(level, c)) == 1);
      }
    }
  }
}

TEST_CASE("children are reported in SW, SE, NW, NE order") {
  QuadTree t(make_grid(16), 1);
  const auto kids = t.children_of(0, 0);
  CHECK(kids[0] == 0);
  CHECK(kids[1] == 1);
  CHECK(kids[2] == 2);
  CHECK(kids[3] == 3);
  const auto k2 = t.children_of(1, 3);  // box (1,1) at level 1
  CHECK(k2[0] == 2 * 4 + 2);
  CHECK(k2[1] == 2 * 4 + 3);
  CHECK(k2[2] == 3 * 4 + 2);
  CHECK(k2[3] == 3 * 4 + 3);
}

TEST_CASE("merge_to_parent concatenates child skeletons") {
  QuadTree t(make_grid(16), 16);  // depth 2
  const int level = 2;
  std::vector<std::vector<int>> skel(static_cast<size_t>(t.boxes_at(level)));
  // Children of parent 0 are leaves 0,1,4,5; give them sizes 10,12,9,11.
  int next = 0;
  const std::vector<size_t> sizes = {10, 12, 9, 11};
  const auto kids = t.children_of(1, 0);
  for (size_t q = 0; q < 4; ++q) {
    for (size_t k = 0; k < sizes[q]; ++k) skel[static_cast<size_t>(kids[q])].push_back(next++);
  }
  auto parents = merge_to_parent(t, level, skel);
  CHECK(parents[0].size() == 42);
  CHECK(parents[1].empty());  // all-empty children

  // Union over parents equals union over child skeletons, no duplicates.
  std::mt19937_64 rng(123);
  for (auto& s : skel) {
    s.clear();
    const int len = static_cast<int>(rng() % 5);
    for (int k = 0; k < len; ++k) s.push_back(static_cast<int>(rng() % 100000));
  }
  parents = merge_to_parent(t, level, skel);
  std::multiset<int> from_children, from_parents;
  for (const auto& s : skel) from_children.insert(s.begin(), s.end());
  for (const auto& s : parents) from_parents.insert(s.begin(), s.end());
  CHECK(from_children == from_parents);
}

TEST_CASE("merge_to_parent rejects missing child entries") {
  QuadTree t(make_grid(16), 16);
  std::vector<std::vector<int>> skel(3);  // too short
  CHECK_THROWS_AS(merge_to_parent(t, 2, skel), std::invalid_argument);
}
