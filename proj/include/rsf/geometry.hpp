#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rsf {

// A discretization point in the unit square with its global index.
struct Point2D {
  double x = 0.0;
  double y = 0.0;
  int index = -1;
};

// One node of the quadtree: a square cell of the 2^level x 2^level grid.
// Box ids at a level are row-major: id = iy * 2^level + ix.
struct Box {
  int level = 0;
  int ix = 0;
  int iy = 0;

  double side() const { return 1.0 / static_cast<double>(1 << level); }
  double center_x() const { return (ix + 0.5) * side(); }
  double center_y() const { return (iy + 0.5) * side(); }
  int id() const { return iy * (1 << level) + ix; }
};

// Chebyshev distance between two same-level boxes, in units of box side.
// Throws if levels differ.
int box_distance(const Box& a, const Box& b);

// Uniform n_side x n_side grid of cell-center points, row-major indexing.
// n_side must be a power of two and >= 2.
std::vector<Point2D> make_grid(int n_side);

// Perfect quadtree over a uniform grid of points.
//
// The tree is immutable once built; all adjacency queries are pure
// integer arithmetic on grid coordinates. Leaf boxes own the points that
// lie inside them (owned index lists are sorted by global index).
class QuadTree {
 public:
  QuadTree(std::vector<Point2D> points, int leaf_target);

  int depth() const { return depth_; }           // leaf level L (root = 0)
  int n_points() const { return static_cast<int>(points_.size()); }
  const std::vector<Point2D>& points() const { return points_; }
  int grid_side() const { return grid_side_; }   // sqrt(N)

  int boxes_at(int level) const;                 // 4^level
  Box box(int level, int id) const;

  // Same-level boxes at Chebyshev grid distance exactly 1, sorted by id.
  std::vector<int> neighbors(int level, int id) const;
  // Same-level boxes at Chebyshev grid distance exactly 2, sorted by id.
  std::vector<int> distance2_neighbors(int level, int id) const;

  int parent_of(int level, int id) const;
  // Children in SW, SE, NW, NE order.
  std::array<int, 4> children_of(int level, int id) const;

  // Point indices owned by a leaf box.
  const std::vector<int>& leaf_points(int leaf_id) const;

 private:
  std::vector<Point2D> points_;
  int depth_ = 0;
  int grid_side_ = 0;
  std::vector<std::vector<int>> leaf_points_;
};

// Ownership at level-1 given per-box skeleton index lists at `level`:
// each parent owns the concatenation of its children's skeletons in
// SW, SE, NW, NE order. Throws if a child's entry is missing.
std::vector<std::vector<int>> merge_to_parent(
    const QuadTree& tree, int level,
    const std::vector<std::vector<int>>& skeletons);

}  // namespace rsf
