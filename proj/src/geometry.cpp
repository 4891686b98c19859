#include "rsf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace rsf {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

int box_distance(const Box& a, const Box& b) {
  if (a.level != b.level) {
    throw std::invalid_argument("box_distance: boxes are at different levels");
  }
  return std::max(std::abs(a.ix - b.ix), std::abs(a.iy - b.iy));
}

std::vector<Point2D> make_grid(int n_side) {
  if (n_side < 2 || !is_power_of_two(n_side)) {
    throw std::invalid_argument("make_grid: n_side must be a power of two >= 2");
  }
  const double h = 1.0 / static_cast<double>(n_side);
  std::vector<Point2D> pts;
  pts.reserve(static_cast<size_t>(n_side) * n_side);
  for (int iy = 0; iy < n_side; ++iy) {
    for (int ix = 0; ix < n_side; ++ix) {
      pts.push_back({(ix + 0.5) * h, (iy + 0.5) * h, iy * n_side + ix});
    }
  }
  return pts;
}

QuadTree::QuadTree(std::vector<Point2D> points, int leaf_target)
    : points_(std::move(points)) {
  if (points_.empty()) {
    throw std::invalid_argument("QuadTree: empty point set");
  }
  if (leaf_target < 1) {
    throw std::invalid_argument("QuadTree: leaf_target must be >= 1");
  }
  const int n = static_cast<int>(points_.size());
  grid_side_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (grid_side_ * grid_side_ != n || !is_power_of_two(grid_side_)) {
    throw std::invalid_argument("QuadTree: points must form a power-of-two square grid");
  }
  // Smallest depth such that every leaf holds at most leaf_target points.
  depth_ = 0;
  while ((static_cast<long long>(n) + ((1LL << (2 * depth_)) - 1)) >> (2 * depth_) >
         leaf_target) {
    ++depth_;
  }
  const int leaf_grid = 1 << depth_;
  if (leaf_grid > grid_side_) {
    throw std::invalid_argument("QuadTree: leaf_target smaller than one grid point per leaf");
  }

  // Cell-center points align exactly with box edges, so assignment is
  // integer arithmetic on grid coordinates.
  const int cells_per_leaf = grid_side_ / leaf_grid;
  leaf_points_.assign(static_cast<size_t>(leaf_grid) * leaf_grid, {});
  for (const Point2D& p : points_) {
    const int gx = p.index % grid_side_;
    const int gy = p.index / grid_side_;
    const int bx = gx / cells_per_leaf;
    const int by = gy / cells_per_leaf;
    leaf_points_[static_cast<size_t>(by) * leaf_grid + bx].push_back(p.index);
  }
  for (auto& lst : leaf_points_) std::sort(lst.begin(), lst.end());
}

int QuadTree::boxes_at(int level) const {
  if (level < 0 || level > depth_) throw std::out_of_range("boxes_at: bad level");
  return 1 << (2 * level);
}

Box QuadTree::box(int level, int id) const {
  const int g = 1 << level;
  if (level < 0 || level > depth_ || id < 0 || id >= g * g) {
    throw std::out_of_range("box: bad level/id");
  }
  return Box{level, id % g, id / g};
}

std::vector<int> QuadTree::neighbors(int level, int id) const {
  const Box b = box(level, id);
  const int g = 1 << level;
  std::vector<int> out;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = b.ix + dx, ny = b.iy + dy;
      if (nx < 0 || ny < 0 || nx >= g || ny >= g) continue;
      out.push_back(ny * g + nx);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> QuadTree::distance2_neighbors(int level, int id) const {
  const Box b = box(level, id);
  const int g = 1 << level;
  std::vector<int> out;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if (std::max(std::abs(dx), std::abs(dy)) != 2) continue;
      const int nx = b.ix + dx, ny = b.iy + dy;
      if (nx < 0 || ny < 0 || nx >= g || ny >= g) continue;
      out.push_back(ny * g + nx);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int QuadTree::parent_of(int level, int id) const {
  if (level < 1) throw std::out_of_range("parent_of: root has no parent");
  const Box b = box(level, id);
  return (b.iy / 2) * (1 << (level - 1)) + (b.ix / 2);
}

std::array<int, 4> QuadTree::children_of(int level, int id) const {
  if (level >= depth_) throw std::out_of_range("children_of: leaf has no children");
  const Box b = box(level, id);
  const int g = 1 << (level + 1);
  const int cx = 2 * b.ix, cy = 2 * b.iy;
  // SW, SE, NW, NE
  return {cy * g + cx, cy * g + cx + 1, (cy + 1) * g + cx, (cy + 1) * g + cx + 1};
}

const std::vector<int>& QuadTree::leaf_points(int leaf_id) const {
  return leaf_points_.at(static_cast<size_t>(leaf_id));
}

std::vector<std::vector<int>> merge_to_parent(
    const QuadTree& tree, int level,
    const std::vector<std::vector<int>>& skeletons) {
  if (level < 1 || level > tree.depth()) {
    throw std::invalid_argument("merge_to_parent: bad level");
  }
  if (static_cast<int>(skeletons.size()) != tree.boxes_at(level)) {
    throw std::invalid_argument("merge_to_parent: missing child skeleton");
  }
  std::vector<std::vector<int>> parents(tree.boxes_at(level - 1));
  for (int pid = 0; pid < tree.boxes_at(level - 1); ++pid) {
    const auto kids = tree.children_of(level - 1, pid);
    auto& own = parents[pid];
    for (int k : kids) {
      const auto& s = skeletons[static_cast<size_t>(k)];
      own.insert(own.end(), s.begin(), s.end());
    }
  }
  return parents;
}

}  // namespace rsf
