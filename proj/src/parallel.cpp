#include "rsf/parallel.hpp"

#include <cmath>
#include <set>

namespace rsf {

namespace {

bool is_power_of_four(int v) {
  if (v < 1) return false;
  while (v > 1) {
    if (v % 4 != 0) return false;
    v /= 4;
  }
  return true;
}

int isqrt_exact(int v) {
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
  return r * r == v ? r : -1;
}

}  // namespace

WorkerGrid::WorkerGrid(int tree_depth, int p) : depth_(tree_depth), p_(p) {
  side_ = isqrt_exact(p);
  if (side_ < 1) throw std::invalid_argument("WorkerGrid: p must be a perfect square");
  p_at_.assign(static_cast<size_t>(depth_) + 1, 1);
  int cur = p_;
  for (int level = depth_; level >= 0; --level) {
    if (level < depth_) {
      const int grid = 1 << level;
      int s = isqrt_exact(cur);
      if (cur > 1 && grid < 2 * s) cur = cur / 4;
    }
    p_at_[static_cast<size_t>(level)] = cur;
  }
}

int WorkerGrid::side_at(int level) const {
  return isqrt_exact(active_workers(level));
}

int WorkerGrid::boxes_per_side(int level) const {
  return (1 << level) / side_at(level);
}

std::pair<int, int> WorkerGrid::grid_pos(int level, int worker) const {
  // Persistent id -> leaf grid position -> level grid position.
  const int lr = worker / side_, lc = worker % side_;
  const int stride = side_ / side_at(level);
  if (lr % stride != 0 || lc % stride != 0) {
    throw std::invalid_argument("WorkerGrid: worker not active at this level");
  }
  return {lr / stride, lc / stride};
}

int WorkerGrid::persistent_id(int level, int row, int col) const {
  const int stride = side_ / side_at(level);
  return (row * stride) * side_ + (col * stride);
}

int WorkerGrid::owner(int level, int box_id) const {
  const int g = 1 << level;
  const int ix = box_id % g, iy = box_id / g;
  const int bps = boxes_per_side(level);
  return persistent_id(level, iy / bps, ix / bps);
}

bool WorkerGrid::is_active(int level, int worker) const {
  const int lr = worker / side_, lc = worker % side_;
  const int stride = side_ / side_at(level);
  return lr % stride == 0 && lc % stride == 0;
}

std::vector<int> WorkerGrid::workers_at(int level) const {
  std::vector<int> out;
  const int s = side_at(level);
  out.reserve(static_cast<size_t>(s) * s);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) out.push_back(persistent_id(level, r, c));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int WorkerGrid::color(int level, int worker) const {
  const auto [r, c] = grid_pos(level, worker);
  return (r % 2) * 2 + (c % 2);
}

int WorkerGrid::survivor(int level, int worker) const {
  if (active_workers(level - 1) == active_workers(level)) return worker;
  const auto [r, c] = grid_pos(level, worker);
  return persistent_id(level, r - r % 2, c - c % 2);
}

WorkerGrid partition_domain(const QuadTree& tree, int p) {
  if (!is_power_of_four(p)) {
    throw std::invalid_argument("partition_domain: p must be a power of four (1, 4, 16, ...)");
  }
  const int leaf_grid = 1 << tree.depth();
  const int side = isqrt_exact(p);
  if (leaf_grid % side != 0) {
    throw std::invalid_argument("partition_domain: leaf grid not divisible by sqrt(p)");
  }
  if (p > 1 && leaf_grid / side < 2) {
    throw std::invalid_argument(
        "partition_domain: every worker must own at least a 2x2 block of boxes");
  }
  return WorkerGrid(tree.depth(), p);
}

std::vector<WorkerBoxes> classify_boxes(const WorkerGrid& grid,
                                        const QuadTree& tree, int level) {
  std::map<int, WorkerBoxes> by_worker;
  for (int w : grid.workers_at(level)) by_worker[w].worker = w;
  for (int b = 0; b < tree.boxes_at(level); ++b) {
    const int w = grid.owner(level, b);
    bool boundary = false;
    for (int n : tree.neighbors(level, b)) {
      if (grid.owner(level, n) != w) {
        boundary = true;
        break;
      }
    }
    auto& wb = by_worker.at(w);
    (boundary ? wb.boundary : wb.interior).push_back(b);
  }
  std::vector<WorkerBoxes> out;
  out.reserve(by_worker.size());
  for (auto& [w, wb] : by_worker) out.push_back(std::move(wb));
  return out;
}

std::vector<int> parallel_compatible_order(const WorkerGrid& grid,
                                           const QuadTree& tree, int level) {
  const auto classes = classify_boxes(grid, tree, level);
  std::vector<int> order;
  order.reserve(static_cast<size_t>(tree.boxes_at(level)));
  for (const auto& wb : classes) {
    order.insert(order.end(), wb.interior.begin(), wb.interior.end());
  }
  for (int c = 0; c < 4; ++c) {
    for (const auto& wb : classes) {
      if (grid.color(level, wb.worker) != c) continue;
      order.insert(order.end(), wb.boundary.begin(), wb.boundary.end());
    }
  }
  return order;
}

OrderProvider parallel_order_provider(int p) {
  return [p](const QuadTree& tree, int level) {
    WorkerGrid grid = partition_domain(tree, p);
    return parallel_compatible_order(grid, tree, level);
  };
}

std::vector<int> receivers_for_pair(const WorkerGrid& grid, const QuadTree& tree,
                                    int level, int i, int j) {
  std::set<int> out{grid.owner(level, i), grid.owner(level, j)};
  // Workers owning a box adjacent to both i and j replicate the pair for
  // their boundary-box updates.
  std::vector<int> ni = tree.neighbors(level, i);
  ni.push_back(i);
  const Box bj = tree.box(level, j);
  for (int c : ni) {
    if (box_distance(tree.box(level, c), bj) <= 1) out.insert(grid.owner(level, c));
  }
  return {out.begin(), out.end()};
}

std::vector<int> receivers_for_active(const WorkerGrid& grid, const QuadTree& tree,
                                      int level, int box) {
  std::set<int> out{grid.owner(level, box)};
  for (int n : tree.neighbors(level, box)) out.insert(grid.owner(level, n));
  for (int m : tree.distance2_neighbors(level, box)) out.insert(grid.owner(level, m));
  return {out.begin(), out.end()};
}

}  // namespace rsf
