#pragma once

#include <Eigen/LU>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "rsf/block_store.hpp"
#include "rsf/geometry.hpp"
#include "rsf/skeletonization.hpp"

namespace rsf {

struct LevelRankStat {
  int level = 0;
  int boxes = 0;
  double mean_skeleton = 0.0;
  double mean_input = 0.0;
};

// The complete approximate factorization: elementary factors in application
// order plus the dense pivoted LU of the final top-level system.
template <class S>
struct Factorization {
  std::vector<ElementaryFactor<S>> factors;
  Matrix<S> top_lu;
  std::vector<int> top_perm;
  std::vector<int> top_indices;  // global indices of the top-level system
  int n = 0;
  int tree_depth = 0;
  int top_level = 0;
  double epsilon = 0.0;
  std::vector<LevelRankStat> level_ranks;
  size_t peak_stored_scalars = 0;
};

using OrderProvider = std::function<std::vector<int>(const QuadTree&, int level)>;

struct FactorOptions {
  int leaf_target = 64;
  int n_proxy = 0;  // 0 = kernel default
  OrderProvider order;
  StoreLog* store_log = nullptr;
  // Called after each skeletonization with the store accesses it performed;
  // requires store_log to be set.
  std::function<void(int level, int box, const StoreLog&)> per_box_audit;
};

// Lowest level that undergoes compression; the remaining system of the
// level below (at most 16 boxes, whose far fields carry no modified data)
// is factored densely.
inline constexpr int kMinCompressedLevel = 3;

namespace detail {

// A parent-pair block over merged skeleton indices: live entries of stored
// child blocks are copied in place, everything else is pristine kernel
// data. Works from block index tags alone, so it serves both the
// sequential regroup and the distributed level transition identically.
template <class K>
Matrix<typename K::Scalar> assemble_parent_block(
    const QuadTree& tree, int child_level,
    const BlockStore<typename K::Scalar>& store, const K& kernel, int p1,
    int p2, const std::vector<int>& rows, const std::vector<int>& cols) {
  using S = typename K::Scalar;
  const auto& pts = tree.points();
  std::unordered_map<int, int> rpos, cpos;
  rpos.reserve(rows.size());
  cpos.reserve(cols.size());
  for (size_t k = 0; k < rows.size(); ++k) rpos.emplace(rows[k], static_cast<int>(k));
  for (size_t k = 0; k < cols.size(); ++k) cpos.emplace(cols[k], static_cast<int>(k));

  Matrix<S> out(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(cols.size()));
  std::vector<char> covered(rows.size() * cols.size(), 0);
  for (int ci : tree.children_of(child_level - 1, p1)) {
    for (int cj : tree.children_of(child_level - 1, p2)) {
      const auto* e = store.find(ci, cj);
      if (!e) continue;
      std::vector<int> live_r, live_c, live_ri, live_ci_;
      for (size_t t = 0; t < e->rows.size(); ++t) {
        auto it = rpos.find(e->rows[t]);
        if (it == rpos.end()) continue;  // eliminated index
        live_r.push_back(static_cast<int>(t));
        live_ri.push_back(it->second);
      }
      for (size_t t = 0; t < e->cols.size(); ++t) {
        auto it = cpos.find(e->cols[t]);
        if (it == cpos.end()) continue;
        live_c.push_back(static_cast<int>(t));
        live_ci_.push_back(it->second);
      }
      for (size_t a = 0; a < live_r.size(); ++a) {
        for (size_t b = 0; b < live_c.size(); ++b) {
          out(live_ri[a], live_ci_[b]) = e->data(live_r[a], live_c[b]);
          covered[static_cast<size_t>(live_ri[a]) * cols.size() +
                  static_cast<size_t>(live_ci_[b])] = 1;
        }
      }
    }
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < cols.size(); ++j) {
      if (covered[i * cols.size() + j]) continue;
      const Point2D& pr = pts[static_cast<size_t>(rows[i])];
      const Point2D& pc = pts[static_cast<size_t>(cols[j])];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i] == cols[j] ? kernel.diagonal(pr) : kernel.offdiag(pr, pc);
    }
  }
  return out;
}

// Regroup a finished level's store to the parent level: every parent pair
// within distance one that covers at least one modified child block is
// materialized over the merged skeleton indices.
template <class K>
BlockStore<typename K::Scalar> regroup_to_parent(
    const QuadTree& tree, int level,
    const BlockStore<typename K::Scalar>& store, const K& kernel,
    const std::vector<std::vector<int>>& parent_active) {
  using S = typename K::Scalar;
  BlockStore<S> up(level - 1, parent_active);

  std::set<std::pair<int, int>> pairs;
  store.for_each([&](int i, int j, const typename BlockStore<S>::Entry&) {
    pairs.emplace(tree.parent_of(level, i), tree.parent_of(level, j));
  });

  for (const auto& [p1, p2] : pairs) {
    if (box_distance(tree.box(level - 1, p1), tree.box(level - 1, p2)) > 1) {
      throw std::logic_error("regroup_to_parent: modified block beyond parent neighborhood");
    }
    const auto& rows = parent_active[static_cast<size_t>(p1)];
    const auto& cols = parent_active[static_cast<size_t>(p2)];
    up.put(p1, p2,
           assemble_parent_block(tree, level, store, kernel, p1, p2, rows, cols),
           rows, cols);
  }
  return up;
}

// Dense system over the remaining active indices, box pairs in row-major
// order; pristine pairs come straight from kernel evaluation.
template <class K>
Matrix<typename K::Scalar> assemble_top(const QuadTree& tree,
                                        const BlockStore<typename K::Scalar>& store,
                                        const K& kernel, int level,
                                        std::vector<int>& top_indices) {
  using S = typename K::Scalar;
  const int nb = tree.boxes_at(level);
  std::vector<Eigen::Index> offset(static_cast<size_t>(nb) + 1, 0);
  top_indices.clear();
  for (int b = 0; b < nb; ++b) {
    const auto& a = store.active(b);
    top_indices.insert(top_indices.end(), a.begin(), a.end());
    offset[static_cast<size_t>(b) + 1] =
        offset[static_cast<size_t>(b)] + static_cast<Eigen::Index>(a.size());
  }
  Matrix<S> top(offset.back(), offset.back());
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < nb; ++j) {
      top.block(offset[static_cast<size_t>(i)], offset[static_cast<size_t>(j)],
                offset[static_cast<size_t>(i) + 1] - offset[static_cast<size_t>(i)],
                offset[static_cast<size_t>(j) + 1] - offset[static_cast<size_t>(j)]) =
          read_block(store, kernel, tree.points(), i, j);
    }
  }
  return top;
}

inline std::vector<int> row_major_order(const QuadTree& tree, int level) {
  std::vector<int> order(static_cast<size_t>(tree.boxes_at(level)));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace detail

// Multi-level factorization: sweep levels from the leaves down to
// kMinCompressedLevel, skeletonizing every box and merging skeletons to
// parents, then factor the remaining top-level system densely.
template <class K>
Factorization<typename K::Scalar> factorize(const std::vector<Point2D>& pts,
                                            const K& kernel, double eps,
                                            const FactorOptions& opt = {}) {
  using S = typename K::Scalar;
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("factorize: eps must be in (0,1)");
  }
  QuadTree tree(pts, opt.leaf_target);
  const int depth = tree.depth();

  Factorization<S> f;
  f.n = tree.n_points();
  f.tree_depth = depth;
  f.epsilon = eps;
  f.top_level = std::min(depth, kMinCompressedLevel - 1);

  std::vector<std::vector<int>> leaf_active(
      static_cast<size_t>(tree.boxes_at(depth)));
  for (int b = 0; b < tree.boxes_at(depth); ++b) leaf_active[static_cast<size_t>(b)] = tree.leaf_points(b);
  BlockStore<S> store(depth, std::move(leaf_active));
  store.log = opt.store_log;

  for (int level = depth; level >= kMinCompressedLevel; --level) {
    const std::vector<int> order = opt.order
                                       ? opt.order(tree, level)
                                       : detail::row_major_order(tree, level);
    LevelRankStat stat;
    stat.level = level;
    for (int b : order) {
      const size_t in_size = store.active(b).size();
      if (opt.store_log) opt.store_log->entries.clear();
      ElementaryFactor<S> ef =
          skeletonize_box(tree, level, b, store, kernel, eps, opt.n_proxy);
      if (opt.per_box_audit && opt.store_log) opt.per_box_audit(level, b, *opt.store_log);
      stat.boxes += 1;
      stat.mean_input += static_cast<double>(in_size);
      stat.mean_skeleton += static_cast<double>(ef.skeleton.size());
      f.factors.push_back(std::move(ef));
      f.peak_stored_scalars = std::max(f.peak_stored_scalars, store.stored_scalars());
    }
    if (stat.boxes > 0) {
      stat.mean_skeleton /= stat.boxes;
      stat.mean_input /= stat.boxes;
    }
    f.level_ranks.push_back(stat);

    std::vector<std::vector<int>> skel(static_cast<size_t>(tree.boxes_at(level)));
    for (int b = 0; b < tree.boxes_at(level); ++b) skel[static_cast<size_t>(b)] = store.active(b);
    auto parent_active = merge_to_parent(tree, level, skel);
    store = detail::regroup_to_parent(tree, level, store, kernel, parent_active);
    store.log = opt.store_log;
    f.peak_stored_scalars = std::max(f.peak_stored_scalars, store.stored_scalars());
  }

  Matrix<S> top = detail::assemble_top(tree, store, kernel, f.top_level, f.top_indices);
  if (top.rows() > 0) {
    Eigen::PartialPivLU<Matrix<S>> plu(top);
    f.top_lu = plu.matrixLU();
    f.top_perm = detail::extract_perm<S>(plu);
  }
  return f;
}

// Mean skeleton size per compressed level, leaf level first.
template <class S>
std::vector<LevelRankStat> rank_report(const Factorization<S>& f) {
  return f.level_ranks;
}

}  // namespace rsf
