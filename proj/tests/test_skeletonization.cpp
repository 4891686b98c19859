#include <random>

#include "doctest.h"
#include "rsf/audit.hpp"
#include "rsf/driver.hpp"
#include "rsf/skeletonization.hpp"

#include "dense_step.hpp"

using namespace rsf;

namespace {

template <class S>
BlockStore<S> fresh_leaf_store(const QuadTree& tree) {
  std::vector<std::vector<int>> active(static_cast<size_t>(tree.boxes_at(tree.depth())));
  for (int b = 0; b < tree.boxes_at(tree.depth()); ++b) active[static_cast<size_t>(b)] = tree.leaf_points(b);
  return BlockStore<S>(tree.depth(), std::move(active));
}

template <class S>
bool stores_equal(const BlockStore<S>& a, const BlockStore<S>& b) {
  bool ok = a.n_boxes() == b.n_boxes();
  if (!ok) return false;
  for (int box = 0; box < a.n_boxes(); ++box) {
    if (a.active(box) != b.active(box)) return false;
  }
  size_t na = 0, nb = 0;
  a.for_each([&](int, int, const typename BlockStore<S>::Entry&) { ++na; });
  b.for_each([&](int, int, const typename BlockStore<S>::Entry&) { ++nb; });
  if (na != nb) return false;
  a.for_each([&](int i, int j, const typename BlockStore<S>::Entry& ea) {
    const auto* eb = b.find(i, j);
    if (!eb || ea.rows != eb->rows || ea.cols != eb->cols ||
        !bitwise_equal(ea.data, eb->data)) {
      ok = false;
    }
  });
  return ok;
}

template <class S>
bool factors_equal(const ElementaryFactor<S>& a, const ElementaryFactor<S>& b) {
  return a.level == b.level && a.box == b.box && a.skeleton == b.skeleton &&
         a.redundant == b.redundant && bitwise_equal(a.interp, b.interp) &&
         bitwise_equal(a.lu, b.lu) && a.lu_perm == b.lu_perm;
}

struct ConstKernel {
  using Scalar = double;
  double offdiag(const Point2D&, const Point2D&) const { return 1.0; }
  double diagonal(const Point2D&) const { return 1.0; }
  double proxy_entry(const Point2D&, const Point2D&) const { return 1.0; }
  int proxy_count(double) const { return 8; }
};

}  // namespace

TEST_CASE("a tolerance too tight for compression yields a no-op") {
  auto pts = make_grid(16);
  QuadTree t(pts, 16);
  LaplaceKernel kernel(1.0 / 16);
  auto store = fresh_leaf_store<double>(t);
  const auto before_active = store.active(5);
  auto f = skeletonize_box(t, 2, 5, store, kernel, 1e-30);
  CHECK(f.noop());
  CHECK(f.skeleton == before_active);
  size_t stored = 0;
  store.for_each([&](int, int, const BlockStore<double>::Entry&) { ++stored; });
  CHECK(stored == 0);
  CHECK(store.active(5) == before_active);
}

TEST_CASE("one step reproduces the block-elimination structure densely") {
  // 64-point boxes at eps=1e-12: the redundant rows and columns of V A W
  // collapse to the identity, and the redundant coupling to everything
  // else vanishes. (16-point boxes stay full-rank at this tolerance, so
  // N=1024 is the smallest grid where the step actually eliminates.)
  auto pts = make_grid(32);
  QuadTree t(pts, 64);
  const int n = 1024, level = 2, box = 5;
  LaplaceKernel kernel(1.0 / 32);
  auto store = fresh_leaf_store<double>(t);

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Matrix<double> a = assemble_block(kernel, all, all, pts);

  auto f = skeletonize_box(t, level, box, store, kernel, 1e-12);
  REQUIRE(!f.noop());
  REQUIRE(!f.redundant.empty());

  std::vector<std::vector<int>> nbr_idx;
  for (const auto& nc : f.neighbors) nbr_idx.push_back(nc.idx);
  Matrix<double> v, w;
  rsf_test::dense_step_operators(f, n, nbr_idx, v, w);
  Matrix<double> z = v * a * w;

  double id_err = 0.0, coupling = 0.0;
  for (size_t p = 0; p < f.redundant.size(); ++p) {
    for (int q = 0; q < n; ++q) {
      const double zrq = z(f.redundant[p], q);
      const double zqr = z(q, f.redundant[p]);
      if (q == f.redundant[p]) {
        id_err = std::max(id_err, std::abs(zrq - 1.0));
      } else {
        const bool q_red =
            std::find(f.redundant.begin(), f.redundant.end(), q) != f.redundant.end();
        if (q_red) {
          id_err = std::max(id_err, std::abs(zrq));
        } else {
          coupling = std::max({coupling, std::abs(zrq), std::abs(zqr)});
        }
      }
    }
  }
  CHECK(id_err < 1e-10);
  CHECK(coupling < 1e-10);
}

TEST_CASE("symmetric kernels keep updated blocks transpose-consistent") {
  auto pts = make_grid(32);
  QuadTree t(pts, 16);
  LaplaceKernel kernel(1.0 / 32);
  auto store = fresh_leaf_store<double>(t);
  skeletonize_box(t, 3, 27, store, kernel, 1e-6);
  double worst = 0.0;
  store.for_each([&](int i, int j, const BlockStore<double>::Entry& e) {
    const auto* other = store.find(j, i);
    REQUIRE(other != nullptr);
    const double scale = e.data.cwiseAbs().maxCoeff();
    if (e.data.size() == 0 || scale == 0.0) return;
    worst = std::max(worst,
                     (e.data - other->data.transpose()).cwiseAbs().maxCoeff() / scale);
  });
  CHECK(worst < 1e-12);
}

TEST_CASE("read_block falls back to kernel evaluation and is idempotent") {
  auto pts = make_grid(16);
  QuadTree t(pts, 16);
  LaplaceKernel kernel(1.0 / 16);
  auto store = fresh_leaf_store<double>(t);

  auto direct = assemble_block(kernel, store.active(3), store.active(7), pts);
  auto via_store = read_block(store, kernel, pts, 3, 7);
  CHECK(bitwise_equal(direct, via_store));

  skeletonize_box(t, 2, 5, store, kernel, 1e-8);
  // Pair (5, 6) was written by the elimination; it now differs from the
  // pristine kernel block over the shrunken active lists.
  REQUIRE(store.has(5, 6));
  auto updated = read_block(store, kernel, pts, 5, 6);
  auto pristine = assemble_block(kernel, store.active(5), store.active(6), pts);
  CHECK((updated - pristine).cwiseAbs().maxCoeff() > 0.0);
  auto again = read_block(store, kernel, pts, 5, 6);
  CHECK(bitwise_equal(updated, again));
}

TEST_CASE("store accesses stay within the locality contract") {
  auto pts = make_grid(32);
  QuadTree t(pts, 16);
  LaplaceKernel kernel(1.0 / 32);
  auto store = fresh_leaf_store<double>(t);
  StoreLog log;
  store.log = &log;
  for (int box : {0, 9, 27, 36}) {
    log.entries.clear();
    skeletonize_box(t, 3, box, store, kernel, 1e-6);
    CHECK(locality_violations(t, 3, box, log) == 0);
    CHECK(!log.entries.empty());
  }
}

TEST_CASE("distant boxes commute bitwise") {
  auto pts = make_grid(32);
  QuadTree t(pts, 16);
  LaplaceKernel kernel(1.0 / 32);
  const int b1 = 9, b2 = 5 * 8 + 5;  // distance > 2 at level 3
  REQUIRE(box_distance(t.box(3, b1), t.box(3, b2)) > 2);

  auto s1 = fresh_leaf_store<double>(t);
  auto f1a = skeletonize_box(t, 3, b1, s1, kernel, 1e-6);
  auto f1b = skeletonize_box(t, 3, b2, s1, kernel, 1e-6);

  auto s2 = fresh_leaf_store<double>(t);
  auto f2b = skeletonize_box(t, 3, b2, s2, kernel, 1e-6);
  auto f2a = skeletonize_box(t, 3, b1, s2, kernel, 1e-6);

  CHECK(stores_equal(s1, s2));
  CHECK(factors_equal(f1a, f2a));
  CHECK(factors_equal(f1b, f2b));
}

TEST_CASE("degenerate kernels trigger the singular-pivot error") {
  auto pts = make_grid(16);
  QuadTree t(pts, 16);
  ConstKernel kernel;
  auto store = fresh_leaf_store<double>(t);
  try {
    skeletonize_box(t, 2, 5, store, kernel, 1e-6);
    FAIL("expected SingularPivotError");
  } catch (const SingularPivotError& e) {
    CHECK(e.level == 2);
    CHECK(e.box == 5);
  }
}
