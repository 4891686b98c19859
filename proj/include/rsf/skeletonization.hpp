#pragma once

#include <Eigen/LU>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsf/block_store.hpp"
#include "rsf/compression.hpp"
#include "rsf/geometry.hpp"
#include "rsf/linalg.hpp"

namespace rsf {

struct SingularPivotError : std::runtime_error {
  SingularPivotError(int level, int box, const std::string& what)
      : std::runtime_error(what), level(level), box(box) {}
  int level;
  int box;
};

// Coupling of one neighbor box recorded at elimination time.
template <class S>
struct NeighborCoupling {
  int box = -1;
  std::vector<int> idx;  // neighbor's active indices at elimination time
  Matrix<S> elim_row;    // X_{n,R} U^{-1}
  Matrix<S> elim_col;    // L^{-1} P X_{R,n}
};

// Everything needed to replay one skeletonization step on a vector:
// the interpolation matrix, the pivoted LU of X_RR, and the row/column
// elimination blocks against the skeleton and each neighbor.
template <class S>
struct ElementaryFactor {
  int level = 0;
  int box = 0;
  std::vector<int> skeleton;   // global indices, pivot order
  std::vector<int> redundant;  // global indices, pivot order
  Matrix<S> interp;            // T, |skeleton| x |redundant|
  Matrix<S> lu;                // packed LU of X_RR (unit lower, upper)
  std::vector<int> lu_perm;    // row permutation p: (Pb)[i] = b[p[i]]
  Matrix<S> skel_elim_row;     // X_{S,R} U^{-1}
  Matrix<S> skel_elim_col;     // L^{-1} P X_{R,S}
  std::vector<NeighborCoupling<S>> neighbors;

  bool noop() const { return redundant.empty(); }
};

namespace detail {

template <class S>
std::vector<int> extract_perm(const Eigen::PartialPivLU<Matrix<S>>& plu) {
  // PartialPivLU gives A = P^{-1} L U; record p with (P b)[i] = b[p[i]].
  const auto& P = plu.permutationP();
  const int n = static_cast<int>(P.rows());
  std::vector<int> p(static_cast<size_t>(n));
  Eigen::VectorXi seq(n);
  for (int i = 0; i < n; ++i) seq(i) = i;
  Eigen::VectorXi applied = P * seq;
  for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = applied(i);
  return p;
}

template <class S>
Matrix<S> apply_perm_rows(const std::vector<int>& p, const Matrix<S>& m) {
  Matrix<S> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(p[static_cast<size_t>(i)]);
  return out;
}

inline std::vector<int> map_local(const std::vector<int>& active,
                                  const std::vector<int>& local) {
  std::vector<int> out;
  out.reserve(local.size());
  for (int l : local) out.push_back(active[static_cast<size_t>(l)]);
  return out;
}

}  // namespace detail

// One strong-skeletonization step for a box: compress against distance-2
// neighbors plus the proxy circle, sparsify, eliminate the redundant
// indices, apply the Schur update to all neighbor-pair blocks, and shrink
// the box's active list to its skeleton.
template <class K>
ElementaryFactor<typename K::Scalar> skeletonize_box(
    const QuadTree& tree, int level, int box_id,
    BlockStore<typename K::Scalar>& store, const K& kernel, double eps,
    int n_proxy = 0) {
  using S = typename K::Scalar;
  const auto& pts = tree.points();

  ElementaryFactor<S> f;
  f.level = level;
  f.box = box_id;

  const std::vector<int> active_b = store.active(box_id);
  if (active_b.empty()) return f;

  const Matrix<S> comp = build_compression_matrix(tree, level, box_id, store,
                                                  kernel, n_proxy);
  const IDResult<S> id = interpolative_decomposition(comp, eps);

  if (id.redundant.empty()) {
    f.skeleton = active_b;  // nothing redundant: no-op, store untouched
    return f;
  }

  std::vector<int> s_pos(id.skeleton.begin(), id.skeleton.end());
  std::vector<int> r_pos(id.redundant.begin(), id.redundant.end());
  f.skeleton = detail::map_local(active_b, s_pos);
  f.redundant = detail::map_local(active_b, r_pos);
  f.interp = id.interp;
  const Matrix<S>& T = f.interp;

  std::vector<int> nbr_ids;
  for (int n : tree.neighbors(level, box_id)) {
    if (!store.active(n).empty()) nbr_ids.push_back(n);
  }

  // Self block split by skeleton/redundant positions.
  const Matrix<S> a_bb = read_block(store, kernel, pts, box_id, box_id);
  const Matrix<S> a_rr = a_bb(r_pos, r_pos);
  const Matrix<S> a_rs = a_bb(r_pos, s_pos);
  const Matrix<S> a_sr = a_bb(s_pos, r_pos);
  const Matrix<S> a_ss = a_bb(s_pos, s_pos);

  // Sparsified blocks: the redundant row/column after applying the
  // interpolation both ways.
  Matrix<S> x_rr = a_rr - T.adjoint() * a_sr - a_rs * T + T.adjoint() * a_ss * T;
  Matrix<S> x_rs = a_rs - T.adjoint() * a_ss;
  Matrix<S> x_sr = a_sr - a_ss * T;

  struct NbrBlocks {
    Matrix<S> a_ns, a_sn;  // skeleton coupling (unchanged by sparsification)
    Matrix<S> x_nr, x_rn;
  };
  std::vector<NbrBlocks> nb(nbr_ids.size());
  for (size_t q = 0; q < nbr_ids.size(); ++q) {
    const int n = nbr_ids[q];
    const Matrix<S> a_bn = read_block(store, kernel, pts, box_id, n);
    const Matrix<S> a_nb = read_block(store, kernel, pts, n, box_id);
    nb[q].a_sn = a_bn(s_pos, Eigen::all);
    nb[q].a_ns = a_nb(Eigen::all, s_pos);
    nb[q].x_rn = a_bn(r_pos, Eigen::all) - T.adjoint() * nb[q].a_sn;
    nb[q].x_nr = a_nb(Eigen::all, r_pos) - nb[q].a_ns * T;
  }

  Eigen::PartialPivLU<Matrix<S>> plu(x_rr);
  {
    const double scale = x_rr.cwiseAbs().maxCoeff();
    const double pivot_min = plu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(pivot_min > 1e-14 * scale)) {
      throw SingularPivotError(
          level, box_id,
          "skeletonize_box: singular redundant block at level " +
              std::to_string(level) + ", box " + std::to_string(box_id));
    }
  }
  f.lu = plu.matrixLU();
  f.lu_perm = detail::extract_perm<S>(plu);
  const Matrix<S>& lu_c = f.lu;

  // elim_row = X_{.,R} U^{-1}: solve U^T Y^T = X^T (plain transpose).
  auto elim_row = [&](const Matrix<S>& x) -> Matrix<S> {
    Matrix<S> xt = x.transpose();
    lu_c.transpose().template triangularView<Eigen::Lower>().solveInPlace(xt);
    return xt.transpose();
  };
  // elim_col = L^{-1} P X_{R,.}
  auto elim_col = [&](const Matrix<S>& x) -> Matrix<S> {
    Matrix<S> px = detail::apply_perm_rows<S>(f.lu_perm, x);
    lu_c.template triangularView<Eigen::UnitLower>().solveInPlace(px);
    return px;
  };

  f.skel_elim_row = elim_row(x_sr);
  f.skel_elim_col = elim_col(x_rs);
  f.neighbors.resize(nbr_ids.size());
  for (size_t q = 0; q < nbr_ids.size(); ++q) {
    f.neighbors[q].box = nbr_ids[q];
    f.neighbors[q].idx = store.active(nbr_ids[q]);
    f.neighbors[q].elim_row = elim_row(nb[q].x_nr);
    f.neighbors[q].elim_col = elim_col(nb[q].x_rn);
  }

  // Schur updates over {skeleton} u neighbors; the box's own blocks are
  // rewritten over the skeleton indices.
  store.put(box_id, box_id, a_ss - f.skel_elim_row * f.skel_elim_col,
            f.skeleton, f.skeleton);
  for (size_t q = 0; q < nbr_ids.size(); ++q) {
    const int n = nbr_ids[q];
    store.put(box_id, n, nb[q].a_sn - f.skel_elim_row * f.neighbors[q].elim_col,
              f.skeleton, store.active(n));
    store.put(n, box_id, nb[q].a_ns - f.neighbors[q].elim_row * f.skel_elim_col,
              store.active(n), f.skeleton);
  }
  for (size_t qi = 0; qi < nbr_ids.size(); ++qi) {
    for (size_t qj = 0; qj < nbr_ids.size(); ++qj) {
      const int n1 = nbr_ids[qi], n2 = nbr_ids[qj];
      Matrix<S> base = read_block(store, kernel, pts, n1, n2);
      base.noalias() -= f.neighbors[qi].elim_row * f.neighbors[qj].elim_col;
      store.put(n1, n2, std::move(base), store.active(n1), store.active(n2));
    }
  }

  store.set_active(box_id, f.skeleton);
  return f;
}

}  // namespace rsf
