#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rsf/block_store.hpp"
#include "rsf/geometry.hpp"
#include "rsf/kernels.hpp"
#include "rsf/linalg.hpp"

namespace rsf {

// Column interpolative decomposition at tolerance eps: input columns split
// into skeleton S and redundant R with M[:,R] ~= M[:,S] * T.
template <class S>
struct IDResult {
  std::vector<int> skeleton;   // input column indices, pivot order
  std::vector<int> redundant;  // remaining columns, pivot order
  Matrix<S> interp;            // T, |skeleton| x |redundant|
};

// Column-pivoted Householder QR, pivoting on the largest remaining column
// norm (ties to the lowest original column index), truncated at the first
// diagonal with |R_kk| <= eps * |R_11|. T = R11^{-1} R12 mapped back through
// the pivot permutation.
template <class S>
IDResult<S> interpolative_decomposition(const Matrix<S>& m, double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("interpolative_decomposition: eps must be in (0,1)");
  }
  const Eigen::Index nr = m.rows(), nc = m.cols();
  IDResult<S> out;
  if (nc == 0) return out;
  if (nr == 0 || m.cwiseAbs().maxCoeff() == 0.0) {
    out.redundant.resize(static_cast<size_t>(nc));
    for (Eigen::Index j = 0; j < nc; ++j) out.redundant[static_cast<size_t>(j)] = static_cast<int>(j);
    out.interp.resize(0, nc);
    return out;
  }

  Matrix<S> work = m;
  std::vector<int> piv(static_cast<size_t>(nc));
  for (Eigen::Index j = 0; j < nc; ++j) piv[static_cast<size_t>(j)] = static_cast<int>(j);

  const Eigen::Index kmax = std::min(nr, nc);
  double r11 = 0.0;
  Eigen::Index rank = kmax;

  for (Eigen::Index k = 0; k < kmax; ++k) {
    // Exact remaining column norms.
    Eigen::Index best = k;
    double best_n2 = work.col(k).tail(nr - k).squaredNorm();
    for (Eigen::Index j = k + 1; j < nc; ++j) {
      const double n2 = work.col(j).tail(nr - k).squaredNorm();
      if (n2 > best_n2 ||
          (n2 == best_n2 && piv[static_cast<size_t>(j)] < piv[static_cast<size_t>(best)])) {
        best = j;
        best_n2 = n2;
      }
    }
    if (best != k) {
      work.col(k).swap(work.col(best));
      std::swap(piv[static_cast<size_t>(k)], piv[static_cast<size_t>(best)]);
    }

    const double sigma = std::sqrt(best_n2);
    if (k == 0) {
      r11 = sigma;
      if (r11 == 0.0) {
        rank = 0;
        break;
      }
    } else if (sigma <= eps * r11) {
      rank = k;
      break;
    }

    // Householder reflector sending the pivot column to sigma * e1.
    const S x0 = work(k, k);
    const double ax0 = std::abs(x0);
    const S beta = ax0 == 0.0 ? S(sigma) : S(-(x0 / ax0) * sigma);
    Vector<S> v = work.col(k).tail(nr - k);
    v(0) -= beta;
    const double vn2 = v.squaredNorm();
    work(k, k) = beta;
    if (vn2 > 0.0 && k + 1 < nc) {
      auto trailing = work.bottomRightCorner(nr - k, nc - k - 1);
      const Vector<S> proj = (v.adjoint() * trailing).adjoint() * S(2.0 / vn2);
      trailing.noalias() -= v * proj.adjoint();
    }
  }

  out.skeleton.assign(piv.begin(), piv.begin() + rank);
  out.redundant.assign(piv.begin() + rank, piv.end());
  const Eigen::Index nred = nc - rank;
  out.interp.resize(rank, nred);
  if (rank > 0 && nred > 0) {
    out.interp = work.topLeftCorner(rank, rank)
                     .template triangularView<Eigen::Upper>()
                     .solve(work.topRightCorner(rank, nred));
  }
  return out;
}

// Proxy-augmented compression matrix for a box: the stack
//   [ A_{M,B} ; A_{B,M}^* ; K_{proxy,B} ; K_{B,proxy}^* ]
// with A-blocks read through the store (modified data when present) and
// K-blocks evaluated against the proxy circle. Columns follow the box's
// active index order.
template <class K>
Matrix<typename K::Scalar> build_compression_matrix(
    const QuadTree& tree, int level, int box_id,
    const BlockStore<typename K::Scalar>& store, const K& kernel,
    int n_proxy = 0) {
  using S = typename K::Scalar;
  const Box b = tree.box(level, box_id);
  const auto& cols = store.active(box_id);
  const Eigen::Index nb = static_cast<Eigen::Index>(cols.size());

  std::vector<Matrix<S>> rows_blocks;
  Eigen::Index total_rows = 0;
  const auto m_list = tree.distance2_neighbors(level, box_id);
  for (int mid : m_list) {
    if (store.active(mid).empty()) continue;
    rows_blocks.push_back(read_block(store, kernel, tree.points(), mid, box_id));
    total_rows += rows_blocks.back().rows();
  }
  for (int mid : m_list) {
    if (store.active(mid).empty()) continue;
    rows_blocks.push_back(
        read_block(store, kernel, tree.points(), box_id, mid).adjoint());
    total_rows += rows_blocks.back().rows();
  }

  const int np = n_proxy > 0 ? n_proxy : kernel.proxy_count(b.side());
  const ProxySurface surf = proxy_points(b, np);
  Matrix<S> kp = proxy_block(kernel, surf, cols, tree.points());
  rows_blocks.push_back(kp);
  rows_blocks.push_back(kp.conjugate());  // = (K_{B,proxy})^* by kernel symmetry
  total_rows += 2 * kp.rows();

  Matrix<S> out(total_rows, nb);
  Eigen::Index at = 0;
  for (const auto& blk : rows_blocks) {
    out.middleRows(at, blk.rows()) = blk;
    at += blk.rows();
  }
  return out;
}

}  // namespace rsf
