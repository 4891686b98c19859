#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "rsf/driver.hpp"
#include "rsf/kernels.hpp"
#include "rsf/linalg.hpp"
#include "rsf/special.hpp"

namespace rsf {

namespace detail {

template <class S>
Vector<S> apply_perm(const std::vector<int>& p, const Vector<S>& v) {
  Vector<S> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = v(p[static_cast<size_t>(i)]);
  return out;
}

}  // namespace detail

// Apply the inverse of the factorization to a right-hand side: an upward
// pass over the factors in application order, the dense top-level solve,
// and a downward pass in reverse order. Works in place on a copy of b via
// the recorded global index lists.
template <class S>
Vector<S> apply_inverse(const Factorization<S>& f, const Vector<S>& b) {
  if (b.size() != f.n) {
    throw std::invalid_argument("apply_inverse: vector length mismatch");
  }
  Vector<S> x = b;

  // Upward: b(B) first, then the neighbor entries.
  for (const auto& ef : f.factors) {
    if (ef.noop()) continue;
    Vector<S> r = gather(x, ef.redundant);
    const Vector<S> s = gather(x, ef.skeleton);
    r.noalias() -= ef.interp.adjoint() * s;
    r = detail::apply_perm(ef.lu_perm, r);
    ef.lu.template triangularView<Eigen::UnitLower>().solveInPlace(r);
    scatter(x, ef.redundant, r);
    {
      Vector<S> sv = gather(x, ef.skeleton);
      sv.noalias() -= ef.skel_elim_row * r;
      scatter(x, ef.skeleton, sv);
    }
    for (const auto& nc : ef.neighbors) {
      Vector<S> nv = gather(x, nc.idx);
      nv.noalias() -= nc.elim_row * r;
      scatter(x, nc.idx, nv);
    }
  }

  if (!f.top_indices.empty()) {
    Vector<S> t = gather(x, f.top_indices);
    t = detail::apply_perm(f.top_perm, t);
    f.top_lu.template triangularView<Eigen::UnitLower>().solveInPlace(t);
    f.top_lu.template triangularView<Eigen::Upper>().solveInPlace(t);
    scatter(x, f.top_indices, t);
  }

  // Downward: read neighbor data, update the box entries.
  for (auto it = f.factors.rbegin(); it != f.factors.rend(); ++it) {
    const auto& ef = *it;
    if (ef.noop()) continue;
    Vector<S> r = gather(x, ef.redundant);
    r.noalias() -= ef.skel_elim_col * gather(x, ef.skeleton);
    for (const auto& nc : ef.neighbors) {
      r.noalias() -= nc.elim_col * gather(x, nc.idx);
    }
    ef.lu.template triangularView<Eigen::Upper>().solveInPlace(r);
    Vector<S> sv = gather(x, ef.skeleton);
    sv.noalias() -= ef.interp * r;
    scatter(x, ef.skeleton, sv);
    scatter(x, ef.redundant, r);
  }
  return x;
}

// Exact dense kernel matvec. Points from make_grid repeat pairwise
// differences, so kernel values are tabulated once per (|di|, |dj|) offset
// and the O(N^2) accumulation never materializes the matrix.
template <class K>
class DenseOperator {
 public:
  using S = typename K::Scalar;

  DenseOperator(const K& kernel, const std::vector<Point2D>& pts)
      : pts_(pts) {
    n_ = static_cast<int>(pts.size());
    side_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_))));
    if (side_ * side_ != n_) {
      throw std::invalid_argument("DenseOperator: expects a square grid of points");
    }
    table_.resize(static_cast<size_t>(side_) * side_);
    for (int dy = 0; dy < side_; ++dy) {
      for (int dx = 0; dx < side_; ++dx) {
        if (dx == 0 && dy == 0) continue;
        table_[static_cast<size_t>(dy) * side_ + dx] =
            base_entry(kernel, pts[0], pts[static_cast<size_t>(dy) * side_ + dx]);
      }
    }
    weight_.resize(static_cast<size_t>(n_));
    diag_.resize(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      weight_[static_cast<size_t>(i)] = weight(kernel, pts[static_cast<size_t>(i)]);
      diag_[static_cast<size_t>(i)] = kernel.diagonal(pts[static_cast<size_t>(i)]);
    }
  }

  int size() const { return n_; }

  Vector<S> matvec(const Vector<S>& x) const {
    if (x.size() != n_) throw std::invalid_argument("DenseOperator: length mismatch");
    std::vector<S> xw(static_cast<size_t>(n_));
    for (int j = 0; j < n_; ++j) xw[static_cast<size_t>(j)] = weight_[static_cast<size_t>(j)] * x(j);
    Vector<S> y(n_);
    for (int i = 0; i < n_; ++i) {
      const int ix = i % side_, iy = i / side_;
      S acc{};
      for (int j = 0; j < n_; ++j) {
        if (j == i) continue;
        const int jx = j % side_, jy = j / side_;
        acc += table_[static_cast<size_t>(std::abs(iy - jy)) * side_ +
                      std::abs(ix - jx)] *
               xw[static_cast<size_t>(j)];
      }
      y(i) = diag_[static_cast<size_t>(i)] * x(i) + weight_[static_cast<size_t>(i)] * acc;
    }
    return y;
  }

  std::function<Vector<S>(const Vector<S>&)> as_fn() const {
    return [this](const Vector<S>& x) { return matvec(x); };
  }

 private:
  static double weight(const LaplaceKernel&, const Point2D&) { return 1.0; }
  static double weight(const HelmholtzKernel& k, const Point2D& p) {
    return std::sqrt(k.potential()(p));
  }
  static LaplaceKernel::Scalar base_entry(const LaplaceKernel& k, const Point2D& a,
                                          const Point2D& b) {
    return k.offdiag(a, b);
  }
  static HelmholtzKernel::Scalar base_entry(const HelmholtzKernel& k,
                                            const Point2D& a, const Point2D& b) {
    const double r = std::hypot(a.x - b.x, a.y - b.y);
    return k.h() * k.h() * k.kappa() * k.kappa() *
           std::complex<double>(0.0, 0.25) * hankel1_0(k.kappa() * r);
  }

  const std::vector<Point2D>& pts_;
  int n_ = 0;
  int side_ = 0;
  std::vector<S> table_;
  std::vector<double> weight_;
  std::vector<S> diag_;
};

template <class K>
Vector<typename K::Scalar> dense_matvec(const K& kernel,
                                        const std::vector<Point2D>& pts,
                                        const Vector<typename K::Scalar>& x) {
  return DenseOperator<K>(kernel, pts).matvec(x);
}

struct IterResult {
  int iterations = 0;
  double relres = 0.0;
  bool converged = false;
  bool stagnated = false;
};

struct PcgBreakdown : std::runtime_error {
  explicit PcgBreakdown(const std::string& msg) : std::runtime_error(msg) {}
};

// Preconditioned conjugate gradient; the operator must be symmetric
// positive definite. Nonpositive curvature raises PcgBreakdown (use gmres).
template <class S>
IterResult pcg(const std::function<Vector<S>(const Vector<S>&)>& matvec,
               const std::function<Vector<S>(const Vector<S>&)>& precond,
               const Vector<S>& b, double tol, int maxit, Vector<S>& x) {
  x = Vector<S>::Zero(b.size());
  const double bnorm = b.norm();
  IterResult res;
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vector<S> r = b;
  Vector<S> z = precond ? precond(r) : r;
  Vector<S> p = z;
  S rz = r.dot(z);
  for (int it = 1; it <= maxit; ++it) {
    const Vector<S> ap = matvec(p);
    const S pap = p.dot(ap);
    if (!(std::real(S(pap)) > 0.0)) {
      throw PcgBreakdown("pcg: nonpositive curvature encountered; operator is "
                         "not SPD here, use gmres");
    }
    const S alpha = rz / pap;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    res.iterations = it;
    res.relres = r.norm() / bnorm;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
    z = precond ? precond(r) : r;
    const S rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return res;
}

// Left-preconditioned restarted GMRES with modified Gram-Schmidt Arnoldi.
// Stops on the preconditioned relative residual; a restart cycle with no
// progress is reported as stagnation.
template <class S>
IterResult gmres(const std::function<Vector<S>(const Vector<S>&)>& matvec,
                 const std::function<Vector<S>(const Vector<S>&)>& precond,
                 const Vector<S>& b, double tol, int restart, int maxit,
                 Vector<S>& x) {
  const Eigen::Index n = b.size();
  x = Vector<S>::Zero(n);
  auto apply_m = [&](const Vector<S>& v) { return precond ? precond(v) : v; };
  const double bnorm = apply_m(b).norm();
  IterResult res;
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }

  while (res.iterations < maxit) {
    Vector<S> r = apply_m(b - matvec(x));
    const double beta = r.norm();
    res.relres = beta / bnorm;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
    const double cycle_start = res.relres;

    const int m = restart;
    std::vector<Vector<S>> v;
    v.reserve(static_cast<size_t>(m) + 1);
    v.push_back(r / beta);
    Matrix<S> hess = Matrix<S>::Zero(m + 1, m);
    std::vector<S> cs(static_cast<size_t>(m));
    std::vector<S> sn(static_cast<size_t>(m));
    Vector<S> g = Vector<S>::Zero(m + 1);
    g(0) = S(beta);
    int k = 0;
    for (; k < m && res.iterations < maxit;) {
      Vector<S> w = apply_m(matvec(v[static_cast<size_t>(k)]));
      for (int i = 0; i <= k; ++i) {
        hess(i, k) = v[static_cast<size_t>(i)].dot(w);
        w.noalias() -= hess(i, k) * v[static_cast<size_t>(i)];
      }
      const double wnorm = w.norm();
      S sub = S(wnorm);
      // Accumulated Givens rotations on column k, then a new one
      // annihilating the subdiagonal.
      for (int i = 0; i < k; ++i) {
        const S t = Eigen::numext::conj(cs[static_cast<size_t>(i)]) * hess(i, k) +
                    Eigen::numext::conj(sn[static_cast<size_t>(i)]) * hess(i + 1, k);
        hess(i + 1, k) = -sn[static_cast<size_t>(i)] * hess(i, k) +
                         cs[static_cast<size_t>(i)] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double denom = std::sqrt(std::norm(hess(k, k)) + std::norm(sub));
      if (denom == 0.0) {  // operator annihilated the basis vector
        res.iterations += 1;
        break;
      }
      cs[static_cast<size_t>(k)] = hess(k, k) / S(denom);
      sn[static_cast<size_t>(k)] = sub / S(denom);
      hess(k, k) = Eigen::numext::conj(cs[static_cast<size_t>(k)]) * hess(k, k) +
                   Eigen::numext::conj(sn[static_cast<size_t>(k)]) * sub;
      g(k + 1) = -sn[static_cast<size_t>(k)] * g(k);
      g(k) = Eigen::numext::conj(cs[static_cast<size_t>(k)]) * g(k);

      res.iterations += 1;
      res.relres = std::abs(g(k + 1)) / bnorm;
      k += 1;
      if (res.relres <= tol || wnorm == 0.0) break;  // converged or exhausted
      if (k < m) v.push_back(w / S(wnorm));
    }
    // Solve the small triangular system and update x.
    if (k > 0) {
      Vector<S> y = hess.topLeftCorner(k, k)
                        .template triangularView<Eigen::Upper>()
                        .solve(g.head(k));
      for (int i = 0; i < k; ++i) x.noalias() += y(i) * v[static_cast<size_t>(i)];
    }
    r = apply_m(b - matvec(x));
    res.relres = r.norm() / bnorm;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
    if (res.relres >= cycle_start * (1.0 - 1e-12)) {
      res.stagnated = true;
      return res;
    }
  }
  return res;
}

}  // namespace rsf
