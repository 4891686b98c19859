#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "rsf/geometry.hpp"
#include "rsf/linalg.hpp"

namespace rsf {

using Potential = std::function<double(const Point2D&)>;

// Gaussian bump scattering potential, centered at (1/2, 1/2).
double gaussian_bump(const Point2D& x);

// 2D Laplace single-layer entries: A_ij = -(h^2 / 2pi) log ||xi - xj||.
double laplace_offdiag(const Point2D& xi, const Point2D& xj, double h);

// Diagonal entry: the kernel integrated over one grid cell,
// A_ii = int_{[-h/2,h/2]^2} -(1/2pi) log ||x|| dx, by adaptive quadrature.
double laplace_diag(double h, double rel_tol = 1e-10);

// 2D Helmholtz volume-potential entries (symmetrized form):
// A_ij = h^2 k^2 sqrt(b(xi)) sqrt(b(xj)) (i/4) H0^(1)(k ||xi-xj||).
std::complex<double> helmholtz_offdiag(const Point2D& xi, const Point2D& xj,
                                       double h, double kappa,
                                       const Potential& b);

// A_ii = 1 + k^2 b(xi) int_{[-h/2,h/2]^2} (i/4) H0^(1)(k||x||) dx.
std::complex<double> helmholtz_diag(const Point2D& xi, double h, double kappa,
                                    const Potential& b, double rel_tol = 1e-10);

// The cell integral above, exposed for caching one evaluation per kernel.
std::complex<double> helmholtz_cell_integral(double h, double kappa,
                                             double rel_tol = 1e-10);

// Points on the proxy circle of radius 2.5 x side length around a box,
// uniformly spaced starting at angle 0. Proxy points carry index -1.
struct ProxySurface {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  std::vector<Point2D> points;
};

ProxySurface proxy_points(const Box& b, int n_proxy);

// Kernel objects used by the generic factorization code.
//
// A kernel provides: Scalar, offdiag, diagonal, proxy_entry (kernel between
// a proxy-circle point and a grid point, with unit potential weight on the
// proxy side), and the default proxy-point count for a box side length.

class LaplaceKernel {
 public:
  using Scalar = double;

  explicit LaplaceKernel(double h);

  double h() const { return h_; }
  Scalar offdiag(const Point2D& a, const Point2D& b) const {
    return laplace_offdiag(a, b, h_);
  }
  Scalar diagonal(const Point2D&) const { return diag_; }
  Scalar proxy_entry(const Point2D& proxy, const Point2D& target) const {
    return laplace_offdiag(proxy, target, h_);
  }
  int proxy_count(double) const { return 64; }

 private:
  double h_;
  double diag_;
};

class HelmholtzKernel {
 public:
  using Scalar = std::complex<double>;

  HelmholtzKernel(double h, double kappa, Potential b = gaussian_bump);

  double h() const { return h_; }
  double kappa() const { return kappa_; }
  const Potential& potential() const { return b_; }

  Scalar offdiag(const Point2D& a, const Point2D& b) const;
  Scalar diagonal(const Point2D& a) const;
  Scalar proxy_entry(const Point2D& proxy, const Point2D& target) const;
  int proxy_count(double side) const;

 private:
  double h_;
  double kappa_;
  Potential b_;
  Scalar cell_integral_;
};

// Dense kernel block over two index lists; the diagonal rule applies when
// a row and column refer to the same point.
template <class K>
Matrix<typename K::Scalar> assemble_block(const K& kernel,
                                          std::span<const int> rows,
                                          std::span<const int> cols,
                                          const std::vector<Point2D>& pts) {
  Matrix<typename K::Scalar> out(static_cast<Eigen::Index>(rows.size()),
                                 static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    const Point2D& pc = pts[static_cast<size_t>(cols[j])];
    for (size_t i = 0; i < rows.size(); ++i) {
      const Point2D& pr = pts[static_cast<size_t>(rows[i])];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i] == cols[j] ? kernel.diagonal(pr) : kernel.offdiag(pr, pc);
    }
  }
  return out;
}

// Kernel block between proxy-circle points (rows) and grid points (cols).
template <class K>
Matrix<typename K::Scalar> proxy_block(const K& kernel, const ProxySurface& s,
                                       std::span<const int> cols,
                                       const std::vector<Point2D>& pts) {
  Matrix<typename K::Scalar> out(static_cast<Eigen::Index>(s.points.size()),
                                 static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    const Point2D& pc = pts[static_cast<size_t>(cols[j])];
    for (size_t i = 0; i < s.points.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel.proxy_entry(s.points[i], pc);
    }
  }
  return out;
}

}  // namespace rsf
