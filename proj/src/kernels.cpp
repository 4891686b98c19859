#include "rsf/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "rsf/quadrature.hpp"
#include "rsf/special.hpp"

namespace rsf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double dist(const Point2D& a, const Point2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

double gaussian_bump(const Point2D& x) {
  const double dx = x.x - 0.5, dy = x.y - 0.5;
  return std::exp(-32.0 * (dx * dx + dy * dy));
}

double laplace_offdiag(const Point2D& xi, const Point2D& xj, double h) {
  const double r = dist(xi, xj);
  if (r == 0.0) {
    throw std::invalid_argument("laplace_offdiag: coincident points");
  }
  return -(h * h) / kTwoPi * std::log(r);
}

double laplace_diag(double h, double rel_tol) {
  if (!(h > 0.0)) throw std::invalid_argument("laplace_diag: h must be positive");
  // One quadrant [0, h/2]^2 (corner singularity), times four.
  const double a = 0.5 * h;
  const double quadrant = adaptive_quad_2d<double>(
      [](double x, double y) {
        return -std::log(x * x + y * y) / (2.0 * kTwoPi);
      },
      0.0, a, 0.0, a, rel_tol);
  return 4.0 * quadrant;
}

std::complex<double> helmholtz_cell_integral(double h, double kappa,
                                             double rel_tol) {
  if (!(h > 0.0) || !(kappa > 0.0)) {
    throw std::invalid_argument("helmholtz_cell_integral: h, kappa must be positive");
  }
  const double a = 0.5 * h;
  const std::complex<double> quarter_i(0.0, 0.25);
  const std::complex<double> quadrant = adaptive_quad_2d<std::complex<double>>(
      [kappa, quarter_i](double x, double y) {
        return quarter_i * hankel1_0(kappa * std::hypot(x, y));
      },
      0.0, a, 0.0, a, rel_tol);
  return 4.0 * quadrant;
}

std::complex<double> helmholtz_offdiag(const Point2D& xi, const Point2D& xj,
                                       double h, double kappa,
                                       const Potential& b) {
  const double r = dist(xi, xj);
  if (r == 0.0) {
    throw std::invalid_argument("helmholtz_offdiag: coincident points");
  }
  const double w = std::sqrt(b(xi)) * std::sqrt(b(xj));
  const std::complex<double> base =
      h * h * kappa * kappa * std::complex<double>(0.0, 0.25) *
      hankel1_0(kappa * r);
  return w * base;
}

std::complex<double> helmholtz_diag(const Point2D& xi, double h, double kappa,
                                    const Potential& b, double rel_tol) {
  const double bx = b(xi);
  if (bx == 0.0) return {1.0, 0.0};
  return 1.0 + kappa * kappa * bx * helmholtz_cell_integral(h, kappa, rel_tol);
}

ProxySurface proxy_points(const Box& b, int n_proxy) {
  if (n_proxy < 4) throw std::invalid_argument("proxy_points: need n_proxy >= 4");
  ProxySurface s;
  s.center_x = b.center_x();
  s.center_y = b.center_y();
  s.radius = 2.5 * b.side();
  s.points.reserve(static_cast<size_t>(n_proxy));
  for (int k = 0; k < n_proxy; ++k) {
    const double th = kTwoPi * k / n_proxy;
    s.points.push_back(
        {s.center_x + s.radius * std::cos(th), s.center_y + s.radius * std::sin(th), -1});
  }
  return s;
}

LaplaceKernel::LaplaceKernel(double h) : h_(h), diag_(laplace_diag(h)) {}

HelmholtzKernel::HelmholtzKernel(double h, double kappa, Potential b)
    : h_(h), kappa_(kappa), b_(std::move(b)),
      cell_integral_(helmholtz_cell_integral(h, kappa)) {}

HelmholtzKernel::Scalar HelmholtzKernel::offdiag(const Point2D& a,
                                                 const Point2D& b) const {
  return helmholtz_offdiag(a, b, h_, kappa_, b_);
}

HelmholtzKernel::Scalar HelmholtzKernel::diagonal(const Point2D& a) const {
  const double bx = b_(a);
  if (bx == 0.0) return {1.0, 0.0};
  return 1.0 + kappa_ * kappa_ * bx * cell_integral_;
}

HelmholtzKernel::Scalar HelmholtzKernel::proxy_entry(const Point2D& proxy,
                                                     const Point2D& target) const {
  const double r = dist(proxy, target);
  const double w = std::sqrt(b_(target));
  return w * (h_ * h_ * kappa_ * kappa_ * std::complex<double>(0.0, 0.25) *
              hankel1_0(kappa_ * r));
}

int HelmholtzKernel::proxy_count(double side) const {
  const int wave = static_cast<int>(std::ceil(8.0 * kappa_ * side));
  return std::max(64, wave);
}

}  // namespace rsf
