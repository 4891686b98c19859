#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsf {

// Gauss-Legendre nodes/weights on [-1, 1], generated by Newton iteration.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussRule& gauss_rule(int n);

struct QuadratureError : std::runtime_error {
  explicit QuadratureError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline double quad_abs(double v) { return std::fabs(v); }
inline double quad_abs(const std::complex<double>& v) { return std::abs(v); }

template <class T, class F>
T panel_gauss(const F& f, double x0, double x1, double y0, double y1,
              const GaussRule& rule) {
  const double hx = 0.5 * (x1 - x0), cx = 0.5 * (x1 + x0);
  const double hy = 0.5 * (y1 - y0), cy = 0.5 * (y1 + y0);
  T acc{};
  for (size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = cx + hx * rule.nodes[i];
    T row{};
    for (size_t j = 0; j < rule.nodes.size(); ++j) {
      const double y = cy + hy * rule.nodes[j];
      row += f(x, y) * rule.weights[j];
    }
    acc += row * rule.weights[i];
  }
  return acc * (hx * hy);
}

template <class T, class F>
void adapt_rec(const F& f, double x0, double x1, double y0, double y1, T coarse,
               double scale, double rel_tol, int depth, int max_depth,
               const GaussRule& rule, T& total, double& err_total) {
  const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
  const T c00 = panel_gauss<T>(f, x0, xm, y0, ym, rule);
  const T c10 = panel_gauss<T>(f, xm, x1, y0, ym, rule);
  const T c01 = panel_gauss<T>(f, x0, xm, ym, y1, rule);
  const T c11 = panel_gauss<T>(f, xm, x1, ym, y1, rule);
  const T refined = c00 + c10 + c01 + c11;
  const double err = quad_abs(refined - coarse);
  const double budget =
      rel_tol * scale / (4.0 * (depth + 1.0) * (depth + 1.0));
  if (err <= budget || depth >= max_depth) {
    total += refined;
    err_total += err;
    return;
  }
  adapt_rec(f, x0, xm, y0, ym, c00, scale, rel_tol, depth + 1, max_depth, rule,
            total, err_total);
  adapt_rec(f, xm, x1, y0, ym, c10, scale, rel_tol, depth + 1, max_depth, rule,
            total, err_total);
  adapt_rec(f, x0, xm, ym, y1, c01, scale, rel_tol, depth + 1, max_depth, rule,
            total, err_total);
  adapt_rec(f, xm, x1, ym, y1, c11, scale, rel_tol, depth + 1, max_depth, rule,
            total, err_total);
}

}  // namespace detail

// Adaptive 2D quadrature by recursive panel subdivision with a fixed-order
// tensor Gauss rule. Intended for integrands with an integrable (log-type)
// singularity at a panel corner or center. Throws QuadratureError if the
// requested relative tolerance was not reached.
template <class T, class F>
T adaptive_quad_2d(const F& f, double x0, double x1, double y0, double y1,
                   double rel_tol, int max_depth = 48, int gauss_order = 8) {
  const GaussRule& rule = gauss_rule(gauss_order);
  const T coarse = detail::panel_gauss<T>(f, x0, x1, y0, y1, rule);
  const double scale = std::max(detail::quad_abs(coarse), 1e-300);
  T total{};
  double err_total = 0.0;
  detail::adapt_rec(f, x0, x1, y0, y1, coarse, scale, rel_tol, 0, max_depth,
                    rule, total, err_total);
  const double achieved = err_total / std::max(detail::quad_abs(total), 1e-300);
  if (achieved > 10.0 * rel_tol) {
    throw QuadratureError("adaptive_quad_2d: tolerance not reached, achieved " +
                          std::to_string(achieved));
  }
  return total;
}

}  // namespace rsf
