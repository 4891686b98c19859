#include "rsf/special.hpp"

#include <cmath>
#include <stdexcept>

namespace rsf {

namespace {

constexpr long double kEulerGamma = 0.5772156649015328606065120900824024L;
constexpr long double kPi = 3.1415926535897932384626433832795029L;

// Crossover between the power series and the asymptotic expansion.
constexpr double kSeriesLimit = 16.0;

struct J0Y0 {
  long double j0;
  long double y0;
};

// Power series (x <= kSeriesLimit):
//   J0(x) = sum_k (-t)^k / (k!)^2,            t = x^2/4
//   Y0(x) = (2/pi) [ (ln(x/2) + gamma) J0(x) + sum_{k>=1} (-1)^{k+1} H_k t^k/(k!)^2 ]
J0Y0 series_j0y0(long double x) {
  const long double t = x * x / 4.0L;
  long double term = 1.0L;  // t^k / (k!)^2
  long double j = 1.0L;
  long double s = 0.0L;  // harmonic-weighted sum
  long double hk = 0.0L;
  int sign = -1;
  for (int k = 1; k <= 200; ++k) {
    term *= t / (static_cast<long double>(k) * k);
    hk += 1.0L / k;
    j += sign * term;
    s += -sign * hk * term;  // (-1)^{k+1} H_k term
    if (term < 1e-22L * (std::fabs(j) + 1.0L) && k > 4) break;
    sign = -sign;
  }
  const long double y = (2.0L / kPi) * ((std::log(x / 2.0L) + kEulerGamma) * j + s);
  return {j, y};
}

// Hankel asymptotic expansion (x > kSeriesLimit):
//   H0^(1)(x) ~ sqrt(2/(pi x)) e^{i(x - pi/4)} sum_m i^m A_m / x^m,
//   A_m = prod_{j=1..m} -(2j-1)^2 / (m 8)
J0Y0 asymptotic_j0y0(long double x) {
  long double sr = 1.0L, si = 0.0L;  // running sum
  long double tr = 1.0L, ti = 0.0L;  // current term
  long double prev_mag = 1.0L;
  for (int m = 1; m <= 40; ++m) {
    const long double f = static_cast<long double>(2 * m - 1) * (2 * m - 1) /
                          (8.0L * m * x);
    // term *= -i * f
    const long double nr = ti * f;
    const long double ni = -tr * f;
    tr = nr;
    ti = ni;
    const long double mag = std::fabs(tr) + std::fabs(ti);
    if (mag > prev_mag) break;  // divergent tail reached
    sr += tr;
    si += ti;
    prev_mag = mag;
    if (mag < 1e-20L) break;
  }
  const long double amp = std::sqrt(2.0L / (kPi * x));
  const long double ph = x - kPi / 4.0L;
  const long double c = std::cos(ph), s = std::sin(ph);
  // (c + i s) * (sr + i si)
  return {amp * (c * sr - s * si), amp * (s * sr + c * si)};
}

J0Y0 j0y0(double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel: argument must be positive");
  return x <= kSeriesLimit ? series_j0y0(x) : asymptotic_j0y0(x);
}

}  // namespace

double bessel_j0(double x) { return static_cast<double>(j0y0(x).j0); }

double bessel_y0(double x) { return static_cast<double>(j0y0(x).y0); }

std::complex<double> hankel1_0(double x) {
  const J0Y0 v = j0y0(x);
  return {static_cast<double>(v.j0), static_cast<double>(v.y0)};
}

}  // namespace rsf
