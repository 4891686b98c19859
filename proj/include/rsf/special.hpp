#pragma once

#include <complex>

namespace rsf {

// Bessel functions of the first and second kind, order zero, for x > 0.
// Power series below the crossover argument, Hankel asymptotic expansion
// above it; both paths carry long-double accumulation so that
// hankel1_0 meets a 1e-12 relative accuracy contract on (0, 1e3].
double bessel_j0(double x);
double bessel_y0(double x);

// H0^(1)(x) = J0(x) + i Y0(x), x > 0.
std::complex<double> hankel1_0(double x);

}  // namespace rsf
