#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstring>
#include <random>
#include <vector>

namespace rsf {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct ScalarTraits {
  static constexpr int words_per_scalar = 1;
};
template <class R>
struct ScalarTraits<std::complex<R>> {
  static constexpr int words_per_scalar = 2;
};

// Spectral norm estimate by a fixed number of power iterations on A*A.
// Deterministically seeded so repeated calls agree bitwise.
template <class S>
double spectral_norm_estimate(const Matrix<S>& a, int iters = 10,
                              unsigned seed = 0x5eedu) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector<S> v(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = S(unif(rng));
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  v /= nv;
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vector<S> w = a * v;
    sigma = w.norm();
    if (sigma == 0.0) return 0.0;
    v = a.adjoint() * w;
    nv = v.norm();
    if (nv == 0.0) break;
    v /= nv;
  }
  return sigma;
}

template <class S>
Vector<S> gather(const Vector<S>& x, const std::vector<int>& idx) {
  Vector<S> out(static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(idx[k]);
  return out;
}

template <class S>
void scatter(Vector<S>& x, const std::vector<int>& idx, const Vector<S>& vals) {
  for (size_t k = 0; k < idx.size(); ++k) x(idx[k]) = vals(static_cast<Eigen::Index>(k));
}

template <class S>
bool bitwise_equal(const Matrix<S>& a, const Matrix<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(S) * a.size()) == 0;
}

}  // namespace rsf
