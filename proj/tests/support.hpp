#pragma once

#include "spinbell/qspace.hpp"

#include <random>

namespace spinbell::testing {

inline Mat random_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

inline Mat random_hermitian(int n, std::mt19937_64& rng) {
  const Mat m = random_matrix(n, rng);
  return (m + m.adjoint()) / 2.0;
}

// Haar measure through QR with the phase fix on R's diagonal
inline Mat haar_unitary(int n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(n, rng));
  Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR();
  for (int i = 0; i < n; ++i) Q.col(i) *= R(i, i) / std::abs(R(i, i));
  return Q;
}

inline Vec random_ket(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v.normalized();
}

inline Mat random_density(int n, std::mt19937_64& rng) {
  const Mat a = random_matrix(n, rng);
  Mat rho = a * a.adjoint();
  return rho / rho.trace().real();
}

}  // namespace spinbell::testing
