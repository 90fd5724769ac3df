#include "spinbell/bell.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace spinbell;
using std::numbers::pi;
using spinbell::testing::haar_unitary;
using spinbell::testing::random_ket;

namespace {

Vec chsh_psi() {
  Vec psi = Vec::Zero(8);
  psi(0) = psi(2) = psi(6) = psi(7) = 0.5;
  return psi;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

bool is_dichotomic(const Mat& m) {
  return (m - m.adjoint()).norm() < 1e-9 && (m * m - Mat::Identity(m.rows(), m.cols())).norm() < 1e-9;
}

const double kSqrt7 = std::sqrt(7.0);

}  // namespace

TEST_CASE("CHSH value of the prepared state") {
  const Vec psi = chsh_psi();
  const PauliDecomposition s = pauli_decompose(psi * psi.adjoint());
  CHECK(chsh_objective(s, 0.0, pi, 0.0) == doctest::Approx(kSqrt7).epsilon(1e-12));
  CHECK(kSqrt7 == doctest::Approx(2.64575).epsilon(1e-5));

  const CHSHResult r = chsh_maximize(psi);
  CHECK(r.value == doctest::Approx(kSqrt7).epsilon(1e-8));
  const BellObservables& o = r.observables;
  for (const Mat* m : {&o.A, &o.A_prime, &o.B, &o.B_prime}) CHECK(is_dichotomic(*m));
  CHECK(psi.dot(bell_operator(o) * psi).real() == doctest::Approx(r.value).epsilon(1e-12));

  const Eigen::Matrix3d R = euler_zyz(0.3, 1.1, -0.7);
  CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-14);
  CHECK(R.determinant() == doctest::Approx(1.0));
}

TEST_CASE("CHSH bounds") {
  // qubit (x) qudit with the qubit entangled with two qudit levels
  Vec bell = Vec::Zero(8);
  bell(0) = bell(5) = 1 / std::sqrt(2.0);
  CHECK(chsh_maximize(bell).value == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-8));

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Vec prod = kron(random_ket(2, rng), random_ket(4, rng));
    // B = B' at the maximum, so A' is undefined; the maximum itself is still reported
    double v = 0.0;
    try {
      v = chsh_maximize(prod, {12, 4, 1}).value;
    } catch (const DegenerateDirection& e) {
      v = e.value;
    }
    CHECK(v <= 2.0 + 1e-6);
    CHECK(v > 1.9);
  }
  Vec up = Vec::Zero(8);
  up(0) = 1.0;
  CHECK_THROWS_AS(chsh_maximize(up), DegenerateDirection);
  CHECK(chsh_classical_bound() == 2);
}

TEST_CASE("CHSH maximum is invariant under local unitaries") {
  std::mt19937_64 rng(9);
  const Vec psi = chsh_psi();
  for (int t = 0; t < 5; ++t) {
    const Vec phi = kron(haar_unitary(2, rng), haar_unitary(4, rng)) * psi;
    CHECK(chsh_maximize(phi).value == doctest::Approx(kSqrt7).epsilon(1e-6));
  }
  const Vec r = random_ket(8, rng);
  const double v = chsh_maximize(r).value;
  CHECK(v <= 2 * std::sqrt(2.0) + 1e-9);
  CHECK(chsh_maximize(kron(haar_unitary(2, rng), haar_unitary(4, rng)) * r).value == doctest::Approx(v).epsilon(1e-6));
}

TEST_CASE("reducibility") {
  const Reducibility r = reducibility_check(chsh_psi());
  CHECK_FALSE(r.reducible);
  CHECK(std::abs(r.witness - 0.25) < 1e-15);

  Vec ortho = Vec::Zero(8);
  ortho(0) = ortho(5) = 1 / std::sqrt(2.0);
  CHECK(reducibility_check(ortho).reducible);

  std::mt19937_64 rng(2);
  CHECK(reducibility_check(kron(random_ket(2, rng), random_ket(4, rng))).reducible);
  CHECK_THROWS_AS(reducibility_check(Vec::Ones(8)), std::invalid_argument);
}

TEST_CASE("diagonal CHSH terms") {
  std::array<Mat, 4> mixed;
  mixed.fill(Mat::Identity(8, 8) / 8.0);
  const CHSHTerms z = chsh_diagonal_terms(mixed);
  for (double o : z.O) CHECK(std::abs(o) < 1e-15);

  const Vec psi = chsh_psi();
  const CHSHResult r = chsh_observables(psi, 0.0, pi, 0.0);
  const auto U = chsh_rotations(r);
  std::array<Mat, 4> rhos;
  for (int k = 0; k < 4; ++k) {
    const Vec v = U[k] * psi;
    rhos[k] = v * v.adjoint();
  }
  const CHSHTerms t = chsh_diagonal_terms(rhos);
  CHECK(t.combination == doctest::Approx(kSqrt7).epsilon(1e-10));

  // each term against the direct expectation <A_i (x) B_j>
  const BellObservables& o = r.observables;
  const Mat As[2] = {o.A, o.A_prime}, Bs[2] = {o.B, o.B_prime};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double direct = psi.dot(kron(As[i], Bs[j]) * psi).real();
      CHECK(chsh_term_measurement(psi, r, i, j) == doctest::Approx(direct).epsilon(1e-10));
      CHECK(chsh_term_measurement(psi, r, i, j, true) == doctest::Approx(direct).epsilon(1e-10));
      CHECK(t.O[2 * i + j] == doctest::Approx(direct).epsilon(1e-10));
    }

  // 12-level dimer states are restricted to the computational levels
  std::array<Mat, 4> big;
  const int idx[8] = {1, 2, 3, 4, 7, 8, 9, 10};
  for (int k = 0; k < 4; ++k) {
    big[k] = Mat::Zero(12, 12);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) big[k](idx[a], idx[b]) = rhos[k](a, b);
  }
  CHECK(chsh_diagonal_terms(big).combination == doctest::Approx(t.combination).epsilon(1e-12));
  CHECK((chsh_D(1) - Mat(RVec((RVec(4) << -1, 1, 1, 1).finished()).cast<cplx>().asDiagonal())).norm() == 0.0);
  CHECK_THROWS_AS(chsh_D(3), std::invalid_argument);
  mixed[0] = Mat::Identity(6, 6) / 6.0;
  CHECK_THROWS_AS(chsh_diagonal_terms(mixed), std::invalid_argument);
}

TEST_CASE("observable validation") {
  BellObservables o{pauli(3), pauli(1), chsh_D(1), chsh_D(2)};
  CHECK_NOTHROW(o.validate());
  o.B = 0.5 * chsh_D(1);
  CHECK_THROWS(o.validate());
}

TEST_CASE("CGLMP") {
  const CGLMPUnitaries u = cglmp_unitaries();
  for (const Mat* m : {&u.A[0], &u.A[1], &u.B[0], &u.B[1]})
    CHECK((m->adjoint() * *m - Mat::Identity(4, 4)).norm() < 1e-12);

  const Vec psi = max_entangled();
  std::array<Mat, 4> rhos;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const Vec v = kron(u.A[a], u.B[b]) * psi;
      rhos[2 * a + b] = v * v.adjoint();
    }
  const ProbabilityTable t = cglmp_probabilities(rhos);
  CHECK_NOTHROW(t.validate());
  const ProbabilityTable closed = cglmp_ideal_probabilities();
  for (int k = 0; k < 4; ++k) CHECK((t.P[k] - closed.P[k]).norm() < 1e-12);
  CHECK(cglmp_functional(t) == doctest::Approx(2.89624).epsilon(1e-5));

  ProbabilityTable flat;
  flat.P.fill(Eigen::MatrixXd::Constant(4, 4, 1.0 / 16));
  CHECK(std::abs(cglmp_functional(flat)) < 1e-15);
  CHECK(cglmp_classical_bound() == doctest::Approx(2.0));

  // relabeling k -> k+1 on both sides keeps every correlation class
  ProbabilityTable shifted;
  for (int s = 0; s < 4; ++s) {
    shifted.P[s] = Eigen::MatrixXd(4, 4);
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) shifted.P[s]((k + 1) % 4, (l + 1) % 4) = t.P[s](k, l);
  }
  CHECK(cglmp_functional(shifted) == doctest::Approx(cglmp_functional(t)).epsilon(1e-12));

  // a perfectly correlated deterministic table stays classical
  ProbabilityTable det;
  det.P.fill(Eigen::MatrixXd::Zero(4, 4));
  for (auto& p : det.P) p(0, 0) = 1.0;
  CHECK(cglmp_functional(det) <= 2.0 + 1e-12);

  ProbabilityTable bad = t;
  bad.P[1](0, 0) += 0.1;
  CHECK_THROWS(bad.validate());
}
