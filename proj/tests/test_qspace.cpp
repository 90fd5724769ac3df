#include "spinbell/qspace.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace spinbell;
using spinbell::testing::haar_unitary;
using spinbell::testing::random_density;
using spinbell::testing::random_ket;

namespace {
const cplx I(0.0, 1.0);

Vec chsh_psi() {
  Vec psi = Vec::Zero(8);
  psi(0) = psi(2) = psi(6) = psi(7) = 0.5;
  return psi;
}
}  // namespace

TEST_CASE("spin-1/2 operators are half the Pauli matrices") {
  const SpinOps s = spin_operators(0.5);
  CHECK((s.z - Mat(RVec((RVec(2) << 0.5, -0.5).finished()).asDiagonal())).norm() < 1e-15);
  CHECK((s.x - pauli(1) / 2.0).norm() < 1e-15);
  CHECK((s.y - pauli(2) / 2.0).norm() < 1e-15);
}

TEST_CASE("spin-3/2 Sz ordering is descending") {
  const SpinOps s = spin_operators(1.5);
  for (int i = 0; i < 4; ++i) CHECK(s.z(i, i).real() == doctest::Approx(1.5 - i));
}

TEST_CASE("angular momentum commutators") {
  for (double s : {0.5, 1.0, 1.5, 2.0, 2.5, 3.5}) {
    const SpinOps o = spin_operators(s);
    CHECK((o.x * o.y - o.y * o.x - I * o.z).norm() < 1e-13);
    CHECK((o.y * o.z - o.z * o.y - I * o.x).norm() < 1e-13);
    CHECK((o.z * o.x - o.x * o.z - I * o.y).norm() < 1e-13);
    CHECK(is_hermitian(o.x, 1e-14));
    CHECK(is_hermitian(o.y, 1e-14));
  }
  CHECK_THROWS_AS(spin_operators(0.7), std::invalid_argument);
}

TEST_CASE("embedding") {
  const SpinSystem sys({0.5, 1.5});
  const Mat z = sys.embed(0, spin_operators(0.5).z);
  for (int i = 0; i < 8; ++i) CHECK(z(i, i).real() == doctest::Approx(i < 4 ? 0.5 : -0.5));
  CHECK((sys.embed(1, Mat::Identity(4, 4)) - Mat::Identity(8, 8)).norm() < 1e-15);
  std::mt19937_64 rng(3);
  const Mat op = testing::random_matrix(4, rng);
  CHECK(std::abs(sys.embed(1, op).trace() - op.trace() * 2.0) < 1e-12);
  CHECK_THROWS_AS(sys.embed(1, Mat::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("partial trace") {
  std::mt19937_64 rng(5);
  const SpinSystem sys({0.5, 1.5});
  const Mat ra = random_density(2, rng), rb = random_density(4, rng);
  Mat prod(8, 8);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) prod.block(4 * i, 4 * j, 4, 4) = ra(i, j) * rb;
  CHECK((partial_trace(prod, sys, {1}) - rb).norm() < 1e-13);
  CHECK((partial_trace(prod, sys, {0}) - ra).norm() < 1e-13);

  const SpinSystem two({0.5, 0.5});
  Vec bell = Vec::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  const Mat rho = bell * bell.adjoint();
  CHECK((partial_trace(rho, two, {0}) - Mat::Identity(2, 2) / 2.0).norm() < 1e-14);
  CHECK((partial_trace(rho, two, {1}) - Mat::Identity(2, 2) / 2.0).norm() < 1e-14);

  // tracing the qubit out of the target state gives sigma~_0
  const Vec psi = chsh_psi();
  const Mat s0 = partial_trace(psi * psi.adjoint(), sys, {1});
  Eigen::Matrix4d expect;
  expect << 1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 2, 1, 0, 0, 1, 1;
  CHECK((s0 - Mat(expect.cast<cplx>()) / 4.0).norm() < 1e-14);

  // complementary traces compose to the scalar trace
  const SpinSystem three({0.5, 1.5, 0.5});
  const Mat r3 = random_density(16, rng);
  const Mat r_0 = partial_trace(r3, three, {0, 2});
  CHECK(std::abs(r_0.trace() - 1.0) < 1e-12);
  CHECK(is_hermitian(r_0, 1e-12));
  CHECK_THROWS_AS(partial_trace(r3, three, {3}), std::invalid_argument);
}

TEST_CASE("fidelity") {
  std::mt19937_64 rng(7);
  const Vec psi = random_ket(6, rng);
  CHECK(fidelity(psi * psi.adjoint(), psi) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fidelity(Mat::Identity(6, 6) / 6.0, psi) == doctest::Approx(1.0 / 6.0));
  Vec phi = random_ket(6, rng);
  phi -= psi * psi.dot(phi);
  phi.normalize();
  CHECK(std::abs(fidelity(phi * phi.adjoint(), psi)) < 1e-12);
  const Mat rho = random_density(6, rng);
  CHECK(fidelity(rho, std::exp(I * 0.7) * psi) == doctest::Approx(fidelity(rho, psi)).epsilon(1e-13));
  CHECK_THROWS_AS(fidelity(rho, Vec::Zero(5)), std::invalid_argument);
}

TEST_CASE("Pauli decomposition") {
  const Vec psi = chsh_psi();
  const PauliDecomposition d = pauli_decompose(psi * psi.adjoint());
  Eigen::Matrix4d s1;
  s1 << 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 2, 1, 1, 0, 1, 0;
  CHECK((d.sigma_tilde[1] - Mat(s1.cast<cplx>()) / 4.0).norm() < 1e-14);

  const PauliDecomposition m = pauli_decompose(Mat::Identity(8, 8) / 8.0);
  CHECK((m.sigma_tilde[0] - Mat::Identity(4, 4) / 4.0).norm() < 1e-15);
  for (int k = 1; k < 4; ++k) CHECK(m.sigma_tilde[k].norm() < 1e-15);

  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Mat rho = random_density(8, rng);
    const PauliDecomposition p = pauli_decompose(rho);
    CHECK((p.reconstruct() - rho).norm() < 1e-12);
    CHECK(std::abs(p.sigma_tilde[0].trace() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(pauli_decompose(Mat::Identity(7, 7)), std::invalid_argument);
}

TEST_CASE("state validation") {
  CHECK_THROWS_AS(QState::from_ket(Vec::Ones(3)), std::invalid_argument);
  Mat bad = Mat::Identity(2, 2);
  CHECK_THROWS_AS(QState::from_density(bad), std::invalid_argument);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(QState::from_density(bad), std::invalid_argument);
  std::mt19937_64 rng(1);
  const Mat U = haar_unitary(5, rng);
  CHECK((U.adjoint() * U - Mat::Identity(5, 5)).norm() < 1e-12);
}
