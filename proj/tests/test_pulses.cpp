#include "spinbell/bell.hpp"
#include "spinbell/dynamics.hpp"
#include "spinbell/pulses.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace spinbell;
using std::numbers::pi;
using spinbell::testing::haar_unitary;

namespace {

const double kQubitTheta = 2 * std::asin(std::sqrt(2.0 / 3.0));

}  // namespace

TEST_CASE("planar rotation and phase gate matrices") {
  const Mat U = planar_rotation_matrix(4, {1, 3, 0.8, 0.3});
  CHECK((U.adjoint() * U - Mat::Identity(4, 4)).norm() < 1e-14);
  CHECK(std::abs(U(3, 1) - std::sin(0.4) * std::polar(1.0, 0.3)) < 1e-15);
  CHECK((planar_rotation_matrix(4, {0, 2, 0.0, 1.1}) - Mat::Identity(4, 4)).norm() < 1e-15);
  const Mat P = phase_gate_matrix(3, {0, 2, 0.5});
  CHECK(std::abs(P(0, 0) - std::polar(1.0, 0.5)) < 1e-15);
  CHECK(std::abs(P(2, 2) - std::polar(1.0, -0.5)) < 1e-15);
  CHECK_THROWS_AS(planar_rotation_matrix(4, {2, 2, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("compiled rotation reproduces the gate on an isolated two-level system") {
  const SpinOps so = spin_operators(0.5);
  const HamiltonianModel q(SpinSystem({0.5}), 100.0 * so.z, {{"y", 1e3 * so.y}});
  const LindbladModel m = LindbladModel::from_hamiltonian(q, {});
  PropagationConfig lab;
  lab.mode = PropagationMode::Lab;
  lab.phase_reference = PhaseReference::Absolute;
  Vec plus(2);
  plus << 1.0, cplx(0.6, 0.8);
  plus /= std::sqrt(2.0);
  for (int x : {0, 1})
    for (double theta : {pi / 2, pi, 2 * pi / 3, -pi / 3})
      for (double phi : {0.0, pi / 3, pi}) {
        const PlanarRotation rot{x, 1 - x, theta, phi};
        PulseSequence seq;
        const PulseSegment seg = compile_rotation(q, rot, 10.0);
        seq.append(seg, seg.duration());
        const Mat U = planar_rotation_matrix(2, rot);
        // basis inputs fix the moduli, the superposition fixes the relative phase
        for (const Vec& in : {Vec(Vec::Unit(2, 0)), Vec(Vec::Unit(2, 1)), plus}) {
          const Vec out = U * in;
          const Mat expect = out * out.adjoint();
          CHECK((lindblad_propagate(m, QState::from_ket(in), seq) - expect).norm() < 1e-3);
          CHECK((lindblad_propagate(m, QState::from_ket(in), seq, lab) - expect).norm() < 2e-2);
        }
      }
}

TEST_CASE("compile_rotation durations") {
  const HamiltonianModel d = build_dimer();
  const PlanarRotation qubit{dimer_label(true, -0.5), dimer_label(false, -0.5), kQubitTheta, pi};
  for (double b : {15.0, 20.0}) {
    const double t = compile_rotation(d, qubit, b).duration();
    CHECK(t >= 7.0);
    CHECK(t <= 14.0);
  }
  // linear in 1/B1
  const PlanarRotation nuc{dimer_label(true, 0.5), dimer_label(true, -0.5), pi / 2, 0.0};
  for (const auto& r : {qubit, nuc}) CHECK(compile_rotation(d, r, 12.5).duration() == doctest::Approx(2 * compile_rotation(d, r, 25.0).duration()).epsilon(1e-14));
  const Protocol a = prep_chsh_state(d, {25.0}), b = prep_chsh_state(d, {12.5});
  for (std::size_t k = 0; k < a.sequence.segments().size(); ++k)
    CHECK(b.sequence.segments()[k].duration() == doctest::Approx(2 * a.sequence.segments()[k].duration()).epsilon(1e-14));

  CHECK(compile_rotation(d, {qubit.x, qubit.y, 0.0, 0.0}, 20.0).duration() == 0.0);
  CHECK_THROWS_AS(compile_rotation(d, qubit, 0.0), std::invalid_argument);
  // forbidden: Delta m_I = 2 inside one block
  CHECK_THROWS_AS(compile_rotation(build_dimer([] {
                                     DimerParams p;
                                     p.A_perp_MHz = p.p_MHz = 0.0;
                                     return p;
                                   }()),
                                   {dimer_label(true, 1.5), dimer_label(true, -0.5), pi, 0.0}, 20.0),
                  std::invalid_argument);
}

TEST_CASE("five-pulse dimer preparation") {
  const HamiltonianModel d = build_dimer();
  const Protocol p = prep_chsh_state(d, {25.0});
  CHECK(p.sequence.segments().size() == 5);
  const Vec exact = p.exact_unitary * p.initial;
  CHECK(std::norm(p.target.dot(exact)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.sequence.end_time() == doctest::Approx(714.4).epsilon(0.05));

  const LindbladModel m = LindbladModel::from_hamiltonian(d, {});
  const Mat rho = lindblad_propagate(m, QState::from_ket(p.initial), p.sequence);
  CHECK(fidelity(rho, p.target) >= 0.98);
  CHECK_THROWS_AS(prep_chsh_state(d, {25.0, 25.0}), std::invalid_argument);
}

TEST_CASE("fifteen-pulse trimer preparation") {
  const HamiltonianModel t = build_trimer();
  const Protocol p = prep_cglmp_state(t, 70.0, 20.0);
  CHECK(p.sequence.segments().size() == 15);
  CHECK(std::norm(p.target.dot(p.exact_unitary * p.initial)) == doctest::Approx(1.0).epsilon(1e-12));

  const SpinSystem& sys = t.system();
  auto ancilla_down = [&](const Mat& rho) {
    double s = 0.0;
    for (int i = 0; i < t.dim(); ++i)
      if (sys.m_of(i)[1] < 0) s += rho(i, i).real();
    return s;
  };
  const Mat clean = lindblad_propagate(LindbladModel::from_hamiltonian(t, {}), QState::from_ket(p.initial), p.sequence);
  // off-resonant ancilla crosstalk of the W pulses costs ~2e-3
  CHECK(ancilla_down(clean) > 0.997);

  const LindbladModel noisy = LindbladModel::from_hamiltonian(t, dephasing_jumps(sys, {30000.0, 1000.0, 30000.0}));
  const Mat rho = lindblad_propagate(noisy, QState::from_ket(p.initial), p.sequence);
  CHECK(fidelity(rho, p.target) == doctest::Approx(0.9739).epsilon(0.03 / 0.9739));
}

TEST_CASE("controlled-Z round trip") {
  const HamiltonianModel t = build_trimer();
  const LindbladModel m = LindbladModel::from_hamiltonian(t, {});
  const double mq[4] = {1.5, 0.5, -0.5, -1.5};
  for (int mu = 0; mu < 4; ++mu) {
    const ControlledZSpec cz{mu, 2};
    const Mat W = controlled_z_matrix(t, cz);
    const int driven = trimer_label(t, mq[mu], -0.5, mq[2]);
    PulseSequence seq;
    const PulseSegment seg = compile_controlled_z(t, cz, 20.0);
    seq.append(seg, seg.duration());
    int flipped = 0;
    double spectator = 1.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int k = trimer_label(t, mq[a], -0.5, mq[b]);
        if (W(k, k).real() < 0) ++flipped;
        Vec e = Vec::Zero(t.dim());
        e(k) = 1.0;
        const double back = lindblad_propagate(m, QState::from_ket(e), seq)(k, k).real();
        if (k == driven) {
          CHECK(back > 0.999);
        } else {
          spectator = std::min(spectator, back);
        }
      }
    CHECK(flipped == 1);
    CHECK(W(driven, driven).real() == -1.0);
    // neighbouring ancilla contexts sit ~1.5 rad/ns away against a 0.25 rad/ns Rabi rate
    CHECK(spectator > 0.97);
  }
  CHECK_THROWS_AS(controlled_z_matrix(t, {4, 0}), std::invalid_argument);
}

TEST_CASE("SU(4) decomposition") {
  const SU4Decomposition id = decompose_su4(Mat::Identity(4, 4));
  for (const auto& r : id.rotations) CHECK(std::abs(std::sin(r.theta / 2)) < 1e-12);
  for (double a : id.alpha) CHECK(std::abs(std::sin(a)) < 1e-12);

  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Mat W = haar_unitary(4, rng);
    const Mat R = recompose_su4(decompose_su4(W));
    // equality up to a global phase
    const cplx ph = (R.adjoint() * W).trace() / 4.0;
    worst = std::max(worst, (R * (ph / std::abs(ph)) - W).norm());
  }
  CHECK(worst < 1e-9);

  // first measurement unitary of Alice; invariants |sin|, |cos| of theta/2 and the (2,3) phase
  const SU4Decomposition a1 = decompose_su4(cglmp_unitaries().A[0]);
  const double expect[6] = {pi / 4, std::atan(1 / std::sqrt(2.0)), std::atan(1 / std::sqrt(3.0)), 0.91174,
                            std::atan(1 / std::sqrt(2.0)), pi / 4};
  for (int k = 0; k < 6; ++k) CHECK(std::abs(std::sin(a1.rotations[k].theta / 2)) == doctest::Approx(std::sin(expect[k])).epsilon(1e-4));
  CHECK(a1.rotations[3].x == 1);
  CHECK(a1.rotations[3].y == 2);
  CHECK(a1.rotations[3].phi == doctest::Approx(-0.46365).epsilon(1e-4));

  Mat bad = Mat::Identity(4, 4);
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(decompose_su4(bad), std::invalid_argument);
}

TEST_CASE("physical programs and measurement sequences") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const Mat W = haar_unitary(4, rng);
    const SU4Decomposition dec = decompose_su4(W);
    for (auto mode : {PhaseParallel::P12WithP34, PhaseParallel::P34WithU12}) {
      const Mat U = program_unitary(physical_program(dec, mode));
      const cplx ph = (U.adjoint() * W).trace() / 4.0;
      CHECK(std::abs(std::abs(ph) - 1.0) < 1e-9);
    }
  }

  const HamiltonianModel tri = build_trimer();
  const auto m20 = cglmp_measurement_sequences(tri, 20.0), m10 = cglmp_measurement_sequences(tri, 10.0);
  REQUIRE(m20.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(m10[k].sequence.end_time() == doctest::Approx(2 * m20[k].sequence.end_time()).epsilon(1e-12));
    CHECK((m20[k].exact_unitary.adjoint() * m20[k].exact_unitary - Mat::Identity(32, 32)).norm() < 1e-10);
  }
  // B dominates the timing
  CHECK(m20[0].sequence.end_time() == doctest::Approx(m20[2].sequence.end_time()));
  CHECK(m20[1].sequence.end_time() == doctest::Approx(m20[3].sequence.end_time()));
}

TEST_CASE("sequence serialization") {
  const Protocol p = prep_chsh_state(build_dimer(), {20.0, 25.0, 30.0, 35.0, 40.0});
  const PulseSequence back = PulseSequence::from_json(p.sequence.to_json());
  REQUIRE(back.segments().size() == p.sequence.segments().size());
  for (std::size_t k = 0; k < back.segments().size(); ++k) {
    const auto &a = back.segments()[k], &b = p.sequence.segments()[k];
    CHECK(a.B1_G == b.B1_G);
    CHECK(a.omega == b.omega);
    CHECK(a.phase == b.phase);
    CHECK(a.t_start == b.t_start);
    CHECK(a.t_end == b.t_end);
    CHECK(a.label == b.label);
  }
  CHECK(back.end_time() == p.sequence.end_time());
  auto j = p.sequence.to_json();
  j["segments"][0]["B1_G"] = -1.0;
  CHECK_THROWS(PulseSequence::from_json(j));
}
