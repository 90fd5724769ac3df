#include "spinbell/bell.hpp"
#include "spinbell/pulses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spinbell {

using std::numbers::pi;

namespace {

constexpr int kPairs[6][2] = {{2, 3}, {1, 3}, {0, 3}, {1, 2}, {0, 2}, {0, 1}};

PlanarRotation inverse(PlanarRotation r) {
  r.theta = -r.theta;
  return r;
}

double wrap(double a) {
  a = std::remainder(a, 2 * pi);
  return a <= -pi ? a + 2 * pi : a;
}

PlanarRotation swap_plus(int x, int y) { return {x, y, pi, 0.0}; }
PlanarRotation swap_minus(int x, int y) { return {x, y, pi, pi}; }

// Read an adjacent-level planar rotation off a 4x4 matrix that acts on {p, q}.
PlanarRotation read_rotation(const Mat& R, int p, int q) {
  const int x = std::min(p, q), y = std::max(p, q);
  if (y - x != 1) throw std::logic_error("swap network produced a non-adjacent rotation");
  PlanarRotation r{x, y, 2 * std::atan2(std::abs(R(y, x)), R(x, x).real()), 0.0};
  if (std::abs(R(y, x)) > 1e-14) r.phi = std::arg(R(y, x));
  if ((planar_rotation_matrix(4, r) - R).cwiseAbs().maxCoeff() > 1e-9)
    throw std::logic_error("conjugated rotation is not a planar rotation");
  return r;
}

int image_of(const Mat& S, int level) {
  Eigen::Index i;
  S.col(level).cwiseAbs().maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

SU4Decomposition decompose_su4(const Mat& W) {
  if (W.rows() != 4 || W.cols() != 4) throw std::invalid_argument("decompose_su4 needs a 4x4 matrix");
  if ((W.adjoint() * W - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("decompose_su4: input is not unitary");
  SU4Decomposition dec;
  Mat V = W;
  for (int k = 0; k < 6; ++k) {
    const int x = kPairs[k][0], y = kPairs[k][1];
    // zero (y, x): V_yx cos + V_yy sin e^{i beta} = 0
    const cplx a = V(y, x), b = V(y, y);
    PlanarRotation r{x, y, 2 * std::atan2(std::abs(a), std::abs(b)), 0.0};
    if (std::abs(a) > 1e-15) r.phi = std::arg(-a * std::conj(b));
    if (std::abs(b) < 1e-15) r.phi = 0.0;
    dec.rotations[k] = r;
    V = V * planar_rotation_matrix(4, r);
  }
  // V = e^{i lambda} diag(e^{i a1}, e^{i(a2 - a1)}, e^{i(a3 - a2)}, e^{-i a3})
  double lambda = std::arg(V(0, 0) * V(1, 1) * V(2, 2) * V(3, 3)) / 4;
  lambda = std::fmod(lambda, pi / 2);
  if (lambda < 0) lambda += pi / 2;
  dec.lambda = lambda;
  const cplx ph = std::polar(1.0, -lambda);
  dec.alpha[0] = wrap(std::arg(V(0, 0) * ph));
  dec.alpha[1] = wrap(std::arg(V(1, 1) * ph) + dec.alpha[0]);
  dec.alpha[2] = wrap(std::arg(V(2, 2) * ph) + dec.alpha[1]);
  return dec;
}

Mat recompose_su4(const SU4Decomposition& dec) {
  Mat W = std::polar(1.0, dec.lambda) * phase_gate_matrix(4, {0, 1, dec.alpha[0]}) * phase_gate_matrix(4, {1, 2, dec.alpha[1]}) *
          phase_gate_matrix(4, {2, 3, dec.alpha[2]});
  for (int k = 5; k >= 0; --k) W = W * planar_rotation_matrix(4, inverse(dec.rotations[k]));
  return W;
}

std::vector<PhysicalBlock> physical_program(const SU4Decomposition& dec, PhaseParallel mode) {
  // time order: U34^-1, pi34-, U24^-1, pi23-, U14^-1, pi23+, pi34+, U23^-1, pi12-, U13^-1, pi12+, U12^-1
  struct Item {
    bool logical;
    int index;          // into dec.rotations when logical
    PlanarRotation sw;  // swap otherwise
    const char* label;
  };
  const std::vector<Item> items = {
      {true, 0, {}, "U34^-1"},          {false, 0, swap_minus(2, 3), "pi34-"}, {true, 1, {}, "U24^-1"},
      {false, 0, swap_minus(1, 2), "pi23-"}, {true, 2, {}, "U14^-1"},          {false, 0, swap_plus(1, 2), "pi23+"},
      {false, 0, swap_plus(2, 3), "pi34+"},  {true, 3, {}, "U23^-1"},          {false, 0, swap_minus(0, 1), "pi12-"},
      {true, 4, {}, "U13^-1"},          {false, 0, swap_plus(0, 1), "pi12+"},  {true, 5, {}, "U12^-1"},
  };
  std::vector<PhysicalStep> steps;
  Mat S = Mat::Identity(4, 4);
  for (const auto& it : items) {
    if (!it.logical) {
      steps.push_back({it.sw, it.label});
      S = planar_rotation_matrix(4, it.sw) * S;
      continue;
    }
    const PlanarRotation L = inverse(dec.rotations[it.index]);
    const Mat R = S * planar_rotation_matrix(4, L) * S.adjoint();
    steps.push_back({read_rotation(R, image_of(S, L.x), image_of(S, L.y)), it.label});
  }
  if ((S - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() > 1e-12) throw std::logic_error("swap network does not close");

  auto phase_pulses = [&](int k) {
    // P(alpha) = U(pi, pi - alpha) U(pi, 0)
    const int x = k, y = k + 1;
    const std::string name = "P" + std::to_string(x + 1) + std::to_string(y + 1);
    return std::vector<PhysicalStep>{{{x, y, pi, 0.0}, name + "a"}, {{x, y, pi, wrap(pi - dec.alpha[k])}, name + "b"}};
  };

  std::vector<PhysicalBlock> out;
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) out.push_back({{{steps[k]}}});
  const PhysicalStep last = steps.back();
  if (mode == PhaseParallel::P12WithP34) {
    out.push_back({{{last}}});
    out.push_back({{phase_pulses(2), phase_pulses(0)}});
    out.push_back({{phase_pulses(1)}});
  } else {
    out.push_back({{{last}, phase_pulses(2)}});
    out.push_back({{phase_pulses(1)}});
    out.push_back({{phase_pulses(0)}});
  }
  return out;
}

Mat program_unitary(const std::vector<PhysicalBlock>& program) {
  Mat U = Mat::Identity(4, 4);
  for (const auto& b : program)
    for (const auto& lane : b.lanes)
      for (const auto& s : lane) U = planar_rotation_matrix(4, s.rot) * U;
  return U;
}

namespace {

// Places one qudit track starting at t = 0; returns its end time.
double place_track(PulseSequence& seq, const HamiltonianModel& trimer, int site, const std::vector<PhysicalBlock>& prog,
                   double B1_G, const std::string& prefix) {
  double t = 0.0;
  for (const auto& b : prog) {
    double end = t;
    for (const auto& lane : b.lanes) {
      double tl = t;
      for (const auto& s : lane) {
        PulseSegment seg = compile_qudit_rotation(trimer, site, s.rot, B1_G, prefix + s.label);
        const double dur = seg.duration();
        seg.t_start = tl;
        seg.t_end = tl + dur;
        seg.parallel_group = 0;
        tl += dur;
        if (dur > 0) seq.place(seg);
      }
      end = std::max(end, tl);
    }
    t = end;
  }
  return t;
}

}  // namespace

std::vector<MeasurementProtocol> cglmp_measurement_sequences(const HamiltonianModel& trimer, double B1_G) {
  const CGLMPUnitaries u = cglmp_unitaries();
  std::vector<MeasurementProtocol> out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      MeasurementProtocol m;
      m.name = "A" + std::to_string(i + 1) + "B" + std::to_string(j + 1);
      const auto progA = physical_program(decompose_su4(u.A[i]), i == 0 ? PhaseParallel::P12WithP34 : PhaseParallel::P34WithU12);
      const auto progB = physical_program(decompose_su4(u.B[j]), PhaseParallel::P34WithU12);
      const double tA = place_track(m.sequence, trimer, 0, progA, B1_G, "A: ");
      const double tB = place_track(m.sequence, trimer, 2, progB, B1_G, "B: ");
      m.sequence.delay(std::max(tA, tB) - m.sequence.end_time());
      m.exact_unitary = embed_qudit_gate(trimer, 0, u.A[i]) * embed_qudit_gate(trimer, 2, u.B[j]);
      out.push_back(std::move(m));
    }
  return out;
}

}  // namespace spinbell
