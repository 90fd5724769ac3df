#include "spinbell/pulses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spinbell {

using std::numbers::pi;

namespace {

double wrap_phase(double p) {
  p = std::remainder(p, 2 * pi);
  return p <= -pi ? p + 2 * pi : p;
}

void check_pair(int dim, int x, int y) {
  if (x == y) throw std::invalid_argument("rotation levels must differ");
  if (x < 0 || y < 0 || x >= dim || y >= dim) throw std::invalid_argument("rotation level out of range");
}

}  // namespace

Mat planar_rotation_matrix(int dim, const PlanarRotation& r) {
  check_pair(dim, r.x, r.y);
  Mat U = Mat::Identity(dim, dim);
  const double c = std::cos(r.theta / 2), s = std::sin(r.theta / 2);
  U(r.x, r.x) = c;
  U(r.y, r.y) = c;
  U(r.y, r.x) = s * std::polar(1.0, r.phi);
  U(r.x, r.y) = -s * std::polar(1.0, -r.phi);
  return U;
}

Mat phase_gate_matrix(int dim, const PhaseGate& p) {
  check_pair(dim, p.x, p.y);
  Mat P = Mat::Identity(dim, dim);
  P(p.x, p.x) = std::polar(1.0, p.alpha);
  P(p.y, p.y) = std::polar(1.0, -p.alpha);
  return P;
}

ResonantLine resonant_line(const HamiltonianModel& model, int a, int b, const std::string& axis) {
  const Transition t = transition(model, a, b, axis);
  ResonantLine line;
  if (t.omega >= 0) {
    line = {a, b, t.omega, t.element};
  } else {
    line = {b, a, -t.omega, std::conj(t.element)};
  }
  return line;
}

ResonantLine average_lines(const std::vector<ResonantLine>& lines) {
  if (lines.empty()) throw std::invalid_argument("average_lines: no lines");
  ResonantLine out = lines.front();
  out.omega = 0.0;
  out.element = 0.0;
  for (const auto& l : lines) {
    out.omega += l.omega;
    out.element += l.element;
  }
  out.omega /= lines.size();
  out.element /= static_cast<double>(lines.size());
  return out;
}

PulseSegment compile_line(const ResonantLine& line, bool x_is_upper, double theta, double phi, double B1_G,
                          const std::string& axis, const std::string& label) {
  if (!(B1_G > 0.0) || !std::isfinite(B1_G)) throw std::invalid_argument("pulse amplitude must be > 0");
  const double m = std::abs(line.element);
  if (m < 1e-9) throw std::invalid_argument("forbidden transition: zero drive matrix element for '" + label + "'");
  if (theta < 0) {
    theta = -theta;
    phi += pi;
  }
  // express the gate with x on the lower level
  if (x_is_upper) phi = pi - phi;
  PulseSegment seg;
  seg.B1_G = B1_G;
  seg.omega = line.omega;
  seg.phase = wrap_phase(-phi - pi / 2 - std::arg(line.element));
  seg.axis = axis;
  seg.label = label;
  seg.t_start = 0.0;
  seg.t_end = theta / (B1_G * units::gauss * m);
  return seg;
}

PulseSegment compile_rotation(const HamiltonianModel& model, const PlanarRotation& rot, double B1_G,
                              const std::string& axis) {
  check_pair(model.dim(), rot.x, rot.y);
  const ResonantLine line = resonant_line(model, rot.x, rot.y, axis);
  return compile_line(line, line.upper == rot.x, rot.theta, rot.phi, B1_G, axis,
                      "U(" + std::to_string(rot.x) + "," + std::to_string(rot.y) + ")");
}

namespace {

void append_pulse(Protocol& p, const PulseSegment& seg, const Mat& gate) {
  p.sequence.append(seg, seg.duration());
  p.exact_unitary = gate * p.exact_unitary;
  p.steps.push_back(seg.label);
}

}  // namespace

int dimer_label(bool electron_up, double m_nuc) {
  const double k = 2.5 - m_nuc;
  if (k < 0 || k > 5 || std::abs(k - std::round(k)) > 1e-9) throw std::invalid_argument("nuclear m out of range");
  return (electron_up ? 0 : 6) + static_cast<int>(std::round(k));
}

Protocol prep_chsh_state(const HamiltonianModel& dimer, const std::vector<double>& B1_G) {
  if (dimer.dim() != 12) throw std::invalid_argument("prep_chsh_state needs the 12-level dimer model");
  if (B1_G.size() != 1 && B1_G.size() != 5) throw std::invalid_argument("B1 schedule needs 1 or 5 amplitudes");
  struct Row {
    bool up_f;
    double m_f;
    bool up_i;
    double m_i;
    double theta, phi;
    const char* label;
  };
  const Row rows[5] = {
      {false, -1.5, false, -2.5, pi, pi, "down: -5/2 -> -3/2"},
      {false, -0.5, false, -1.5, 2 * pi / 3, pi, "down: -3/2 -> -1/2"},
      {true, -0.5, false, -0.5, 2 * std::asin(std::sqrt(2.0 / 3.0)), pi, "qubit at -1/2"},
      {true, 0.5, true, -0.5, pi / 2, 0.0, "up: -1/2 -> +1/2"},
      {true, 1.5, true, 0.5, pi, 0.0, "up: +1/2 -> +3/2"},
  };
  Protocol p;
  p.exact_unitary = Mat::Identity(12, 12);
  for (int k = 0; k < 5; ++k) {
    const auto& r = rows[k];
    const PlanarRotation rot{dimer_label(r.up_f, r.m_f), dimer_label(r.up_i, r.m_i), r.theta, r.phi};
    PulseSegment seg = compile_rotation(dimer, rot, B1_G.size() == 1 ? B1_G[0] : B1_G[k]);
    seg.label = r.label;
    append_pulse(p, seg, planar_rotation_matrix(12, rot));
  }
  p.initial = Vec::Zero(12);
  p.initial(dimer_label(false, -2.5)) = 1.0;
  p.target = Vec::Zero(12);
  for (auto [up, m] : {std::pair{true, 1.5}, {true, -0.5}, {false, -0.5}, {false, -1.5}}) p.target(dimer_label(up, m)) = 0.5;
  return p;
}

int trimer_label(const HamiltonianModel& trimer, double m1, double m_anc, double m3) {
  return trimer.system().index_of({m1, m_anc, m3});
}

namespace {

constexpr double kQuditM[4] = {1.5, 0.5, -0.5, -1.5};

void check_trimer(const HamiltonianModel& t) {
  const auto& s = t.system().spins();
  if (s.size() != 3 || s[0] != 1.5 || s[1] != 0.5 || s[2] != 1.5) throw std::invalid_argument("expected the (3/2, 1/2, 3/2) trimer");
}

void check_level(int l) {
  if (l < 0 || l > 3) throw std::invalid_argument("qudit level must be 0..3");
}

int site_label(const HamiltonianModel& t, int site, int level, int other_level, double m_anc) {
  const double m = kQuditM[level], o = kQuditM[other_level];
  return site == 0 ? trimer_label(t, m, m_anc, o) : trimer_label(t, o, m_anc, m);
}

ResonantLine qudit_line(const HamiltonianModel& t, int site, int x, int y, std::optional<int> context) {
  std::vector<ResonantLine> lines;
  for (int o = 0; o < 4; ++o) {
    if (context && *context != o) continue;
    lines.push_back(resonant_line(t, site_label(t, site, x, o, -0.5), site_label(t, site, y, o, -0.5)));
  }
  return average_lines(lines);
}

PulseSegment qudit_pulse(const HamiltonianModel& t, int site, const PlanarRotation& r, double B1_G, std::optional<int> context,
                         const std::string& label) {
  check_trimer(t);
  if (site != 0 && site != 2) throw std::invalid_argument("qudit site must be 0 or 2");
  check_level(r.x);
  check_level(r.y);
  const ResonantLine line = qudit_line(t, site, r.x, r.y, context);
  const int xl = site_label(t, site, r.x, context.value_or(0), -0.5);
  return compile_line(line, line.upper == xl, r.theta, r.phi, B1_G, "y", label);
}

}  // namespace

PulseSegment compile_qudit_rotation(const HamiltonianModel& trimer, int site, const PlanarRotation& r, double B1_G,
                                    const std::string& label) {
  return qudit_pulse(trimer, site, r, B1_G, std::nullopt, label);
}

Mat embed_qudit_gate(const HamiltonianModel& trimer, int site, const Mat& g4) {
  check_trimer(trimer);
  if (g4.rows() != 4 || g4.cols() != 4) throw std::invalid_argument("qudit gate must be 4x4");
  return trimer.system().embed(site, g4);
}

Mat controlled_z_matrix(const HamiltonianModel& trimer, const ControlledZSpec& cz) {
  check_trimer(trimer);
  check_level(cz.mu);
  check_level(cz.nu);
  Mat U = Mat::Identity(trimer.dim(), trimer.dim());
  U(trimer_label(trimer, kQuditM[cz.mu], -0.5, kQuditM[cz.nu]), trimer_label(trimer, kQuditM[cz.mu], -0.5, kQuditM[cz.nu])) = -1.0;
  U(trimer_label(trimer, kQuditM[cz.mu], 0.5, kQuditM[cz.nu]), trimer_label(trimer, kQuditM[cz.mu], 0.5, kQuditM[cz.nu])) = -1.0;
  return U;
}

PulseSegment compile_controlled_z(const HamiltonianModel& trimer, const ControlledZSpec& cz, double B1_G) {
  check_trimer(trimer);
  check_level(cz.mu);
  check_level(cz.nu);
  const int g = trimer_label(trimer, kQuditM[cz.mu], -0.5, kQuditM[cz.nu]);
  const int e = trimer_label(trimer, kQuditM[cz.mu], 0.5, kQuditM[cz.nu]);
  const ResonantLine line = resonant_line(trimer, e, g);
  return compile_line(line, line.upper == e, 2 * pi, 0.0, B1_G, "y",
                      "W(" + std::to_string(cz.mu + 1) + "," + std::to_string(cz.nu + 1) + ")");
}

Protocol prep_cglmp_state(const HamiltonianModel& trimer, double B1_group1_G, double B1_group2_G) {
  check_trimer(trimer);
  const int d = trimer.dim();
  Protocol p;
  p.exact_unitary = Mat::Identity(d, d);
  // levels: 0 = +3/2, 1 = +1/2, 2 = -1/2, 3 = -3/2
  auto q1 = [&](int x, int y, double th, double ph, const std::string& label) {
    const PlanarRotation r{x, y, th, ph};
    // the second qudit sits in -3/2 while the first is rotated
    append_pulse(p, qudit_pulse(trimer, 0, r, B1_group2_G, 3, label), embed_qudit_gate(trimer, 0, planar_rotation_matrix(4, r)));
  };
  auto q3 = [&](int x, int y, double th, double ph, double B1, std::optional<int> ctx, const std::string& label) {
    const PlanarRotation r{x, y, th, ph};
    append_pulse(p, qudit_pulse(trimer, 2, r, B1, ctx, label), embed_qudit_gate(trimer, 2, planar_rotation_matrix(4, r)));
  };
  auto w = [&](int mu, int nu) {
    const ControlledZSpec cz{mu, nu};
    append_pulse(p, compile_controlled_z(trimer, cz, B1_group2_G), controlled_z_matrix(trimer, cz));
  };

  q1(2, 3, 2 * pi / 3, pi, "Q1 -3/2 -> -1/2");
  q1(1, 2, 2 * std::asin(std::sqrt(2.0 / 3.0)), pi, "Q1 -1/2 -> +1/2");
  q1(0, 1, pi / 2, pi, "Q1 +1/2 -> +3/2");

  const double g1 = B1_group1_G, g2 = B1_group2_G;
  q3(2, 3, pi / 2, pi, g1, std::nullopt, "Q2 -3/2 -> -1/2");
  w(0, 2);
  q3(2, 3, pi / 2, 0.0, g1, std::nullopt, "Q2 -3/2 -> -1/2");
  q3(1, 2, pi, 0.0, g2, 0, "Q2 -1/2 -> +1/2");
  q3(0, 1, pi, pi, g2, 0, "Q2 +1/2 -> +3/2");

  q3(2, 3, pi / 2, pi, g1, std::nullopt, "Q2 -3/2 -> -1/2");
  w(1, 2);
  q3(2, 3, pi / 2, 0.0, g1, std::nullopt, "Q2 -3/2 -> -1/2");
  q3(1, 2, pi, 0.0, g2, 1, "Q2 -1/2 -> +1/2");

  // last block has no pi pulse after it to absorb the -1 the controlled phase leaves on its branch,
  // so the two half pulses swap phases
  q3(2, 3, pi / 2, 0.0, g1, std::nullopt, "Q2 -3/2 -> -1/2");
  w(2, 2);
  q3(2, 3, pi / 2, pi, g1, std::nullopt, "Q2 -3/2 -> -1/2");

  p.initial = Vec::Zero(d);
  p.initial(trimer_label(trimer, -1.5, -0.5, -1.5)) = 1.0;
  p.target = Vec::Zero(d);
  for (double m : kQuditM) p.target(trimer_label(trimer, m, -0.5, m)) = 0.5;
  return p;
}

}  // namespace spinbell
