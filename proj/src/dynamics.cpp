#include "spinbell/dynamics.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace spinbell {

namespace {

constexpr double kTimeEps = 1e-9;  // ns

using RMat = Eigen::MatrixXd;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::vector<std::vector<int>> components(const Mat& H) {
  const int d = static_cast<int>(H.rows());
  UnionFind uf(d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (H(i, j) != cplx(0)) uf.unite(i, j);
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < d; ++i) groups[uf.find(i)].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(members);
  return out;
}

Mat gather(const Mat& X, const std::vector<int>& r, const std::vector<int>& c) {
  Mat s(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) s(i, j) = X(r[i], c[j]);
  return s;
}

void scatter(Mat& X, const std::vector<int>& r, const std::vector<int>& c, const Mat& s) {
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) X(r[i], c[j]) = s(i, j);
}

int largest_block(const Mat& H) {
  int m = 0;
  for (const auto& c : components(H)) m = std::max(m, static_cast<int>(c.size()));
  return m * m;
}

// exp(L tau) restricted to every pair of connected blocks of H. With elementwise dephasing
// the Lindbladian does not mix different block pairs, so this equals the full superoperator.
void apply_exact(Mat& X, const Mat& H, const RMat& G, double tau) {
  const auto comps = components(H);
  std::vector<Mat> U;
  for (const auto& c : comps) U.push_back(expm_hermitian(gather(H, c, c), tau));
  for (std::size_t p = 0; p < comps.size(); ++p)
    for (std::size_t q = p; q < comps.size(); ++q) {
      const auto &rp = comps[p], &rq = comps[q];
      Mat sub = gather(X, rp, rq);
      double gmax = 0.0;
      for (int i : rp)
        for (int j : rq) gmax = std::max(gmax, G(i, j));
      if (gmax == 0.0) {
        sub = U[p] * sub * U[q].adjoint();
      } else {
        const int np = static_cast<int>(rp.size()), nq = static_cast<int>(rq.size());
        const Mat Hp = gather(H, rp, rp), Hq = gather(H, rq, rq);
        Mat L = cplx(0, -1) * (Eigen::kroneckerProduct(Mat::Identity(nq, nq), Hp).eval() -
                               Eigen::kroneckerProduct(Hq.transpose(), Mat::Identity(np, np)).eval());
        for (int j = 0; j < nq; ++j)
          for (int i = 0; i < np; ++i) L(j * np + i, j * np + i) -= G(rp[i], rq[j]);
        const Mat E = (L * tau).exp();
        Vec v = E * Eigen::Map<const Vec>(sub.data(), sub.size());
        sub = Eigen::Map<Mat>(v.data(), np, nq);
      }
      scatter(X, rp, rq, sub);
      if (p != q) scatter(X, rq, rp, sub.adjoint());
    }
}

// Strang splitting: exact unitary steps with elementwise dephasing half steps.
void apply_split(Mat& X, const Mat& H, const RMat& G, double tau, double h) {
  const int n = std::max(1, static_cast<int>(std::ceil(tau / h - 1e-12)));
  const double dt = tau / n;
  const Mat U = expm_hermitian(H, dt);
  if (G.maxCoeff() == 0.0) {
    for (int s = 0; s < n; ++s) X = U * X * U.adjoint();
    return;
  }
  const RMat half = (-0.5 * dt * G).array().exp().matrix();
  const RMat full = half.cwiseProduct(half);
  X = X.cwiseProduct(half.cast<cplx>());
  for (int s = 0; s < n; ++s) {
    X = U * X * U.adjoint();
    X = X.cwiseProduct((s + 1 < n ? full : half).cast<cplx>());
  }
}

RMat dephasing_rates(const std::vector<RVec>& l, const std::vector<double>& rate, int d) {
  RMat G = RMat::Zero(d, d);
  for (std::size_t k = 0; k < l.size(); ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) G(i, j) += rate[k] * 0.5 * (l[k](i) - l[k](j)) * (l[k](i) - l[k](j));
  return G;
}

struct Window {
  double a, b;
  std::vector<const PulseSegment*> active;
};

std::vector<Window> windows(const PulseSequence& seq) {
  std::vector<double> t{0.0, seq.end_time()};
  for (const auto& s : seq.segments()) {
    if (s.duration() <= kTimeEps) continue;
    t.push_back(s.t_start);
    t.push_back(s.t_end);
  }
  std::sort(t.begin(), t.end());
  std::vector<double> u;
  for (double x : t)
    if (u.empty() || x - u.back() > kTimeEps) u.push_back(x);
  std::vector<Window> out;
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    Window w{u[k], u[k + 1], {}};
    for (const auto& s : seq.segments())
      if (s.duration() > kTimeEps && s.t_start <= w.a + kTimeEps && s.t_end >= w.b - kTimeEps && s.B1_G > 0.0)
        w.active.push_back(&s);
    out.push_back(std::move(w));
  }
  return out;
}

Mat frame_phase(const RVec& F, double t) {
  const int d = static_cast<int>(F.size());
  Mat P(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) P(i, j) = std::polar(1.0, -(F(i) - F(j)) * t);
  return P;
}

}  // namespace

Mat expm_hermitian(const Mat& H, double t) {
  if (!is_hermitian(H, 1e-10)) throw std::invalid_argument("expm_hermitian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
  const Vec ph = (es.eigenvalues().cast<cplx>() * cplx(0, -t)).array().exp().matrix();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

Mat expm(const Mat& A) { return A.exp(); }

Mat propagate_unitary(const std::vector<std::pair<Mat, double>>& segments) {
  if (segments.empty()) throw std::invalid_argument("propagate_unitary needs at least one segment");
  const auto d = segments.front().first.rows();
  Mat U = Mat::Identity(d, d);
  for (const auto& [H, dt] : segments) {
    if (!(dt > 0.0)) throw std::invalid_argument("segment durations must be > 0");
    if (H.rows() != d || H.cols() != d) throw std::invalid_argument("segment dimension mismatch");
    if (!is_hermitian(H, 1e-10)) throw std::invalid_argument("segment Hamiltonian is not Hermitian");
    U = expm_hermitian(H, dt) * U;
  }
  return U;
}

std::vector<JumpOperator> dephasing_jumps(const SpinSystem& system, const std::vector<std::optional<double>>& T2_ns) {
  if (static_cast<int>(T2_ns.size()) != system.size()) throw std::invalid_argument("one T2 entry per site expected");
  std::vector<JumpOperator> out;
  for (int s = 0; s < system.size(); ++s) {
    if (!T2_ns[s]) continue;
    if (!(*T2_ns[s] > 0.0)) throw std::invalid_argument("T2 must be > 0");
    out.push_back({"dephasing site " + std::to_string(s), std::sqrt(2.0) * system.site_operators(s).z, 1.0 / *T2_ns[s]});
  }
  return out;
}

const DriveOperator& LindbladModel::drive(const std::string& axis) const {
  for (const auto& d : drives)
    if (d.axis == axis) return d;
  throw std::invalid_argument("Lindblad model has no drive along axis '" + axis + "'");
}

void LindbladModel::validate() const {
  const int d = dim();
  if (d == 0) throw std::invalid_argument("empty Lindblad model");
  for (const auto& dr : drives)
    if (dr.op.rows() != d || !is_hermitian(dr.op, 1e-10)) throw std::invalid_argument("invalid drive operator " + dr.axis);
  for (const auto& j : jumps) {
    if (j.op.rows() != d || !is_hermitian(j.op, 1e-10)) throw std::invalid_argument("jump operator " + j.label + " must be Hermitian");
    if (!(j.rate >= 0.0) || !std::isfinite(j.rate)) throw std::invalid_argument("jump rate must be finite and >= 0");
  }
}

LindbladModel LindbladModel::from_hamiltonian(const HamiltonianModel& model, const std::vector<JumpOperator>& jumps) {
  LindbladModel m;
  m.basis = model.labeled_basis();
  m.energies = model.labeled_energies();
  for (const auto& d : model.drives()) m.drives.push_back({d.axis, m.basis.adjoint() * d.op * m.basis});
  for (const auto& j : jumps) m.jumps.push_back({j.label, m.basis.adjoint() * j.op * m.basis, j.rate});
  m.validate();
  return m;
}

LindbladModel LindbladModel::from_drift(const Mat& H0, const std::vector<DriveOperator>& drives,
                                        const std::vector<JumpOperator>& jumps) {
  if (!is_hermitian(H0, 1e-10)) throw std::invalid_argument("drift is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H0 + H0.adjoint()));
  LindbladModel m;
  m.basis = es.eigenvectors();
  m.energies = es.eigenvalues();
  for (const auto& d : drives) m.drives.push_back({d.axis, m.basis.adjoint() * d.op * m.basis});
  for (const auto& j : jumps) m.jumps.push_back({j.label, m.basis.adjoint() * j.op * m.basis, j.rate});
  m.validate();
  return m;
}

Mat superoperator(const Mat& H, const std::vector<JumpOperator>& jumps) {
  const auto d = H.rows();
  const Mat I = Mat::Identity(d, d);
  Mat L = cplx(0, -1) * (Eigen::kroneckerProduct(I, H).eval() - Eigen::kroneckerProduct(H.transpose(), I).eval());
  for (const auto& j : jumps) {
    const Mat LdL = j.op.adjoint() * j.op;
    L += j.rate * (Eigen::kroneckerProduct(j.op.conjugate(), j.op).eval() - 0.5 * Eigen::kroneckerProduct(I, LdL).eval() -
                   0.5 * Eigen::kroneckerProduct(LdL.transpose(), I).eval());
  }
  return L;
}

PropagationMode parse_mode(const std::string& s) {
  if (s == "lab" || s == "lab-frame") return PropagationMode::Lab;
  if (s == "rw" || s == "rotating-wave") return PropagationMode::RotatingWave;
  throw std::invalid_argument("unknown propagation mode '" + s + "' (expected lab-frame or rotating-wave)");
}

std::string to_string(PropagationMode m) { return m == PropagationMode::Lab ? "lab-frame" : "rotating-wave"; }

PhaseReference parse_phase_reference(const std::string& s) {
  if (s == "absolute") return PhaseReference::Absolute;
  if (s == "pulse-start") return PhaseReference::PulseStart;
  throw std::invalid_argument("unknown phase reference '" + s + "' (expected absolute or pulse-start)");
}

std::string to_string(PhaseReference r) { return r == PhaseReference::Absolute ? "absolute" : "pulse-start"; }

double lab_substep_limit(const LindbladModel& model, const PulseSequence& seq) {
  double w = model.energies.maxCoeff() - model.energies.minCoeff();
  for (const auto& s : seq.segments()) w = std::max(w, s.omega);
  const double fmax = w / units::two_pi;
  return fmax > 0 ? 1.0 / (20.0 * fmax) : std::numeric_limits<double>::infinity();
}

RotatingFrame rotating_frame_generator(const LindbladModel& model, const std::vector<const PulseSegment*>& active,
                                      PhaseReference ref) {
  const int d = model.dim();
  const RVec& E = model.energies;
  RotatingFrame rf;
  std::vector<const PulseSegment*> carriers, baseband;
  for (const auto* p : active) (p->omega > 0.0 ? carriers : baseband).push_back(p);
  if (!carriers.empty() && !baseband.empty())
    throw std::invalid_argument("rotating-wave window mixes carrier pulses with baseband controls");

  if (carriers.empty()) {
    // lab frame of the window: frame energies are the energies themselves
    rf.frame = E;
    rf.H = E.cast<cplx>().asDiagonal();
    for (const auto* p : baseband) rf.H += p->B1_G * units::gauss * std::cos(p->phase) * model.drive(p->axis).op;
    return rf;
  }

  const int P = static_cast<int>(carriers.size());
  std::vector<const Mat*> M;
  for (const auto* p : carriers) M.push_back(&model.drive(p->axis).op);

  struct Edge {
    int lo, hi, p;
    double det;
  };
  std::vector<Edge> edges;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double delta = E(j) - E(i);
      if (delta <= 0.0) continue;
      for (int p = 0; p < P; ++p) {
        const double w = carriers[p]->omega;
        if (std::abs(delta - w) < 0.5 * w && std::abs((*M[p])(i, j)) > 1e-12) edges.push_back({i, j, p, std::abs(delta - w)});
      }
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.det < b.det; });

  // union-find with integer ladder offsets relative to the root
  std::vector<int> parent(d);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Eigen::VectorXi> off(d, Eigen::VectorXi::Zero(P));
  std::function<int(int)> find = [&](int i) -> int {
    if (parent[i] == i) return i;
    const int r = find(parent[i]);
    if (parent[i] != r) {
      off[i] += off[parent[i]];
      parent[i] = r;
    }
    return r;
  };
  for (const auto& e : edges) {
    const int ra = find(e.lo), rb = find(e.hi);
    Eigen::VectorXi step = Eigen::VectorXi::Zero(P);
    step(e.p) = 1;
    if (ra != rb) {
      parent[rb] = ra;
      off[rb] = off[e.lo] + step - off[e.hi];
    } else if (off[e.hi] - off[e.lo] != step) {
      ++rf.dropped_edges;
    }
  }
  std::vector<int> root(d);
  for (int i = 0; i < d; ++i) root[i] = find(i);

  RVec ladder(d);
  for (int i = 0; i < d; ++i) {
    ladder(i) = 0.0;
    for (int p = 0; p < P; ++p) ladder(i) += off[i](p) * carriers[p]->omega;
  }
  std::map<int, std::pair<double, int>> mean;
  for (int i = 0; i < d; ++i) {
    auto& m = mean[root[i]];
    m.first += E(i) - ladder(i);
    m.second += 1;
  }
  rf.frame.resize(d);
  for (int i = 0; i < d; ++i) {
    const auto& m = mean[root[i]];
    rf.frame(i) = E(i) - ladder(i) - m.first / m.second;
  }

  rf.H = rf.frame.cast<cplx>().asDiagonal();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j || root[i] != root[j]) continue;
      for (int p = 0; p < P; ++p) {
        Eigen::VectorXi step = off[j] - off[i];
        bool unit = step(p) == 1;
        for (int q = 0; q < P && unit; ++q)
          if (q != p && step(q) != 0) unit = false;
        if (!unit) continue;
        double phase = carriers[p]->phase;
        // shift the detuning clock of this transition to the pulse start
        if (ref == PhaseReference::PulseStart)
          phase += (E(j) - E(i) - carriers[p]->omega) * carriers[p]->t_start;
        const cplx c = 0.5 * carriers[p]->B1_G * units::gauss * (*M[p])(i, j) * std::polar(1.0, phase);
        rf.H(i, j) += c;
        rf.H(j, i) += std::conj(c);
      }
    }
  return rf;
}

RotatingFrame rotating_frame_segment(const LindbladModel& model, const PulseSegment& pulse) {
  return rotating_frame_generator(model, {&pulse});
}

void check_propagated(const Mat& rho, double trace_tol, double pos_tol) {
  if (std::abs(rho.trace() - cplx(1.0)) > trace_tol) throw std::runtime_error("propagation lost trace");
  if (!is_hermitian(rho, 1e-8)) throw std::runtime_error("propagation lost Hermiticity");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -pos_tol) throw std::runtime_error("propagation lost positivity");
}

Mat lindblad_propagate(const LindbladModel& model, const QState& rho0, const PulseSequence& seq,
                       const PropagationConfig& cfg) {
  model.validate();
  seq.validate();
  const int d = model.dim();
  if (rho0.dim() != d) throw std::invalid_argument("initial state dimension does not match the model");
  if (!(cfg.split_step_ns > 0.0)) throw std::invalid_argument("split_step_ns must be > 0");
  for (const auto& s : seq.segments()) model.drive(s.axis);

  std::vector<double> rates;
  for (const auto& j : model.jumps) rates.push_back(j.rate);
  Mat X = rho0.density();

  if (cfg.mode == PropagationMode::RotatingWave) {
    std::vector<RVec> l;
    for (const auto& j : model.jumps) l.push_back(j.op.diagonal().real());
    const RMat G = dephasing_rates(l, rates, d);
    for (const auto& w : windows(seq)) {
      const double tau = w.b - w.a;
      if (w.active.empty()) {
        X = X.cwiseProduct((-tau * G).array().exp().matrix().cast<cplx>());
        continue;
      }
      const RotatingFrame rf = rotating_frame_generator(model, w.active, cfg.phase_reference);
      X = X.cwiseProduct(frame_phase(rf.frame, w.a));
      bool baseband = true;
      for (const auto* p : w.active) baseband = baseband && p->omega == 0.0;
      Engine eng = cfg.engine;
      if (eng == Engine::Auto) eng = (!baseband && largest_block(rf.H) <= cfg.exact_block_limit) ? Engine::Exact : Engine::Split;
      if (eng == Engine::Exact) apply_exact(X, rf.H, G, tau);
      else apply_split(X, rf.H, G, tau, cfg.split_step_ns);
      X = X.cwiseProduct(frame_phase(rf.frame, w.b).conjugate());
    }
  } else {
    if (cfg.phase_reference != PhaseReference::Absolute)
      for (const auto& sg : seq.segments())
        if (sg.omega > 0.0) throw PreconditionError("lab-frame mode drives with a single clock; use phase reference 'absolute'");
    const double limit = lab_substep_limit(model, seq);
    double h = cfg.substep_ns;
    if (h < 0.0) throw PreconditionError("substep must be > 0");
    if (h == 0.0) h = limit;
    if (h > limit * (1 + 1e-12))
      throw PreconditionError("lab-frame substep " + std::to_string(h) + " ns exceeds 1/(20 f_max) = " + std::to_string(limit) + " ns");

    // joint eigenbasis of the commuting jump operators
    Mat Q = Mat::Identity(d, d);
    std::vector<RVec> l;
    if (!model.jumps.empty()) {
      Mat mix = Mat::Zero(d, d);
      for (std::size_t k = 0; k < model.jumps.size(); ++k) mix += (1.0 + 0.6180339887 * k * k + 0.1 * k) * model.jumps[k].op;
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (mix + mix.adjoint()));
      Q = es.eigenvectors();
      for (const auto& j : model.jumps) {
        const Mat D = Q.adjoint() * j.op * Q;
        const Mat off = D - Mat(D.diagonal().asDiagonal());
        if (off.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, D.cwiseAbs().maxCoeff()))
          throw PreconditionError("lab-frame mode needs mutually commuting jump operators");
        l.push_back(D.diagonal().real());
      }
    }
    const RMat G = dephasing_rates(l, rates, d);
    const Mat H0 = Q.adjoint() * model.energies.cast<cplx>().asDiagonal() * Q;
    std::map<std::string, Mat> M;
    for (const auto& dr : model.drives) M[dr.axis] = Q.adjoint() * dr.op * Q;
    X = Q.adjoint() * X * Q;

    for (const auto& w : windows(seq)) {
      const double tau = w.b - w.a;
      bool constant = true;
      for (const auto* p : w.active) constant = constant && p->omega == 0.0;
      if (constant) {
        Mat H = H0;
        for (const auto* p : w.active) H += p->B1_G * units::gauss * std::cos(p->phase) * M[p->axis];
        apply_split(X, H, G, tau, std::min(cfg.split_step_ns, tau));
        continue;
      }
      const int n = std::max(1, static_cast<int>(std::ceil(tau / h - 1e-9)));
      const double dt = tau / n;
      const RMat half = (-0.5 * dt * G).array().exp().matrix();
      const bool decay = G.maxCoeff() > 0.0;
      for (int s = 0; s < n; ++s) {
        const double tm = w.a + (s + 0.5) * dt;
        Mat H = H0;
        for (const auto* p : w.active) H += p->B1_G * units::gauss * std::cos(p->omega * tm + p->phase) * M[p->axis];
        const Mat U = expm_hermitian(H, dt);
        if (decay) X = X.cwiseProduct(half.cast<cplx>());
        X = U * X * U.adjoint();
        if (decay) X = X.cwiseProduct(half.cast<cplx>());
      }
    }
    X = Q * X * Q.adjoint();
    // back to the interaction picture
    X = X.cwiseProduct(frame_phase(model.energies, seq.end_time()).conjugate());
  }
  X = 0.5 * (X + X.adjoint()).eval();
  check_propagated(X);
  return X;
}

}  // namespace spinbell
