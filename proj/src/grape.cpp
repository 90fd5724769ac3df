#include "spinbell/grape.hpp"

#include "spinbell/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace spinbell {

namespace {

struct SegmentEig {
  Mat W;
  RVec lam;
  Mat U;
};

SegmentEig segment_eig(const GrapeProblem& p, const Amplitudes& c, int j) {
  Mat H = p.H0;
  for (std::size_t k = 0; k < p.controls.size(); ++k) H += c(j, k) * units::gauss * p.controls[k];
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
  SegmentEig s{es.eigenvectors(), es.eigenvalues(), Mat()};
  const Vec ph = (s.lam.cast<cplx>() * cplx(0, -p.dt())).array().exp().matrix();
  s.U = s.W * ph.asDiagonal() * s.W.adjoint();
  return s;
}

// Y such that F = |Tr(Y U)|^2 / d_sub^2
Mat overlap_operator(const GrapeProblem& p) {
  const int d = p.dim();
  Mat Ut = Mat::Zero(d, d);
  for (std::size_t a = 0; a < p.subspace.size(); ++a)
    for (std::size_t b = 0; b < p.subspace.size(); ++b) Ut(p.subspace[a], p.subspace[b]) = p.target(a, b);
  Mat Y = Ut.adjoint();
  if (p.interaction_picture) Y = Y * expm_hermitian(p.H0, -p.T);
  return Y;
}

void check_shape(const GrapeProblem& p, const Amplitudes& c) {
  if (c.rows() != p.N || c.cols() != static_cast<Eigen::Index>(p.controls.size()))
    throw std::invalid_argument("amplitude array must be N x K");
}

void clip(const GrapeProblem& p, Amplitudes& c) {
  for (Eigen::Index k = 0; k < c.cols(); ++k)
    c.col(k) = c.col(k).cwiseMax(p.bounds[k].first).cwiseMin(p.bounds[k].second);
}

}  // namespace

void GrapeProblem::validate() const {
  if (N < 1) throw std::invalid_argument("GRAPE needs N >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("GRAPE needs T > 0");
  if (!is_hermitian(H0, 1e-10)) throw std::invalid_argument("GRAPE drift is not Hermitian");
  if (controls.empty()) throw std::invalid_argument("GRAPE needs at least one control");
  if (bounds.size() != controls.size()) throw std::invalid_argument("one bound pair per control expected");
  for (const auto& h : controls)
    if (h.rows() != H0.rows() || !is_hermitian(h, 1e-10)) throw std::invalid_argument("invalid control operator");
  for (const auto& [lo, hi] : bounds)
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw std::invalid_argument("control bounds must be finite with lo <= hi");
  const auto n = static_cast<Eigen::Index>(subspace.size());
  if (n == 0 || target.rows() != n || target.cols() != n) throw std::invalid_argument("target does not match the subspace");
  for (int s : subspace)
    if (s < 0 || s >= dim()) throw std::invalid_argument("subspace index out of range");
  if ((target.adjoint() * target - Mat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("GRAPE target is not unitary");
}

GrapeForward grape_forward(const GrapeProblem& p, const Amplitudes& c) {
  p.validate();
  check_shape(p, c);
  GrapeForward f;
  f.U = Mat::Identity(p.dim(), p.dim());
  f.segments.reserve(p.N);
  for (int j = 0; j < p.N; ++j) {
    f.segments.push_back(segment_eig(p, c, j).U);
    f.U = f.segments.back() * f.U;
  }
  return f;
}

double grape_fidelity(const Mat& U, const GrapeProblem& p) {
  if (U.rows() != p.dim()) throw std::invalid_argument("propagator dimension mismatch");
  const double d = static_cast<double>(p.subspace.size());
  return std::norm((overlap_operator(p) * U).trace()) / (d * d);
}

Amplitudes grape_gradient(const GrapeProblem& p, const Amplitudes& c, double* fidelity) {
  p.validate();
  check_shape(p, c);
  const int n = p.dim(), K = static_cast<int>(p.controls.size());
  const double dt = p.dt();
  std::vector<SegmentEig> seg;
  seg.reserve(p.N);
  for (int j = 0; j < p.N; ++j) seg.push_back(segment_eig(p, c, j));
  // forward products fw[j] = U_{j-1} ... U_0
  std::vector<Mat> fw(p.N + 1);
  fw[0] = Mat::Identity(n, n);
  for (int j = 0; j < p.N; ++j) fw[j + 1] = seg[j].U * fw[j];
  const Mat Y = overlap_operator(p);
  const cplx g = (Y * fw[p.N]).trace();
  const double dsub = static_cast<double>(p.subspace.size());
  if (fidelity) *fidelity = std::norm(g) / (dsub * dsub);

  Amplitudes grad(p.N, K);
  Mat bw = Y;  // Y U_{N-1} ... U_{j+1}
  Mat Fm(n, n);
  for (int j = p.N - 1; j >= 0; --j) {
    const auto& s = seg[j];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const double la = s.lam(a), lb = s.lam(b);
        const cplx ea = std::polar(1.0, -la * dt);
        if (std::abs(la - lb) > 1e-9) {
          Fm(a, b) = (ea - std::polar(1.0, -lb * dt)) / (la - lb);
        } else {
          Fm(a, b) = cplx(0, -dt) * ea;
        }
      }
    // Tr(bw dU fw) = Tr((W^dag fw bw W) (Hk' o Fm))
    const Mat Mid = s.W.adjoint() * fw[j] * bw * s.W;
    for (int k = 0; k < K; ++k) {
      const Mat Hk = s.W.adjoint() * p.controls[k] * s.W;
      const cplx dg = (Mid.transpose().array() * (Hk.array() * Fm.array())).sum();
      grad(j, k) = 2.0 * (std::conj(g) * dg).real() / (dsub * dsub) * units::gauss;
    }
    bw = bw * s.U;
  }
  return grad;
}

Amplitudes grape_random_init(const GrapeProblem& p, std::uint64_t seed, double amplitude_G) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude_G, amplitude_G);
  Amplitudes c(p.N, p.controls.size());
  for (Eigen::Index j = 0; j < c.rows(); ++j)
    for (Eigen::Index k = 0; k < c.cols(); ++k) c(j, k) = u(rng);
  clip(p, c);
  return c;
}

GrapeResult grape_optimize(const GrapeProblem& p, const Amplitudes& init, const GrapeConfig& cfg) {
  p.validate();
  check_shape(p, init);
  for (Eigen::Index k = 0; k < init.cols(); ++k)
    if (init.col(k).minCoeff() < p.bounds[k].first - 1e-12 || init.col(k).maxCoeff() > p.bounds[k].second + 1e-12)
      throw std::invalid_argument("initial amplitudes violate the bounds");

  const Eigen::Index n = init.size();
  auto flat = [](const Amplitudes& a) { return Eigen::Map<const RVec>(a.data(), a.size()); };
  Amplitudes x = init;
  double F = 0.0;
  Amplitudes G = grape_gradient(p, x, &F);

  GrapeResult r;
  r.trace.push_back(F);
  std::deque<std::pair<RVec, RVec>> mem;  // (s, y) for the minimization of -F
  auto at_bound_out = [&](Eigen::Index i, double grad_up) {
    const Eigen::Index k = i / p.N;
    const double v = x.data()[i];
    return (v <= p.bounds[k].first + 1e-12 && grad_up < 0) || (v >= p.bounds[k].second - 1e-12 && grad_up > 0);
  };

  r.stop_reason = "iteration cap";
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (F >= cfg.target_fidelity) {
      r.stop_reason = "fidelity target reached";
      r.converged = true;
      break;
    }
    RVec g = -flat(G);  // gradient of -F
    std::vector<bool> active(n, false);
    for (Eigen::Index i = 0; i < n; ++i) active[i] = at_bound_out(i, -g(i));
    RVec gf = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) gf(i) = 0.0;
    if (gf.norm() < cfg.gradient_tolerance) {
      r.stop_reason = "projected gradient below tolerance";
      r.converged = true;
      break;
    }
    // two-loop recursion
    RVec q = gf;
    std::vector<double> alpha(mem.size());
    for (int m = static_cast<int>(mem.size()) - 1; m >= 0; --m) {
      alpha[m] = mem[m].first.dot(q) / mem[m].second.dot(mem[m].first);
      q -= alpha[m] * mem[m].second;
    }
    if (!mem.empty()) {
      const auto& [s, y] = mem.back();
      q *= s.dot(y) / y.dot(y);
    } else {
      q /= std::max(gf.cwiseAbs().maxCoeff(), 1e-300);  // first step moves at most 1 G
    }
    for (std::size_t m = 0; m < mem.size(); ++m) {
      const double beta = mem[m].second.dot(q) / mem[m].second.dot(mem[m].first);
      q += (alpha[m] - beta) * mem[m].first;
    }
    RVec d = -q;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) d(i) = 0.0;
    if (d.dot(gf) >= 0) {
      mem.clear();
      d = -gf / std::max(gf.cwiseAbs().maxCoeff(), 1e-300);
    }

    double step = 1.0;
    bool accepted = false;
    Amplitudes xn;
    double Fn = 0.0;
    Amplitudes Gn;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x;
      Eigen::Map<RVec>(xn.data(), n) += step * d;
      clip(p, xn);
      const RVec dx = flat(xn) - flat(x);
      Gn = grape_gradient(p, xn, &Fn);
      if (-Fn <= -F + 1e-4 * g.dot(dx) && Fn > F) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!mem.empty()) {
        mem.clear();
        continue;
      }
      r.stop_reason = "line search failed";
      break;
    }
    const RVec s = flat(xn) - flat(x);
    const RVec y = -flat(Gn) - g;
    if (s.dot(y) > 1e-16 * s.norm() * y.norm() && s.dot(y) > 0) {
      mem.emplace_back(s, y);
      if (static_cast<int>(mem.size()) > cfg.memory) mem.pop_front();
    }
    x = xn;
    F = Fn;
    G = Gn;
    r.trace.push_back(F);
    r.iterations = it + 1;
  }
  r.amplitudes = x;
  r.fidelity = F;
  if (F >= cfg.target_fidelity) r.converged = true;
  return r;
}

GrapeResult grape_optimize_seeded(const GrapeProblem& p, std::uint64_t seed, const GrapeConfig& cfg, double threshold,
                                  int max_restarts) {
  GrapeResult best;
  best.fidelity = -1.0;
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(max_restarts) + 1);
  {
    std::mt19937_64 gen(seed);
    seeds[0] = seed;
    for (std::size_t k = 1; k < seeds.size(); ++k) seeds[k] = gen();
  }
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    GrapeResult r = grape_optimize(p, grape_random_init(p, seeds[k]), cfg);
    r.seed = seeds[k];
    r.restarts = static_cast<int>(k);
    if (r.fidelity > best.fidelity) best = r;
    if (best.fidelity >= threshold) break;
  }
  return best;
}

void write_amplitudes_csv(std::ostream& os, const GrapeProblem& p, const Amplitudes& c) {
  check_shape(p, c);
  os << "segment,t_start_ns";
  for (std::size_t k = 0; k < p.controls.size(); ++k)
    os << ",amplitude_" << (k < p.control_axes.size() ? p.control_axes[k] : std::to_string(k)) << "_G";
  os << "\n" << std::setprecision(12);
  for (int j = 0; j < p.N; ++j) {
    os << j << "," << j * p.dt();
    for (Eigen::Index k = 0; k < c.cols(); ++k) os << "," << c(j, k);
    os << "\n";
  }
}

PulseSequence grape_sequence(const GrapeProblem& p, const Amplitudes& c) {
  check_shape(p, c);
  PulseSequence seq;
  const int K = static_cast<int>(c.cols());
  for (int j = 0; j < p.N; ++j) {
    std::vector<std::pair<PulseSegment, double>> segs;
    for (int k = 0; k < K; ++k) {
      PulseSegment s;
      s.B1_G = std::abs(c(j, k));
      s.omega = 0.0;
      s.phase = c(j, k) < 0 ? std::numbers::pi : 0.0;
      s.axis = k < static_cast<int>(p.control_axes.size()) ? p.control_axes[k] : "y";
      s.label = "grape " + std::to_string(j);
      segs.emplace_back(s, p.dt());
    }
    if (K == 1) {
      seq.append(segs[0].first, p.dt());
    } else {
      seq.append_parallel(segs);
    }
  }
  return seq;
}

GrapeProblem dimer_grape_problem(const HamiltonianModel& dimer, const Mat& target8, int N, double T_ns, double bound_G) {
  if (dimer.dim() != 12) throw std::invalid_argument("dimer_grape_problem needs the 12-level dimer");
  GrapeProblem p;
  p.H0 = dimer.labeled_energies().cast<cplx>().asDiagonal();
  p.controls = {dimer.drive_labeled("y")};
  p.control_axes = {"y"};
  p.N = N;
  p.T = T_ns;
  p.bounds = {{-bound_G, bound_G}};
  p.target = target8;
  p.subspace = {1, 2, 3, 4, 7, 8, 9, 10};
  p.validate();
  return p;
}

}  // namespace spinbell
