#include "spinbell/dynamics.hpp"
#include "spinbell/grape.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace spinbell;
using spinbell::testing::haar_unitary;
using spinbell::testing::random_hermitian;

namespace {

GrapeProblem random_problem(std::mt19937_64& rng, int dim = 8, int N = 6, double T = 2.0) {
  GrapeProblem p;
  p.H0 = random_hermitian(dim, rng);
  p.controls = {1e4 * random_hermitian(dim, rng), 1e4 * random_hermitian(dim, rng)};
  p.control_axes = {"y", "x"};
  p.N = N;
  p.T = T;
  p.bounds = {{-50.0, 50.0}, {-50.0, 50.0}};
  for (int i = 0; i < dim; ++i) p.subspace.push_back(i);
  p.target = haar_unitary(dim, rng);
  p.interaction_picture = false;
  return p;
}

Amplitudes random_amplitudes(const GrapeProblem& p, std::mt19937_64& rng, double scale = 5.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Amplitudes c(p.N, p.controls.size());
  for (int j = 0; j < c.rows(); ++j)
    for (int k = 0; k < c.cols(); ++k) c(j, k) = u(rng);
  return c;
}

double fid(const GrapeProblem& p, const Amplitudes& c) { return grape_fidelity(grape_forward(p, c).U, p); }

}  // namespace

TEST_CASE("forward propagation") {
  std::mt19937_64 rng(1);
  GrapeProblem p = random_problem(rng);
  const Amplitudes zero = Amplitudes::Zero(p.N, 2);
  CHECK((grape_forward(p, zero).U - expm_hermitian(p.H0, p.T)).norm() < 1e-10);

  const Amplitudes c = random_amplitudes(p, rng);
  std::vector<std::pair<Mat, double>> segs;
  for (int j = 0; j < p.N; ++j) segs.push_back({p.H0 + c(j, 0) * 1e-4 * p.controls[0] + c(j, 1) * 1e-4 * p.controls[1], p.dt()});
  const GrapeForward f = grape_forward(p, c);
  CHECK((f.U - propagate_unitary(segs)).norm() < 1e-10);
  CHECK(f.segments.size() == static_cast<std::size_t>(p.N));

  p.N = 1;
  const Amplitudes one = random_amplitudes(p, rng);
  const Mat H = p.H0 + one(0, 0) * 1e-4 * p.controls[0] + one(0, 1) * 1e-4 * p.controls[1];
  CHECK((grape_forward(p, one).U - expm_hermitian(H, p.T)).norm() < 1e-10);
  CHECK_THROWS_AS(grape_forward(p, Amplitudes::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("fidelity conventions") {
  std::mt19937_64 rng(2);
  GrapeProblem p = random_problem(rng, 4);
  const Mat U = haar_unitary(4, rng);
  p.target = U;
  CHECK(grape_fidelity(U, p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grape_fidelity(std::exp(cplx(0, 1.3)) * U, p) == doctest::Approx(1.0).epsilon(1e-12));
  p.target = Mat(RVec((RVec(4) << 1, -1, 1, -1).finished()).cast<cplx>().asDiagonal());
  CHECK(grape_fidelity(Mat::Identity(4, 4), p) < 1e-15);

  // drift interaction picture: identity target is met by free evolution
  p.interaction_picture = true;
  p.target = Mat::Identity(4, 4);
  CHECK(grape_fidelity(expm_hermitian(p.H0, p.T), p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const GrapeProblem p = random_problem(rng);
    const Amplitudes c = random_amplitudes(p, rng);
    double F = 0.0;
    const Amplitudes g = grape_gradient(p, c, &F);
    CHECK(F == doctest::Approx(fid(p, c)).epsilon(1e-12));
    Amplitudes fd(c.rows(), c.cols());
    const double h = 1e-6;
    for (int j = 0; j < c.rows(); ++j)
      for (int k = 0; k < c.cols(); ++k) {
        Amplitudes a = c, b = c;
        a(j, k) += h;
        b(j, k) -= h;
        fd(j, k) = (fid(p, a) - fid(p, b)) / (2 * h);
      }
    CHECK((g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("gradient edge cases") {
  std::mt19937_64 rng(4);
  GrapeProblem p = random_problem(rng);
  p.controls[1].setZero();
  const Amplitudes c = random_amplitudes(p, rng);
  const Amplitudes g = grape_gradient(p, c);
  CHECK(g.col(1).cwiseAbs().maxCoeff() == 0.0);

  // at F = 1 the gradient vanishes
  p.target = grape_forward(p, c).U;
  double F = 0.0;
  const Amplitudes g1 = grape_gradient(p, c, &F);
  CHECK(F == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g1.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("optimizer") {
  std::mt19937_64 rng(5);
  GrapeProblem p = random_problem(rng, 4, 20, 5.0);
  p.subspace = {0, 1};
  p.target = haar_unitary(2, rng);
  GrapeConfig cfg;
  cfg.max_iterations = 500;
  cfg.target_fidelity = 0.999;
  const GrapeResult r = grape_optimize(p, grape_random_init(p, 7), cfg);
  INFO(r.stop_reason, " after ", r.iterations);
  CHECK(r.fidelity >= 0.999);
  CHECK(r.converged);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
  CHECK(r.amplitudes.maxCoeff() <= 50.0);
  CHECK(r.amplitudes.minCoeff() >= -50.0);
  CHECK(r.fidelity == doctest::Approx(fid(p, r.amplitudes)).epsilon(1e-10));

  // null problem: identity target in the drift frame is met at zero amplitude
  GrapeProblem null = p;
  null.target = Mat::Identity(2, 2);
  null.interaction_picture = true;
  const GrapeResult z = grape_optimize(null, Amplitudes::Zero(null.N, 2), cfg);
  CHECK(z.fidelity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z.iterations == 0);

  // tight iteration cap: best-so-far, no exception
  GrapeConfig capped = cfg;
  capped.max_iterations = 1;
  capped.target_fidelity = 1.0;
  const GrapeResult b = grape_optimize(p, grape_random_init(p, 7), capped);
  CHECK_FALSE(b.converged);
  CHECK(b.fidelity > 0.0);

  // same seed, same result
  const GrapeResult again = grape_optimize(p, grape_random_init(p, 7), cfg);
  CHECK((again.amplitudes - r.amplitudes).norm() == 0.0);
  const Amplitudes init = grape_random_init(p, 11);
  CHECK(init.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("dimer problem, export and bandwidth") {
  const HamiltonianModel d = build_dimer();
  const GrapeProblem p = dimer_grape_problem(d, Mat::Identity(8, 8));
  CHECK(p.N == 1600);
  CHECK(p.T == 1000.0);
  // 1600 segments per microsecond: Nyquist 800 MHz
  CHECK(p.N / (2.0 * p.T) * 1e3 == doctest::Approx(800.0));
  CHECK(p.bounds.front().second == 75.0);

  std::mt19937_64 rng(6);
  GrapeProblem small = random_problem(rng, 4, 5, 1.0);
  const Amplitudes c = random_amplitudes(small, rng);
  std::ostringstream os;
  write_amplitudes_csv(os, small, c);
  const std::string csv = os.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == small.N + 1);
  CHECK(csv.rfind("segment,t_start_ns", 0) == 0);

  const PulseSequence s = grape_sequence(small, c);
  CHECK(s.end_time() == doctest::Approx(small.T));
  for (const auto& seg : s.segments()) {
    CHECK(seg.omega == 0.0);
    CHECK(seg.B1_G >= 0.0);
  }
  CHECK_THROWS_AS(dimer_grape_problem(d, Mat::Identity(4, 4)), std::invalid_argument);
}
