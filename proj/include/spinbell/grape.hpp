#pragma once

#include "spinbell/model.hpp"
#include "spinbell/qspace.hpp"
#include "spinbell/sequence.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace spinbell {

// Piecewise-constant controls: H_j = H0 + sum_k c_jk * 1e-4 * H_k with c in gauss,
// H_k in rad/ns per tesla.
struct GrapeProblem {
  Mat H0;
  std::vector<Mat> controls;
  std::vector<std::string> control_axes;  // drive axis label per control, for sequence export
  int N = 1600;
  double T = 1000.0;  // ns
  std::vector<std::pair<double, double>> bounds;  // gauss, per control
  Mat target;                 // on the subspace
  std::vector<int> subspace;  // indices of the computational levels
  // compare U(T) with exp(-i H0 T) target, i.e. the target lives in the drift interaction picture
  bool interaction_picture = true;

  double dt() const { return T / N; }
  int dim() const { return static_cast<int>(H0.rows()); }
  void validate() const;
};

using Amplitudes = Eigen::MatrixXd;  // N x K, gauss

struct GrapeForward {
  Mat U;
  std::vector<Mat> segments;  // U_j, j = 0..N-1
};

GrapeForward grape_forward(const GrapeProblem& p, const Amplitudes& c);
double grape_fidelity(const Mat& U, const GrapeProblem& p);
// dF/dc (per gauss); the fidelity at c is returned through `fidelity` when given.
Amplitudes grape_gradient(const GrapeProblem& p, const Amplitudes& c, double* fidelity = nullptr);

struct GrapeConfig {
  int max_iterations = 1000;
  double target_fidelity = 0.9999;
  double gradient_tolerance = 1e-12;
  int memory = 10;
};

struct GrapeResult {
  Amplitudes amplitudes;
  double fidelity = 0.0;
  std::vector<double> trace;  // fidelity of every accepted iterate
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  std::string stop_reason;
  std::uint64_t seed = 0;
};

// Projected L-BFGS ascent inside the amplitude box; returns the best iterate.
GrapeResult grape_optimize(const GrapeProblem& p, const Amplitudes& init, const GrapeConfig& cfg = {});
Amplitudes grape_random_init(const GrapeProblem& p, std::uint64_t seed, double amplitude_G = 1.0);
// Seeded start, restarting with derived seeds until `threshold` is met (restarts <= max_restarts).
GrapeResult grape_optimize_seeded(const GrapeProblem& p, std::uint64_t seed, const GrapeConfig& cfg, double threshold,
                                  int max_restarts = 5);

// segment, t_start_ns, amplitude_G (one column per control)
void write_amplitudes_csv(std::ostream& os, const GrapeProblem& p, const Amplitudes& c);
// Baseband segments: B1 = |c|, phase 0 or pi.
PulseSequence grape_sequence(const GrapeProblem& p, const Amplitudes& c);

// Dimer problem on the qubit x {+3/2 .. -3/2} levels (labels 1..4, 7..10) with the y moment as control.
GrapeProblem dimer_grape_problem(const HamiltonianModel& dimer, const Mat& target8, int N = 1600, double T_ns = 1000.0,
                                 double bound_G = 75.0);

}  // namespace spinbell
