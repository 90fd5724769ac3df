#pragma once

#include "spinbell/qspace.hpp"

#include <json.hpp>

#include <array>
#include <stdexcept>
#include <string>

namespace spinbell {

// A, A' act on the qubit (2x2), B, B' on the qudit (4x4); all dichotomic.
struct BellObservables {
  Mat A, A_prime, B, B_prime;
  void validate() const;
};

// A (x) (B + B') + A' (x) (B - B')
Mat bell_operator(const BellObservables& obs);

// The maximum exists but A or A' has no direction (e.g. product states, where B = B').
class DegenerateDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  DegenerateDirection(const std::string& what, double v, std::array<double, 3> a)
      : std::runtime_error(what), value(v), angles(a) {}
  double value = 0.0;  // objective at the maximizer, when raised by chsh_maximize
  std::array<double, 3> angles{};
};

struct CHSHResult {
  double value = 0.0;
  std::array<double, 3> angles{};  // z-y-z Euler angles of R
  BellObservables observables;
  std::array<Mat, 2> D;    // diagonal +-1, B_i = U_B[i]^dag D_i U_B[i]
  std::array<Mat, 2> U_B;
  std::array<Mat, 2> U_A;  // A_i = U_A[i]^dag (-sigma_3) U_A[i]
  std::array<Eigen::Vector3d, 2> r_B, r_A;
};

Eigen::Matrix3d euler_zyz(double alpha, double beta, double gamma);

// 2 sqrt((sum |eig (R s)_1|)^2 + (sum |eig (R s)_2|)^2) for the Pauli blocks of a qubit-qudit state
double chsh_objective(const PauliDecomposition& s, double alpha, double beta, double gamma);

struct CHSHSearch {
  int grid = 24;
  int refine_starts = 10;
  int workers = 1;
};

// Grid search plus simplex refinement, then the constructive observables.
CHSHResult chsh_maximize(const Vec& psi, const CHSHSearch& search = {});
// Observables for fixed angles (no search).
CHSHResult chsh_observables(const Vec& psi, double alpha, double beta, double gamma);

// Conjugate inner product of the qudit blocks of the two qubit components.
struct Reducibility {
  bool reducible = false;
  cplx witness;
  std::string reason;
};
Reducibility reducibility_check(const Vec& psi, double tol = 1e-10);

// D_1 = diag(-1,1,1,1), D_2 = diag(1,-1,1,1)
Mat chsh_D(int j);

struct CHSHTerms {
  std::array<double, 4> O{};  // O11, O12, O21, O22
  double combination = 0.0;   // O11 + O12 + O21 - O22
};

// rhos ordered (A1B1, A1B2, A2B1, A2B2); 8x8 states, or 12x12 dimer states restricted
// to the qubit x {+3/2..-3/2} levels.
CHSHTerms chsh_diagonal_terms(const std::array<Mat, 4>& rhos);
Mat restrict_to_computational(const Mat& rho12);

// <A_i (x) B_j> via (U_A[i] (x) U_B[j]) psi and -sigma_3 (x) D_j.
// permuted = true moves the -1 entry of D_j to the first slot first.
double chsh_term_measurement(const Vec& psi, const CHSHResult& r, int i, int j, bool permuted = false);
// Measurement rotations U_A[i] (x) U_B[j], ordered (A1B1, A1B2, A2B1, A2B2).
std::array<Mat, 4> chsh_rotations(const CHSHResult& r);

// Max over all +-1 diagonal assignments of |<O>|, exact integer arithmetic.
int chsh_classical_bound();

struct CGLMPSettings {
  int d = 4;
  std::array<double, 2> alphas{0.0, 0.5};
  std::array<double, 2> betas{0.25, -0.25};
};

struct CGLMPUnitaries {
  std::array<Mat, 2> A, B;
};
CGLMPUnitaries cglmp_unitaries(const CGLMPSettings& s = {});

// P[2a + b](k, l) = P(A_a = k, B_b = l)
struct ProbabilityTable {
  std::array<Eigen::MatrixXd, 4> P;
  void validate(double tol = 1e-9) const;
};

// rhos on qudit (x) qudit (16x16), ordered (A1B1, A1B2, A2B1, A2B2)
ProbabilityTable cglmp_probabilities(const std::array<Mat, 4>& rhos);
// Closed form for the rotated maximally entangled state.
ProbabilityTable cglmp_ideal_probabilities(const CGLMPSettings& s = {});
double cglmp_functional(const ProbabilityTable& t);
// Max of I over the d^4 deterministic local strategies.
double cglmp_classical_bound(int d = 4);
// Maximally entangled two-qudit ket sum_m |m m>/sqrt(d)
Vec max_entangled(int d = 4);

nlohmann::json to_json(const CHSHResult& r);
nlohmann::json to_json(const ProbabilityTable& t);
nlohmann::json matrix_to_json(const Mat& m);

}  // namespace spinbell
