#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <optional>
#include <vector>

namespace spinbell {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

struct SpinOps {
  Mat x, y, z;
};

// Standard angular momentum matrices, basis ordered m = s, s-1, ..., -s.
SpinOps spin_operators(double s);

Mat pauli(int k);  // k = 0..3, sigma_0 = identity

class SpinSystem {
 public:
  explicit SpinSystem(std::vector<double> spins);

  const std::vector<double>& spins() const { return spins_; }
  const std::vector<int>& dims() const { return dims_; }
  int size() const { return static_cast<int>(spins_.size()); }
  int total_dim() const { return total_dim_; }

  Mat embed(int site, const Mat& op) const;
  SpinOps site_operators(int site) const;

  // product-basis index <-> per-site magnetic quantum numbers
  int index_of(const std::vector<double>& m) const;
  std::vector<double> m_of(int index) const;
  std::vector<int> digits_of(int index) const;
  Vec basis_ket(const std::vector<double>& m) const;

 private:
  std::vector<double> spins_;
  std::vector<int> dims_;
  int total_dim_ = 1;
};

bool is_hermitian(const Mat& a, double tol = 1e-10);

// Throws std::invalid_argument describing the first violated invariant.
void check_ket(const Vec& psi, double tol = 1e-12);
void check_density(const Mat& rho, double tol = 1e-10);

class QState {
 public:
  static QState from_ket(const Vec& psi);
  static QState from_density(const Mat& rho);

  bool is_pure() const { return ket_.has_value(); }
  const Vec& ket() const;
  const Mat& density() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

 private:
  std::optional<Vec> ket_;
  Mat rho_;
};

Mat partial_trace(const Mat& rho, const SpinSystem& system, const std::vector<int>& keep);

// <psi|rho|psi>
double fidelity(const Mat& rho, const Vec& psi);

struct PauliDecomposition {
  std::array<Mat, 4> sigma_tilde;
  Mat reconstruct() const;
};

// Qubit first: rho on C^2 (x) C^n.
PauliDecomposition pauli_decompose(const Mat& rho);

}  // namespace spinbell
