#include "spinbell/qspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spinbell {

SpinOps spin_operators(double s) {
  const double twice = 2.0 * s;
  if (!(s >= 0.0) || std::abs(twice - std::round(twice)) > 1e-12)
    throw std::invalid_argument("spin magnitude must be a non-negative half-integer, got " + std::to_string(s));
  const int d = static_cast<int>(std::lround(twice)) + 1;
  SpinOps o{Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d)};
  // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>; index k holds m = s - k
  Mat splus = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = s - k;
    o.z(k, k) = m;
    if (k > 0) splus(k - 1, k) = std::sqrt(s * (s + 1) - m * (m + 1));
  }
  const Mat sminus = splus.adjoint();
  o.x = 0.5 * (splus + sminus);
  o.y = cplx(0, -0.5) * (splus - sminus);
  return o;
}

Mat pauli(int k) {
  Mat p = Mat::Zero(2, 2);
  switch (k) {
    case 0: p(0, 0) = 1; p(1, 1) = 1; break;
    case 1: p(0, 1) = 1; p(1, 0) = 1; break;
    case 2: p(0, 1) = cplx(0, -1); p(1, 0) = cplx(0, 1); break;
    case 3: p(0, 0) = 1; p(1, 1) = -1; break;
    default: throw std::invalid_argument("pauli index must be 0..3");
  }
  return p;
}

SpinSystem::SpinSystem(std::vector<double> spins) : spins_(std::move(spins)) {
  if (spins_.empty()) throw std::invalid_argument("spin system needs at least one site");
  for (double s : spins_) {
    const int d = static_cast<int>(spin_operators(s).z.rows());
    if (d < 2) throw std::invalid_argument("every site needs dimension >= 2");
    dims_.push_back(d);
    total_dim_ *= d;
  }
}

Mat SpinSystem::embed(int site, const Mat& op) const {
  if (site < 0 || site >= size()) throw std::invalid_argument("site index out of range");
  if (op.rows() != dims_[site] || op.cols() != dims_[site])
    throw std::invalid_argument("operator dimension " + std::to_string(op.rows()) + " does not match site dimension " +
                                std::to_string(dims_[site]));
  int left = 1, right = 1;
  for (int i = 0; i < site; ++i) left *= dims_[i];
  for (int i = site + 1; i < size(); ++i) right *= dims_[i];
  const int d = dims_[site];
  Mat out = Mat::Zero(total_dim_, total_dim_);
  for (int a = 0; a < left; ++a)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (op(i, j) == cplx(0)) continue;
        for (int b = 0; b < right; ++b)
          out((a * d + i) * right + b, (a * d + j) * right + b) = op(i, j);
      }
  return out;
}

SpinOps SpinSystem::site_operators(int site) const {
  const SpinOps o = spin_operators(spins_.at(site));
  return {embed(site, o.x), embed(site, o.y), embed(site, o.z)};
}

int SpinSystem::index_of(const std::vector<double>& m) const {
  if (static_cast<int>(m.size()) != size()) throw std::invalid_argument("label length does not match site count");
  int idx = 0;
  for (int i = 0; i < size(); ++i) {
    const double k = spins_[i] - m[i];
    if (std::abs(k - std::round(k)) > 1e-9 || k < -1e-9 || k > dims_[i] - 1 + 1e-9)
      throw std::invalid_argument("magnetic quantum number " + std::to_string(m[i]) + " invalid for site " +
                                  std::to_string(i));
    idx = idx * dims_[i] + static_cast<int>(std::lround(k));
  }
  return idx;
}

std::vector<int> SpinSystem::digits_of(int index) const {
  if (index < 0 || index >= total_dim_) throw std::invalid_argument("basis index out of range");
  std::vector<int> dg(size());
  for (int i = size() - 1; i >= 0; --i) {
    dg[i] = index % dims_[i];
    index /= dims_[i];
  }
  return dg;
}

std::vector<double> SpinSystem::m_of(int index) const {
  const auto dg = digits_of(index);
  std::vector<double> m(size());
  for (int i = 0; i < size(); ++i) m[i] = spins_[i] - dg[i];
  return m;
}

Vec SpinSystem::basis_ket(const std::vector<double>& m) const {
  Vec v = Vec::Zero(total_dim_);
  v(index_of(m)) = 1.0;
  return v;
}

bool is_hermitian(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

void check_ket(const Vec& psi, double tol) {
  if (psi.size() == 0) throw std::invalid_argument("empty ket");
  if (std::abs(psi.norm() - 1.0) > tol) throw std::invalid_argument("ket is not normalized");
}

void check_density(const Mat& rho, double tol) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw std::invalid_argument("density matrix must be square");
  if (!is_hermitian(rho, tol)) throw std::invalid_argument("density matrix is not Hermitian");
  if (std::abs(rho.trace() - cplx(1.0)) > tol) throw std::invalid_argument("density matrix trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol) throw std::invalid_argument("density matrix has a negative eigenvalue");
}

QState QState::from_ket(const Vec& psi) {
  check_ket(psi);
  QState s;
  s.ket_ = psi;
  s.rho_ = psi * psi.adjoint();
  return s;
}

QState QState::from_density(const Mat& rho) {
  check_density(rho);
  QState s;
  s.rho_ = rho;
  return s;
}

const Vec& QState::ket() const {
  if (!ket_) throw std::logic_error("state is mixed; no ket available");
  return *ket_;
}

Mat partial_trace(const Mat& rho, const SpinSystem& system, const std::vector<int>& keep) {
  const int n = system.size();
  if (rho.rows() != system.total_dim() || rho.cols() != system.total_dim())
    throw std::invalid_argument("density matrix dimension does not match the spin system");
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n) throw std::invalid_argument("keep set contains an invalid site");
    if (kept[k]) throw std::invalid_argument("keep set contains a duplicate site");
    kept[k] = true;
  }
  std::vector<int> ks(keep.begin(), keep.end());
  std::sort(ks.begin(), ks.end());
  int dk = 1;
  for (int k : ks) dk *= system.dims()[k];
  Mat out = Mat::Zero(dk, dk);
  const int d = system.total_dim();
  std::vector<std::vector<int>> digits(d);
  std::vector<int> kidx(d), tidx(d);
  for (int i = 0; i < d; ++i) {
    digits[i] = system.digits_of(i);
    int a = 0, t = 0;
    for (int s = 0; s < n; ++s) {
      if (kept[s]) a = a * system.dims()[s] + digits[i][s];
      else t = t * system.dims()[s] + digits[i][s];
    }
    kidx[i] = a;
    tidx[i] = t;
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (tidx[i] == tidx[j]) out(kidx[i], kidx[j]) += rho(i, j);
  return out;
}

double fidelity(const Mat& rho, const Vec& psi) {
  if (rho.rows() != psi.size() || rho.cols() != psi.size())
    throw std::invalid_argument("fidelity: dimension mismatch");
  return std::real(psi.dot(rho * psi));
}

Mat PauliDecomposition::reconstruct() const {
  const int n = static_cast<int>(sigma_tilde[0].rows());
  Mat out = Mat::Zero(2 * n, 2 * n);
  for (int a = 0; a < 4; ++a) {
    const Mat p = pauli(a);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) out.block(r * n, c * n, n, n) += 0.5 * p(r, c) * sigma_tilde[a];
  }
  return out;
}

PauliDecomposition pauli_decompose(const Mat& rho) {
  if (rho.rows() != rho.cols() || rho.rows() < 4 || rho.rows() % 2 != 0)
    throw std::invalid_argument("pauli_decompose expects a (2n x 2n) matrix with the qubit first");
  const int n = static_cast<int>(rho.rows()) / 2;
  PauliDecomposition pd;
  for (int a = 0; a < 4; ++a) {
    const Mat p = pauli(a);
    Mat s = Mat::Zero(n, n);
    // Tr_qubit[(sigma x 1) rho]
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        if (p(r, c) != cplx(0)) s += p(r, c) * rho.block(c * n, r * n, n, n);
    pd.sigma_tilde[a] = s;
  }
  return pd;
}

}  // namespace spinbell
