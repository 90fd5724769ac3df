#include "spinbell/bell.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace spinbell {

using nlohmann::json;
using std::numbers::pi;

namespace {

bool dichotomic(const Mat& m, double tol = 1e-9) {
  if (!is_hermitian(m, tol)) return false;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  for (int k = 0; k < es.eigenvalues().size(); ++k)
    if (std::abs(std::abs(es.eigenvalues()(k)) - 1.0) > tol) return false;
  return true;
}

std::array<Mat, 2> rotated_blocks(const PauliDecomposition& s, const Eigen::Matrix3d& R) {
  std::array<Mat, 2> m;
  for (int i = 0; i < 2; ++i) {
    m[i] = Mat::Zero(s.sigma_tilde[1].rows(), s.sigma_tilde[1].cols());
    for (int j = 0; j < 3; ++j) m[i] += R(i, j) * s.sigma_tilde[j + 1];
    m[i] = 0.5 * (m[i] + m[i].adjoint()).eval();
  }
  return m;
}

struct Candidate {
  double value;
  std::array<double, 3> x;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.value > b.value + 1e-9) return true;
  if (b.value > a.value + 1e-9) return false;
  return a.x < b.x;
}

struct SimplexData {
  const PauliDecomposition* s;
};

double neg_objective(const gsl_vector* v, void* p) {
  const auto* d = static_cast<SimplexData*>(p);
  return -chsh_objective(*d->s, gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2));
}

Candidate refine(const PauliDecomposition& s, const Candidate& start) {
  SimplexData data{&s};
  gsl_multimin_function f{&neg_objective, 3, &data};
  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step = gsl_vector_alloc(3);
  for (int k = 0; k < 3; ++k) {
    gsl_vector_set(x, k, start.x[k]);
    gsl_vector_set(step, k, 0.1);
  }
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(m, &f, x, step);
  for (int it = 0; it < 2000; ++it) {
    if (gsl_multimin_fminimizer_iterate(m)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-10) == GSL_SUCCESS) break;
  }
  Candidate out{-m->fval, {gsl_vector_get(m->x, 0), gsl_vector_get(m->x, 1), gsl_vector_get(m->x, 2)}};
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return better(out, start) ? out : start;
}

// sign(0) = +1; one negative eigenvalue is moved to slot `slot` so that D matches diag(.., -1, ..)
void diagonalize_dichotomic(const Mat& m, int slot, Mat& U, Mat& D) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  const int n = static_cast<int>(m.rows());
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  const RVec& lam = es.eigenvalues();
  auto sign = [](double v) { return v < -1e-12 ? -1.0 : 1.0; };
  int negatives = 0;
  for (int k = 0; k < n; ++k) negatives += sign(lam(k)) < 0;
  if (negatives == 1 && slot < n) std::swap(order[0], order[slot]);
  U.resize(n, n);
  D = Mat::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    U.row(r) = es.eigenvectors().col(order[r]).adjoint();
    D(r, r) = sign(lam(order[r]));
  }
}

Mat pauli_vector(const Eigen::Vector3d& r) { return 0.5 * (r(0) * pauli(1) + r(1) * pauli(2) + r(2) * pauli(3)); }

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void check_qubit_qudit(const Vec& psi) {
  if (psi.size() != 8) throw std::invalid_argument("expected an 8-dimensional qubit (x) spin-3/2 ket");
  check_ket(psi, 1e-9);
}

}  // namespace

void BellObservables::validate() const {
  if (A.rows() != 2 || A_prime.rows() != 2 || B.rows() != 4 || B_prime.rows() != 4)
    throw std::invalid_argument("Bell observables need 2x2 qubit and 4x4 qudit matrices");
  for (const Mat* m : {&A, &A_prime, &B, &B_prime})
    if (!dichotomic(*m)) throw std::invalid_argument("Bell observables must be Hermitian with eigenvalues +-1");
}

Mat bell_operator(const BellObservables& obs) {
  obs.validate();
  return kron(obs.A, obs.B + obs.B_prime) + kron(obs.A_prime, obs.B - obs.B_prime);
}

Eigen::Matrix3d euler_zyz(double a, double b, double c) {
  using Eigen::AngleAxisd;
  using Eigen::Vector3d;
  return (AngleAxisd(a, Vector3d::UnitZ()) * AngleAxisd(b, Vector3d::UnitY()) * AngleAxisd(c, Vector3d::UnitZ()))
      .toRotationMatrix();
}

double chsh_objective(const PauliDecomposition& s, double a, double b, double c) {
  const auto m = rotated_blocks(s, euler_zyz(a, b, c));
  double sums[2];
  for (int i = 0; i < 2; ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m[i], Eigen::EigenvaluesOnly);
    sums[i] = es.eigenvalues().cwiseAbs().sum();
  }
  return 2.0 * std::hypot(sums[0], sums[1]);
}

CHSHResult chsh_observables(const Vec& psi, double a, double b, double c) {
  check_qubit_qudit(psi);
  const PauliDecomposition s = pauli_decompose(psi * psi.adjoint());
  const auto m = rotated_blocks(s, euler_zyz(a, b, c));
  CHSHResult r;
  r.angles = {a, b, c};
  std::array<Mat, 2> B;
  for (int i = 0; i < 2; ++i) {
    diagonalize_dichotomic(m[i], i, r.U_B[i], r.D[i]);
    B[i] = r.U_B[i].adjoint() * r.D[i] * r.U_B[i];
    B[i] = 0.5 * (B[i] + B[i].adjoint()).eval();
    for (int k = 0; k < 3; ++k) r.r_B[i](k) = (s.sigma_tilde[k + 1] * B[i]).trace().real();
  }
  const Eigen::Vector3d sum = r.r_B[0] + r.r_B[1], diff = r.r_B[0] - r.r_B[1];
  if (sum.norm() < 1e-12) throw DegenerateDirection("r_B + r_B' vanishes: A is undefined");
  if (diff.norm() < 1e-12) throw DegenerateDirection("r_B - r_B' vanishes: A' is undefined");
  r.r_A[0] = 2.0 * sum / sum.norm();
  r.r_A[1] = 2.0 * diff / diff.norm();
  r.observables = {pauli_vector(r.r_A[0]), pauli_vector(r.r_A[1]), B[0], B[1]};
  for (int i = 0; i < 2; ++i) {
    // A = U^dag (-sigma_3) U, eigenvalues ascending (-1, +1)
    Eigen::SelfAdjointEigenSolver<Mat> es(i == 0 ? r.observables.A : r.observables.A_prime);
    r.U_A[i] = es.eigenvectors().adjoint();
  }
  r.value = psi.dot(bell_operator(r.observables) * psi).real();
  return r;
}

CHSHResult chsh_maximize(const Vec& psi, const CHSHSearch& search) {
  check_qubit_qudit(psi);
  if (search.grid < 2 || search.refine_starts < 1) throw std::invalid_argument("invalid CHSH search settings");
  const PauliDecomposition s = pauli_decompose(psi * psi.adjoint());
  const int n = search.grid;
  const int cells = n * n * n;
  std::vector<Candidate> grid(cells);
  auto eval = [&](int lo, int hi) {
    for (int k = lo; k < hi; ++k) {
      const int i = k / (n * n), j = (k / n) % n, l = k % n;
      const std::array<double, 3> x{2 * pi * i / n, pi * j / (n - 1), 2 * pi * l / n};
      grid[k] = {chsh_objective(s, x[0], x[1], x[2]), x};
    }
  };
  const int w = std::max(1, std::min(search.workers, cells));
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t) pool.emplace_back(eval, cells * t / w, cells * (t + 1) / w);
  for (auto& th : pool) th.join();

  std::sort(grid.begin(), grid.end(), better);
  Candidate best = grid.front();
  const int starts = std::min(search.refine_starts, cells);
  for (int k = 0; k < starts; ++k) {
    const Candidate c = refine(s, grid[k]);
    if (better(c, best)) best = c;
  }
  try {
    return chsh_observables(psi, best.x[0], best.x[1], best.x[2]);
  } catch (const DegenerateDirection& e) {
    throw DegenerateDirection(e.what(), best.value, best.x);
  }
}

Reducibility reducibility_check(const Vec& psi, double tol) {
  if (psi.size() % 2 != 0 || psi.size() < 4) throw std::invalid_argument("expected a qubit (x) qudit ket");
  check_ket(psi, 1e-9);
  const Eigen::Index n = psi.size() / 2;
  const Vec a = psi.head(n), b = psi.tail(n);
  Reducibility r;
  r.witness = a.dot(b);  // conjugates a
  if (std::abs(r.witness) < tol) {
    r.reducible = true;
    r.reason = "orthogonal qudit blocks";
  } else if (a.norm() < tol || b.norm() < tol || std::abs(std::abs(r.witness) - a.norm() * b.norm()) < tol) {
    r.reducible = true;
    r.reason = "parallel qudit blocks (product state)";
  } else {
    r.reason = "blocks neither orthogonal nor parallel";
  }
  return r;
}

Mat chsh_D(int j) {
  if (j != 1 && j != 2) throw std::invalid_argument("chsh_D: j must be 1 or 2");
  Mat D = Mat::Identity(4, 4);
  D(j - 1, j - 1) = -1.0;
  return D;
}

Mat restrict_to_computational(const Mat& rho12) {
  if (rho12.rows() != 12) throw std::invalid_argument("expected a 12-level dimer state");
  const int idx[8] = {1, 2, 3, 4, 7, 8, 9, 10};
  Mat r(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) r(i, j) = rho12(idx[i], idx[j]);
  return r;
}

CHSHTerms chsh_diagonal_terms(const std::array<Mat, 4>& rhos) {
  CHSHTerms t;
  const Mat mz = -pauli(3);
  for (int k = 0; k < 4; ++k) {
    Mat rho = rhos[k];
    if (rho.rows() == 12) {
      check_density(rho, 1e-7);
      rho = restrict_to_computational(rho);
    } else if (rho.rows() == 8) {
      check_density(rho, 1e-7);
    } else {
      throw std::invalid_argument("chsh_diagonal_terms needs 8x8 or 12x12 states");
    }
    const int j = k % 2 + 1;
    t.O[k] = (kron(mz, chsh_D(j)) * rho).trace().real();
  }
  t.combination = t.O[0] + t.O[1] + t.O[2] - t.O[3];
  return t;
}

double chsh_term_measurement(const Vec& psi, const CHSHResult& r, int i, int j, bool permuted) {
  check_qubit_qudit(psi);
  if (i < 0 || i > 1 || j < 0 || j > 1) throw std::invalid_argument("term indices are 0 or 1");
  Mat UB = r.U_B[j], D = r.D[j];
  if (permuted) {
    // move the -1 of D to the first slot: sigma_3-like diagonal on the qudit
    Eigen::Index neg = 0;
    D.diagonal().real().minCoeff(&neg);
    Mat P = Mat::Identity(4, 4);
    P.row(0).swap(P.row(neg));
    UB = P * UB;
    D = P * D * P.transpose();
  }
  const Vec pp = kron(r.U_A[i], UB) * psi;
  return pp.dot(kron(-pauli(3), D) * pp).real();
}

std::array<Mat, 4> chsh_rotations(const CHSHResult& r) {
  return {kron(r.U_A[0], r.U_B[0]), kron(r.U_A[0], r.U_B[1]), kron(r.U_A[1], r.U_B[0]), kron(r.U_A[1], r.U_B[1])};
}

int chsh_classical_bound() {
  // diagonal A, A' (2 entries) and B, B' (4 entries), all +-1; <O> on a basis state is a diagonal entry
  int best = 0;
  auto bit = [](int mask, int k) { return (mask >> k) & 1 ? -1 : 1; };
  for (int a = 0; a < 4; ++a)
    for (int ap = 0; ap < 4; ++ap)
      for (int b = 0; b < 16; ++b)
        for (int bp = 0; bp < 16; ++bp)
          for (int q = 0; q < 2; ++q)
            for (int m = 0; m < 4; ++m) {
              const int v = bit(a, q) * (bit(b, m) + bit(bp, m)) + bit(ap, q) * (bit(b, m) - bit(bp, m));
              best = std::max(best, std::abs(v));
            }
  return best;
}

json matrix_to_json(const Mat& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json rr = json::array(), ii = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ii.push_back(m(i, j).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  return {{"re", re}, {"im", im}};
}

json to_json(const CHSHResult& r) {
  auto vec3 = [](const Eigen::Vector3d& v) { return json::array({v(0), v(1), v(2)}); };
  return {{"value", r.value},
          {"angles_rad", {r.angles[0], r.angles[1], r.angles[2]}},
          {"A", matrix_to_json(r.observables.A)},
          {"A_prime", matrix_to_json(r.observables.A_prime)},
          {"B", matrix_to_json(r.observables.B)},
          {"B_prime", matrix_to_json(r.observables.B_prime)},
          {"D1", matrix_to_json(r.D[0])},
          {"D2", matrix_to_json(r.D[1])},
          {"U_A1", matrix_to_json(r.U_A[0])},
          {"U_A2", matrix_to_json(r.U_A[1])},
          {"U_B1", matrix_to_json(r.U_B[0])},
          {"U_B2", matrix_to_json(r.U_B[1])},
          {"r_B", {vec3(r.r_B[0]), vec3(r.r_B[1])}},
          {"r_A", {vec3(r.r_A[0]), vec3(r.r_A[1])}}};
}

}  // namespace spinbell
