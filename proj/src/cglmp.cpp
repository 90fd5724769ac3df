#include "spinbell/bell.hpp"

#include <cmath>
#include <numbers>

namespace spinbell {

using nlohmann::json;
using std::numbers::pi;

namespace {

int mod(int a, int d) { return ((a % d) + d) % d; }

// P(X = Y + k) from a joint table P(X = x, Y = y)
double shifted(const Eigen::MatrixXd& P, int k, bool transpose) {
  const int d = static_cast<int>(P.rows());
  double s = 0.0;
  for (int y = 0; y < d; ++y) s += transpose ? P(y, mod(y + k, d)) : P(mod(y + k, d), y);
  return s;
}

}  // namespace

CGLMPUnitaries cglmp_unitaries(const CGLMPSettings& s) {
  if (s.d < 2) throw std::invalid_argument("CGLMP dimension must be >= 2");
  CGLMPUnitaries u;
  const double norm = 1.0 / std::sqrt(static_cast<double>(s.d));
  for (int i = 0; i < 2; ++i) {
    u.A[i] = Mat(s.d, s.d);
    u.B[i] = Mat(s.d, s.d);
    for (int k = 0; k < s.d; ++k)
      for (int l = 0; l < s.d; ++l) {
        u.A[i](k, l) = norm * std::polar(1.0, 2 * pi * l * (s.alphas[i] + k) / s.d);
        u.B[i](k, l) = norm * std::polar(1.0, 2 * pi * l * (s.betas[i] - k) / s.d);
      }
  }
  return u;
}

void ProbabilityTable::validate(double tol) const {
  for (const auto& p : P) {
    if (p.rows() == 0 || p.rows() != p.cols()) throw std::invalid_argument("probability tables must be square");
    if (p.minCoeff() < -tol) throw std::invalid_argument("negative joint probability");
    if (std::abs(p.sum() - 1.0) > tol) throw std::invalid_argument("joint probabilities do not sum to 1");
  }
}

ProbabilityTable cglmp_probabilities(const std::array<Mat, 4>& rhos) {
  ProbabilityTable t;
  for (int k = 0; k < 4; ++k) {
    const Mat& r = rhos[k];
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(r.rows()))));
    if (d * d != r.rows() || r.cols() != r.rows()) throw std::invalid_argument("expected a two-qudit density matrix");
    t.P[k] = Eigen::MatrixXd(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const double p = r(a * d + b, a * d + b).real();
        if (p < -1e-7) throw std::invalid_argument("negative population in rotated state");
        t.P[k](a, b) = std::max(p, 0.0);
      }
    const double sum = t.P[k].sum();
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("rotated state is not normalized");
    t.P[k] /= sum;
  }
  return t;
}

ProbabilityTable cglmp_ideal_probabilities(const CGLMPSettings& s) {
  ProbabilityTable t;
  const int d = s.d;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::MatrixXd P(d, d);
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const double sn = std::sin(pi * (k - l + s.alphas[a] + s.betas[b]) / d);
          P(k, l) = 1.0 / (2.0 * d * d * d * sn * sn);
        }
      t.P[2 * a + b] = P;
    }
  return t;
}

double cglmp_functional(const ProbabilityTable& t) {
  t.validate(1e-6);
  const int d = static_cast<int>(t.P[0].rows());
  const auto& A1B1 = t.P[0];
  const auto& A1B2 = t.P[1];
  const auto& A2B1 = t.P[2];
  const auto& A2B2 = t.P[3];
  double I = 0.0;
  for (int k = 0; k < d / 2; ++k) {
    const double c = 1.0 - 2.0 * k / (d - 1);
    const double plus = shifted(A1B1, k, false) + shifted(A2B1, k + 1, true) + shifted(A2B2, k, false) +
                        shifted(A1B2, k, true);
    const double minus = shifted(A1B1, -k - 1, false) + shifted(A2B1, -k, true) + shifted(A2B2, -k - 1, false) +
                         shifted(A1B2, -k - 1, true);
    I += c * (plus - minus);
  }
  return I;
}

double cglmp_classical_bound(int d) {
  double best = -1e300;
  for (int a1 = 0; a1 < d; ++a1)
    for (int a2 = 0; a2 < d; ++a2)
      for (int b1 = 0; b1 < d; ++b1)
        for (int b2 = 0; b2 < d; ++b2) {
          ProbabilityTable t;
          const int A[2] = {a1, a2}, B[2] = {b1, b2};
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              t.P[2 * a + b] = Eigen::MatrixXd::Zero(d, d);
              t.P[2 * a + b](A[a], B[b]) = 1.0;
            }
          best = std::max(best, cglmp_functional(t));
        }
  return best;
}

Vec max_entangled(int d) {
  Vec v = Vec::Zero(d * d);
  for (int m = 0; m < d; ++m) v(m * d + m) = 1.0 / std::sqrt(static_cast<double>(d));
  return v;
}

json to_json(const ProbabilityTable& t) {
  static const char* names[4] = {"A1B1", "A1B2", "A2B1", "A2B2"};
  json j;
  for (int k = 0; k < 4; ++k) {
    json rows = json::array();
    for (Eigen::Index a = 0; a < t.P[k].rows(); ++a) {
      json r = json::array();
      for (Eigen::Index b = 0; b < t.P[k].cols(); ++b) r.push_back(t.P[k](a, b));
      rows.push_back(r);
    }
    j[names[k]] = rows;
  }
  return j;
}

}  // namespace spinbell
