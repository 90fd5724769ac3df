#include "spinbell/fit.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_multifit_nlinear.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <utility>

namespace spinbell {

namespace {

using Data = std::vector<std::pair<double, double>>;

// parameters (M0, k) with k = 2 / T2
int residual_f(const gsl_vector* x, void* p, gsl_vector* f) {
  const auto& d = *static_cast<const Data*>(p);
  const double M0 = gsl_vector_get(x, 0), k = gsl_vector_get(x, 1);
  for (std::size_t i = 0; i < d.size(); ++i) gsl_vector_set(f, i, M0 * std::exp(-k * d[i].first) - d[i].second);
  return GSL_SUCCESS;
}

int residual_df(const gsl_vector* x, void* p, gsl_matrix* J) {
  const auto& d = *static_cast<const Data*>(p);
  const double M0 = gsl_vector_get(x, 0), k = gsl_vector_get(x, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = std::exp(-k * d[i].first);
    gsl_matrix_set(J, i, 0, e);
    gsl_matrix_set(J, i, 1, -M0 * d[i].first * e);
  }
  return GSL_SUCCESS;
}

}  // namespace

DecayFit fit_decay(const Data& data) {
  if (data.size() < 3) throw std::invalid_argument("fit_decay needs at least 3 points");
  double tmin = data[0].first, tmax = data[0].first;
  for (const auto& [t, m] : data) {
    if (!(t >= 0.0) || !std::isfinite(t) || !std::isfinite(m)) throw std::invalid_argument("fit_decay needs finite tau >= 0");
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  if (tmax - tmin <= 0.0) throw std::invalid_argument("fit_decay: all delays are equal");

  // log-linear start on the positive points
  double k0 = 1.0 / (tmax - tmin), M00 = data[0].second;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [t, m] : data)
      if (m > 0) {
        sx += t;
        sy += std::log(m);
        sxx += t * t;
        sxy += t * std::log(m);
        ++n;
      }
    const double den = n * sxx - sx * sx;
    if (n >= 2 && den > 0) {
      const double slope = (n * sxy - sx * sy) / den;
      k0 = std::max(-slope, 1e-6 / (tmax - tmin));
      M00 = std::exp((sy - slope * sx) / n);
    }
  }

  Data copy = data;
  gsl_multifit_nlinear_fdf fdf{};
  fdf.f = residual_f;
  fdf.df = residual_df;
  fdf.n = data.size();
  fdf.p = 2;
  fdf.params = &copy;
  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  gsl_multifit_nlinear_workspace* w = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, data.size(), 2);
  gsl_vector* x0 = gsl_vector_alloc(2);
  gsl_vector_set(x0, 0, M00);
  gsl_vector_set(x0, 1, k0);
  gsl_multifit_nlinear_init(x0, &fdf, w);
  int info = 0;
  gsl_multifit_nlinear_driver(500, 1e-12, 1e-12, 1e-12, nullptr, nullptr, &info, w);
  const gsl_vector* x = gsl_multifit_nlinear_position(w);
  const double M0 = gsl_vector_get(x, 0), k = gsl_vector_get(x, 1);
  double chi2 = 0.0;
  gsl_blas_ddot(gsl_multifit_nlinear_residual(w), gsl_multifit_nlinear_residual(w), &chi2);
  gsl_vector_free(x0);
  gsl_multifit_nlinear_free(w);

  if (!std::isfinite(k) || !std::isfinite(M0)) throw FitRejected("fit_decay: fit diverged");
  if (k * (tmax - tmin) < 1e-6)
    throw FitRejected("fit_decay: no decay over the sampled window, T2 is unbounded (k = " + std::to_string(k) + " /us)");
  DecayFit out;
  out.M0 = M0;
  out.T2_us = 2.0 / k;
  out.residual = std::sqrt(chi2 / data.size());
  out.points = static_cast<int>(data.size());
  return out;
}

std::vector<std::pair<double, double>> read_decay_csv(std::istream& is) {
  Data out;
  std::string line;
  int lineno = 0;
  bool header_allowed = true;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t, m;
    if (!(ls >> t >> m)) {
      if (std::exchange(header_allowed, false)) continue;  // header
      throw std::invalid_argument("decay CSV: cannot parse line " + std::to_string(lineno));
    }
    header_allowed = false;
    out.emplace_back(t, m);
  }
  return out;
}

}  // namespace spinbell
