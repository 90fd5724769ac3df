#pragma once

#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

namespace spinbell {

class FitRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// M(tau) = M0 exp(-2 tau / T2), tau in us
struct DecayFit {
  double M0 = 0.0;
  double T2_us = 0.0;
  double residual = 0.0;  // root mean square
  int points = 0;
};

DecayFit fit_decay(const std::vector<std::pair<double, double>>& data);

// Two numeric columns (tau_us, amplitude); a header line and '#' comments are skipped.
std::vector<std::pair<double, double>> read_decay_csv(std::istream& is);

}  // namespace spinbell
