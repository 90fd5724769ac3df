#pragma once

#include "spinbell/qspace.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinbell {

namespace units {
inline constexpr double two_pi = 6.283185307179586;
inline constexpr double mu_B = 13.9962449 * two_pi;    // rad/ns per tesla
inline constexpr double mu_N = 7.6225932e-3 * two_pi;  // rad/ns per tesla
inline constexpr double meV = 241.799050 * two_pi;     // rad/ns
inline constexpr double MHz = 1e-3 * two_pi;           // rad/ns
inline constexpr double gauss = 1e-4;                  // tesla

inline double mhz_to_radns(double f) { return f * MHz; }
inline double radns_to_mhz(double w) { return w / MHz; }
inline double mev_to_radns(double e) { return e * meV; }
}  // namespace units

struct DimerParams {
  std::array<double, 3> gS{2.9, 2.9, 4.3};
  double gI = -0.2592;
  double A_par_MHz = -883.0;
  double A_perp_MHz = -628.0;
  double p_MHz = -66.0;
  double Bz_T = 0.3;
  void validate() const;
};

struct TrimerParams {
  double g1z = 2.0, g2z = 4.3, g3z = 1.95;
  // transverse components used by the drive operator
  double g1y = 2.0, g2y = 2.9, g3y = 1.95;
  double J12_meV = 5e-3, J23_meV = 3e-3;
  double D1_meV = -3e-2, D3_meV = -2e-2;
  double Bz_T = 1.3;
  void validate() const;
};

// Strict ingestion: unknown keys are rejected, every key carries its unit.
DimerParams dimer_params_from_json(const nlohmann::json& j);
TrimerParams trimer_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DimerParams& p);
nlohmann::json to_json(const TrimerParams& p);

struct DriveOperator {
  std::string axis;
  Mat op;  // rad/ns per tesla, product basis
};

class AmbiguousLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HamiltonianModel {
 public:
  HamiltonianModel(SpinSystem system, Mat H0, std::vector<DriveOperator> drives);

  const SpinSystem& system() const { return system_; }
  const Mat& H0() const { return H0_; }
  const std::vector<DriveOperator>& drives() const { return drives_; }
  const DriveOperator& drive(const std::string& axis) const;
  int dim() const { return system_.total_dim(); }

  // ascending energies, eigenvector columns with the dominant component real positive
  const RVec& energies() const { return energies_; }
  const Mat& eigenvectors() const { return vectors_; }
  double dominant_weight(int eig) const { return weight_[eig]; }
  int label_of(int eig) const { return label_[eig]; }  // -1 if below the 0.5 threshold

  // eigen index carrying product label `product_index`
  int eigen_index(int product_index) const;
  bool fully_labeled() const;

  // Labeled basis: column k is the eigenstate dominated by product state k.
  RVec labeled_energies() const;
  Mat labeled_basis() const;
  Mat drive_labeled(const std::string& axis = "y") const;

 private:
  SpinSystem system_;
  Mat H0_;
  std::vector<DriveOperator> drives_;
  RVec energies_;
  Mat vectors_;
  std::vector<double> weight_;
  std::vector<int> label_;
  std::vector<int> eig_of_label_;
};

HamiltonianModel build_dimer(const DimerParams& p = {});
HamiltonianModel build_trimer(const TrimerParams& p = {});

struct Transition {
  double omega;  // E_j - E_i, rad/ns
  cplx element;  // <i|M_axis|j>, rad/ns per tesla
};

Transition transition(const HamiltonianModel& model, int i, int j, const std::string& axis = "y");

struct LevelTable {
  std::vector<double> fields_T;
  std::vector<RVec> energies;  // rad/ns, ascending per field
  void write_csv(std::ostream& os) const;
};

LevelTable level_diagram(const std::function<HamiltonianModel(double)>& builder, double bmin_T, double bmax_T, int n);

}  // namespace spinbell
