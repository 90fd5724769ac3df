#include "spinbell/model.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace spinbell {

using nlohmann::json;

void DimerParams::validate() const {
  if (!(Bz_T >= 0.0) || !std::isfinite(Bz_T)) throw std::invalid_argument("DimerParams.Bz_T must be finite and >= 0");
  for (double v : {gS[0], gS[1], gS[2], gI, A_par_MHz, A_perp_MHz, p_MHz})
    if (!std::isfinite(v)) throw std::invalid_argument("DimerParams contains a non-finite value");
}

void TrimerParams::validate() const {
  if (!(Bz_T >= 0.0) || !std::isfinite(Bz_T)) throw std::invalid_argument("TrimerParams.Bz_T must be finite and >= 0");
  for (double v : {g1z, g2z, g3z, g1y, g2y, g3y, J12_meV, J23_meV, D1_meV, D3_meV})
    if (!std::isfinite(v)) throw std::invalid_argument("TrimerParams contains a non-finite value");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  std::vector<std::string> bad;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) bad.push_back(it.key());
  if (!bad.empty()) {
    std::string msg = std::string(what) + ": unknown keys";
    for (auto& b : bad) msg += " '" + b + "'";
    throw std::invalid_argument(msg);
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

DimerParams dimer_params_from_json(const json& j) {
  reject_unknown(j, {"gS", "gI", "A_par_MHz", "A_perp_MHz", "p_MHz", "Bz_T"}, "dimer params");
  DimerParams p;
  if (j.contains("gS")) {
    auto v = j.at("gS").get<std::vector<double>>();
    if (v.size() != 3) throw std::invalid_argument("dimer params: gS needs three components");
    p.gS = {v[0], v[1], v[2]};
  }
  read_if(j, "gI", p.gI);
  read_if(j, "A_par_MHz", p.A_par_MHz);
  read_if(j, "A_perp_MHz", p.A_perp_MHz);
  read_if(j, "p_MHz", p.p_MHz);
  read_if(j, "Bz_T", p.Bz_T);
  p.validate();
  return p;
}

TrimerParams trimer_params_from_json(const json& j) {
  reject_unknown(j,
                 {"g1z", "g2z", "g3z", "g1y", "g2y", "g3y", "J12_meV", "J23_meV", "D1_meV", "D3_meV", "Bz_T"},
                 "trimer params");
  TrimerParams p;
  read_if(j, "g1z", p.g1z);
  read_if(j, "g2z", p.g2z);
  read_if(j, "g3z", p.g3z);
  read_if(j, "g1y", p.g1y);
  read_if(j, "g2y", p.g2y);
  read_if(j, "g3y", p.g3y);
  read_if(j, "J12_meV", p.J12_meV);
  read_if(j, "J23_meV", p.J23_meV);
  read_if(j, "D1_meV", p.D1_meV);
  read_if(j, "D3_meV", p.D3_meV);
  read_if(j, "Bz_T", p.Bz_T);
  p.validate();
  return p;
}

json to_json(const DimerParams& p) {
  return {{"gS", {p.gS[0], p.gS[1], p.gS[2]}}, {"gI", p.gI},       {"A_par_MHz", p.A_par_MHz},
          {"A_perp_MHz", p.A_perp_MHz},       {"p_MHz", p.p_MHz}, {"Bz_T", p.Bz_T}};
}

json to_json(const TrimerParams& p) {
  return {{"g1z", p.g1z},         {"g2z", p.g2z},         {"g3z", p.g3z},       {"g1y", p.g1y},
          {"g2y", p.g2y},         {"g3y", p.g3y},         {"J12_meV", p.J12_meV}, {"J23_meV", p.J23_meV},
          {"D1_meV", p.D1_meV},   {"D3_meV", p.D3_meV},   {"Bz_T", p.Bz_T}};
}

HamiltonianModel::HamiltonianModel(SpinSystem system, Mat H0, std::vector<DriveOperator> drives)
    : system_(std::move(system)), H0_(std::move(H0)), drives_(std::move(drives)) {
  const int d = system_.total_dim();
  if (H0_.rows() != d || H0_.cols() != d) throw std::invalid_argument("H0 dimension does not match the spin system");
  if (!is_hermitian(H0_, 1e-12)) throw std::invalid_argument("H0 is not Hermitian");
  for (const auto& dr : drives_)
    if (dr.op.rows() != d || !is_hermitian(dr.op, 1e-12))
      throw std::invalid_argument("drive operator '" + dr.axis + "' has wrong dimension or is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H0_ + H0_.adjoint()));
  energies_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
  weight_.assign(d, 0.0);
  label_.assign(d, -1);
  eig_of_label_.assign(d, -1);
  for (int k = 0; k < d; ++k) {
    Eigen::Index p;
    vectors_.col(k).cwiseAbs2().maxCoeff(&p);
    const cplx v = vectors_(p, k);
    vectors_.col(k) *= std::abs(v) / v;
    weight_[k] = std::norm(vectors_(p, k));
    if (weight_[k] > 0.5) label_[k] = static_cast<int>(p);
  }
  // ties (impossible above 0.5 for orthonormal columns) go to the lower energy
  for (int k = 0; k < d; ++k)
    if (label_[k] >= 0 && eig_of_label_[label_[k]] < 0) eig_of_label_[label_[k]] = k;
}

const DriveOperator& HamiltonianModel::drive(const std::string& axis) const {
  for (const auto& d : drives_)
    if (d.axis == axis) return d;
  throw std::invalid_argument("model has no drive operator along axis '" + axis + "'");
}

int HamiltonianModel::eigen_index(int product_index) const {
  if (product_index < 0 || product_index >= dim()) throw std::invalid_argument("product label out of range");
  const int k = eig_of_label_[product_index];
  if (k < 0) {
    std::ostringstream os;
    os << "no eigenstate has dominant character > 0.5 on product state " << product_index;
    throw AmbiguousLabel(os.str());
  }
  return k;
}

bool HamiltonianModel::fully_labeled() const {
  for (int k : eig_of_label_)
    if (k < 0) return false;
  return true;
}

RVec HamiltonianModel::labeled_energies() const {
  RVec e(dim());
  for (int i = 0; i < dim(); ++i) e(i) = energies_(eigen_index(i));
  return e;
}

Mat HamiltonianModel::labeled_basis() const {
  Mat v(dim(), dim());
  for (int i = 0; i < dim(); ++i) v.col(i) = vectors_.col(eigen_index(i));
  return v;
}

Mat HamiltonianModel::drive_labeled(const std::string& axis) const {
  const Mat v = labeled_basis();
  return v.adjoint() * drive(axis).op * v;
}

HamiltonianModel build_dimer(const DimerParams& p) {
  p.validate();
  using namespace units;
  SpinSystem sys({0.5, 2.5});
  const SpinOps S = sys.site_operators(0), I = sys.site_operators(1);
  Mat H = p.gS[2] * mu_B * p.Bz_T * S.z + p.gI * mu_N * p.Bz_T * I.z +
          mhz_to_radns(p.A_perp_MHz) * (S.x * I.x + S.y * I.y) + mhz_to_radns(p.A_par_MHz) * (S.z * I.z) +
          mhz_to_radns(p.p_MHz) * (I.z * I.z);
  std::vector<DriveOperator> drives{{"y", p.gS[1] * mu_B * S.y + p.gI * mu_N * I.y},
                                    {"x", p.gS[0] * mu_B * S.x + p.gI * mu_N * I.x}};
  return HamiltonianModel(sys, H, drives);
}

HamiltonianModel build_trimer(const TrimerParams& p) {
  p.validate();
  using namespace units;
  SpinSystem sys({1.5, 0.5, 1.5});
  const SpinOps s1 = sys.site_operators(0), s2 = sys.site_operators(1), s3 = sys.site_operators(2);
  auto dot = [](const SpinOps& a, const SpinOps& b) -> Mat { return a.x * b.x + a.y * b.y + a.z * b.z; };
  Mat H = mu_B * p.Bz_T * (p.g1z * s1.z + p.g2z * s2.z + p.g3z * s3.z) + mev_to_radns(p.J12_meV) * dot(s1, s2) +
          mev_to_radns(p.J23_meV) * dot(s2, s3) + mev_to_radns(p.D1_meV) * (s1.z * s1.z) +
          mev_to_radns(p.D3_meV) * (s3.z * s3.z);
  std::vector<DriveOperator> drives{{"y", mu_B * (p.g1y * s1.y + p.g2y * s2.y + p.g3y * s3.y)},
                                    {"x", mu_B * (p.g1y * s1.x + p.g2y * s2.x + p.g3y * s3.x)}};
  return HamiltonianModel(sys, H, drives);
}

Transition transition(const HamiltonianModel& model, int i, int j, const std::string& axis) {
  const int a = model.eigen_index(i), b = model.eigen_index(j);
  const Mat& v = model.eigenvectors();
  return {model.energies()(b) - model.energies()(a), v.col(a).dot(model.drive(axis).op * v.col(b))};
}

void LevelTable::write_csv(std::ostream& os) const {
  if (energies.empty()) return;
  os << "Bz_T";
  for (Eigen::Index k = 0; k < energies.front().size(); ++k) os << ",E" << (k + 1) << "_GHz";
  os << "\n" << std::setprecision(12);
  for (std::size_t r = 0; r < fields_T.size(); ++r) {
    os << fields_T[r];
    for (Eigen::Index k = 0; k < energies[r].size(); ++k) os << "," << energies[r](k) / units::two_pi;
    os << "\n";
  }
}

LevelTable level_diagram(const std::function<HamiltonianModel(double)>& builder, double bmin_T, double bmax_T, int n) {
  if (n < 2) throw std::invalid_argument("level_diagram needs at least 2 points");
  if (!(bmax_T > bmin_T)) throw std::invalid_argument("level_diagram: empty field range");
  LevelTable t;
  for (int k = 0; k < n; ++k) {
    const double b = bmin_T + (bmax_T - bmin_T) * k / (n - 1);
    t.fields_T.push_back(b);
    Eigen::SelfAdjointEigenSolver<Mat> es(builder(b).H0(), Eigen::EigenvaluesOnly);
    t.energies.push_back(es.eigenvalues());
  }
  return t;
}

}  // namespace spinbell
