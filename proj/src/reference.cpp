// Published values the report command compares against.
#include "spinbell/harness.hpp"

namespace spinbell {

namespace {

using nlohmann::json;

const std::vector<json> kT2e = {20.0, 10.0, 5.0, 3.0, 2.4, 2.0, 1.0};

PaperTable dimer_prep() {
  PaperTable t{"dimer-prep", "dimer preparation fidelity vs B1 and T2e", "fidelity", "fidelity", {"B1_G", "T2e_us"}, {}};
  const std::vector<std::pair<double, std::vector<double>>> rows = {
      {10, {0.9770, 0.9600, 0.9279, 0.8884, 0.8956, 0.8441, 0.7392}},
      {15, {0.9770, 0.9656, 0.9435, 0.9156, 0.8991, 0.8832, 0.8002}},
      {20, {0.9809, 0.9722, 0.9551, 0.9333, 0.9202, 0.9075, 0.8389}},
      {25, {0.9877, 0.9806, 0.9668, 0.9490, 0.9383, 0.9278, 0.8698}},
      {30, {0.9818, 0.9759, 0.9644, 0.9495, 0.9404, 0.9315, 0.8816}},
      {40, {0.9610, 0.9567, 0.9482, 0.9370, 0.9302, 0.9235, 0.8853}},
      {60, {0.9221, 0.9218, 0.9163, 0.9091, 0.9046, 0.9002, 0.8746}},
  };
  for (const auto& [b1, vals] : rows)
    for (std::size_t i = 0; i < vals.size(); ++i) t.cells[axis_key({b1, kT2e[i]})] = vals[i];
  return t;
}

PaperTable dimer_bell() {
  PaperTable t{"dimer-bell-grape", "CHSH operator with GRAPE measurement pulses", "O_bell", "value", {"B1_G", "T2e_us"}, {}};
  const std::vector<std::pair<double, std::vector<double>>> rows = {
      {15, {2.4606, 2.4327, 2.3584, 2.2689, 2.2167, 2.1673, 1.9253}},
      {20, {2.4872, 2.4534, 2.3857, 2.3019, 2.2537, 2.2074, 1.9758}},
      {25, {2.5630, 2.5299, 2.4664, 2.3876, 2.3413, 2.2972, 2.0732}},
      {30, {2.5392, 2.5090, 2.4523, 2.3788, 2.3362, 2.2960, 2.0878}},
      {40, {2.4675, 2.4396, 2.4109, 2.3181, 2.2785, 2.2403, 2.0427}},
  };
  for (const auto& [b1, vals] : rows)
    for (std::size_t i = 0; i < vals.size(); ++i) t.cells[axis_key({b1, kT2e[i]})] = vals[i];
  return t;
}

PaperTable trimer_prep() {
  PaperTable t{"trimer-prep", "trimer preparation fidelity vs group amplitudes and T2", "fidelity", "fidelity",
               {"group1_G", "group2_G", "T2_us"}, {}};
  const std::vector<json> t2 = {5.0, 10.0, 30.0, nullptr};
  // group 1, group 2, then T2 = 5, 10, 30 us and no dephasing
  const std::vector<std::tuple<double, double, std::vector<double>>> rows = {
      {40, 20, {0.8973, 0.9417, 0.9739, 0.9908}}, {70, 5, {0.7265, 0.8378, 0.9350, 0.9928}},
      {70, 15, {0.8790, 0.9322, 0.9714, 0.9923}}, {70, 20, {0.9011, 0.9434, 0.9739, 0.9898}},
      {70, 25, {0.9098, 0.9449, 0.9699, 0.9829}}, {70, 40, {0.9162, 0.9400, 0.9565, 0.9650}},
      {90, 20, {0.9011, 0.9422, 0.9717, 0.9872}},
  };
  for (const auto& [g1, g2, vals] : rows)
    for (std::size_t i = 0; i < vals.size(); ++i) t.cells[axis_key({g1, g2, t2[i]})] = vals[i];
  return t;
}

PaperTable cglmp_bell() {
  PaperTable t{"cglmp-bell", "CGLMP functional with a common measurement amplitude", "I", "value", {"B1_G", "T2_us"}, {}};
  const std::vector<json> t2 = {nullptr, 30.0, 10.0, 5.0};
  const std::vector<std::pair<double, std::vector<double>>> rows = {
      {40, {2.1687, 2.0910, 2.0173, 1.7544}}, {30, {2.5129, 2.4197, 2.2471, 2.0191}},
      {20, {2.6443, 2.5319, 2.3259, 2.0580}}, {10, {2.7678, 2.6103, 2.3301, 1.9806}},
      {9, {2.7425, 2.5755, 2.2027, 1.9245}},
  };
  for (const auto& [b1, vals] : rows)
    for (std::size_t i = 0; i < vals.size(); ++i) t.cells[axis_key({b1, t2[i]})] = vals[i];
  return t;
}

}  // namespace

const std::vector<PaperTable>& paper_tables() {
  static const std::vector<PaperTable> tables = [] {
    std::vector<PaperTable> v = {dimer_prep(), dimer_bell(), trimer_prep(), cglmp_bell()};
    v.push_back({"chsh-ideal", "ideal CHSH maximum of the target state", "chsh_ideal", "ideal", {}, {{"", 2.64575}}});
    v.push_back({"cglmp-ideal", "ideal CGLMP value, d = 4", "cglmp_ideal", "ideal", {}, {{"", 2.89624}}});
    return v;
  }();
  return tables;
}

const PaperTable& paper_table(const std::string& id) {
  for (const auto& t : paper_tables())
    if (t.id == id) return t;
  throw std::invalid_argument("unknown reference table '" + id + "'");
}

}  // namespace spinbell
