#include "spinbell/bell.hpp"
#include "spinbell/dynamics.hpp"
#include "spinbell/fit.hpp"
#include "spinbell/grape.hpp"
#include "spinbell/harness.hpp"
#include "spinbell/pulses.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace spinbell {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json t2_value(const std::optional<double>& t) { return t ? json(*t) : json(nullptr); }

std::optional<double> us_to_ns(const std::optional<double>& t) {
  if (!t) return std::nullopt;
  return *t * 1000.0;
}

std::vector<json> numbers(const std::vector<double>& v) { return {v.begin(), v.end()}; }

std::vector<json> t2_axis(const T2Grid& g) {
  std::vector<json> out;
  for (const auto& t : g) out.push_back(t2_value(t));
  return out;
}

// row-major, last axis fastest
std::vector<std::vector<std::size_t>> grid_indices(const std::vector<std::vector<json>>& axes) {
  std::vector<std::vector<std::size_t>> out(1);
  for (const auto& ax : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : out)
      for (std::size_t i = 0; i < ax.size(); ++i) {
        next.push_back(prefix);
        next.back().push_back(i);
      }
    out = std::move(next);
  }
  return out;
}

// Fills r.cells by calling fn(index tuple, cell) on the worker pool.
void sweep(SweepResult& r, int workers, const std::function<void(const std::vector<std::size_t>&, SweepCell&)>& fn) {
  const auto idx = grid_indices(r.axis_values);
  r.cells.assign(idx.size(), {});
  parallel_for(idx.size(), workers, [&](std::size_t i) {
    const auto t0 = Clock::now();
    SweepCell& c = r.cells[i];
    for (std::size_t a = 0; a < idx[i].size(); ++a) c.axes.push_back(r.axis_values[a][idx[i][a]]);
    fn(idx[i], c);
    c.wall_s = seconds_since(t0);
  });
}

PulseSequence load_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence file '" + path + "'");
  return PulseSequence::from_json(json::parse(in));
}

std::vector<JumpOperator> dimer_jumps(const HamiltonianModel& dimer, const std::optional<double>& T2e_us,
                                      const std::optional<double>& T2n_us) {
  if (!T2e_us && !T2n_us) return {};
  return dephasing_jumps(dimer.system(), {us_to_ns(T2e_us), us_to_ns(T2n_us)});
}

// The noiseless column switches every channel off, the ancilla included.
std::vector<JumpOperator> trimer_jumps(const HamiltonianModel& tri, const std::optional<double>& T2_us,
                                       const std::optional<double>& T2_anc_us) {
  if (!T2_us) return {};
  return dephasing_jumps(tri.system(), {us_to_ns(T2_us), us_to_ns(T2_anc_us), us_to_ns(T2_us)});
}

const std::array<const char*, 4> kSettingNames = {"A1B1", "A1B2", "A2B1", "A2B2"};
const std::array<int, 8> kComputational = {1, 2, 3, 4, 7, 8, 9, 10};

Vec lift_dimer(const Vec& v8) {
  Vec v = Vec::Zero(12);
  for (int i = 0; i < 8; ++i) v(kComputational[i]) = v8(i);
  return v;
}

Vec chsh_target8() {
  Vec psi = Vec::Zero(8);
  psi(0) = psi(2) = psi(6) = psi(7) = 0.5;
  return psi;
}

struct GrapeStage {
  CHSHResult chsh;
  std::array<Mat, 4> rotations;
  std::array<GrapeProblem, 4> problems;
  std::array<GrapeResult, 4> results;
  std::array<PulseSequence, 4> sequences;
};

GrapeStage run_grape_stage(const HamiltonianModel& dimer, const ExperimentConfig& cfg, SweepResult& out) {
  GrapeStage g;
  g.chsh = chsh_maximize(chsh_target8());
  g.rotations = chsh_rotations(g.chsh);
  GrapeConfig gc;
  gc.max_iterations = cfg.grape.max_iterations;
  gc.target_fidelity = cfg.grape.target_fidelity;
  parallel_for(4, cfg.workers, [&](std::size_t k) {
    g.problems[k] = dimer_grape_problem(dimer, g.rotations[k], cfg.grape.segments, cfg.grape.duration_ns, cfg.grape.bound_G);
    g.results[k] = grape_optimize_seeded(g.problems[k], cfg.seed + k, gc, cfg.grape.accept_fidelity, cfg.grape.max_restarts);
    g.sequences[k] = grape_sequence(g.problems[k], g.results[k].amplitudes);
  });
  json runs = json::object();
  for (int k = 0; k < 4; ++k) {
    const auto& r = g.results[k];
    runs[kSettingNames[k]] = {{"fidelity", r.fidelity},     {"iterations", r.iterations}, {"restarts", r.restarts},
                              {"converged", r.converged},   {"stop_reason", r.stop_reason}, {"seed", r.seed},
                              {"max_amplitude_G", r.amplitudes.cwiseAbs().maxCoeff()}};
    std::ostringstream os;
    write_amplitudes_csv(os, g.problems[k], r.amplitudes);
    out.tables[std::string("grape_") + kSettingNames[k]] = os.str();
  }
  out.extra["grape"] = runs;
  out.extra["chsh"] = to_json(g.chsh);
  return g;
}

void finish_setup(SweepResult& r, const ExperimentConfig& cfg) {
  r.kind = cfg.kind;
  r.name = cfg.name;
  r.config_hash = config_hash(cfg.source);
  r.seed = cfg.seed;
  r.extra = json::object();
}

void run_chsh_prep(const ExperimentConfig& cfg, SweepResult& r) {
  const HamiltonianModel dimer = build_dimer(cfg.dimer);
  std::optional<PulseSequence> custom;
  if (cfg.sequence_file) custom = load_sequence(*cfg.sequence_file);
  if (!custom) {
    r.axis_names.push_back("B1_G");
    r.axis_values.push_back(numbers(cfg.B1_G));
  }
  r.axis_names.push_back("T2e_us");
  r.axis_values.push_back(t2_axis(cfg.T2_us));
  r.metric_names = {"fidelity", "duration_ns"};
  // initial and target states do not depend on the amplitude
  const Protocol ref = prep_chsh_state(dimer, {custom ? 25.0 : cfg.B1_G.front()});
  sweep(r, cfg.workers, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    const std::size_t it = custom ? 0 : 1;
    const PulseSequence seq = custom ? *custom : prep_chsh_state(dimer, {cfg.B1_G[ix[0]]}).sequence;
    const auto lm = LindbladModel::from_hamiltonian(dimer, dimer_jumps(dimer, cfg.T2_us[ix[it]], cfg.T2n_us));
    const Mat rho = lindblad_propagate(lm, QState::from_ket(ref.initial), seq, cfg.propagation);
    c.metrics["fidelity"] = fidelity(rho, ref.target);
    c.metrics["duration_ns"] = seq.end_time();
  });
  r.extra["steps"] = ref.steps;
}

void run_chsh_bell(const ExperimentConfig& cfg, SweepResult& r) {
  const HamiltonianModel dimer = build_dimer(cfg.dimer);
  const GrapeStage g = run_grape_stage(dimer, cfg, r);
  const Vec psi8 = chsh_target8();
  std::array<double, 4> exact{};
  for (int k = 0; k < 4; ++k) exact[k] = chsh_term_measurement(psi8, g.chsh, k / 2, k % 2);
  r.extra["chsh_ideal"] = g.chsh.value;
  r.extra["chsh_exact_terms"] = exact;
  r.extra["chsh_classical_bound"] = chsh_classical_bound();

  r.axis_names = {"B1_G", "T2e_us"};
  r.axis_values = {numbers(cfg.B1_G), t2_axis(cfg.T2_us)};
  r.metric_names = {"O_bell", "prep_fidelity", "O11", "O12", "O21", "O22"};
  for (const char* s : kSettingNames) r.metric_names.push_back(std::string("F_") + s);
  const Protocol ref = prep_chsh_state(dimer, {cfg.B1_G.front()});
  const auto noiseless = LindbladModel::from_hamiltonian(dimer);
  sweep(r, cfg.workers, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    const Protocol prep = prep_chsh_state(dimer, {cfg.B1_G[ix[0]]});
    const auto lm = LindbladModel::from_hamiltonian(dimer, dimer_jumps(dimer, cfg.T2_us[ix[1]], cfg.T2n_us));
    const Mat rho = lindblad_propagate(lm, QState::from_ket(ref.initial), prep.sequence, cfg.propagation);
    std::array<Mat, 4> rhos;
    for (int k = 0; k < 4; ++k) {
      rhos[k] = lindblad_propagate(cfg.grape_stage_dephasing ? lm : noiseless, QState::from_density(rho), g.sequences[k],
                                   cfg.propagation);
      c.metrics[std::string("F_") + kSettingNames[k]] = fidelity(rhos[k], lift_dimer(g.rotations[k] * psi8));
    }
    const CHSHTerms t = chsh_diagonal_terms(rhos);
    c.metrics["O_bell"] = t.combination;
    c.metrics["prep_fidelity"] = fidelity(rho, ref.target);
    c.metrics["O11"] = t.O[0];
    c.metrics["O12"] = t.O[1];
    c.metrics["O21"] = t.O[2];
    c.metrics["O22"] = t.O[3];
  });
}

void run_grape_rotations(const ExperimentConfig& cfg, SweepResult& r) {
  const HamiltonianModel dimer = build_dimer(cfg.dimer);
  // the four optimizations already use the worker pool
  const GrapeStage g = run_grape_stage(dimer, cfg, r);
  r.extra["chsh_ideal"] = g.chsh.value;
  r.axis_names = {"setting"};
  r.axis_values = {{"A1B1", "A1B2", "A2B1", "A2B2"}};
  r.metric_names = {"fidelity", "iterations", "restarts", "max_amplitude_G", "duration_ns"};
  sweep(r, 1, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    const auto& res = g.results[ix[0]];
    c.metrics["fidelity"] = res.fidelity;
    c.metrics["iterations"] = res.iterations;
    c.metrics["restarts"] = res.restarts;
    c.metrics["max_amplitude_G"] = res.amplitudes.cwiseAbs().maxCoeff();
    c.metrics["duration_ns"] = g.sequences[ix[0]].end_time();
  });
}

void run_cglmp_prep(const ExperimentConfig& cfg, SweepResult& r) {
  const HamiltonianModel tri = build_trimer(cfg.trimer);
  std::optional<PulseSequence> custom;
  if (cfg.sequence_file) custom = load_sequence(*cfg.sequence_file);
  if (!custom) {
    r.axis_names = {"group1_G", "group2_G"};
    r.axis_values = {numbers(cfg.group1_G), numbers(cfg.group2_G)};
  }
  r.axis_names.push_back("T2_us");
  r.axis_values.push_back(t2_axis(cfg.T2_us));
  r.metric_names = {"fidelity", "duration_ns", "ancilla_return"};
  const Protocol ref = prep_cglmp_state(tri, cfg.prep_group1_G, cfg.prep_group2_G);
  // population left with the ancilla at -1/2
  const Mat anc_down = [&] {
    Mat P = Mat::Zero(tri.dim(), tri.dim());
    for (int i = 0; i < tri.dim(); ++i)
      if (tri.system().m_of(i)[1] < 0) P(i, i) = 1.0;
    return P;
  }();
  sweep(r, cfg.workers, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    const std::size_t it = custom ? 0 : 2;
    const PulseSequence seq =
        custom ? *custom : prep_cglmp_state(tri, cfg.group1_G[ix[0]], cfg.group2_G[ix[1]]).sequence;
    const auto lm = LindbladModel::from_hamiltonian(tri, trimer_jumps(tri, cfg.T2_us[ix[it]], cfg.T2_ancilla_us));
    const Mat rho = lindblad_propagate(lm, QState::from_ket(ref.initial), seq, cfg.propagation);
    c.metrics["fidelity"] = fidelity(rho, ref.target);
    c.metrics["duration_ns"] = seq.end_time();
    c.metrics["ancilla_return"] = (rho * anc_down).trace().real();
  });
  r.extra["steps"] = ref.steps;
}

void run_cglmp_bell(const ExperimentConfig& cfg, SweepResult& r) {
  const HamiltonianModel tri = build_trimer(cfg.trimer);
  const Protocol prep = prep_cglmp_state(tri, cfg.prep_group1_G, cfg.prep_group2_G);
  const std::vector<int> qudits = {0, 2};

  // exact gates on the ideal state
  {
    const auto ms = cglmp_measurement_sequences(tri, cfg.B1_G.front());
    std::array<Mat, 4> rhos;
    for (int k = 0; k < 4; ++k) {
      const Vec v = ms[k].exact_unitary * prep.target;
      rhos[k] = partial_trace(v * v.adjoint(), tri.system(), qudits);
    }
    r.extra["cglmp_ideal"] = cglmp_functional(cglmp_probabilities(rhos));
    r.extra["cglmp_ideal_closed_form"] = cglmp_functional(cglmp_ideal_probabilities());
    r.extra["cglmp_classical_bound"] = cglmp_classical_bound();
  }

  r.axis_names = {"B1_G", "T2_us"};
  r.axis_values = {numbers(cfg.B1_G), t2_axis(cfg.T2_us)};
  r.metric_names = {"I", "prep_fidelity", "duration_ns"};
  for (const char* s : kSettingNames) r.metric_names.push_back(std::string("F_") + s);

  // the prepared state only depends on T2
  std::vector<Mat> prepared(cfg.T2_us.size());
  std::vector<LindbladModel> models;
  for (const auto& t2 : cfg.T2_us) models.push_back(LindbladModel::from_hamiltonian(tri, trimer_jumps(tri, t2, cfg.T2_ancilla_us)));
  parallel_for(prepared.size(), cfg.workers, [&](std::size_t i) {
    prepared[i] = lindblad_propagate(models[i], QState::from_ket(prep.initial), prep.sequence, cfg.propagation);
  });
  json prep_fid = json::array();
  for (std::size_t i = 0; i < prepared.size(); ++i) prep_fid.push_back(fidelity(prepared[i], prep.target));
  r.extra["prep_fidelity"] = prep_fid;
  r.extra["prep_duration_ns"] = prep.sequence.end_time();

  sweep(r, cfg.workers, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    const auto ms = cglmp_measurement_sequences(tri, cfg.B1_G[ix[0]]);
    std::array<Mat, 4> rhos;
    double longest = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Mat out = lindblad_propagate(models[ix[1]], QState::from_density(prepared[ix[1]]), ms[k].sequence, cfg.propagation);
      c.metrics[std::string("F_") + kSettingNames[k]] = fidelity(out, ms[k].exact_unitary * prep.target);
      rhos[k] = partial_trace(out, tri.system(), qudits);
      longest = std::max(longest, ms[k].sequence.end_time());
    }
    const ProbabilityTable t = cglmp_probabilities(rhos);
    c.metrics["I"] = cglmp_functional(t);
    c.metrics["prep_fidelity"] = fidelity(prepared[ix[1]], prep.target);
    c.metrics["duration_ns"] = longest;
    c.detail = {{"probabilities", to_json(t)}};
  });
}

void run_level_diagram(const ExperimentConfig& cfg, SweepResult& r) {
  std::function<HamiltonianModel(double)> builder;
  if (cfg.level_system == "dimer")
    builder = [p = cfg.dimer](double b) mutable {
      p.Bz_T = b;
      return build_dimer(p);
    };
  else
    builder = [p = cfg.trimer](double b) mutable {
      p.Bz_T = b;
      return build_trimer(p);
    };
  const LevelTable t = level_diagram(builder, cfg.B_min_T, cfg.B_max_T, cfg.B_points);
  r.axis_names = {"Bz_T"};
  r.axis_values = {numbers(t.fields_T)};
  const int n = t.energies.empty() ? 0 : static_cast<int>(t.energies.front().size());
  for (int k = 0; k < n; ++k) r.metric_names.push_back("E" + std::to_string(k) + "_GHz");
  sweep(r, 1, [&](const std::vector<std::size_t>& ix, SweepCell& c) {
    for (int k = 0; k < n; ++k) c.metrics[r.metric_names[k]] = t.energies[ix[0]](k) / units::two_pi;
  });
}

void run_decay_fit(const ExperimentConfig& cfg, SweepResult& r) {
  std::ifstream in(cfg.decay_csv);
  if (!in) throw std::runtime_error("cannot open decay data '" + cfg.decay_csv + "'");
  const auto data = read_decay_csv(in);
  const DecayFit f = fit_decay(data);
  r.metric_names = {"M0", "T2_us", "residual", "points"};
  sweep(r, 1, [&](const std::vector<std::size_t>&, SweepCell& c) {
    c.metrics = {{"M0", f.M0}, {"T2_us", f.T2_us}, {"residual", f.residual}, {"points", f.points}};
  });
}

}  // namespace

SweepResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  SweepResult r;
  finish_setup(r, cfg);
  switch (cfg.kind) {
    case ExperimentKind::ChshPrep: run_chsh_prep(cfg, r); break;
    case ExperimentKind::ChshBell: run_chsh_bell(cfg, r); break;
    case ExperimentKind::GrapeRotations: run_grape_rotations(cfg, r); break;
    case ExperimentKind::CglmpPrep: run_cglmp_prep(cfg, r); break;
    case ExperimentKind::CglmpBell: run_cglmp_bell(cfg, r); break;
    case ExperimentKind::LevelDiagram: run_level_diagram(cfg, r); break;
    case ExperimentKind::DecayFit: run_decay_fit(cfg, r); break;
  }
  r.wall_s = seconds_since(t0);
  return r;
}

}  // namespace spinbell
