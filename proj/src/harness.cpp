#include "spinbell/harness.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#ifndef SPINBELL_VERSION
#define SPINBELL_VERSION "0.0.0"
#endif

namespace spinbell {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, ExperimentKind> kKinds = {
    {"chsh-prep", ExperimentKind::ChshPrep},     {"chsh-bell", ExperimentKind::ChshBell},
    {"grape-rotations", ExperimentKind::GrapeRotations}, {"cglmp-prep", ExperimentKind::CglmpPrep},
    {"cglmp-bell", ExperimentKind::CglmpBell},   {"level-diagram", ExperimentKind::LevelDiagram},
    {"decay-fit", ExperimentKind::DecayFit},
};

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

// Collects problems while walking a config document.
class Reader {
 public:
  std::vector<std::string> problems;

  void keys(const json& j, const std::string& where, const std::set<std::string>& known) {
    if (!j.is_object()) {
      problems.push_back(where + ": expected an object");
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) problems.push_back(where + "." + it.key() + ": unknown key");
  }

  template <class T>
  void scalar(const json& j, const char* key, const std::string& where, T& out) {
    if (!j.is_object() || !j.contains(key)) return;
    const json& v = j.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        if constexpr (std::is_integral_v<T>) {
          if (!v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("expected an integer");
          if constexpr (std::is_unsigned_v<T>)
            if (v.is_number_integer() && v.get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
        }
      } else {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      problems.push_back(where + "." + key + ": " + e.what());
    }
  }

  void optional_number(const json& j, const char* key, const std::string& where, std::optional<double>& out) {
    if (!j.is_object() || !j.contains(key)) return;
    const json& v = j.at(key);
    if (v.is_null()) out.reset();
    else if (v.is_number()) out = v.get<double>();
    else problems.push_back(where + "." + key + ": expected a number or null");
  }

  // number or array of numbers
  bool grid(const json& j, const char* key, const std::string& where, std::vector<double>& out) {
    if (!j.is_object() || !j.contains(key)) return false;
    const json& v = j.at(key);
    out.clear();
    if (v.is_number()) {
      out.push_back(v.get<double>());
      return true;
    }
    if (!v.is_array()) {
      problems.push_back(where + "." + key + ": expected a number or an array of numbers");
      return true;
    }
    for (const auto& e : v) {
      if (!e.is_number()) {
        problems.push_back(where + "." + key + ": grid entries must be numbers");
        return true;
      }
      out.push_back(e.get<double>());
    }
    return true;
  }

  bool t2_grid(const json& j, const char* key, const std::string& where, T2Grid& out) {
    if (!j.is_object() || !j.contains(key)) return false;
    const json& v = j.at(key);
    out.clear();
    const json arr = v.is_array() ? v : json::array({v});
    for (const auto& e : arr) {
      if (e.is_null()) out.emplace_back(std::nullopt);
      else if (e.is_number()) out.emplace_back(e.get<double>());
      else {
        problems.push_back(where + "." + key + ": entries must be numbers (microseconds) or null");
        return true;
      }
    }
    return true;
  }

  void require_grid(const std::vector<double>& g, bool present, const std::string& name) {
    if (!present) problems.push_back(name + ": required for this experiment");
    else if (g.empty()) problems.push_back(name + ": grid is empty");
    for (double x : g)
      if (!(x > 0.0) || !std::isfinite(x)) {
        problems.push_back(name + ": amplitudes must be finite and > 0");
        break;
      }
  }

  void check_t2(const T2Grid& g, const std::string& name) {
    if (g.empty()) problems.push_back(name + ": grid is empty");
    for (const auto& x : g)
      if (x && (!(*x > 0.0) || !std::isfinite(*x))) {
        problems.push_back(name + ": T2 values must be finite and > 0 (use null for no dephasing)");
        break;
      }
  }
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument("invalid config:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

ExperimentKind parse_kind(const std::string& s) {
  auto it = kKinds.find(s);
  if (it == kKinds.end()) throw std::invalid_argument("unknown experiment '" + s + "'");
  return it->second;
}

std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : kKinds)
    if (kind == k) return name;
  return "?";
}

json apply_overrides(json j, const CliOverrides& over) {
  if (!j.is_object()) return j;
  if (over.workers) j["workers"] = *over.workers;
  if (over.seed) j["seed"] = *over.seed;
  if (over.out_dir) j["output"]["dir"] = *over.out_dir;
  if (over.mode) j["propagation"]["mode"] = *over.mode;
  return j;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  Reader r;
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  r.keys(j, "config",
         {"schema_version", "experiment", "name", "model", "amplitudes", "dephasing", "propagation", "grape",
          "sequence_file", "level_diagram", "decay_fit", "seed", "workers", "output", "paper_table", "tolerances"});

  int version = 0;
  r.scalar(j, "schema_version", "config", version);
  if (!j.contains("schema_version")) r.problems.push_back("config.schema_version: required");
  else if (version != kConfigSchema) r.problems.push_back("config.schema_version: unsupported version " + std::to_string(version));

  std::string kind;
  r.scalar(j, "experiment", "config", kind);
  bool kind_ok = false;
  if (kind.empty()) r.problems.push_back("config.experiment: required (one of chsh-prep, chsh-bell, grape-rotations, "
                                         "cglmp-prep, cglmp-bell, level-diagram, decay-fit)");
  else if (!kKinds.count(kind)) r.problems.push_back("config.experiment: unknown experiment '" + kind + "'");
  else {
    c.kind = kKinds.at(kind);
    kind_ok = true;
  }
  r.scalar(j, "name", "config", c.name);
  if (c.name.empty()) c.name = kind.empty() ? "experiment" : kind;

  if (j.contains("model")) {
    const json& m = j.at("model");
    r.keys(m, "model", {"dimer", "trimer"});
    try {
      if (m.is_object() && m.contains("dimer")) c.dimer = dimer_params_from_json(m.at("dimer"));
    } catch (const std::exception& e) {
      r.problems.push_back(std::string("model.dimer: ") + e.what());
    }
    try {
      if (m.is_object() && m.contains("trimer")) c.trimer = trimer_params_from_json(m.at("trimer"));
    } catch (const std::exception& e) {
      r.problems.push_back(std::string("model.trimer: ") + e.what());
    }
  }

  const json amp = j.value("amplitudes", json::object());
  r.keys(amp, "amplitudes", {"B1_G", "group1_G", "group2_G", "prep_group1_G", "prep_group2_G"});
  const bool has_b1 = r.grid(amp, "B1_G", "amplitudes", c.B1_G);
  const bool has_g1 = r.grid(amp, "group1_G", "amplitudes", c.group1_G);
  const bool has_g2 = r.grid(amp, "group2_G", "amplitudes", c.group2_G);
  r.scalar(amp, "prep_group1_G", "amplitudes", c.prep_group1_G);
  r.scalar(amp, "prep_group2_G", "amplitudes", c.prep_group2_G);

  const json deph = j.value("dephasing", json::object());
  r.keys(deph, "dephasing", {"T2_us", "T2n_us", "T2_ancilla_us", "grape_stage"});
  const bool has_t2 = r.t2_grid(deph, "T2_us", "dephasing", c.T2_us);
  if (!has_t2) c.T2_us = {std::nullopt};
  r.optional_number(deph, "T2n_us", "dephasing", c.T2n_us);
  r.optional_number(deph, "T2_ancilla_us", "dephasing", c.T2_ancilla_us);
  r.scalar(deph, "grape_stage", "dephasing", c.grape_stage_dephasing);
  for (const auto* t : {&c.T2n_us, &c.T2_ancilla_us})
    if (*t && !(**t > 0.0)) r.problems.push_back("dephasing: T2n_us / T2_ancilla_us must be > 0 or null");

  const json prop = j.value("propagation", json::object());
  r.keys(prop, "propagation", {"mode", "phase_reference", "engine", "split_step_ns", "substep_ns", "exact_block_limit"});
  std::string mode = "rotating-wave", phase_ref, engine = "auto";
  r.scalar(prop, "mode", "propagation", mode);
  r.scalar(prop, "phase_reference", "propagation", phase_ref);
  r.scalar(prop, "engine", "propagation", engine);
  r.scalar(prop, "split_step_ns", "propagation", c.propagation.split_step_ns);
  r.scalar(prop, "substep_ns", "propagation", c.propagation.substep_ns);
  r.scalar(prop, "exact_block_limit", "propagation", c.propagation.exact_block_limit);
  try {
    c.propagation.mode = parse_mode(mode);
  } catch (const std::exception& e) {
    r.problems.push_back(std::string("propagation.mode: ") + e.what());
  }
  c.propagation.phase_reference =
      c.propagation.mode == PropagationMode::Lab ? PhaseReference::Absolute : PhaseReference::PulseStart;
  if (!phase_ref.empty()) {
    try {
      c.propagation.phase_reference = parse_phase_reference(phase_ref);
      if (c.propagation.mode == PropagationMode::Lab && c.propagation.phase_reference != PhaseReference::Absolute)
        r.problems.push_back("propagation.phase_reference: lab-frame mode only supports 'absolute'");
    } catch (const std::exception& e) {
      r.problems.push_back(std::string("propagation.phase_reference: ") + e.what());
    }
  }
  if (engine == "auto") c.propagation.engine = Engine::Auto;
  else if (engine == "exact") c.propagation.engine = Engine::Exact;
  else if (engine == "split") c.propagation.engine = Engine::Split;
  else r.problems.push_back("propagation.engine: expected auto, exact or split");
  if (!(c.propagation.split_step_ns > 0.0)) r.problems.push_back("propagation.split_step_ns: must be > 0");
  if (c.propagation.substep_ns < 0.0) r.problems.push_back("propagation.substep_ns: must be >= 0");

  const json gr = j.value("grape", json::object());
  r.keys(gr, "grape",
         {"segments", "duration_ns", "bound_G", "max_iterations", "target_fidelity", "accept_fidelity", "max_restarts"});
  r.scalar(gr, "segments", "grape", c.grape.segments);
  r.scalar(gr, "duration_ns", "grape", c.grape.duration_ns);
  r.scalar(gr, "bound_G", "grape", c.grape.bound_G);
  r.scalar(gr, "max_iterations", "grape", c.grape.max_iterations);
  r.scalar(gr, "target_fidelity", "grape", c.grape.target_fidelity);
  r.scalar(gr, "accept_fidelity", "grape", c.grape.accept_fidelity);
  r.scalar(gr, "max_restarts", "grape", c.grape.max_restarts);
  if (c.grape.segments < 1) r.problems.push_back("grape.segments: must be >= 1");
  if (!(c.grape.duration_ns > 0.0)) r.problems.push_back("grape.duration_ns: must be > 0");
  if (!(c.grape.bound_G > 0.0)) r.problems.push_back("grape.bound_G: must be > 0");
  if (c.grape.max_iterations < 1) r.problems.push_back("grape.max_iterations: must be >= 1");
  if (c.grape.max_restarts < 0) r.problems.push_back("grape.max_restarts: must be >= 0");

  if (j.contains("sequence_file")) {
    std::string f;
    r.scalar(j, "sequence_file", "config", f);
    if (!f.empty()) {
      fs::path p = f;
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      c.sequence_file = p.string();
      if (!fs::exists(p)) r.problems.push_back("config.sequence_file: no such file '" + p.string() + "'");
    }
  }

  const json lv = j.value("level_diagram", json::object());
  r.keys(lv, "level_diagram", {"system", "B_min_T", "B_max_T", "points"});
  r.scalar(lv, "system", "level_diagram", c.level_system);
  r.scalar(lv, "B_min_T", "level_diagram", c.B_min_T);
  r.scalar(lv, "B_max_T", "level_diagram", c.B_max_T);
  r.scalar(lv, "points", "level_diagram", c.B_points);

  const json df = j.value("decay_fit", json::object());
  r.keys(df, "decay_fit", {"csv"});
  r.scalar(df, "csv", "decay_fit", c.decay_csv);
  if (!c.decay_csv.empty()) {
    fs::path p = c.decay_csv;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.decay_csv = p.string();
  }

  r.scalar(j, "seed", "config", c.seed);
  r.scalar(j, "workers", "config", c.workers);
  if (c.workers < 1) r.problems.push_back("config.workers: must be >= 1");

  const json out = j.value("output", json::object());
  r.keys(out, "output", {"dir", "prefix"});
  std::string dir = "results";
  r.scalar(out, "dir", "output", dir);
  c.out_dir = dir;
  r.scalar(out, "prefix", "output", c.prefix);
  if (c.prefix.empty()) c.prefix = c.name;
  if (c.prefix.find('/') != std::string::npos) r.problems.push_back("output.prefix: must be a plain file name");

  if (j.contains("paper_table")) {
    std::string t;
    r.scalar(j, "paper_table", "config", t);
    bool known = false;
    for (const auto& pt : paper_tables()) known = known || pt.id == t;
    if (!known) r.problems.push_back("config.paper_table: unknown table '" + t + "'");
    c.paper_table = t;
  }

  const json tol = j.value("tolerances", json::object());
  r.keys(tol, "tolerances", {"fidelity", "value", "ideal"});
  r.scalar(tol, "fidelity", "tolerances", c.tolerances.fidelity);
  r.scalar(tol, "value", "tolerances", c.tolerances.value);
  r.scalar(tol, "ideal", "tolerances", c.tolerances.ideal);
  for (double t : {c.tolerances.fidelity, c.tolerances.value, c.tolerances.ideal})
    if (!(t >= 0.0)) r.problems.push_back("tolerances: values must be >= 0");

  if (kind_ok) {
    const bool dimer_t2 = c.kind == ExperimentKind::ChshPrep || c.kind == ExperimentKind::ChshBell;
    const bool trimer_t2 = c.kind == ExperimentKind::CglmpPrep || c.kind == ExperimentKind::CglmpBell;
    if (dimer_t2 || trimer_t2) r.check_t2(c.T2_us, "dephasing.T2_us");
    switch (c.kind) {
      case ExperimentKind::ChshPrep:
        if (c.sequence_file) {
          if (has_b1) r.problems.push_back("amplitudes.B1_G: not used when sequence_file is given");
        } else {
          r.require_grid(c.B1_G, has_b1, "amplitudes.B1_G");
        }
        break;
      case ExperimentKind::ChshBell:
      case ExperimentKind::CglmpBell:
        r.require_grid(c.B1_G, has_b1, "amplitudes.B1_G");
        if (c.sequence_file) r.problems.push_back("config.sequence_file: only supported by chsh-prep and cglmp-prep");
        break;
      case ExperimentKind::CglmpPrep:
        if (c.sequence_file) {
          if (has_g1 || has_g2) r.problems.push_back("amplitudes.group1_G/group2_G: not used when sequence_file is given");
        } else {
          r.require_grid(c.group1_G, has_g1, "amplitudes.group1_G");
          r.require_grid(c.group2_G, has_g2, "amplitudes.group2_G");
        }
        break;
      case ExperimentKind::LevelDiagram:
        if (c.level_system != "dimer" && c.level_system != "trimer")
          r.problems.push_back("level_diagram.system: expected dimer or trimer");
        if (!(c.B_max_T > c.B_min_T)) r.problems.push_back("level_diagram: B_max_T must exceed B_min_T");
        if (c.B_min_T < 0.0) r.problems.push_back("level_diagram.B_min_T: must be >= 0");
        if (c.B_points < 2) r.problems.push_back("level_diagram.points: must be >= 2");
        break;
      case ExperimentKind::DecayFit:
        if (c.decay_csv.empty()) r.problems.push_back("decay_fit.csv: required");
        else if (!fs::exists(c.decay_csv)) r.problems.push_back("decay_fit.csv: no such file '" + c.decay_csv + "'");
        break;
      case ExperimentKind::GrapeRotations:
        break;
    }
    if (c.prep_group1_G <= 0.0 || c.prep_group2_G <= 0.0)
      r.problems.push_back("amplitudes.prep_group1_G/prep_group2_G: must be > 0");
  }

  if (!r.problems.empty()) throw ConfigError(r.problems);
  c.source = j;
  return c;
}

ExperimentConfig load_config(const fs::path& file, const CliOverrides& over) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({file.string() + ": " + e.what()});
  }
  return parse_config(apply_overrides(std::move(j), over), file.parent_path());
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

// Worker count and output location do not change the science, so they stay out of the hash.
std::string config_hash(const json& j) {
  json k = j;
  if (k.is_object()) {
    k.erase("workers");
    k.erase("output");
  }
  return sha256_hex(k.dump());
}

std::size_t SweepResult::expected_cells() const {
  std::size_t n = 1;
  for (const auto& a : axis_values) n *= a.size();
  return n;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(1, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

std::string fmt_short(double x) {
  std::ostringstream os;
  os << std::setprecision(5) << x;
  return os.str();
}

std::string fmt_axis(const json& v) {
  if (v.is_null()) return "none";
  if (v.is_number()) return fmt(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string csv_header(const SweepResult& r) {
  return "# spinbell result schema_version=" + std::to_string(kResultSchema) + "\n# experiment=" + to_string(r.kind) +
         " name=" + r.name + "\n# config_hash=" + r.config_hash + "\n";
}

}  // namespace

std::string result_csv(const SweepResult& r) {
  std::ostringstream os;
  os << csv_header(r);
  std::vector<std::string> head = r.axis_names;
  head.insert(head.end(), r.metric_names.begin(), r.metric_names.end());
  os << join(head, ",") << "\n";
  for (const auto& c : r.cells) {
    std::vector<std::string> row;
    for (const auto& a : c.axes) row.push_back(fmt_axis(a));
    for (const auto& m : r.metric_names) {
      auto it = c.metrics.find(m);
      row.push_back(it == c.metrics.end() ? "" : fmt(it->second));
    }
    os << join(row, ",") << "\n";
  }
  return os.str();
}

json result_json(const SweepResult& r, const ExperimentConfig& cfg) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json m = json::object();
    for (const auto& [k, v] : c.metrics) m[k] = std::isfinite(v) ? json(v) : json(nullptr);
    json cell{{"axes", c.axes}, {"metrics", m}, {"wall_s", c.wall_s}};
    if (!c.detail.is_null()) cell["detail"] = c.detail;
    cells.push_back(cell);
  }
  json axes = json::array();
  for (std::size_t i = 0; i < r.axis_names.size(); ++i) axes.push_back({{"name", r.axis_names[i]}, {"values", r.axis_values[i]}});
  json doc{{"schema", "spinbell.result"},
           {"schema_version", kResultSchema},
           {"code_version", code_version()},
           {"experiment", to_string(r.kind)},
           {"name", r.name},
           {"config_hash", r.config_hash},
           {"config", cfg.source},
           {"seed", r.seed},
           {"workers", cfg.workers},
           {"propagation",
            {{"mode", to_string(cfg.propagation.mode)}, {"phase_reference", to_string(cfg.propagation.phase_reference)}}},
           {"tolerances",
            {{"fidelity", cfg.tolerances.fidelity}, {"value", cfg.tolerances.value}, {"ideal", cfg.tolerances.ideal}}},
           {"axes", axes},
           {"metrics", r.metric_names},
           {"cells", cells},
           {"extra", r.extra},
           {"wall_s", r.wall_s},
           {"csv", cfg.prefix + ".csv"}};
  doc["paper_table"] = cfg.paper_table ? json(*cfg.paper_table) : json(nullptr);
  json extra_files = json::array();
  for (const auto& [suffix, _] : r.tables) extra_files.push_back(cfg.prefix + "_" + suffix + ".csv");
  doc["extra_csv"] = extra_files;
  return doc;
}

WrittenFiles write_result(const SweepResult& r, const ExperimentConfig& cfg) {
  if (r.cells.size() != r.expected_cells()) throw std::logic_error("sweep result has the wrong number of cells");
  fs::create_directories(cfg.out_dir);
  WrittenFiles w;
  w.csv = cfg.out_dir / (cfg.prefix + ".csv");
  w.json = cfg.out_dir / (cfg.prefix + ".json");
  auto write = [](const fs::path& p, const std::string& s) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write '" + p.string() + "'");
    o << s;
  };
  write(w.csv, result_csv(r));
  for (const auto& [suffix, content] : r.tables) {
    const fs::path p = cfg.out_dir / (cfg.prefix + "_" + suffix + ".csv");
    write(p, csv_header(r) + content);
    w.extra.push_back(p);
  }
  write(w.json, result_json(r, cfg).dump(2) + "\n");
  return w;
}

std::string axis_key(const std::vector<json>& axes) {
  std::vector<std::string> parts;
  for (const auto& a : axes) parts.push_back(fmt_axis(a));
  return join(parts, "|");
}

int Report::flags() const {
  int n = 0;
  for (const auto& r : rows) n += r.flagged;
  return n;
}

std::string Report::markdown() const {
  std::ostringstream os;
  std::string table;
  for (const auto& r : rows) {
    if (r.table != table) {
      table = r.table;
      os << "\n## " << table << " (" << paper_table(table).caption << ")\n\n";
      const auto& names = paper_table(table).axis_names;
      os << "| " << (names.empty() ? std::string("value") : join(names, " | "))
         << " | computed | published | deviation | tolerance | flag |\n|";
      for (std::size_t i = 0; i < std::max<std::size_t>(names.size(), 1) + 5; ++i) os << "---|";
      os << "\n";
    }
    std::vector<std::string> ax;
    for (const auto& a : r.axes) ax.push_back(fmt_axis(a));
    if (ax.empty()) ax.push_back("-");
    os << "| " << join(ax, " | ") << " | " << fmt_short(r.computed) << " | " << fmt_short(r.published) << " | "
       << fmt_short(r.deviation) << " | " << fmt_short(r.tolerance) << " | " << (r.flagged ? "FLAG" : "ok") << " |\n";
  }
  os << "\n" << rows.size() << " compared cells, " << flags() << " flagged\n";
  if (!skipped.empty()) os << skipped.size() << " cells without a published value\n";
  return os.str();
}

std::string Report::csv() const {
  std::ostringstream os;
  os << "table,axes,computed,published,deviation,tolerance,flag\n";
  for (const auto& r : rows)
    os << r.table << "," << axis_key(r.axes) << "," << fmt(r.computed) << "," << fmt(r.published) << ","
       << fmt(r.deviation) << "," << fmt(r.tolerance) << "," << (r.flagged ? 1 : 0) << "\n";
  return os.str();
}

namespace {

std::optional<std::string> csv_hash(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    const auto pos = line.find("config_hash=");
    if (pos != std::string::npos) return line.substr(pos + 12);
  }
  return std::nullopt;
}

std::string default_table(const std::string& kind) {
  if (kind == "chsh-prep") return "dimer-prep";
  if (kind == "chsh-bell") return "dimer-bell-grape";
  if (kind == "cglmp-prep") return "trimer-prep";
  if (kind == "cglmp-bell") return "cglmp-bell";
  return "";
}

void compare_table(Report& rep, const PaperTable& t, const std::vector<json>& axes, double computed, double tol) {
  auto it = t.cells.find(axis_key(axes));
  if (it == t.cells.end()) {
    rep.skipped.push_back(t.id + ":" + axis_key(axes));
    return;
  }
  ComparisonRow row;
  row.table = t.id;
  row.axes = axes;
  row.computed = computed;
  row.published = it->second;
  row.deviation = computed - it->second;
  row.tolerance = tol;
  row.flagged = !(std::abs(row.deviation) <= tol);
  rep.rows.push_back(row);
}

}  // namespace

Report compare(const json& doc, const std::optional<fs::path>& csv_path) {
  if (doc.value("schema", "") != "spinbell.result") throw std::invalid_argument("not a spinbell result document");
  if (doc.value("schema_version", 0) != kResultSchema) throw std::invalid_argument("unsupported result schema version");
  const std::string stored = doc.at("config_hash").get<std::string>();
  if (config_hash(doc.at("config")) != stored)
    throw std::invalid_argument("config hash mismatch: result '" + doc.value("name", "") + "' does not match its embedded config");
  if (csv_path && fs::exists(*csv_path)) {
    const auto h = csv_hash(*csv_path);
    if (!h || *h != stored) throw std::invalid_argument("config hash mismatch between " + csv_path->string() + " and its JSON");
  }

  const json tol = doc.at("tolerances");
  auto tol_for = [&](const std::string& cls) { return tol.at(cls).get<double>(); };
  Report rep;
  std::string id = doc.at("paper_table").is_string() ? doc.at("paper_table").get<std::string>()
                                                     : default_table(doc.at("experiment").get<std::string>());
  if (!id.empty()) {
    const PaperTable& t = paper_table(id);
    for (const auto& c : doc.at("cells")) {
      const auto& m = c.at("metrics");
      if (!m.contains(t.metric) || m.at(t.metric).is_null()) continue;
      std::vector<json> axes = c.at("axes").get<std::vector<json>>();
      compare_table(rep, t, axes, m.at(t.metric).get<double>(), tol_for(t.kind));
    }
  }
  const json& extra = doc.at("extra");
  if (extra.contains("chsh_ideal")) compare_table(rep, paper_table("chsh-ideal"), {}, extra.at("chsh_ideal").get<double>(), tol_for("ideal"));
  if (extra.contains("cglmp_ideal"))
    compare_table(rep, paper_table("cglmp-ideal"), {}, extra.at("cglmp_ideal").get<double>(), tol_for("ideal"));
  return rep;
}

Report build_report(const std::vector<fs::path>& files) {
  if (files.empty()) throw std::invalid_argument("report needs at least one result file");
  Report all;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot open result '" + f.string() + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(f.string() + ": " + e.what());
    }
    std::optional<fs::path> csv;
    if (doc.contains("csv") && doc.at("csv").is_string()) csv = f.parent_path() / doc.at("csv").get<std::string>();
    Report r = compare(doc, csv);
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
    all.skipped.insert(all.skipped.end(), r.skipped.begin(), r.skipped.end());
  }
  return all;
}

std::string code_version() { return SPINBELL_VERSION; }

}  // namespace spinbell
