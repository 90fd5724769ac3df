#pragma once

#include "spinbell/dynamics.hpp"
#include "spinbell/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinbell {

inline constexpr int kResultSchema = 1;
inline constexpr int kConfigSchema = 1;

enum class ExperimentKind { ChshPrep, ChshBell, GrapeRotations, CglmpPrep, CglmpBell, LevelDiagram, DecayFit };

ExperimentKind parse_kind(const std::string& s);
std::string to_string(ExperimentKind k);

// Every problem found while reading a config, not just the first one.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct Tolerances {
  double fidelity = 0.03;
  double value = 0.08;  // Bell / CGLMP values under decoherence
  double ideal = 1e-4;
};

struct GrapeSettings {
  int segments = 1600;
  double duration_ns = 1000.0;
  double bound_G = 75.0;
  int max_iterations = 1000;
  double target_fidelity = 0.9999;
  double accept_fidelity = 0.99;  // restart below this
  int max_restarts = 5;
};

// null entries in a T2 grid mean "no dephasing"
using T2Grid = std::vector<std::optional<double>>;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::ChshPrep;
  std::string name;
  DimerParams dimer;
  TrimerParams trimer;

  std::vector<double> B1_G;        // chsh-prep, chsh-bell (prep amplitude), cglmp-bell (measurement amplitude)
  std::vector<double> group1_G;    // cglmp-prep
  std::vector<double> group2_G;    // cglmp-prep
  double prep_group1_G = 70.0;     // cglmp-bell
  double prep_group2_G = 20.0;     // cglmp-bell

  T2Grid T2_us;                    // electron (dimer) or qudit (trimer)
  std::optional<double> T2n_us = 560.0;   // dimer nucleus
  std::optional<double> T2_ancilla_us = 1.0;
  bool grape_stage_dephasing = true;

  PropagationConfig propagation;
  GrapeSettings grape;
  std::optional<std::string> sequence_file;  // replaces the built-in preparation sequence

  std::string level_system = "dimer";
  double B_min_T = 0.0, B_max_T = 1.0;
  int B_points = 101;

  std::string decay_csv;

  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path out_dir = "results";
  std::string prefix;  // defaults to name
  std::optional<std::string> paper_table;
  Tolerances tolerances;

  nlohmann::json source;  // canonical document the hash is taken over
};

struct CliOverrides {
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> mode;
};

// Relative paths inside the config resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& file, const CliOverrides& over = {});
// Applies CLI overrides to the document before parsing, so seed and mode enter the hash.
nlohmann::json apply_overrides(nlohmann::json j, const CliOverrides& over);

// SHA-256 of the sorted-key compact dump, lowercase hex. `workers` and `output` are left out:
// they change neither the numbers nor the CSV.
std::string config_hash(const nlohmann::json& j);
std::string sha256_hex(const std::string& data);

struct SweepCell {
  std::vector<nlohmann::json> axes;  // numbers or null
  std::map<std::string, double> metrics;
  nlohmann::json detail;             // per-cell extras (probability tables, per-state fidelities)
  double wall_s = 0.0;
};

struct SweepResult {
  ExperimentKind kind = ExperimentKind::ChshPrep;
  std::string name;
  std::vector<std::string> axis_names;
  std::vector<std::vector<nlohmann::json>> axis_values;
  std::vector<std::string> metric_names;
  std::vector<SweepCell> cells;  // row-major over axis_values, last axis fastest
  nlohmann::json extra;          // experiment-level results (CHSH optimum, GRAPE runs, fit)
  std::map<std::string, std::string> tables;  // extra CSV payloads: file suffix -> content
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_s = 0.0;

  std::size_t expected_cells() const;
};

// Runs cells on `workers` threads; results come back in index order.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

SweepResult run_experiment(const ExperimentConfig& cfg);

struct WrittenFiles {
  std::filesystem::path csv, json;
  std::vector<std::filesystem::path> extra;
};
// Deterministic CSV (no timings); JSON carries metadata, config and timings.
WrittenFiles write_result(const SweepResult& r, const ExperimentConfig& cfg);
std::string result_csv(const SweepResult& r);
nlohmann::json result_json(const SweepResult& r, const ExperimentConfig& cfg);

// Paper reference data used by report.
struct PaperTable {
  std::string id;
  std::string caption;
  std::string metric;                    // column compared
  std::string kind;                      // "fidelity", "value" or "ideal" tolerance class
  std::vector<std::string> axis_names;
  // axis tuple (numbers or null, serialized compactly) -> published value
  std::map<std::string, double> cells;
};
const std::vector<PaperTable>& paper_tables();
const PaperTable& paper_table(const std::string& id);
std::string axis_key(const std::vector<nlohmann::json>& axes);

struct ComparisonRow {
  std::string table;
  std::vector<nlohmann::json> axes;
  double computed = 0.0, published = 0.0, deviation = 0.0, tolerance = 0.0;
  bool flagged = false;
};

struct Report {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> skipped;  // result cells without a published counterpart
  int flags() const;
  std::string markdown() const;
  std::string csv() const;
};

// Compares persisted results (JSON documents) with the embedded published tables. Throws when a
// document's stored hash does not match its embedded config, when its CSV carries another hash,
// or when it names an unknown table.
Report build_report(const std::vector<std::filesystem::path>& result_files);
Report compare(const nlohmann::json& result_doc, const std::optional<std::filesystem::path>& csv_path = {});

std::string code_version();

}  // namespace spinbell
