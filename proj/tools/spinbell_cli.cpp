// spinbell: run sweeps, compare against published tables, level diagrams, decay fits.
#include "spinbell/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace spinbell;
using nlohmann::json;

namespace {

int run_config(const ExperimentConfig& cfg) {
  const SweepResult r = run_experiment(cfg);
  const WrittenFiles w = write_result(r, cfg);
  std::cout << to_string(cfg.kind) << " '" << cfg.name << "': " << r.cells.size() << " cells in " << r.wall_s
            << " s (config " << r.config_hash.substr(0, 12) << ")\n";
  std::cout << "  " << w.csv.string() << "\n  " << w.json.string() << "\n";
  for (const auto& p : w.extra) std::cout << "  " << p.string() << "\n";
  return 0;
}

json base_document(const std::string& kind) {
  return {{"schema_version", kConfigSchema}, {"experiment", kind}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-system Bell test simulations"};
  app.require_subcommand(1);

  CliOverrides over;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, mode;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Worker threads for sweep cells")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--mode", mode, "Propagation mode")->check(CLI::IsMember({"rotating-wave", "rw", "lab-frame", "lab"}));
  };

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  std::string config_path;
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_common(run);

  auto* report = app.add_subcommand("report", "Compare result files with the published tables");
  std::vector<std::string> result_files;
  std::string format = "markdown", report_out;
  bool fail_on_flag = false;
  report->add_option("results", result_files, "Result JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  report->add_option("--output,-o", report_out, "Write the report here instead of stdout");
  report->add_flag("--fail-on-flag", fail_on_flag, "Exit with status 1 when any cell is flagged");

  auto* levels = app.add_subcommand("level-diagram", "Energy levels against the static field");
  std::string system = "dimer";
  double bmin = 0.0, bmax = 1.0;
  int points = 101;
  std::string model_file;
  levels->add_option("--system", system, "dimer or trimer")->check(CLI::IsMember({"dimer", "trimer"}));
  levels->add_option("--bmin", bmin, "Lowest field (T)");
  levels->add_option("--bmax", bmax, "Highest field (T)");
  levels->add_option("--points", points, "Number of fields");
  levels->add_option("--model", model_file, "JSON file with model parameters")->check(CLI::ExistingFile);
  add_common(levels);

  auto* fit = app.add_subcommand("fit-decay", "Fit M0 exp(-2 tau / T2) to echo decay data");
  std::string decay_csv;
  fit->add_option("csv", decay_csv, "Two columns: tau_us, amplitude")->required()->check(CLI::ExistingFile);
  add_common(fit);

  CLI11_PARSE(app, argc, argv);
  over.workers = workers;
  over.seed = seed;
  over.out_dir = out_dir;
  over.mode = mode;

  try {
    if (*run) return run_config(load_config(config_path, over));

    if (*levels) {
      json doc = base_document("level-diagram");
      doc["name"] = system + "-levels";
      doc["level_diagram"] = {{"system", system}, {"B_min_T", bmin}, {"B_max_T", bmax}, {"points", points}};
      if (!model_file.empty()) {
        std::ifstream in(model_file);
        doc["model"] = json::parse(in);
      }
      return run_config(parse_config(apply_overrides(doc, over)));
    }

    if (*fit) {
      json doc = base_document("decay-fit");
      doc["name"] = "decay-fit";
      doc["decay_fit"] = {{"csv", std::filesystem::absolute(decay_csv).string()}};
      const ExperimentConfig cfg = parse_config(apply_overrides(doc, over));
      const SweepResult r = run_experiment(cfg);
      const auto& m = r.cells.front().metrics;
      std::cout << "M0 = " << m.at("M0") << ", T2 = " << m.at("T2_us") << " us, rms residual = " << m.at("residual")
                << " (" << m.at("points") << " points)\n";
      write_result(r, cfg);
      return 0;
    }

    if (*report) {
      std::vector<std::filesystem::path> files(result_files.begin(), result_files.end());
      const Report rep = build_report(files);
      const std::string text = format == "csv" ? rep.csv() : rep.markdown();
      if (report_out.empty()) std::cout << text;
      else std::ofstream(report_out) << text;
      std::cerr << rep.rows.size() << " cells compared, " << rep.flags() << " flagged\n";
      return fail_on_flag && rep.flags() > 0 ? 1 : 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid config\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
