#include "spinbell/fit.hpp"
#include "spinbell/harness.hpp"

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace spinbell;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spinbell_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json prep_doc() {
  return json{{"schema_version", 1},
              {"experiment", "chsh-prep"},
              {"name", "prep"},
              {"amplitudes", {{"B1_G", {10, 15, 20, 25, 30, 40, 60}}}},
              {"dephasing", {{"T2_us", {20, 10, 5, 3, 2.4, 2, 1}}, {"T2n_us", 560}}}};
}

bool contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

std::vector<std::pair<double, double>> decay(double M0, double T2, int n, double tmax) {
  std::vector<std::pair<double, double>> d;
  for (int i = 0; i < n; ++i) {
    const double t = tmax * i / (n - 1);
    d.push_back({t, M0 * std::exp(-2 * t / T2)});
  }
  return d;
}

}  // namespace

TEST_CASE("config errors are collected") {
  json j = prep_doc();
  j["amplitudes"]["B1_G"] = json::array();
  j["workers"] = 0;
  j["colour"] = "blue";
  j["propagation"] = {{"mode", "sideways"}};
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& p = e.problems();
    CHECK(p.size() >= 4);
    CHECK(contains(p, "B1_G"));
    CHECK(contains(p, "workers"));
    CHECK(contains(p, "colour"));
    CHECK(contains(p, "mode"));
  }

  json lab = prep_doc();
  lab["propagation"] = {{"mode", "lab-frame"}, {"phase_reference", "pulse-start"}};
  CHECK_THROWS_AS(parse_config(lab), ConfigError);
  lab["propagation"].erase("phase_reference");
  CHECK(parse_config(lab).propagation.phase_reference == PhaseReference::Absolute);

  json schema = prep_doc();
  schema["schema_version"] = 2;
  CHECK_THROWS_AS(parse_config(schema), ConfigError);
  json table = prep_doc();
  table["paper_table"] = "no-such-table";
  CHECK_THROWS_AS(parse_config(table), ConfigError);
  json neg = prep_doc();
  neg["dephasing"]["T2_us"] = {-1.0};
  CHECK_THROWS_AS(parse_config(neg), ConfigError);
}

TEST_CASE("an empty grid writes nothing") {
  const fs::path dir = scratch("empty");
  json j = prep_doc();
  j["amplitudes"]["B1_G"] = json::array();
  j["output"] = {{"dir", (dir / "out").string()}};
  const fs::path file = dir / "cfg.json";
  std::ofstream(file) << j.dump(2);
  CHECK_THROWS_AS(load_config(file), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("config hash") {
  const json a = json::parse(R"({"b": 1, "a": {"y": 2, "x": [1, 2]}})");
  const json b = json::parse(R"({"a": {"x": [1, 2], "y": 2}, "b": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 64);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  json c = prep_doc(), d = prep_doc();
  d["workers"] = 4;
  d["output"] = {{"dir", "elsewhere"}};
  CHECK(config_hash(c) == config_hash(d));
  d["seed"] = 7;
  CHECK(config_hash(c) != config_hash(d));
  const json over = apply_overrides(c, {.workers = 3, .seed = 9, .out_dir = "x", .mode = "lab-frame"});
  CHECK(over["seed"] == 9);
  CHECK(over["propagation"]["mode"] == "lab-frame");
  CHECK(config_hash(over) != config_hash(c));
}

TEST_CASE("parallel_for") {
  std::vector<int> out(100, -1);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));

  std::atomic<int> ran{0};
  CHECK_THROWS_WITH(parallel_for(20, 3,
                                 [&](std::size_t i) {
                                   ++ran;
                                   if (i == 5 || i == 11) throw std::runtime_error("cell " + std::to_string(i));
                                 }),
                    "cell 5");
  CHECK(ran == 20);
  parallel_for(0, 4, [](std::size_t) { FAIL("no cells"); });
}

TEST_CASE("results are deterministic across worker counts") {
  json j = prep_doc();
  j["amplitudes"]["B1_G"] = {20, 25};
  j["dephasing"]["T2_us"] = {nullptr, 2.4, 1};
  ExperimentConfig one = parse_config(j);
  j["workers"] = 3;
  ExperimentConfig three = parse_config(j);
  const SweepResult a = run_experiment(one), b = run_experiment(three);
  CHECK(a.cells.size() == 6);
  CHECK(a.config_hash == b.config_hash);
  CHECK(result_csv(a) == result_csv(b));

  const fs::path dir = scratch("write");
  one.out_dir = dir;
  one.prefix = "p";
  const WrittenFiles w = write_result(a, one);
  CHECK(fs::exists(w.csv));
  CHECK(fs::exists(w.json));
  std::ifstream is(w.json);
  const json doc = json::parse(is);
  CHECK(doc["schema"] == "spinbell.result");
  CHECK(doc["schema_version"] == kResultSchema);
  CHECK(doc["config_hash"] == a.config_hash);
  CHECK(doc["cells"].size() == 6);
  std::ifstream cs(w.csv);
  std::string first, second, third;
  std::getline(cs, first);
  std::getline(cs, second);
  std::getline(cs, third);
  CHECK(first.find("schema_version=1") != std::string::npos);
  CHECK(third == "# config_hash=" + a.config_hash);
}

TEST_CASE("report against the published tables") {
  const ExperimentConfig cfg = parse_config(prep_doc());
  const SweepResult r = run_experiment(cfg);
  json doc = result_json(r, cfg);
  const Report rep = compare(doc);
  CHECK(rep.rows.size() == 49);
  CHECK(rep.flags() == 0);
  CHECK(rep.markdown().find("| B1_G") != std::string::npos);

  // a cell pushed outside the tolerance is flagged, and only that one
  json bad = doc;
  bad["cells"][3]["metrics"]["fidelity"] = bad["cells"][3]["metrics"]["fidelity"].get<double>() - 0.1;
  const Report flagged = compare(bad);
  CHECK(flagged.flags() == 1);

  json tampered = doc;
  tampered["config"]["seed"] = 99;
  CHECK_THROWS(compare(tampered));
  json unknown = doc;
  unknown["paper_table"] = "no-such-table";
  CHECK_THROWS(compare(unknown));
  CHECK_THROWS(paper_table("no-such-table"));
  CHECK(paper_table("chsh-ideal").cells.size() == 1);
}

TEST_CASE("decay fit") {
  const DecayFit f = fit_decay(decay(1.0, 560.0, 20, 500.0));
  CHECK(f.T2_us == doctest::Approx(560.0).epsilon(1e-3));
  CHECK(f.M0 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(f.residual < 1e-8);
  CHECK(f.points == 20);

  std::vector<std::pair<double, double>> flat;
  for (int i = 0; i < 10; ++i) flat.push_back({10.0 * i, 0.7});
  CHECK_THROWS_AS(fit_decay(flat), FitRejected);
  CHECK_THROWS_AS(fit_decay({{1.0, 1.0}, {1.0, 0.5}, {1.0, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_decay({{0.0, 1.0}, {1.0, 0.5}}), std::invalid_argument);

  std::istringstream csv("# echo\ntau_us,amplitude\n0,1\n10,0.9\n20,0.8\n");
  CHECK(read_decay_csv(csv).size() == 3);
  std::istringstream broken("0,1\nx,y\n");
  CHECK_THROWS(read_decay_csv(broken));
}

TEST_CASE("decay fit tolerance calibration") {
  // 20 points over one T2, 1000 seeded trials
  auto coverage = [](bool relative) {
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> noise(0.0, 0.05);
    const auto clean = decay(1.0, 560.0, 20, 560.0);
    int within = 0;
    for (int t = 0; t < 1000; ++t) {
      auto d = clean;
      for (auto& [tau, m] : d) m = relative ? m * (1 + noise(rng)) : m + noise(rng);
      try {
        if (std::abs(fit_decay(d).T2_us / 560.0 - 1.0) < 0.10) ++within;
      } catch (const FitRejected&) {
      }
    }
    return within / 1000.0;
  };
  const double rel = coverage(true), abs = coverage(false);
  MESSAGE("T2 within 10 %, 5 % relative noise: " << rel << ", 5 % of M0 additive: " << abs);
  CHECK(rel >= 0.95);
  // additive noise swamps the tail; one T2 is close to the best span for it
  CHECK(abs > 0.9);
}

TEST_CASE("wall time scales with the cell count") {
  json j = prep_doc();
  j["amplitudes"]["B1_G"] = {25};
  auto timed = [&](int cells) {
    j["dephasing"]["T2_us"] = json::array();
    for (int k = 0; k < cells; ++k) j["dephasing"]["T2_us"].push_back(2.0 + 0.1 * k);
    const ExperimentConfig cfg = parse_config(j);
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult r = run_experiment(cfg);
    CHECK(r.cells.size() == static_cast<std::size_t>(cells));
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  timed(2);
  const double small = timed(8), large = timed(32);
  const double ratio = large / small;
  MESSAGE("32 / 8 cells wall-time ratio: " << ratio);
  CHECK(ratio > 2.0);
  CHECK(ratio < 8.0);
}

TEST_CASE("shipped configs parse") {
  const char* src = std::getenv("SPINBELL_SOURCE_DIR");
  if (!src) return;
  int n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(src) / "configs")) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
    ++n;
  }
  CHECK(n >= 8);
}
