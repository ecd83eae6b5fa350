#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "runner.hpp"

namespace fs = std::filesystem;
using homwave::cli::RunRequest;

namespace {

struct Run {
  int code;
  std::string err;
  fs::path out;
};

Run run_text(const std::string& text, const std::string& name, std::optional<std::uint64_t> seed = {}) {
  const fs::path out = fs::temp_directory_path() / ("homwave_cli_" + name);
  fs::remove_all(out);
  RunRequest r;
  r.config_text = text;
  r.config_path = name + ".json";
  r.out = out.string();
  r.seed = seed;
  std::ostringstream err;
  const int code = homwave::cli::run(r, err);
  return {code, err.str(), out};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const Run& r) { return nlohmann::json::parse(slurp(r.out / "manifest.json")); }

}  // namespace

TEST_CASE("cell on the cosine preset gives one half") {
  const auto r = run_text(R"({"command": "cell", "scenario": {"preset": "cosine1d"}})", "cell");
  REQUIRE(r.code == 0);
  std::ifstream f(r.out / "ahat.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  CHECK(header == "i,j,value");
  const double v = std::stod(row.substr(4));
  CHECK(std::fabs(v - 0.5) <= 1e-4);
  const auto m = manifest(r);
  CHECK(m["complete"] == true);
  CHECK(m["command"] == "cell");
  CHECK(m["versions"].contains("eigen"));
  CHECK(m.contains("elapsed_seconds"));
  CHECK(m["files"].size() == 2);
}

TEST_CASE("rate on a constant coefficient reports a floor") {
  const auto r = run_text(
      R"({"command": "rate", "scenario": {"preset": "constant"}, "eps": [0.125, 0.0625], "T": 0.5})", "rate");
  REQUIRE(r.code == 0);
  const auto fits = nlohmann::json::parse(slurp(r.out / "fits.json"));
  bool energy_floor = false;
  for (const auto& f : fits["fits"])
    if (f["metric"] == "energy_error") energy_floor = f["floor"];
  CHECK(energy_floor);
  CHECK(fs::exists(r.out / "rates.csv"));
}

TEST_CASE("control with zero targets writes a zero control") {
  const auto r = run_text(R"({"command": "control", "scenario": {"preset": "constant", "value": 0.5}, "T": 1,
    "options": {"modes": 3, "theta0": [0], "theta1": [0, 0]}})",
                          "zero");
  REQUIRE(r.code == 0);
  std::ifstream f(r.out / "control.csv");
  std::string line;
  std::getline(f, line);
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    ++rows;
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 0.0);
  }
  CHECK(rows > 0);
  CHECK(manifest(r)["results"]["control_norm"] == 0.0);
}

TEST_CASE("config errors are line anchored with exit 2") {
  SUBCASE("unknown preset") {
    const auto r = run_text("{\n  \"command\": \"cell\",\n  \"scenario\": {\n    \"preset\": \"marble\"\n  }\n}\n", "preset");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("preset.json:4:", 0) == 0);
  }
  SUBCASE("malformed json") {
    const auto r = run_text("{\n \"command\": \"cell\",\n \"T\": ]\n}\n", "syntax");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("syntax.json:3:", 0) == 0);
  }
  SUBCASE("grid coarser than eps/8") {
    const auto r = run_text("{\"command\": \"rate\",\n\"eps\": [0.1],\n\"grid\": {\"nodes_per_eps\": 6}}", "grid");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("grid.json:3:", 0) == 0);
  }
  SUBCASE("unknown key and wrong type") {
    auto r = run_text("{\"command\": \"cell\",\n\"colour\": 1}", "key");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("key.json:2:", 0) == 0);
    r = run_text("{\"command\": \"cell\",\n\n\"T\": \"long\"}", "type");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("type.json:3:", 0) == 0);
  }
  SUBCASE("unknown command") {
    const auto r = run_text("{\"command\": \"plot\"}", "command");
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown command") != std::string::npos);
  }
}

TEST_CASE("numerical failure exits 3 and flags the manifest") {
  // a very short horizon leaves the Gramian singular to working precision
  const auto r = run_text(R"({"command": "control", "scenario": {"preset": "constant", "value": 0.5}, "T": 0.001,
    "options": {"modes": 12, "theta0": [1]}})",
                          "singular");
  CHECK(r.code == 3);
  const auto m = manifest(r);
  CHECK(m["complete"] == false);
  CHECK(m["partial"] == true);
  CHECK(m["exit_code"] == 3);
  CHECK(m.contains("failure"));
}

TEST_CASE("reruns give byte-identical CSV bodies and the seed matters") {
  const std::string cfg = R"({"command": "observe", "scenario": {"preset": "cosine1d", "domain": [4]},
    "eps": [0.125], "trials": 2, "seed": 5, "options": {"t_sweep": [], "baseline": false}})";
  const auto a = run_text(cfg, "det_a");
  const auto b = run_text(cfg, "det_b");
  const auto c = run_text(cfg, "det_c", 6);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  for (const char* f : {"observability.csv", "observability_eps.csv"}) CHECK(slurp(a.out / f) == slurp(b.out / f));
  CHECK(slurp(a.out / "observability.csv") != slurp(c.out / "observability.csv"));
  CHECK(manifest(c)["seed"] == 6);
}
