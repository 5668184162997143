#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "deltacert/error.hpp"
#include "deltacert/pipeline.hpp"

using namespace deltacert;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("deltacert_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("densification at least doubles the grid") {
  CHECK(densified_points_per_axis(5, 8) == 6);
  CHECK(densified_points_per_axis(5, 2) == 8);
  for (std::size_t d : {2u, 4u, 8u}) {
    const std::size_t k = densified_points_per_axis(5, d);
    CHECK(std::pow(double(k), double(d)) >= 2 * std::pow(5.0, double(d)));
  }
}

TEST_CASE("run configuration JSON round trip and partial override") {
  RunConfig c;
  c.network = "net.json";
  c.m = 12;
  c.jobs = 3;
  c.sop.gamma_grid = {0.9};
  c.lipschitz.lambda = 0.02;
  c.shared_dynamics = true;
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(back.network == "net.json");
  CHECK(back.m == std::optional<std::size_t>(12));
  CHECK(back.sop.gamma_grid == std::vector<double>{0.9});
  CHECK(back.lipschitz.lambda == 0.02);
  CHECK(back.shared_dynamics);
  const RunConfig partial = run_config_from_json(nlohmann::json{{"jobs", 7}}, c);
  CHECK(partial.jobs == 7);
  CHECK(partial.network == "net.json");
  RunConfig bad = c;
  bad.jobs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("missing network ends with the config/io exit code and error.json") {
  const fs::path out = scratch("missing");
  RunConfig c;
  c.network = (out / "absent.json").string();
  c.output_dir = out.string();
  const PipelineResult r = run_pipeline(c);
  CHECK(r.exit_code == kExitConfig);
  CHECK(fs::exists(out / "error.json"));
  CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("small linear network runs every stage up to the margin check") {
  const fs::path out = scratch("linear");
  {
    std::ofstream f(out / "net.json");
    f << R"({"subsystems": [
      {"n": 1, "p": 1, "kind": "linear", "params": {"A": [[0.5]], "B": [[0.05]]}},
      {"n": 1, "p": 1, "kind": "linear", "params": {"A": [[0.5]], "B": [[0.05]]}}],
      "edges": [[0, 1], [1, 0]]})";
  }
  RunConfig c;
  c.network = (out / "net.json").string();
  c.output_dir = out.string();
  c.sampling.points_per_axis = 7;
  c.shared_dynamics = true;
  c.lipschitz.sigma_count = 20;
  c.lipschitz.phi_count = 100;
  c.validation_samples = 100;
  const PipelineResult r = run_pipeline(c);
  // Records with x = x' pin mu* at zero, so the margin cannot be negative.
  CHECK(r.exit_code == kExitMargin);
  CHECK(r.diagnosis == "mu_star");
  REQUIRE(r.subsystem_certificates.size() == 1);
  CHECK(r.subsystem_certificates[0].solution.mu_star >= -1e-12);
  CHECK(r.attempts == 1);
  CHECK(fs::exists(out / "subsystem_1.json"));
  CHECK(fs::exists(out / "dataset_1.jsonl"));
  CHECK(fs::exists(out / "error.json"));
  CHECK(r.summary.find("FAIL") != std::string::npos);
}

TEST_CASE("identical configurations give byte-identical subsystem certificates") {
  std::string docs[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = scratch("determinism" + std::to_string(run));
    RunConfig c;
    c.network = out.string() + "/net.json";
    {
      std::ofstream f(c.network);
      f << R"({"generator": {"kind": "ring", "m": 3}})";
    }
    c.output_dir = out.string();
    c.sampling.points_per_axis = 3;
    c.shared_dynamics = true;
    c.jobs = run == 0 ? 1 : 3;
    c.lipschitz.sigma_count = 10;
    c.lipschitz.phi_count = 50;
    c.dispersion_budget = 20000;
    run_pipeline(c);
    std::ifstream in(out / "subsystem_1.json");
    docs[run].assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(!docs[0].empty());
  // Only the network path differs between the two runs.
  auto strip = [](std::string s) {
    const std::string tag = "deltacert_unit_determinism";
    for (auto p = s.find(tag); p != std::string::npos; p = s.find(tag)) s.erase(p, tag.size() + 1);
    return s;
  };
  CHECK(strip(docs[0]) == strip(docs[1]));
}
