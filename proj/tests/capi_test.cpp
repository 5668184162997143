// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "deltacert/deltacert.h"

using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  dc_string_free(s);
  return out;
}

const char* kRing = R"({"generator": {"kind": "ring", "m": 4}})";

}  // namespace

TEST_CASE("status names, version and error reporting") {
  CHECK(std::string(dc_version()) == "0.1.0");
  CHECK(std::string(dc_status_name(DC_ERR_REFUSED)) != "");
  dc_network* net = nullptr;
  CHECK(dc_network_parse("{not json", -1, &net) == DC_ERR_PARSE);
  CHECK(net == nullptr);
  CHECK(std::string(dc_last_error()).size() > 0);
  CHECK(dc_network_load("/nonexistent.json", -1, &net) == DC_ERR_IO);
  CHECK(dc_network_info(nullptr, nullptr, nullptr) == DC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("network handle: info, step, topology, homogeneity") {
  dc_network* net = nullptr;
  REQUIRE(dc_network_parse(kRing, 6, &net) == DC_OK);
  CHECK(std::string(dc_last_error()).empty());
  size_t m = 0, dim = 0;
  REQUIRE(dc_network_info(net, &m, &dim) == DC_OK);
  CHECK(m == 6);
  CHECK(dim == 12);
  int id = 0;
  size_t n = 0, p = 0;
  REQUIRE(dc_network_subsystem(net, 2, &id, &n, &p) == DC_OK);
  CHECK(id == 3);
  CHECK(n == 2);
  CHECK(dc_network_subsystem(net, 99, &id, &n, &p) != DC_OK);
  char* topo = nullptr;
  REQUIRE(dc_network_topology(net, &topo) == DC_OK);
  const json t = json::parse(take(topo));
  CHECK(t["m"] == 6);
  CHECK(t["sources"][0][0] == 5);
  std::vector<double> x(dim, 1.0), out(dim), xp(dim, 0.0), series(11);
  CHECK(dc_network_step(net, x.data(), out.data()) == DC_OK);
  CHECK(out[0] == doctest::Approx(0.8 - 0.1 * std::sqrt(2.0) - 0.02));
  CHECK(dc_divergence_series(net, x.data(), xp.data(), 10, series.data()) == DC_OK);
  CHECK(series[0] == doctest::Approx(std::sqrt(12.0)));
  const double etas[] = {0.5, 2, 10, 100};
  double dev = 1.0;
  int pass = 0;
  CHECK(dc_check_homogeneity(net, 0, 100, etas, 4, 1e-9, 1, &dev, &pass) == DC_OK);
  CHECK(pass == 1);
  dc_network_free(net);
}

TEST_CASE("data path: collect, normalize, hash, save/load, solve, audit, Lipschitz") {
  dc_network* net = nullptr;
  REQUIRE(dc_network_parse(kRing, -1, &net) == DC_OK);
  dc_dataset* raw = nullptr;
  REQUIRE(dc_collect(net, 0, R"({"points_per_axis": 3})", 2, &raw) == DC_OK);
  dc_dataset* ds = nullptr;
  REQUIRE(dc_dataset_normalize(raw, &ds) == DC_OK);
  size_t records = 0, n = 0, p = 0;
  int normalized = 0;
  REQUIRE(dc_dataset_info(ds, &records, &n, &p, &normalized) == DC_OK);
  CHECK(records == 6560);
  CHECK(normalized == 1);
  char* hash = nullptr;
  REQUIRE(dc_dataset_hash(ds, &hash) == DC_OK);
  const std::string h = take(hash);

  const std::string path = "capi_test_dataset.jsonl";
  REQUIRE(dc_dataset_save(ds, path.c_str()) == DC_OK);
  dc_dataset* loaded = nullptr;
  REQUIRE(dc_dataset_load(path.c_str(), &loaded) == DC_OK);
  REQUIRE(dc_dataset_hash(loaded, &hash) == DC_OK);
  CHECK(take(hash) == h);
  std::remove(path.c_str());

  char* disp = nullptr;
  REQUIRE(dc_estimate_dispersion(ds, 5, 1, 1'000'000, &disp) == DC_OK);
  CHECK(json::parse(take(disp))["epsilon"].get<double>() > 0);

  char* sol = nullptr;
  REQUIRE(dc_solve_sop(ds, R"({"gamma_grid": [0.5, 0.9]})", nullptr, 1, &sol) == DC_OK);
  const std::string solution = take(sol);
  CHECK(json::parse(solution)["per_gamma"].size() == 2);
  char* audit = nullptr;
  REQUIRE(dc_audit_solution(ds, solution.c_str(), 1e-9, &audit) == DC_OK);
  CHECK(json::parse(take(audit))["pass"] == true);

  char* est = nullptr;
  REQUIRE(dc_estimate_lipschitz(net, 0, solution.c_str(), R"({"sigma": 10, "phi": 50})", 1, &est) ==
          DC_OK);
  const double l = json::parse(take(est))["l"].get<double>();
  CHECK(l > 0);

  char* cert = nullptr;
  REQUIRE(dc_check_subsystem(solution.c_str(), 0.5, l, 1, &cert) == DC_OK);
  const json c = json::parse(take(cert));
  CHECK(c["pass"] == false);

  // A failing certificate is refused by composition.
  char* topo = nullptr;
  REQUIRE(dc_network_topology(net, &topo) == DC_OK);
  const std::string topology = take(topo);
  char* composed = nullptr;
  const std::string certs = json::array({c}).dump();
  CHECK(dc_compose(certs.c_str(), topology.c_str(), "[0, 0, 0, 0]", &composed) == DC_ERR_REFUSED);

  dc_dataset_free(loaded);
  dc_dataset_free(ds);
  dc_dataset_free(raw);
  dc_network_free(net);
}

TEST_CASE("composition arithmetic through the C API") {
  const char* gains = R"([{"gamma": 0.9, "rho": 0.0124, "alpha_lo": 1, "alpha_hi": 1},
                          {"gamma": 0.9, "rho": 0.0291, "alpha_lo": 1, "alpha_hi": 1}])";
  const char* topo = R"({"m": 2, "sources": [[1], [0]]})";
  char* out = nullptr;
  REQUIRE(dc_evaluate_composition(gains, topo, &out) == DC_OK);
  const json c = json::parse(take(out));
  CHECK(c["zeta"].get<double>() == doctest::Approx(-0.0709).epsilon(1e-9));
  CHECK(c["pass"] == true);
  CHECK(dc_evaluate_composition("[]", topo, &out) != DC_OK);
}

TEST_CASE("baseline, V evaluation and validation through the C API") {
  const std::string path = std::string(DELTACERT_SOURCE_DIR) + "/configs/two-subsystem.json";
  char* out = nullptr;
  REQUIRE(dc_baseline(path.c_str(), nullptr, &out) == DC_OK);
  const json r = json::parse(take(out));
  REQUIRE(r["pass"] == true);
  const std::string cert = r["certificate"].dump();
  const double x[] = {1, 0, 0, 0}, xp[] = {0, 0, 0, 0};
  double v = 0.0;
  REQUIRE(dc_evaluate_v(cert.c_str(), x, xp, 4, &v) == DC_OK);
  CHECK(v == doctest::Approx(r["subsystems"][0]["P"][0][0].get<double>()));
  dc_network* net = nullptr;
  REQUIRE(dc_network_load(path.c_str(), -1, &net) == DC_OK);
  char* report = nullptr;
  REQUIRE(dc_validate_network(net, cert.c_str(), 500, 2, 1e-6, 1, &report) == DC_OK);
  CHECK(json::parse(take(report))["violations"] == 0);
  dc_network_free(net);
}

TEST_CASE("complexity CSV and default configuration") {
  const size_t dims[] = {4};
  const size_t ms[] = {1, 2};
  char* csv = nullptr;
  REQUIRE(dc_complexity_csv(dims, 1, 5, ms, 2, &csv) == DC_OK);
  CHECK(take(csv) == "m,compositional,monolithic\n1,390625,390625\n2,781250,152587890625\n");
  char* cfg = nullptr;
  REQUIRE(dc_default_config(&cfg) == DC_OK);
  CHECK(json::parse(take(cfg))["jobs"] == 1);
}

TEST_CASE("pipeline reports a config error through exit_code") {
  int code = -1;
  char* summary = nullptr;
  char* result = nullptr;
  REQUIRE(dc_run_pipeline(R"({"network": "/nonexistent.json", "output_dir": "capi_out"})", &code,
                          &summary, &result) == DC_OK);
  CHECK(code == 5);
  CHECK(json::parse(take(result))["exit_code"] == 5);
  take(summary);
  code = -1;
  CHECK(dc_run_pipeline("{}", &code, nullptr, nullptr) == DC_OK);
  CHECK(code == 5);
  CHECK(dc_run_pipeline(nullptr, &code, nullptr, nullptr) == DC_ERR_INVALID_ARGUMENT);
}
