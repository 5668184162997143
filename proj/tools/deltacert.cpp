// deltacert command-line front end. Talks to the library only through the
// C interface in deltacert.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deltacert/deltacert.h"

using nlohmann::json;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitCompose = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitConfig = 5;

struct CliError {
  int code;
  std::string message;
};

int exit_code_for(dc_status s) {
  switch (s) {
    case DC_OK: return 0;
    case DC_ERR_INVALID_ARGUMENT:
    case DC_ERR_PARSE:
    case DC_ERR_IO: return kExitConfig;
    case DC_ERR_INFEASIBLE: return kExitInfeasible;
    case DC_ERR_REFUSED: return kExitCompose;
    default: return kExitInternal;
  }
}

void check(dc_status s, const std::string& what) {
  if (s != DC_OK) {
    throw CliError{exit_code_for(s),
                   what + ": " + dc_status_name(s) + ": " + dc_last_error()};
  }
}

// Owns a string handed out by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  dc_string_free(s);
  return out;
}

struct NetworkDeleter {
  void operator()(dc_network* n) const { dc_network_free(n); }
};
struct DatasetDeleter {
  void operator()(dc_dataset* d) const { dc_dataset_free(d); }
};
using NetworkPtr = std::unique_ptr<dc_network, NetworkDeleter>;
using DatasetPtr = std::unique_ptr<dc_dataset, DatasetDeleter>;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitConfig, "cannot read " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CliError{kExitConfig, path + ": " + e.what()};
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw CliError{kExitConfig, "cannot write " + path};
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

NetworkPtr load_network(const std::string& path, std::optional<long> m) {
  dc_network* raw = nullptr;
  check(dc_network_load(path.c_str(), m.value_or(-1), &raw), "loading network " + path);
  return NetworkPtr(raw);
}

std::string pretty(const std::string& compact) { return json::parse(compact).dump(2); }

// ---- option groups shared by several subcommands ----

struct SamplingFlags {
  std::optional<std::string> scheme;
  std::optional<std::size_t> points_per_axis, count;
  std::optional<double> bound;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--scheme", scheme, "grid or uniform")->check(CLI::IsMember({"grid", "uniform"}));
    app->add_option("--points-per-axis", points_per_axis, "grid points per pair-space axis");
    app->add_option("--count", count, "records for uniform sampling");
    app->add_option("--bound", bound, "sampling box half-width");
    app->add_option("--seed", seed, "sampling seed");
  }
  void apply(json& s) const {
    if (scheme) s["scheme"] = *scheme;
    if (points_per_axis) s["points_per_axis"] = *points_per_axis;
    if (count) s["count"] = *count;
    if (bound) s["bound"] = *bound;
    if (seed) s["seed"] = *seed;
  }
};

struct SopFlags {
  std::optional<std::vector<double>> gamma_grid;
  std::optional<double> q_bound, alpha_hi_bound, rho_bound, mu_bound, phi_bound, tol;

  void add(CLI::App* app) {
    app->add_option("--gamma-grid", gamma_grid, "decay-rate candidates in (0, 1)")->delimiter(',');
    app->add_option("--q-bound", q_bound);
    app->add_option("--alpha-hi-bound", alpha_hi_bound);
    app->add_option("--rho-bound", rho_bound);
    app->add_option("--mu-bound", mu_bound);
    app->add_option("--phi-bound", phi_bound);
    app->add_option("--feasibility-tol", tol);
  }
  void apply(json& s) const {
    if (gamma_grid) s["gamma_grid"] = *gamma_grid;
    if (q_bound) s["q_bound"] = *q_bound;
    if (alpha_hi_bound) s["alpha_hi_bound"] = *alpha_hi_bound;
    if (rho_bound) s["rho_bound"] = *rho_bound;
    if (mu_bound) s["mu_bound"] = *mu_bound;
    if (phi_bound) s["phi_bound"] = *phi_bound;
    if (tol) s["feasibility_tol"] = *tol;
  }
};

struct LipschitzFlags {
  std::optional<double> lambda, safety;
  std::optional<std::size_t> phi, sigma;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "maximum pair distance on the sphere");
    app->add_option("--phi", phi, "slopes per batch");
    app->add_option("--sigma", sigma, "number of batches");
    app->add_option("--lipschitz-seed", seed);
    app->add_option("--safety-factor", safety);
  }
  void apply(json& s) const {
    if (lambda) s["lambda"] = *lambda;
    if (phi) s["phi"] = *phi;
    if (sigma) s["sigma"] = *sigma;
    if (seed) s["seed"] = *seed;
    if (safety) s["safety_factor"] = *safety;
  }
};

json default_config() {
  char* out = nullptr;
  check(dc_default_config(&out), "default configuration");
  return json::parse(take(out));
}

// ---- subcommands ----

struct CertifyCmd {
  std::string config_path, network, output_dir;
  std::optional<long> m;
  std::optional<std::size_t> jobs, retries, max_records, disp_ppa, disp_budget, validation;
  bool shared = false, plain_eps = false, conservative_eps = false, no_datasets = false;
  SamplingFlags sampling;
  SopFlags sop;
  LipschitzFlags lip;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("certify", "run the full data-driven certification");
    c->add_option("--config", config_path, "run configuration or network description (JSON)");
    c->add_option("--network", network, "network description path");
    c->add_option("--m", m, "number of subsystems for generated networks");
    c->add_option("--output-dir", output_dir);
    c->add_option("--jobs", jobs, "worker threads");
    c->add_option("--retries", retries, "densification retries");
    c->add_option("--max-records", max_records);
    c->add_option("--dispersion-points-per-axis", disp_ppa);
    c->add_option("--dispersion-budget", disp_budget);
    c->add_option("--validation-samples", validation);
    c->add_flag("--shared-dynamics", shared, "certify identical subsystems once");
    c->add_flag("--plain-epsilon", plain_eps, "use the grid dispersion without the covering term");
    c->add_flag("--conservative-epsilon", conservative_eps);
    c->add_flag("--no-datasets", no_datasets, "skip writing dataset files");
    sampling.add(c);
    sop.add(c);
    lip.add(c);
    c->callback([this] { throw run(); });
  }

  int run() const {
    json config = default_config();
    if (!config_path.empty()) {
      const json doc = read_json(config_path);
      if (doc.contains("generator") || doc.contains("subsystems")) {
        config["network"] = config_path;
      } else {
        for (auto& [k, v] : doc.items()) {
          if (v.is_object() && config.contains(k) && config[k].is_object()) {
            config[k].update(v);
          } else {
            config[k] = v;
          }
        }
      }
    }
    if (!network.empty()) config["network"] = network;
    if (m) config["m"] = *m;
    if (!output_dir.empty()) config["output_dir"] = output_dir;
    if (jobs) config["jobs"] = *jobs;
    if (retries) config["retries"] = *retries;
    if (max_records) config["max_records"] = *max_records;
    if (disp_ppa) config["dispersion_points_per_axis"] = *disp_ppa;
    if (disp_budget) config["dispersion_budget"] = *disp_budget;
    if (validation) config["validation_samples"] = *validation;
    if (shared) config["shared_dynamics"] = true;
    if (plain_eps) config["conservative_epsilon"] = false;
    if (conservative_eps) config["conservative_epsilon"] = true;
    if (no_datasets) config["write_datasets"] = false;
    sampling.apply(config["sampling"]);
    sop.apply(config["sop"]);
    lip.apply(config["lipschitz"]);

    int code = kExitInternal;
    char* summary = nullptr;
    check(dc_run_pipeline(config.dump().c_str(), &code, &summary, nullptr), "certify");
    std::cout << take(summary);
    return code;
  }
};

struct SimulateCmd {
  std::string network, out;
  std::optional<long> m;
  std::size_t k_max = 100, pairs = 1;
  double bound = 250.0;
  std::uint64_t seed = 1;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("simulate", "emit divergence series of random trajectory pairs");
    c->add_option("--network", network)->required();
    c->add_option("--m", m);
    c->add_option("--k-max", k_max, "steps to simulate");
    c->add_option("--pairs", pairs, "number of initial pairs");
    c->add_option("--bound", bound, "initial states drawn from [-bound, bound]");
    c->add_option("--seed", seed);
    c->add_option("--out", out, "CSV path (default stdout)");
    c->callback([this] { throw run(); });
  }

  int run() const {
    const NetworkPtr net = load_network(network, m);
    std::size_t dim = 0;
    check(dc_network_info(net.get(), nullptr, &dim), "network info");
    std::vector<std::vector<double>> series(pairs, std::vector<double>(k_max + 1));
    std::vector<double> x(dim), xp(dim);
    for (std::size_t s = 0; s < pairs; ++s) {
      std::mt19937_64 rng(seed + s);
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t k = 0; k < dim; ++k) {
        x[k] = u(rng);
        xp[k] = u(rng);
      }
      check(dc_divergence_series(net.get(), x.data(), xp.data(), k_max, series[s].data()),
            "simulate");
    }
    std::ostringstream csv;
    csv << "k";
    for (std::size_t s = 0; s < pairs; ++s) csv << ",pair" << s + 1;
    csv << '\n';
    csv.precision(17);
    for (std::size_t k = 0; k <= k_max; ++k) {
      csv << k;
      for (std::size_t s = 0; s < pairs; ++s) csv << ',' << series[s][k];
      csv << '\n';
    }
    write_output(out, csv.str());
    return 0;
  }
};

struct SampleCmd {
  std::string network, out;
  std::optional<long> m;
  std::size_t subsystem = 0, jobs = 1;
  bool raw = false, dispersion = false;
  SamplingFlags sampling;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("sample", "collect a dataset from one subsystem");
    c->add_option("--network", network)->required();
    c->add_option("--m", m);
    c->add_option("--subsystem", subsystem, "subsystem index (0-based)");
    c->add_option("--out", out, "JSON-lines dataset path")->required();
    c->add_option("--jobs", jobs);
    c->add_flag("--raw", raw, "store unnormalized records");
    c->add_flag("--dispersion", dispersion, "also report the dispersion of the stored data");
    sampling.add(c);
    c->callback([this] { throw run(); });
  }

  int run() const {
    const NetworkPtr net = load_network(network, m);
    json spec = json::object();
    sampling.apply(spec);
    dc_dataset* collected = nullptr;
    check(dc_collect(net.get(), subsystem, spec.dump().c_str(), jobs, &collected), "sample");
    DatasetPtr ds(collected);
    if (!raw) {
      dc_dataset* normalized = nullptr;
      check(dc_dataset_normalize(ds.get(), &normalized), "normalize");
      ds.reset(normalized);
    }
    check(dc_dataset_save(ds.get(), out.c_str()), "save dataset");
    std::size_t records = 0;
    check(dc_dataset_info(ds.get(), &records, nullptr, nullptr, nullptr), "dataset info");
    char* hash = nullptr;
    check(dc_dataset_hash(ds.get(), &hash), "dataset hash");
    json report = {{"path", out}, {"records", records}, {"hash", take(hash)}};
    if (dispersion && !raw) {
      char* disp = nullptr;
      check(dc_estimate_dispersion(ds.get(), 0, jobs, 2'000'000, &disp), "dispersion");
      report["dispersion"] = json::parse(take(disp));
    }
    std::cout << report.dump(2) << '\n';
    return 0;
  }
};

DatasetPtr load_normalized(const std::string& path) {
  dc_dataset* raw = nullptr;
  check(dc_dataset_load(path.c_str(), &raw), "loading dataset " + path);
  DatasetPtr ds(raw);
  int normalized = 0;
  check(dc_dataset_info(ds.get(), nullptr, nullptr, nullptr, &normalized), "dataset info");
  if (!normalized) {
    dc_dataset* n = nullptr;
    check(dc_dataset_normalize(ds.get(), &n), "normalize");
    ds.reset(n);
  }
  return ds;
}

struct SolveCmd {
  std::string dataset, template_path, out;
  std::size_t jobs = 1;
  SopFlags sop;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("solve", "solve the scenario program on a dataset");
    c->add_option("--dataset", dataset)->required();
    c->add_option("--template", template_path, "template JSON {n, basis}");
    c->add_option("--out", out, "solution JSON path (default stdout)");
    c->add_option("--jobs", jobs);
    sop.add(c);
    c->callback([this] { throw run(); });
  }

  int run() const {
    const DatasetPtr ds = load_normalized(dataset);
    json config = json::object();
    sop.apply(config);
    const std::string tpl = template_path.empty() ? std::string() : read_file(template_path);
    char* solution = nullptr;
    check(dc_solve_sop(ds.get(), config.dump().c_str(), tpl.empty() ? nullptr : tpl.c_str(), jobs,
                       &solution),
          "solve");
    const std::string sol = take(solution);
    char* audit = nullptr;
    check(dc_audit_solution(ds.get(), sol.c_str(), 1e-9, &audit), "audit");
    const json a = json::parse(take(audit));
    write_output(out, pretty(sol));
    std::cerr << "audit: " << a.dump() << '\n';
    return a.at("pass").get<bool>() ? 0 : kExitInternal;
  }
};

struct LipschitzCmd {
  std::string network, solution, out;
  std::optional<long> m;
  std::size_t subsystem = 0, jobs = 1;
  LipschitzFlags lip;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("lipschitz", "estimate the Lipschitz constants of a solution");
    c->add_option("--network", network)->required();
    c->add_option("--m", m);
    c->add_option("--subsystem", subsystem, "subsystem index (0-based)");
    c->add_option("--solution", solution, "solution JSON from solve")->required();
    c->add_option("--out", out);
    c->add_option("--jobs", jobs);
    lip.add(c);
    c->callback([this] { throw run(); });
  }

  int run() const {
    const NetworkPtr net = load_network(network, m);
    json config = json::object();
    lip.apply(config);
    const std::string sol = read_file(solution);
    char* est = nullptr;
    check(dc_estimate_lipschitz(net.get(), subsystem, sol.c_str(), config.dump().c_str(), jobs,
                                &est),
          "lipschitz");
    write_output(out, pretty(take(est)));
    return 0;
  }
};

struct ComposeCmd {
  std::string network, out;
  std::optional<long> m;
  std::vector<std::string> certificates;
  std::vector<std::size_t> assignment;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("compose", "apply the small-gain condition to certificates");
    c->add_option("--network", network, "network description (for the topology)")->required();
    c->add_option("--m", m);
    c->add_option("--certificates", certificates, "subsystem certificate files")->required();
    c->add_option("--assignment", assignment, "certificate index per subsystem")->delimiter(',');
    c->add_option("--out", out);
    c->callback([this] { throw run(); });
  }

  int run() const {
    const NetworkPtr net = load_network(network, m);
    char* topo = nullptr;
    check(dc_network_topology(net.get(), &topo), "topology");
    const std::string topology = take(topo);
    json certs = json::array();
    for (const auto& path : certificates) certs.push_back(read_json(path));
    const std::string assign = json(assignment).dump();
    char* result = nullptr;
    const dc_status s = dc_compose(certs.dump().c_str(), topology.c_str(),
                                   assignment.empty() ? nullptr : assign.c_str(), &result);
    if (s == DC_ERR_REFUSED) {
      std::cerr << "refused: " << dc_last_error() << '\n';
      return kExitCompose;
    }
    check(s, "compose");
    write_output(out, pretty(take(result)));
    return 0;
  }
};

struct ValidateCmd {
  std::string network, certificate;
  std::optional<long> m;
  std::size_t samples = 10'000, jobs = 1;
  std::uint64_t seed = 1;
  double tol = 1e-6;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("validate", "sample the network Lyapunov conditions");
    c->add_option("--network", network)->required();
    c->add_option("--m", m);
    c->add_option("--certificate", certificate, "network certificate JSON")->required();
    c->add_option("--samples", samples);
    c->add_option("--seed", seed);
    c->add_option("--tol", tol);
    c->add_option("--jobs", jobs);
    c->callback([this] { throw run(); });
  }

  int run() const {
    const NetworkPtr net = load_network(network, m);
    const std::string cert = read_file(certificate);
    char* report = nullptr;
    check(dc_validate_network(net.get(), cert.c_str(), samples, seed, tol, jobs, &report),
          "validate");
    const json r = json::parse(take(report));
    std::cout << r.dump(2) << '\n';
    return r.at("pass").get<bool>() ? 0 : kExitInternal;
  }
};

struct ComplexityCmd {
  std::vector<std::size_t> dims{4};
  std::size_t ppa = 5;
  std::string m_range = "1:10";
  std::string out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("complexity", "compare compositional and monolithic sample counts");
    c->add_option("--dims", dims, "n_i + p_i per subsystem, cycled")->delimiter(',');
    c->add_option("--points-per-axis", ppa);
    c->add_option("--m", m_range, "subsystem counts: a list 1,2,5 or a range 1:10");
    c->add_option("--out", out);
    c->callback([this] { throw run(); });
  }

  std::vector<std::size_t> parse_m() const {
    std::vector<std::size_t> values;
    try {
      const auto colon = m_range.find(':');
      if (colon != std::string::npos) {
        const std::size_t lo = std::stoul(m_range.substr(0, colon));
        const std::size_t hi = std::stoul(m_range.substr(colon + 1));
        for (std::size_t v = lo; v <= hi; ++v) values.push_back(v);
      } else {
        std::stringstream ss(m_range);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(std::stoul(item));
      }
    } catch (const std::exception&) {
      throw CliError{kExitConfig, "bad --m value '" + m_range + "'"};
    }
    return values;
  }

  int run() const {
    const auto ms = parse_m();
    char* csv = nullptr;
    check(dc_complexity_csv(dims.data(), dims.size(), ppa, ms.data(), ms.size(), &csv),
          "complexity");
    write_output(out, take(csv));
    return 0;
  }
};

struct BaselineCmd {
  std::string network, options_path, out;
  std::optional<double> theta, gamma_bar;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("baseline", "model-based certification of linear subsystems");
    c->add_option("--network", network)->required();
    c->add_option("--theta", theta);
    c->add_option("--gamma-bar", gamma_bar);
    c->add_option("--options", options_path, "JSON with p_override / rho_override");
    c->add_option("--out", out);
    c->callback([this] { throw run(); });
  }

  int run() const {
    json options = options_path.empty() ? json::object() : read_json(options_path);
    if (theta) options["theta"] = *theta;
    if (gamma_bar) options["gamma_bar"] = *gamma_bar;
    char* result = nullptr;
    check(dc_baseline(network.c_str(), options.dump().c_str(), &result), "baseline");
    const json r = json::parse(take(result));
    write_output(out, r.dump(2));
    const json& c = r.at("composition");
    std::cerr << "zeta = " << c.at("zeta").get<double>() << (r.at("pass").get<bool>() ? " pass" : " FAIL")
              << '\n';
    return r.at("pass").get<bool>() ? 0 : kExitCompose;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven incremental stability certificates for networks of black-box subsystems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dc_version()));

  CertifyCmd certify;
  SimulateCmd simulate;
  SampleCmd sample;
  SolveCmd solve;
  LipschitzCmd lipschitz;
  ComposeCmd compose;
  ValidateCmd validate;
  ComplexityCmd complexity;
  BaselineCmd baseline;
  certify.add(app);
  simulate.add(app);
  sample.add(app);
  solve.add(app);
  lipschitz.add(app);
  compose.add(app);
  validate.add(app);
  complexity.add(app);
  baseline.add(app);
  app.add_subcommand("defaults", "print the default run configuration")->callback([] {
    std::cout << default_config().dump(2) << '\n';
    throw 0;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (int code) {
    return code;
  } catch (const CliError& e) {
    std::cerr << "deltacert: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "deltacert: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
