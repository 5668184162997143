#include "deltacert/deltacert.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "deltacert/baseline.hpp"
#include "deltacert/certify.hpp"
#include "deltacert/error.hpp"
#include "deltacert/lipschitz.hpp"
#include "deltacert/network_io.hpp"
#include "deltacert/pipeline.hpp"
#include "deltacert/sampling.hpp"
#include "deltacert/sop.hpp"

using nlohmann::json;
namespace dc = deltacert;

struct dc_network {
  dc::NetworkDef net;
};

struct dc_dataset {
  dc::Dataset data;
};

namespace {

thread_local std::string last_error;

dc_status status_of(dc::ErrorCode code) {
  switch (code) {
    case dc::ErrorCode::kInvalidArgument: return DC_ERR_INVALID_ARGUMENT;
    case dc::ErrorCode::kParse: return DC_ERR_PARSE;
    case dc::ErrorCode::kIo: return DC_ERR_IO;
    case dc::ErrorCode::kInfeasible: return DC_ERR_INFEASIBLE;
    case dc::ErrorCode::kNumerical: return DC_ERR_NUMERICAL;
    case dc::ErrorCode::kRefused: return DC_ERR_REFUSED;
    case dc::ErrorCode::kOracle: return DC_ERR_ORACLE;
  }
  return DC_ERR_INTERNAL;
}

template <typename Fn>
dc_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return DC_OK;
  } catch (const dc::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = std::string("JSON: ") + e.what();
    return DC_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return DC_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  dc::require(p != nullptr, std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse(const char* text, const char* what) {
  need(text, what);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    dc::fail(dc::ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

std::optional<std::size_t> m_of(long m_override) {
  if (m_override < 0) return std::nullopt;
  return static_cast<std::size_t>(m_override);
}

dc::NetworkTopology topology_from_json(const json& doc) {
  dc::NetworkTopology t;
  t.m = doc.at("m").get<std::size_t>();
  t.sources = doc.at("sources").get<std::vector<std::vector<std::size_t>>>();
  dc::require(t.sources.size() == t.m, "topology sources must list every subsystem");
  for (const auto& s : t.sources) {
    for (std::size_t j : s) dc::require(j < t.m, "topology source out of range");
  }
  return t;
}

dc::DenseMatrix square_from_json(const json& j) {
  dc::require(j.is_array() && !j.empty(), "matrix must be a non-empty array of rows");
  dc::DenseMatrix m{j.size(), j.size(), {}};
  for (const auto& row : j) {
    dc::require(row.is_array() && row.size() == m.cols, "matrix must be square");
    for (const auto& v : row) m.values.push_back(v.get<double>());
  }
  return m;
}

json matrix_json(const dc::DenseMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json composition_to_json(const dc::Composition& c) {
  json doc = {{"zeta_vector", c.zeta_vector},
              {"zeta", c.zeta},
              {"gamma_net", c.gamma_net},
              {"alpha_lo_net", c.alpha_lo_net},
              {"alpha_hi_net", c.alpha_hi_net},
              {"pass", c.pass},
              {"violating_columns", c.violating_columns}};
  if (!c.reason.empty()) doc["reason"] = c.reason;
  return doc;
}

dc::SopConfig sop_config_from_json(const json& s) {
  dc::RunConfig base;
  return dc::run_config_from_json(json{{"sop", s}}, base).sop;
}

}  // namespace

extern "C" {

const char* dc_version(void) { return "0.1.0"; }

const char* dc_status_name(dc_status status) {
  switch (status) {
    case DC_OK: return "ok";
    case DC_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case DC_ERR_PARSE: return "parse";
    case DC_ERR_IO: return "io";
    case DC_ERR_INFEASIBLE: return "infeasible";
    case DC_ERR_NUMERICAL: return "numerical";
    case DC_ERR_REFUSED: return "refused";
    case DC_ERR_ORACLE: return "oracle";
    case DC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dc_last_error(void) { return last_error.c_str(); }

void dc_string_free(char* s) { std::free(s); }

dc_status dc_network_load(const char* path, long m_override, dc_network** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dc_network{dc::load_network(path, m_of(m_override))};
  });
}

dc_status dc_network_parse(const char* json_text, long m_override, dc_network** out) {
  return guarded([&] {
    need(out, "out");
    *out = new dc_network{dc::network_from_json(parse(json_text, "network"), m_of(m_override))};
  });
}

void dc_network_free(dc_network* net) { delete net; }

dc_status dc_network_info(const dc_network* net, size_t* m, size_t* state_dim) {
  return guarded([&] {
    need(net, "network");
    if (m) *m = net->net.size();
    if (state_dim) *state_dim = net->net.state_dim();
  });
}

dc_status dc_network_subsystem(const dc_network* net, size_t index, int* id, size_t* n,
                               size_t* p) {
  return guarded([&] {
    need(net, "network");
    dc::require(index < net->net.size(), "subsystem index out of range");
    const auto& sub = net->net.subsystem(index);
    if (id) *id = sub.id;
    if (n) *n = sub.n;
    if (p) *p = sub.p;
  });
}

dc_status dc_network_topology(const dc_network* net, char** topology_json) {
  return guarded([&] {
    need(net, "network");
    need(topology_json, "out");
    const auto& t = net->net.topology();
    *topology_json = dup_string(json{{"m", t.m}, {"sources", t.sources}}.dump());
  });
}

dc_status dc_network_step(const dc_network* net, const double* x, double* out) {
  return guarded([&] {
    need(net, "network");
    need(x, "x");
    need(out, "out");
    const std::size_t d = net->net.state_dim();
    const dc::Vector next = net->net.step(std::span<const double>(x, d));
    std::copy(next.begin(), next.end(), out);
  });
}

dc_status dc_divergence_series(const dc_network* net, const double* x0, const double* x0_prime,
                               size_t k_max, double* out) {
  return guarded([&] {
    need(net, "network");
    need(x0, "x0");
    need(x0_prime, "x0_prime");
    need(out, "out");
    const std::size_t d = net->net.state_dim();
    const dc::Vector s = dc::divergence_series(net->net, std::span<const double>(x0, d),
                                               std::span<const double>(x0_prime, d), k_max);
    std::copy(s.begin(), s.end(), out);
  });
}

dc_status dc_check_homogeneity(const dc_network* net, size_t index, size_t samples,
                               const double* etas, size_t eta_count, double tol, uint64_t seed,
                               double* max_deviation, int* pass) {
  return guarded([&] {
    need(net, "network");
    need(etas, "etas");
    dc::require(index < net->net.size(), "subsystem index out of range");
    const auto report = dc::check_homogeneity(net->net.subsystem(index), samples,
                                              std::span<const double>(etas, eta_count), tol, seed);
    if (max_deviation) *max_deviation = report.max_deviation;
    if (pass) *pass = report.pass ? 1 : 0;
  });
}

dc_status dc_collect(const dc_network* net, size_t index, const char* sampling_json,
                     size_t jobs, dc_dataset** out) {
  return guarded([&] {
    need(net, "network");
    need(out, "out");
    dc::require(index < net->net.size(), "subsystem index out of range");
    dc::SamplingSpec spec;
    if (sampling_json) spec = dc::sampling_spec_from_json(parse(sampling_json, "sampling"));
    *out = new dc_dataset{dc::collect(net->net.subsystem(index), spec, jobs)};
  });
}

dc_status dc_dataset_normalize(const dc_dataset* raw, dc_dataset** out) {
  return guarded([&] {
    need(raw, "dataset");
    need(out, "out");
    *out = new dc_dataset{dc::normalize(raw->data)};
  });
}

dc_status dc_dataset_load(const char* path, dc_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dc_dataset{dc::load_dataset(path)};
  });
}

dc_status dc_dataset_save(const dc_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    dc::save_dataset(ds->data, path);
  });
}

void dc_dataset_free(dc_dataset* ds) { delete ds; }

dc_status dc_dataset_info(const dc_dataset* ds, size_t* records, size_t* n, size_t* p,
                          int* normalized) {
  return guarded([&] {
    need(ds, "dataset");
    if (records) *records = ds->data.size();
    if (n) *n = ds->data.n();
    if (p) *p = ds->data.p();
    if (normalized) *normalized = ds->data.normalized() ? 1 : 0;
  });
}

dc_status dc_dataset_hash(const dc_dataset* ds, char** hash) {
  return guarded([&] {
    need(ds, "dataset");
    need(hash, "out");
    *hash = dup_string(dc::dataset_hash(ds->data));
  });
}

dc_status dc_estimate_dispersion(const dc_dataset* ds, size_t test_points_per_axis, size_t jobs,
                                 size_t budget, char** result_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(result_json, "out");
    const auto e = dc::estimate_dispersion(ds->data, test_points_per_axis, jobs, budget);
    *result_json = dup_string(json{{"epsilon", e.epsilon},
                                   {"epsilon_conservative", e.epsilon_conservative},
                                   {"test_set_size", e.test_set_size},
                                   {"grid_resolution", e.grid_resolution},
                                   {"test_points_per_axis", e.test_points_per_axis}}
                                  .dump());
  });
}

dc_status dc_solve_sop(const dc_dataset* ds, const char* sop_json, const char* template_json,
                       size_t jobs, char** solution_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(solution_json, "out");
    const dc::SopConfig config =
        sop_json ? sop_config_from_json(parse(sop_json, "sop config")) : dc::SopConfig{};
    const dc::LyapunovTemplate tpl =
        template_json ? dc::template_from_json(parse(template_json, "template"))
                      : dc::LyapunovTemplate::full_quadratic(ds->data.n());
    *solution_json = dup_string(dc::to_json(dc::solve_sop(ds->data, tpl, config, jobs)).dump());
  });
}

dc_status dc_audit_solution(const dc_dataset* ds, const char* solution_json, double tol,
                            char** audit_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(audit_json, "out");
    const auto sol = dc::sop_solution_from_json(parse(solution_json, "solution"));
    const auto a = dc::audit_solution(ds->data, sol, tol);
    *audit_json = dup_string(json{{"max_lower", a.max_lower},
                                  {"max_upper", a.max_upper},
                                  {"max_decay", a.max_decay},
                                  {"worst_record", a.worst_record},
                                  {"global_excess", a.global_excess},
                                  {"mu_star", sol.mu_star},
                                  {"pass", a.pass}}
                                 .dump());
  });
}

dc_status dc_estimate_lipschitz(const dc_network* net, size_t index, const char* solution_json,
                                const char* config_json, size_t jobs, char** estimate_json) {
  return guarded([&] {
    need(net, "network");
    need(estimate_json, "out");
    dc::require(index < net->net.size(), "subsystem index out of range");
    const auto sol = dc::sop_solution_from_json(parse(solution_json, "solution"));
    dc::LipschitzConfig config;
    if (config_json) config = dc::lipschitz_config_from_json(parse(config_json, "lipschitz config"));
    const auto est = dc::estimate_constants(sol, net->net.subsystem(index), config, jobs);
    *estimate_json = dup_string(dc::to_json(est).dump());
  });
}

dc_status dc_check_subsystem(const char* solution_json, double epsilon, double l, int id,
                             char** certificate_json) {
  return guarded([&] {
    need(certificate_json, "out");
    const auto sol = dc::sop_solution_from_json(parse(solution_json, "solution"));
    *certificate_json = dup_string(dc::to_json(dc::check_subsystem(sol, epsilon, l, id)).dump());
  });
}

dc_status dc_evaluate_composition(const char* gains_json, const char* topology_json,
                                  char** composition_json) {
  return guarded([&] {
    need(composition_json, "out");
    std::vector<dc::ComponentGains> gains;
    for (const auto& g : parse(gains_json, "gains")) {
      gains.push_back({g.at("gamma").get<double>(), g.at("rho").get<double>(),
                       g.value("alpha_lo", 1.0), g.value("alpha_hi", 1.0)});
    }
    const auto topology = topology_from_json(parse(topology_json, "topology"));
    *composition_json =
        dup_string(composition_to_json(dc::evaluate_composition(gains, topology)).dump());
  });
}

dc_status dc_compose(const char* certificates_json, const char* topology_json,
                     const char* assignment_json, char** network_certificate_json) {
  return guarded([&] {
    need(network_certificate_json, "out");
    std::vector<dc::SubsystemCertificate> certs;
    for (const auto& c : parse(certificates_json, "certificates")) {
      certs.push_back(dc::subsystem_certificate_from_json(c));
    }
    std::vector<std::size_t> assignment;
    if (assignment_json) {
      assignment = parse(assignment_json, "assignment").get<std::vector<std::size_t>>();
    }
    const auto topology = topology_from_json(parse(topology_json, "topology"));
    const auto net = dc::compose(std::move(certs), topology, std::move(assignment));
    *network_certificate_json = dup_string(dc::to_json(net).dump());
  });
}

dc_status dc_evaluate_v(const char* network_certificate_json, const double* x,
                        const double* x_prime, size_t dim, double* value) {
  return guarded([&] {
    need(x, "x");
    need(x_prime, "x_prime");
    need(value, "value");
    const auto cert =
        dc::network_certificate_from_json(parse(network_certificate_json, "certificate"));
    *value = dc::evaluate_V(cert, std::span<const double>(x, dim),
                            std::span<const double>(x_prime, dim));
  });
}

dc_status dc_validate_network(const dc_network* net, const char* network_certificate_json,
                              size_t samples, uint64_t seed, double tol, size_t jobs,
                              char** report_json) {
  return guarded([&] {
    need(net, "network");
    need(report_json, "out");
    const auto cert =
        dc::network_certificate_from_json(parse(network_certificate_json, "certificate"));
    const auto r = dc::validate_network(cert, net->net, samples, seed, tol, jobs);
    *report_json = dup_string(json{{"samples", r.samples},
                                   {"violations", r.violations},
                                   {"max_lower_violation", r.max_lower_violation},
                                   {"max_upper_violation", r.max_upper_violation},
                                   {"max_decay_violation", r.max_decay_violation},
                                   {"worst_sample", r.worst_sample},
                                   {"pass", r.pass}}
                                  .dump());
  });
}

dc_status dc_complexity_csv(const size_t* dims, size_t dim_count, size_t points_per_axis,
                            const size_t* m_values, size_t m_count, char** csv) {
  return guarded([&] {
    need(dims, "dims");
    need(m_values, "m_values");
    need(csv, "out");
    const std::vector<std::size_t> d(dims, dims + dim_count);
    const std::vector<std::size_t> m(m_values, m_values + m_count);
    *csv = dup_string(dc::complexity_csv(dc::complexity_report(d, points_per_axis, m)));
  });
}

dc_status dc_baseline(const char* network_path, const char* options_json, char** result_json) {
  return guarded([&] {
    need(network_path, "network path");
    need(result_json, "out");
    const json doc = dc::read_json_file(network_path);
    const dc::NetworkDef net = dc::network_from_json(doc);
    std::vector<dc::LinearModel> models;
    for (auto& [a, b] : dc::linear_models_from_json(doc)) models.push_back({a, b});

    dc::ModelBasedOptions options;
    if (options_json) {
      const json o = parse(options_json, "baseline options");
      options.theta = o.value("theta", options.theta);
      options.gamma_bar = o.value("gamma_bar", options.gamma_bar);
      if (o.contains("p_override")) {
        for (const auto& p : o.at("p_override")) {
          options.p_override.push_back(p.is_null() ? std::nullopt
                                                   : std::optional(square_from_json(p)));
        }
      }
      if (o.contains("rho_override")) {
        for (const auto& r : o.at("rho_override")) {
          options.rho_override.push_back(r.is_null() ? std::nullopt
                                                     : std::optional(r.get<double>()));
        }
      }
    }
    const auto result = dc::model_based_evaluate(models, net.topology(), options);
    json subs = json::array();
    for (std::size_t i = 0; i < models.size(); ++i) {
      subs.push_back({{"id", i + 1},
                      {"P", matrix_json(result.p[i])},
                      {"lmi_pass", result.lmi[i].pass},
                      {"lmi_margin", result.lmi[i].margin},
                      {"gamma", result.gains[i].gamma},
                      {"rho", result.gains[i].rho},
                      {"alpha_lo", result.gains[i].alpha_lo},
                      {"alpha_hi", result.gains[i].alpha_hi}});
    }
    json out = {{"theta", options.theta},
                {"gamma_bar", options.gamma_bar},
                {"subsystems", subs},
                {"composition", composition_to_json(result.composition)},
                {"pass", result.certificate.has_value()}};
    if (result.certificate) out["certificate"] = dc::to_json(*result.certificate);
    *result_json = dup_string(out.dump());
  });
}

dc_status dc_default_config(char** config_json) {
  return guarded([&] {
    need(config_json, "out");
    *config_json = dup_string(dc::to_json(dc::RunConfig{}).dump(2));
  });
}

dc_status dc_run_pipeline(const char* config_json, int* exit_code, char** summary,
                          char** result_json) {
  return guarded([&] {
    need(exit_code, "exit_code");
    const dc::RunConfig config = dc::run_config_from_json(parse(config_json, "run config"));
    const dc::PipelineResult r = dc::run_pipeline(config);
    *exit_code = r.exit_code;
    if (summary) *summary = dup_string(r.summary);
    if (result_json) {
      json out = {{"exit_code", r.exit_code},
                  {"stage", r.stage},
                  {"diagnosis", r.diagnosis},
                  {"message", r.message},
                  {"attempts", r.attempts}};
      json subs = json::array();
      for (const auto& c : r.subsystem_certificates) subs.push_back(dc::to_json(c));
      out["subsystems"] = subs;
      if (r.certificate) out["certificate"] = dc::to_json(*r.certificate);
      *result_json = dup_string(out.dump());
    }
  });
}

}  // extern "C"
