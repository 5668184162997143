#include "deltacert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "deltacert/error.hpp"
#include "deltacert/parallel.hpp"

namespace deltacert {

using nlohmann::json;

SubsystemCertificate check_subsystem(const SopSolution& solution, double epsilon, double l,
                                     int id) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be non-negative");
  require(std::isfinite(l) && l >= 0.0, "Lipschitz constant must be non-negative");
  SubsystemCertificate cert;
  cert.id = id;
  cert.solution = solution;
  cert.epsilon = epsilon;
  cert.l = l;
  cert.margin = solution.mu_star + l * epsilon;
  cert.pass = cert.margin <= 0.0;
  return cert;
}

ComponentGains gains_of(const SubsystemCertificate& cert) {
  return {cert.solution.gamma, cert.solution.rho, cert.solution.alpha_lo,
          cert.solution.alpha_hi};
}

double GammaDelta::delta(std::size_t i, std::size_t j) const {
  double v = 0.0;
  for (const auto& [col, value] : rows.at(i)) {
    if (col == j) v += value;
  }
  return v;
}

GammaDelta assemble_gamma_delta(std::span<const ComponentGains> gains,
                                const NetworkTopology& topology) {
  require(gains.size() == topology.m, "gain count " + std::to_string(gains.size()) +
                                          " does not match network size " +
                                          std::to_string(topology.m));
  require(topology.sources.size() == topology.m, "topology has inconsistent size");
  GammaDelta gd;
  gd.gamma_hat.resize(topology.m);
  gd.rows.resize(topology.m);
  for (std::size_t i = 0; i < topology.m; ++i) {
    const ComponentGains& g = gains[i];
    require(g.gamma > 0.0 && g.gamma < 1.0, "gamma of subsystem " + std::to_string(i) +
                                                " must lie in (0, 1)");
    require(g.rho >= 0.0, "rho of subsystem " + std::to_string(i) + " is negative");
    require(g.alpha_lo > 0.0, "alpha_lo of subsystem " + std::to_string(i) + " must be positive");
    gd.gamma_hat[i] = 1.0 - g.gamma;
    for (std::size_t j : topology.sources[i]) {
      require(j < topology.m && j != i, "invalid interconnection edge");
      gd.rows[i].emplace_back(j, g.rho / gains[j].alpha_lo);
    }
  }
  return gd;
}

std::vector<ComponentGains> expand_gains(const std::vector<SubsystemCertificate>& certs,
                                         const std::vector<std::size_t>& assignment) {
  std::vector<ComponentGains> gains;
  if (assignment.empty()) {
    for (const auto& c : certs) gains.push_back(gains_of(c));
    return gains;
  }
  gains.reserve(assignment.size());
  for (std::size_t a : assignment) {
    require(a < certs.size(), "assignment refers to a missing certificate");
    gains.push_back(gains_of(certs[a]));
  }
  return gains;
}

namespace {

void refuse_failing(const std::vector<SubsystemCertificate>& certs) {
  for (const auto& c : certs) {
    if (!c.pass) {
      std::ostringstream msg;
      msg << "subsystem " << c.id << " is not certified (margin " << c.margin << ")";
      fail(ErrorCode::kRefused, msg.str());
    }
  }
}

}  // namespace

GammaDelta assemble_gamma_delta(const std::vector<SubsystemCertificate>& certs,
                                const NetworkTopology& topology,
                                const std::vector<std::size_t>& assignment) {
  refuse_failing(certs);
  const auto gains = expand_gains(certs, assignment);
  return assemble_gamma_delta(gains, topology);
}

Composition evaluate_composition(std::span<const ComponentGains> gains,
                                 const NetworkTopology& topology) {
  const GammaDelta gd = assemble_gamma_delta(gains, topology);
  const std::size_t m = topology.m;
  Composition c;
  c.zeta_vector.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) c.zeta_vector[j] = -gd.gamma_hat[j];
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& [j, value] : gd.rows[i]) c.zeta_vector[j] += value;
  }
  c.zeta = *std::max_element(c.zeta_vector.begin(), c.zeta_vector.end());
  c.gamma_net = 1.0 + c.zeta;
  c.alpha_lo_net = std::numeric_limits<double>::infinity();
  c.alpha_hi_net = 0.0;
  for (const auto& g : gains) {
    c.alpha_lo_net = std::min(c.alpha_lo_net, g.alpha_lo);
    c.alpha_hi_net = std::max(c.alpha_hi_net, g.alpha_hi);
  }
  if (c.zeta >= 0.0) {
    for (std::size_t j = 0; j < m; ++j) {
      if (c.zeta_vector[j] >= 0.0) c.violating_columns.push_back(j);
    }
    std::ostringstream msg;
    msg << "small-gain condition fails: zeta = " << c.zeta << " >= 0 in "
        << c.violating_columns.size() << " column(s), first " << c.violating_columns.front();
    c.reason = msg.str();
  } else if (c.zeta <= -1.0) {
    std::ostringstream msg;
    msg << "zeta = " << c.zeta << " <= -1 gives a network decay rate outside (0, 1)";
    c.reason = msg.str();
  }
  c.pass = c.zeta < 0.0 && c.zeta > -1.0;
  return c;
}

NetworkCertificate compose(std::vector<SubsystemCertificate> certs,
                           const NetworkTopology& topology,
                           std::vector<std::size_t> assignment) {
  require(!certs.empty(), "no subsystem certificates to compose");
  refuse_failing(certs);
  if (assignment.empty()) {
    require(certs.size() == topology.m, "certificate count does not match network size");
    assignment.resize(certs.size());
    for (std::size_t i = 0; i < certs.size(); ++i) assignment[i] = i;
  }
  require(assignment.size() == topology.m, "assignment does not match network size");
  const auto gains = expand_gains(certs, assignment);
  NetworkCertificate net;
  net.composition = evaluate_composition(gains, topology);
  if (!net.composition.pass) fail(ErrorCode::kRefused, net.composition.reason);
  net.certificates = std::move(certs);
  net.assignment = std::move(assignment);
  net.pass = true;
  return net;
}

double evaluate_V(const NetworkCertificate& cert, std::span<const double> x,
                  std::span<const double> xp) {
  require(x.size() == xp.size(), "state pair has mismatched dimensions");
  double v = 0.0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < cert.assignment.size(); ++i) {
    const SopSolution& s = cert.certificate_for(i).solution;
    const std::size_t n = s.tpl.n;
    require(offset + n <= x.size(), "state is shorter than the network's total dimension");
    v += evaluate_template(s.tpl, s.q, x.subspan(offset, n), xp.subspan(offset, n));
    offset += n;
  }
  require(offset == x.size(), "state is longer than the network's total dimension");
  return v;
}

ValidationReport validate_network(const NetworkCertificate& cert, const NetworkDef& net,
                                  std::size_t sample_count, std::uint64_t seed, double tol,
                                  std::size_t jobs) {
  require(cert.assignment.size() == net.size(), "certificate does not match the network");
  const std::size_t dim = net.state_dim();
  const double alpha_lo = cert.composition.alpha_lo_net;
  const double alpha_hi = cert.composition.alpha_hi_net;
  const double gamma = cert.composition.gamma_net;

  struct Partial {
    std::size_t violations = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = -std::numeric_limits<double>::infinity();
    double decay = -std::numeric_limits<double>::infinity();
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t worst_sample = 0;
  };
  std::vector<Partial> partials(chunk_count(sample_count, jobs));
  parallel_chunks(sample_count, jobs, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Partial& part = partials[chunk];
    std::vector<double> x(dim), xp(dim);
    constexpr double kScales[] = {1.0, 10.0, 100.0};
    for (std::size_t s = begin; s < end; ++s) {
      std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + s);
      std::normal_distribution<double> normal;
      double norm = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        x[k] = normal(rng);
        xp[k] = normal(rng);
        norm += x[k] * x[k] + xp[k] * xp[k];
      }
      const double eta = kScales[rng() % 3] / std::sqrt(norm);
      double dx2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        x[k] *= eta;
        xp[k] *= eta;
        dx2 += (x[k] - xp[k]) * (x[k] - xp[k]);
      }
      const double v = evaluate_V(cert, x, xp);
      const Vector fx = net.step(x);
      const Vector fxp = net.step(xp);
      const double v_next = evaluate_V(cert, fx, fxp);
      const double scale = 1.0 + std::abs(v);
      const double lower = (alpha_lo * dx2 - v) / scale;
      const double upper = (v - alpha_hi * dx2) / scale;
      const double decay = (v_next - gamma * v) / scale;
      part.lower = std::max(part.lower, lower);
      part.upper = std::max(part.upper, upper);
      part.decay = std::max(part.decay, decay);
      const double worst = std::max({lower, upper, decay});
      if (worst > tol) ++part.violations;
      if (worst > part.worst) {
        part.worst = worst;
        part.worst_sample = s;
      }
    }
  });

  ValidationReport report;
  report.samples = sample_count;
  double worst = -std::numeric_limits<double>::infinity();
  report.max_lower_violation = report.max_upper_violation = report.max_decay_violation = worst;
  for (const Partial& p : partials) {
    report.violations += p.violations;
    report.max_lower_violation = std::max(report.max_lower_violation, p.lower);
    report.max_upper_violation = std::max(report.max_upper_violation, p.upper);
    report.max_decay_violation = std::max(report.max_decay_violation, p.decay);
    if (p.worst > worst) {
      worst = p.worst;
      report.worst_sample = p.worst_sample;
    }
  }
  report.pass = report.violations == 0;
  return report;
}

namespace {

std::optional<std::uint64_t> checked_pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t result = 1;
  for (std::uint64_t k = 0; k < exp; ++k) {
    if (__builtin_mul_overflow(result, base, &result)) return std::nullopt;
  }
  return result;
}

}  // namespace

std::vector<ComplexityRow> complexity_report(const std::vector<std::size_t>& dims,
                                             std::size_t points_per_axis,
                                             const std::vector<std::size_t>& m_values) {
  require(points_per_axis >= 2, "points_per_axis must be at least 2");
  require(!dims.empty(), "complexity report needs subsystem dimensions");
  for (std::size_t d : dims) require(d >= 1, "subsystem dimensions must be positive");
  std::vector<ComplexityRow> rows;
  for (std::size_t m : m_values) {
    require(m >= 1, "subsystem count must be positive");
    ComplexityRow row;
    row.m = m;
    std::optional<std::uint64_t> comp = 0;
    std::uint64_t total_dim = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t d = dims[i % dims.size()];
      total_dim += d;
      if (comp) {
        const auto term = checked_pow(points_per_axis, 2 * d);
        std::uint64_t sum = 0;
        if (!term || __builtin_add_overflow(*comp, *term, &sum)) {
          comp.reset();
        } else {
          comp = sum;
        }
      }
    }
    row.compositional = comp;
    row.monolithic = checked_pow(points_per_axis, 2 * total_dim);
    rows.push_back(row);
  }
  return rows;
}

std::string complexity_csv(const std::vector<ComplexityRow>& rows) {
  std::ostringstream out;
  out << "m,compositional,monolithic\n";
  auto cell = [](const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string("inf");
  };
  for (const auto& r : rows) {
    out << r.m << ',' << cell(r.compositional) << ',' << cell(r.monolithic) << '\n';
  }
  return out.str();
}

json to_json(const SubsystemCertificate& c) {
  json doc = {{"id", c.id},
              {"source", c.source},
              {"solution", to_json(c.solution)},
              {"epsilon", c.epsilon},
              {"l", c.l},
              {"margin", c.margin},
              {"pass", c.pass}};
  if (!c.dataset_hash.empty()) doc["dataset_hash"] = c.dataset_hash;
  if (!c.details.empty()) doc["details"] = c.details;
  return doc;
}

SubsystemCertificate subsystem_certificate_from_json(const json& doc) {
  try {
    SubsystemCertificate c;
    c.id = doc.value("id", 0);
    c.source = doc.value("source", std::string("data"));
    c.solution = sop_solution_from_json(doc.at("solution"));
    c.epsilon = doc.at("epsilon").get<double>();
    c.l = doc.at("l").get<double>();
    c.margin = doc.at("margin").get<double>();
    c.pass = doc.at("pass").get<bool>();
    c.dataset_hash = doc.value("dataset_hash", std::string());
    c.details = doc.value("details", json::object());
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("subsystem certificate: ") + e.what());
  }
}

namespace {

template <typename T>
json encode_runs(const std::vector<T>& values) {
  json runs = json::array();
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    runs.push_back({values[i], j - i});
    i = j;
  }
  if (runs.size() * 2 < values.size()) return {{"runs", runs}};
  return values;
}

template <typename T>
std::vector<T> decode_runs(const json& doc) {
  if (doc.is_array()) return doc.get<std::vector<T>>();
  std::vector<T> out;
  for (const auto& run : doc.at("runs")) {
    const T value = run.at(0).get<T>();
    out.insert(out.end(), run.at(1).get<std::size_t>(), value);
  }
  return out;
}

}  // namespace

json to_json(const NetworkCertificate& n) {
  const Composition& c = n.composition;
  json certs = json::array();
  for (const auto& s : n.certificates) certs.push_back(to_json(s));
  json doc = {{"pass", n.pass},
              {"m", n.assignment.size()},
              {"zeta", c.zeta},
              {"gamma_net", c.gamma_net},
              {"alpha_lo_net", c.alpha_lo_net},
              {"alpha_hi_net", c.alpha_hi_net},
              {"zeta_vector", encode_runs(c.zeta_vector)},
              {"assignment", encode_runs(n.assignment)},
              {"certificates", certs}};
  if (!c.reason.empty()) doc["reason"] = c.reason;
  if (!n.provenance.empty()) doc["provenance"] = n.provenance;
  return doc;
}

NetworkCertificate network_certificate_from_json(const json& doc) {
  try {
    NetworkCertificate n;
    n.pass = doc.at("pass").get<bool>();
    n.composition.zeta = doc.at("zeta").get<double>();
    n.composition.gamma_net = doc.at("gamma_net").get<double>();
    n.composition.alpha_lo_net = doc.at("alpha_lo_net").get<double>();
    n.composition.alpha_hi_net = doc.at("alpha_hi_net").get<double>();
    n.composition.zeta_vector = decode_runs<double>(doc.at("zeta_vector"));
    n.composition.pass = n.pass;
    n.composition.reason = doc.value("reason", std::string());
    n.assignment = decode_runs<std::size_t>(doc.at("assignment"));
    for (const auto& c : doc.at("certificates")) {
      n.certificates.push_back(subsystem_certificate_from_json(c));
    }
    for (std::size_t a : n.assignment) {
      require(a < n.certificates.size(), "assignment refers to a missing certificate");
    }
    n.provenance = doc.value("provenance", json::object());
    return n;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("network certificate: ") + e.what());
  }
}

}  // namespace deltacert
