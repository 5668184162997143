#pragma once

// Per-subsystem margin checks, small-gain composition and the resulting
// network incremental Lyapunov function V = sum_i S_i.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deltacert/dynamics.hpp"
#include "deltacert/sop.hpp"

namespace deltacert {

struct SubsystemCertificate {
  int id = 0;
  SopSolution solution;
  double epsilon = 0.0;
  double l = 0.0;
  double margin = 0.0;  // mu_star + l * epsilon
  bool pass = false;
  std::string source = "data";  // "data" or "model"
  std::string dataset_hash;
  nlohmann::json details = nlohmann::json::object();
};

SubsystemCertificate check_subsystem(const SopSolution& solution, double epsilon, double l,
                                     int id = 0);

/// The quantities composition needs from one subsystem.
struct ComponentGains {
  double gamma = 0.0;
  double rho = 0.0;
  double alpha_lo = 1.0;
  double alpha_hi = 1.0;
};

ComponentGains gains_of(const SubsystemCertificate& cert);

struct GammaDelta {
  std::vector<double> gamma_hat;  // 1 - gamma_i
  /// rows[i] holds (j, rho_i / alpha_lo_j) for each source j of subsystem i.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;

  double delta(std::size_t i, std::size_t j) const;
};

GammaDelta assemble_gamma_delta(std::span<const ComponentGains> gains,
                                const NetworkTopology& topology);

/// Refuses (ErrorCode::kRefused) if any certificate fails. `assignment[i]`
/// picks the certificate of subsystem i; empty means certs[i].
GammaDelta assemble_gamma_delta(const std::vector<SubsystemCertificate>& certs,
                                const NetworkTopology& topology,
                                const std::vector<std::size_t>& assignment = {});

struct Composition {
  std::vector<double> zeta_vector;  // column sums of -Gamma + Delta
  double zeta = 0.0;
  double gamma_net = 1.0;
  double alpha_lo_net = 1.0;
  double alpha_hi_net = 1.0;
  bool pass = false;
  std::vector<std::size_t> violating_columns;
  std::string reason;
};

/// Never throws on a failing small-gain condition; the outcome is reported.
Composition evaluate_composition(std::span<const ComponentGains> gains,
                                 const NetworkTopology& topology);

struct NetworkCertificate {
  Composition composition;
  std::vector<SubsystemCertificate> certificates;  // distinct certificates
  std::vector<std::size_t> assignment;             // subsystem i uses certificates[assignment[i]]
  bool pass = false;
  nlohmann::json provenance = nlohmann::json::object();

  const SubsystemCertificate& certificate_for(std::size_t i) const {
    return certificates.at(assignment.at(i));
  }
};

std::vector<ComponentGains> expand_gains(const std::vector<SubsystemCertificate>& certs,
                                         const std::vector<std::size_t>& assignment);

/// Throws ErrorCode::kRefused when a certificate fails or the small-gain
/// condition -1 < zeta < 0 does not hold.
NetworkCertificate compose(std::vector<SubsystemCertificate> certs,
                           const NetworkTopology& topology,
                           std::vector<std::size_t> assignment = {});

/// V(x, x') = sum_i S_i(q_i, x_i, x'_i) with blocks laid out in subsystem order.
double evaluate_V(const NetworkCertificate& cert, std::span<const double> x,
                  std::span<const double> xp);

struct ValidationReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_lower_violation = 0.0;  // alpha_lo ||dx||^2 - V, relative to 1 + |V|
  double max_upper_violation = 0.0;  // V - alpha_hi ||dx||^2
  double max_decay_violation = 0.0;  // V(f, f') - gamma_net V
  std::size_t worst_sample = 0;
  bool pass = false;
};

/// Random global pairs on the pair sphere scaled by eta in {1, 10, 100}.
ValidationReport validate_network(const NetworkCertificate& cert, const NetworkDef& net,
                                  std::size_t sample_count, std::uint64_t seed = 1,
                                  double tol = 1e-6, std::size_t jobs = 1);

struct ComplexityRow {
  std::size_t m = 0;
  std::optional<std::uint64_t> compositional;  // empty when beyond 64 bits
  std::optional<std::uint64_t> monolithic;
};

/// dims[i % dims.size()] = n_i + p_i of subsystem i.
/// compositional = sum_i ppa^(2 d_i), monolithic = ppa^(2 sum_i d_i).
std::vector<ComplexityRow> complexity_report(const std::vector<std::size_t>& dims,
                                             std::size_t points_per_axis,
                                             const std::vector<std::size_t>& m_values);
std::string complexity_csv(const std::vector<ComplexityRow>& rows);

nlohmann::json to_json(const SubsystemCertificate& cert);
SubsystemCertificate subsystem_certificate_from_json(const nlohmann::json& doc);
/// zeta_vector and assignment are run-length encoded when that is shorter.
nlohmann::json to_json(const NetworkCertificate& cert);
NetworkCertificate network_certificate_from_json(const nlohmann::json& doc);

}  // namespace deltacert
