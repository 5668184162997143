#pragma once

// Scenario program for a quadratic incremental Lyapunov candidate
//
//   S(q, x, x') = sum_j q_j (x_a - x'_a)(x_b - x'_b)
//
// on normalized data. For a fixed decay rate gamma every scenario constraint
// is linear in (q, alpha_lo, alpha_hi, rho, mu, phi), so each grid value of
// gamma gives one LP.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deltacert/lp.hpp"
#include "deltacert/sampling.hpp"

namespace deltacert {

struct LyapunovTemplate {
  std::size_t n = 0;
  /// 1-based index pairs (a, b) with a <= b.
  std::vector<std::pair<std::size_t, std::size_t>> basis;

  static LyapunovTemplate full_quadratic(std::size_t n);
  std::size_t size() const noexcept { return basis.size(); }
  void validate() const;

  friend bool operator==(const LyapunovTemplate&, const LyapunovTemplate&) = default;
};

/// Basis values p_j at the difference d = x - x'.
void template_basis(const LyapunovTemplate& tpl, std::span<const double> d,
                    std::span<double> out);

double evaluate_template(const LyapunovTemplate& tpl, std::span<const double> q,
                         std::span<const double> x, std::span<const double> xp);

struct SopConfig {
  std::vector<double> gamma_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double q_bound = 100.0;
  double alpha_hi_bound = 100.0;
  double rho_bound = 100.0;
  double mu_bound = 100.0;
  double phi_bound = 1000.0;
  double feasibility_tol = 1e-9;

  void validate() const;
};

struct GammaOutcome {
  double gamma = 0.0;
  LpStatus status = LpStatus::kNumericalFailure;
  double objective = 0.0;
  std::string diagnostics;
};

struct SopSolution {
  std::vector<double> q;
  double alpha_lo = 1.0;
  double alpha_hi = 1.0;
  double gamma = 0.0;
  double rho = 0.0;
  double mu_star = 0.0;
  double phi_star = 0.0;
  LyapunovTemplate tpl;
  std::vector<GammaOutcome> per_gamma;
  std::size_t records = 0;
};

/// Variable order: q_1..q_r, alpha_lo, alpha_hi, rho, mu, phi. Rows: three per
/// record in record order, then rho / (1 - gamma) - phi <= 0.
LpProblem build_sop(const Dataset& normalized, const LyapunovTemplate& tpl, double gamma,
                    const SopConfig& config);

/// Solves every grid LP, keeps the smallest mu + phi (ties to the smaller
/// gamma), then minimizes mu subject to mu + phi <= best + tol.
SopSolution solve_sop(const Dataset& normalized, const LyapunovTemplate& tpl,
                      const SopConfig& config, std::size_t jobs = 1);

/// Left-hand sides, without mu, of the three scenario constraints of one
/// record: lower bound, upper bound, decay.
std::array<double, 3> scenario_slacks(const SopSolution& solution, const RecordView& record);

struct SopAudit {
  double max_lower = -1e300;  // max over records of each scenario slack
  double max_upper = -1e300;
  double max_decay = -1e300;
  std::size_t worst_record = 0;
  double global_excess = 0.0;  // rho / (1 - gamma) - phi
  bool pass = false;           // every slack <= mu_star + tol, global_excess <= tol
};

/// Re-evaluates every scenario constraint directly from the records.
SopAudit audit_solution(const Dataset& normalized, const SopSolution& solution,
                        double tol = 1e-9);

nlohmann::json to_json(const LyapunovTemplate& tpl);
LyapunovTemplate template_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SopSolution& solution);
SopSolution sop_solution_from_json(const nlohmann::json& doc);

}  // namespace deltacert
