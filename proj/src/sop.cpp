#include "deltacert/sop.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deltacert/error.hpp"
#include "deltacert/parallel.hpp"

namespace deltacert {

using nlohmann::json;

LyapunovTemplate LyapunovTemplate::full_quadratic(std::size_t n) {
  require(n > 0, "template dimension must be positive");
  LyapunovTemplate tpl;
  tpl.n = n;
  for (std::size_t a = 1; a <= n; ++a) {
    for (std::size_t b = a; b <= n; ++b) tpl.basis.emplace_back(a, b);
  }
  return tpl;
}

void LyapunovTemplate::validate() const {
  require(n > 0, "template dimension must be positive");
  require(!basis.empty(), "template has no basis functions");
  for (const auto& [a, b] : basis) {
    require(a >= 1 && a <= b && b <= n,
            "basis pair (" + std::to_string(a) + ", " + std::to_string(b) +
                ") must satisfy 1 <= a <= b <= " + std::to_string(n));
  }
}

void template_basis(const LyapunovTemplate& tpl, std::span<const double> d,
                    std::span<double> out) {
  require(d.size() == tpl.n, "difference vector does not match template dimension");
  require(out.size() == tpl.size(), "basis output has wrong length");
  for (std::size_t j = 0; j < tpl.size(); ++j) {
    const auto [a, b] = tpl.basis[j];
    out[j] = d[a - 1] * d[b - 1];
  }
}

double evaluate_template(const LyapunovTemplate& tpl, std::span<const double> q,
                         std::span<const double> x, std::span<const double> xp) {
  require(q.size() == tpl.size(), "coefficient count does not match template");
  require(x.size() == tpl.n && xp.size() == tpl.n, "state dimension does not match template");
  double s = 0.0;
  for (std::size_t j = 0; j < tpl.size(); ++j) {
    const auto [a, b] = tpl.basis[j];
    s += q[j] * (x[a - 1] - xp[a - 1]) * (x[b - 1] - xp[b - 1]);
  }
  return s;
}

void SopConfig::validate() const {
  require(!gamma_grid.empty(), "gamma grid is empty");
  for (double g : gamma_grid) {
    require(g > 0.0 && g < 1.0, "gamma grid values must lie strictly inside (0, 1)");
  }
  require(q_bound > 0.0, "q_bound must be positive");
  require(alpha_hi_bound >= 1.0, "alpha_hi_bound must be at least 1");
  require(rho_bound >= 0.0, "rho_bound must be non-negative");
  require(mu_bound > 0.0, "mu_bound must be positive");
  require(phi_bound >= 0.0, "phi_bound must be non-negative");
  require(feasibility_tol > 0.0, "feasibility_tol must be positive");
}

LpProblem build_sop(const Dataset& normalized, const LyapunovTemplate& tpl, double gamma,
                    const SopConfig& config) {
  require(normalized.normalized(), "scenario program needs a normalized dataset");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie strictly inside (0, 1)");
  tpl.validate();
  config.validate();
  require(tpl.n == normalized.n(), "template dimension " + std::to_string(tpl.n) +
                                       " does not match state dimension " +
                                       std::to_string(normalized.n()));
  const std::size_t r = tpl.size();
  const std::size_t n = tpl.n;

  LpProblem lp;
  for (std::size_t j = 0; j < r; ++j) {
    lp.add_variable("q" + std::to_string(j + 1), -config.q_bound, config.q_bound);
  }
  const std::size_t alo = lp.add_variable("alpha_lo", 1.0, config.alpha_hi_bound);
  const std::size_t ahi = lp.add_variable("alpha_hi", 1.0, config.alpha_hi_bound);
  const std::size_t rho = lp.add_variable("rho", 0.0, config.rho_bound);
  const std::size_t mu = lp.add_variable("mu", -config.mu_bound, config.mu_bound, 1.0);
  const std::size_t phi = lp.add_variable("phi", 0.0, config.phi_bound, 1.0);
  lp.reserve_rows(3 * normalized.size() + 1);

  std::vector<double> dx(n), df(n), px(r), pf(r), row(lp.num_vars());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const RecordView rec = normalized.record(i);
    double n2 = 0.0;
    double w2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      dx[k] = rec.x[k] - rec.xp[k];
      df[k] = rec.fx[k] - rec.fxp[k];
      n2 += dx[k] * dx[k];
    }
    for (std::size_t k = 0; k < rec.w.size(); ++k) {
      const double dw = rec.w[k] - rec.wp[k];
      w2 += dw * dw;
    }
    template_basis(tpl, dx, px);
    template_basis(tpl, df, pf);

    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < r; ++j) row[j] = -px[j];
    row[alo] = n2;
    row[mu] = -1.0;
    lp.add_row(row, 0.0);

    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < r; ++j) row[j] = px[j];
    row[ahi] = -n2;
    row[mu] = -1.0;
    lp.add_row(row, 0.0);

    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < r; ++j) row[j] = pf[j] - gamma * px[j];
    row[rho] = -w2;
    row[mu] = -1.0;
    lp.add_row(row, 0.0);
  }
  std::fill(row.begin(), row.end(), 0.0);
  row[rho] = 1.0 / (1.0 - gamma);
  row[phi] = -1.0;
  lp.add_row(row, 0.0);
  return lp;
}

namespace {

LpOptions lp_options(const SopConfig& config) {
  LpOptions options;
  options.feasibility_tol = config.feasibility_tol;
  return options;
}

SopSolution assemble(const LpResult& result, const LyapunovTemplate& tpl, double gamma) {
  const std::size_t r = tpl.size();
  SopSolution s;
  s.q.assign(result.values.begin(), result.values.begin() + static_cast<long>(r));
  s.alpha_lo = result.values[r];
  s.alpha_hi = result.values[r + 1];
  s.rho = result.values[r + 2];
  s.mu_star = result.values[r + 3];
  s.phi_star = result.values[r + 4];
  s.gamma = gamma;
  s.tpl = tpl;
  return s;
}

}  // namespace

SopSolution solve_sop(const Dataset& normalized, const LyapunovTemplate& tpl,
                      const SopConfig& config, std::size_t jobs) {
  config.validate();
  require(!normalized.empty(), "scenario program needs at least one record");
  const std::size_t grid = config.gamma_grid.size();
  std::vector<GammaOutcome> outcomes(grid);

  parallel_chunks(grid, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      const double gamma = config.gamma_grid[g];
      const LpResult res = solve_lp(build_sop(normalized, tpl, gamma, config), lp_options(config));
      outcomes[g] = {gamma, res.status, res.objective, res.diagnostics};
    }
  });

  std::size_t best = grid;
  for (std::size_t g = 0; g < grid; ++g) {
    if (outcomes[g].status != LpStatus::kOptimal) continue;
    if (best == grid) {
      best = g;
      continue;
    }
    const double a = outcomes[g].objective;
    const double b = outcomes[best].objective;
    const bool tie = std::abs(a - b) <= config.feasibility_tol;
    if ((!tie && a < b) || (tie && outcomes[g].gamma < outcomes[best].gamma)) best = g;
  }
  if (best == grid) {
    std::ostringstream msg;
    msg << "scenario program has no solution on the gamma grid:";
    for (const auto& o : outcomes) {
      msg << " gamma=" << o.gamma << " " << to_string(o.status);
      if (!o.diagnostics.empty()) msg << " (" << o.diagnostics << ")";
      msg << ';';
    }
    fail(ErrorCode::kInfeasible, msg.str());
  }

  // Second stage: smallest mu among near-optimal points of the chosen gamma.
  const double gamma = outcomes[best].gamma;
  LpProblem lp = build_sop(normalized, tpl, gamma, config);
  const std::size_t mu = lp.index_of("mu");
  const std::size_t phi = lp.index_of("phi");
  std::vector<double> row(lp.num_vars(), 0.0);
  row[mu] = 1.0;
  row[phi] = 1.0;
  lp.add_row(row, outcomes[best].objective + config.feasibility_tol);
  std::vector<double> objective(lp.num_vars(), 0.0);
  objective[mu] = 1.0;
  lp.set_objective(objective);
  const LpResult second = solve_lp(lp, lp_options(config));
  if (second.status != LpStatus::kOptimal) {
    fail(ErrorCode::kNumerical, std::string("second-stage LP at gamma=") +
                                    std::to_string(gamma) + " ended " + to_string(second.status) +
                                    ": " + second.diagnostics);
  }
  SopSolution solution = assemble(second, tpl, gamma);
  solution.per_gamma = std::move(outcomes);
  solution.records = normalized.size();
  return solution;
}

std::array<double, 3> scenario_slacks(const SopSolution& solution, const RecordView& record) {
  const LyapunovTemplate& tpl = solution.tpl;
  double n2 = 0.0;
  for (std::size_t k = 0; k < tpl.n; ++k) {
    const double d = record.x[k] - record.xp[k];
    n2 += d * d;
  }
  double w2 = 0.0;
  for (std::size_t k = 0; k < record.w.size(); ++k) {
    const double d = record.w[k] - record.wp[k];
    w2 += d * d;
  }
  const double s_x = evaluate_template(tpl, solution.q, record.x, record.xp);
  const double s_f = evaluate_template(tpl, solution.q, record.fx, record.fxp);
  return {solution.alpha_lo * n2 - s_x, s_x - solution.alpha_hi * n2,
          s_f - solution.gamma * s_x - solution.rho * w2};
}

SopAudit audit_solution(const Dataset& normalized, const SopSolution& solution, double tol) {
  require(solution.tpl.n == normalized.n(), "solution template does not match dataset");
  SopAudit audit;
  double worst = -1e300;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto s = scenario_slacks(solution, normalized.record(i));
    audit.max_lower = std::max(audit.max_lower, s[0]);
    audit.max_upper = std::max(audit.max_upper, s[1]);
    audit.max_decay = std::max(audit.max_decay, s[2]);
    const double m = std::max({s[0], s[1], s[2]});
    if (m > worst) {
      worst = m;
      audit.worst_record = i;
    }
  }
  audit.global_excess = solution.rho / (1.0 - solution.gamma) - solution.phi_star;
  audit.pass = worst <= solution.mu_star + tol && audit.global_excess <= tol;
  return audit;
}

json to_json(const LyapunovTemplate& tpl) {
  json basis = json::array();
  for (const auto& [a, b] : tpl.basis) basis.push_back({a, b});
  return {{"n", tpl.n}, {"basis", basis}};
}

LyapunovTemplate template_from_json(const json& doc) {
  try {
    LyapunovTemplate tpl;
    tpl.n = doc.at("n").get<std::size_t>();
    for (const auto& pair : doc.at("basis")) {
      require(pair.is_array() && pair.size() == 2, "basis entries must be [a, b] pairs");
      tpl.basis.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
    }
    tpl.validate();
    return tpl;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("template: ") + e.what());
  }
}

json to_json(const SopSolution& s) {
  json per_gamma = json::array();
  for (const auto& o : s.per_gamma) {
    json entry = {{"gamma", o.gamma}, {"status", to_string(o.status)}};
    if (o.status == LpStatus::kOptimal) entry["objective"] = o.objective;
    if (!o.diagnostics.empty()) entry["diagnostics"] = o.diagnostics;
    per_gamma.push_back(entry);
  }
  return {{"q", s.q},
          {"alpha_lo", s.alpha_lo},
          {"alpha_hi", s.alpha_hi},
          {"gamma", s.gamma},
          {"rho", s.rho},
          {"mu_star", s.mu_star},
          {"phi_star", s.phi_star},
          {"template", to_json(s.tpl)},
          {"records", s.records},
          {"per_gamma", per_gamma}};
}

SopSolution sop_solution_from_json(const json& doc) {
  try {
    SopSolution s;
    s.q = doc.at("q").get<std::vector<double>>();
    s.alpha_lo = doc.at("alpha_lo").get<double>();
    s.alpha_hi = doc.at("alpha_hi").get<double>();
    s.gamma = doc.at("gamma").get<double>();
    s.rho = doc.at("rho").get<double>();
    s.mu_star = doc.at("mu_star").get<double>();
    s.phi_star = doc.at("phi_star").get<double>();
    s.tpl = template_from_json(doc.at("template"));
    s.records = doc.value("records", std::size_t{0});
    for (const auto& e : doc.value("per_gamma", json::array())) {
      GammaOutcome o;
      o.gamma = e.at("gamma").get<double>();
      o.status = lp_status_from_string(e.at("status").get<std::string>());
      o.objective = e.value("objective", 0.0);
      o.diagnostics = e.value("diagnostics", std::string());
      s.per_gamma.push_back(std::move(o));
    }
    require(s.q.size() == s.tpl.size(), "solution has " + std::to_string(s.q.size()) +
                                            " coefficients for a template of size " +
                                            std::to_string(s.tpl.size()));
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("solution: ") + e.what());
  }
}

}  // namespace deltacert
