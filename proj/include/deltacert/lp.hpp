#pragma once

// Dense linear programs with few variables and many inequality rows:
//
//   minimize  c'z   subject to  A z <= b,  lower <= z <= upper.
//
// solve_lp runs a primal simplex in inequality form (the basis is a k x k set
// of active rows, k = number of variables) on a working subset of rows and
// grows the subset by the most violated rows until every row holds to within
// the feasibility tolerance.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace deltacert {

class LpProblem {
 public:
  LpProblem() = default;

  /// Adds a variable with finite bounds and returns its index.
  std::size_t add_variable(std::string name, double lower, double upper,
                           double objective = 0.0);
  /// Adds the row coefficients . z <= rhs; coefficients.size() must equal
  /// the number of variables.
  void add_row(std::span<const double> coefficients, double rhs);
  void remove_last_rows(std::size_t count);
  void set_objective(std::span<const double> objective);

  std::size_t num_vars() const noexcept { return names_.size(); }
  std::size_t num_rows() const noexcept { return rhs_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {coefficients_.data() + i * num_vars(), num_vars()};
  }
  double rhs(std::size_t i) const { return rhs_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  const std::vector<double>& objective() const noexcept { return objective_; }
  std::size_t index_of(const std::string& name) const;

  void reserve_rows(std::size_t rows);

 private:
  std::vector<std::string> names_;
  std::vector<double> lower_, upper_, objective_;
  std::vector<double> coefficients_;  // row-major, num_vars() per row
  std::vector<double> rhs_;
};

enum class LpStatus { kOptimal, kInfeasible, kIterationLimit, kNumericalFailure };

const char* to_string(LpStatus status);
LpStatus lp_status_from_string(const std::string& name);

struct LpOptions {
  double feasibility_tol = 1e-9;
  std::size_t max_iterations = 100'000;     // simplex pivots per subset solve
  std::size_t max_rounds = 500;             // cutting-plane rounds
  std::size_t initial_rows = 256;           // rows seeded into the subset
  std::size_t rows_per_round = 256;         // most violated rows added per round
};

struct LpResult {
  LpStatus status = LpStatus::kNumericalFailure;
  std::vector<double> values;
  double objective = 0.0;
  double max_violation = 0.0;  // over all rows, at `values`
  std::size_t iterations = 0;
  std::size_t rounds = 0;
  std::size_t working_rows = 0;
  std::string diagnostics;
};

LpResult solve_lp(const LpProblem& problem, const LpOptions& options = {});

}  // namespace deltacert
