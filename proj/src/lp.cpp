#include "deltacert/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "deltacert/error.hpp"

namespace deltacert {

std::size_t LpProblem::add_variable(std::string name, double lower, double upper,
                                    double objective) {
  require(num_rows() == 0, "variables must be added before rows");
  require(std::isfinite(lower) && std::isfinite(upper) && lower <= upper,
          "variable '" + name + "' needs finite bounds with lower <= upper");
  names_.push_back(std::move(name));
  lower_.push_back(lower);
  upper_.push_back(upper);
  objective_.push_back(objective);
  return names_.size() - 1;
}

void LpProblem::add_row(std::span<const double> coefficients, double rhs) {
  require(coefficients.size() == num_vars(), "row length does not match variable count");
  coefficients_.insert(coefficients_.end(), coefficients.begin(), coefficients.end());
  rhs_.push_back(rhs);
}

void LpProblem::remove_last_rows(std::size_t count) {
  require(count <= num_rows(), "removing more rows than present");
  rhs_.resize(rhs_.size() - count);
  coefficients_.resize(rhs_.size() * num_vars());
}

void LpProblem::set_objective(std::span<const double> objective) {
  require(objective.size() == num_vars(), "objective length does not match variable count");
  objective_.assign(objective.begin(), objective.end());
}

std::size_t LpProblem::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  require(it != names_.end(), "no variable named '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

void LpProblem::reserve_rows(std::size_t rows) {
  coefficients_.reserve(rows * num_vars());
  rhs_.reserve(rows);
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kIterationLimit: return "iteration-limit";
    case LpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

LpStatus lp_status_from_string(const std::string& name) {
  for (LpStatus s : {LpStatus::kOptimal, LpStatus::kInfeasible, LpStatus::kIterationLimit,
                     LpStatus::kNumericalFailure}) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorCode::kParse, "unknown LP status '" + name + "'");
}

namespace {

// Simplex over a working subset of the problem's rows, in the space (z, s)
// where s is an elastic variable relaxing every problem row: a z - s <= b.
//
// Inner row ids: [0, k) lower bounds, [k, 2k) upper bounds, 2k is s >= 0,
// 2k + 1 is s <= cap, and 2k + 2 + t is subset row t.
class SubsetSimplex {
 public:
  SubsetSimplex(const LpProblem& problem, const std::vector<std::size_t>& subset,
                const LpOptions& options)
      : lp_(problem), subset_(subset), opt_(options), k_(problem.num_vars()), dim_(k_ + 1) {}

  struct Outcome {
    LpStatus status;
    std::vector<double> z;
    std::size_t iterations;
    std::string detail;
  };

  Outcome run() {
    // Start at the lower-bound corner with s just large enough.
    point_ = Eigen::VectorXd::Zero(static_cast<long>(dim_));
    for (std::size_t j = 0; j < k_; ++j) point_[static_cast<long>(j)] = lp_.lower()[j];
    double s0 = 0.0;
    std::size_t worst = 0;
    for (std::size_t t = 0; t < subset_.size(); ++t) {
      const double v = problem_row_dot(subset_[t], point_) - lp_.rhs(subset_[t]);
      if (v > s0) {
        s0 = v;
        worst = t;
      }
    }
    point_[static_cast<long>(k_)] = s0;
    cap_ = s0 + 1.0;
    active_.clear();
    for (std::size_t j = 0; j < k_; ++j) active_.push_back(j);
    active_.push_back(s0 > 0.0 ? 2 * k_ + 2 + worst : 2 * k_);

    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(static_cast<long>(dim_));
    phase1[static_cast<long>(k_)] = 1.0;
    LpStatus st = iterate(phase1);
    if (st != LpStatus::kOptimal) return {st, {}, iterations_, "phase 1: " + detail_};
    const double s_star = std::max(0.0, point_[static_cast<long>(k_)]);
    if (s_star > opt_.feasibility_tol) {
      std::ostringstream msg;
      msg << "minimum total relaxation " << s_star << " exceeds tolerance";
      return {LpStatus::kInfeasible, {}, iterations_, msg.str()};
    }
    cap_ = s_star;

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(static_cast<long>(dim_));
    for (std::size_t j = 0; j < k_; ++j) phase2[static_cast<long>(j)] = lp_.objective()[j];
    st = iterate(phase2);
    if (st != LpStatus::kOptimal) return {st, {}, iterations_, "phase 2: " + detail_};
    std::vector<double> z(k_);
    for (std::size_t j = 0; j < k_; ++j) {
      z[j] = std::clamp(point_[static_cast<long>(j)], lp_.lower()[j], lp_.upper()[j]);
    }
    return {LpStatus::kOptimal, std::move(z), iterations_, {}};
  }

 private:
  std::size_t inner_rows() const { return 2 * k_ + 2 + subset_.size(); }

  double problem_row_dot(std::size_t row, const Eigen::VectorXd& v) const {
    const auto a = lp_.row(row);
    double s = 0.0;
    for (std::size_t j = 0; j < k_; ++j) s += a[j] * v[static_cast<long>(j)];
    return s;
  }

  // Writes the coefficients of inner row r into out and returns its rhs.
  double inner_row(std::size_t r, Eigen::Ref<Eigen::RowVectorXd> out) const {
    out.setZero();
    if (r < k_) {
      out[static_cast<long>(r)] = -1.0;
      return -lp_.lower()[r];
    }
    if (r < 2 * k_) {
      out[static_cast<long>(r - k_)] = 1.0;
      return lp_.upper()[r - k_];
    }
    if (r == 2 * k_) {
      out[static_cast<long>(k_)] = -1.0;
      return 0.0;
    }
    if (r == 2 * k_ + 1) {
      out[static_cast<long>(k_)] = 1.0;
      return cap_;
    }
    const std::size_t row = subset_[r - 2 * k_ - 2];
    const auto a = lp_.row(row);
    for (std::size_t j = 0; j < k_; ++j) out[static_cast<long>(j)] = a[j];
    out[static_cast<long>(k_)] = -1.0;
    return lp_.rhs(row);
  }

  double inner_dot(std::size_t r, const Eigen::VectorXd& v, double* rhs) const {
    if (r < k_) {
      *rhs = -lp_.lower()[r];
      return -v[static_cast<long>(r)];
    }
    if (r < 2 * k_) {
      *rhs = lp_.upper()[r - k_];
      return v[static_cast<long>(r - k_)];
    }
    if (r == 2 * k_) {
      *rhs = 0.0;
      return -v[static_cast<long>(k_)];
    }
    if (r == 2 * k_ + 1) {
      *rhs = cap_;
      return v[static_cast<long>(k_)];
    }
    const std::size_t row = subset_[r - 2 * k_ - 2];
    *rhs = lp_.rhs(row);
    return problem_row_dot(row, v) - v[static_cast<long>(k_)];
  }

  LpStatus iterate(const Eigen::VectorXd& cost) {
    const long dim = static_cast<long>(dim_);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> basis(dim, dim);
    Eigen::VectorXd basis_rhs(dim);
    std::vector<char> in_basis(inner_rows(), 0);
    std::size_t degenerate_run = 0;
    bool bland = false;
    const double cost_scale = std::max(1.0, cost.lpNorm<Eigen::Infinity>());

    for (std::size_t it = 0; it < opt_.max_iterations; ++it) {
      std::fill(in_basis.begin(), in_basis.end(), 0);
      for (long r = 0; r < dim; ++r) {
        basis_rhs[r] = inner_row(active_[static_cast<std::size_t>(r)], basis.row(r));
        in_basis[active_[static_cast<std::size_t>(r)]] = 1;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
      if (!lu.isInvertible()) {
        detail_ = "singular active set";
        return LpStatus::kNumericalFailure;
      }
      const Eigen::MatrixXd inverse = lu.inverse();
      // Re-anchor the vertex on its active rows to stop drift.
      point_ = inverse * basis_rhs;

      // Multipliers of c + A_W' lambda = 0; a negative one names a row to leave.
      const Eigen::VectorXd lambda = -(inverse.transpose() * cost);
      long leave = -1;
      double most_negative = -1e-11 * cost_scale;
      for (long r = 0; r < dim; ++r) {
        if (lambda[r] < most_negative) {
          if (bland) {
            if (leave < 0 || active_[static_cast<std::size_t>(r)] <
                                 active_[static_cast<std::size_t>(leave)]) {
              leave = r;
            }
          } else {
            most_negative = lambda[r];
            leave = r;
          }
        }
      }
      if (leave < 0) return LpStatus::kOptimal;

      // Direction leaving row `leave` while keeping the others tight.
      const Eigen::VectorXd dir = -inverse.col(leave);
      const double dir_norm = dir.norm();
      double best_step = std::numeric_limits<double>::infinity();
      double best_rate = 0.0;
      std::size_t enter = inner_rows();
      for (std::size_t r = 0; r < inner_rows(); ++r) {
        if (in_basis[r]) continue;
        double rhs = 0.0;
        const double rate = inner_dot(r, dir, &rhs);
        if (rate <= 1e-12 * dir_norm) continue;
        double dummy = 0.0;
        const double slack = std::max(0.0, rhs - inner_dot(r, point_, &dummy));
        const double step = slack / rate;
        const double tie = 1e-12 * (1.0 + best_step);
        if (step < best_step - tie) {
          best_step = step;
          best_rate = rate;
          enter = r;
        } else if (step <= best_step + tie) {
          const bool better = bland ? r < enter : rate > best_rate;
          if (better) {
            best_step = std::min(best_step, step);
            best_rate = rate;
            enter = r;
          }
        }
      }
      if (enter == inner_rows()) {
        detail_ = "unbounded direction (bounds missing?)";
        return LpStatus::kNumericalFailure;
      }
      point_ += best_step * dir;
      active_[static_cast<std::size_t>(leave)] = enter;
      ++iterations_;

      if (best_step <= 1e-14) {
        if (++degenerate_run > 40) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
    detail_ = "pivot limit reached";
    return LpStatus::kIterationLimit;
  }

  const LpProblem& lp_;
  const std::vector<std::size_t>& subset_;
  const LpOptions& opt_;
  std::size_t k_;
  std::size_t dim_;
  double cap_ = 0.0;
  Eigen::VectorXd point_;
  std::vector<std::size_t> active_;
  std::size_t iterations_ = 0;
  std::string detail_;
};

double row_violation(const LpProblem& problem, std::size_t i, const std::vector<double>& z) {
  const auto a = problem.row(i);
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) s += a[j] * z[j];
  return s - problem.rhs(i);
}

}  // namespace

LpResult solve_lp(const LpProblem& problem, const LpOptions& options) {
  require(problem.num_vars() > 0, "LP has no variables");
  LpResult result;
  const std::size_t rows = problem.num_rows();

  std::vector<std::size_t> subset;
  std::vector<char> in_subset(rows, 0);
  if (rows <= options.initial_rows) {
    subset.resize(rows);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
  } else {
    for (std::size_t t = 0; t < options.initial_rows; ++t) {
      subset.push_back(t * rows / options.initial_rows);
    }
    subset.push_back(rows - 1);
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  }
  for (std::size_t i : subset) in_subset[i] = 1;

  std::vector<std::pair<double, std::size_t>> violated;
  for (std::size_t round = 0; round < options.max_rounds; ++round) {
    SubsetSimplex simplex(problem, subset, options);
    auto outcome = simplex.run();
    result.iterations += outcome.iterations;
    result.rounds = round + 1;
    result.working_rows = subset.size();
    if (outcome.status != LpStatus::kOptimal) {
      result.status = outcome.status;
      result.diagnostics = outcome.detail;
      return result;
    }

    violated.clear();
    double max_violation = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double v = row_violation(problem, i, outcome.z);
      max_violation = std::max(max_violation, v);
      if (v > options.feasibility_tol && !in_subset[i]) violated.emplace_back(v, i);
    }
    result.values = std::move(outcome.z);
    result.max_violation = max_violation;
    if (violated.empty()) {
      if (max_violation > options.feasibility_tol) {
        std::ostringstream msg;
        msg << "working-set solution violates a working row by " << max_violation;
        result.status = LpStatus::kNumericalFailure;
        result.diagnostics = msg.str();
        return result;
      }
      result.status = LpStatus::kOptimal;
      result.objective = 0.0;
      for (std::size_t j = 0; j < problem.num_vars(); ++j) {
        result.objective += problem.objective()[j] * result.values[j];
      }
      return result;
    }
    const std::size_t take = std::min(options.rows_per_round, violated.size());
    std::partial_sort(violated.begin(), violated.begin() + static_cast<long>(take),
                      violated.end(), [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    for (std::size_t t = 0; t < take; ++t) {
      subset.push_back(violated[t].second);
      in_subset[violated[t].second] = 1;
    }
  }
  result.status = LpStatus::kIterationLimit;
  result.diagnostics = "cutting-plane round limit reached";
  return result;
}

}  // namespace deltacert
