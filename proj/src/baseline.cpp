#include "deltacert/baseline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "deltacert/error.hpp"

namespace deltacert {

namespace {

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  require(m.values.size() == m.rows * m.cols, "matrix has the wrong number of entries");
  Eigen::MatrixXd out(static_cast<long>(m.rows), static_cast<long>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out(static_cast<long>(r), static_cast<long>(c)) = m(r, c);
  }
  return out;
}

DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  DenseMatrix out{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), {}};
  out.values.reserve(out.rows * out.cols);
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) out.values.push_back(m(r, c));
  }
  return out;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

void require_symmetric(const Eigen::MatrixXd& m, const char* name) {
  require(m.rows() == m.cols() && m.rows() > 0, std::string(name) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          std::string(name) + " is not symmetric");
}

SymEigen jacobi(Eigen::MatrixXd a) {
  const long n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double total = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (long p = 0; p < n; ++p) {
      for (long q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-16 * total) break;
    for (long p = 0; p < n; ++p) {
      for (long q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (long k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (long k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (long k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  std::sort(order.begin(), order.end(), [&](long l, long r) { return a(l, l) < a(r, r); });
  SymEigen out;
  Eigen::MatrixXd sorted(n, n);
  for (long k = 0; k < n; ++k) {
    out.values.push_back(a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]));
    sorted.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  out.vectors = from_eigen(sorted);
  return out;
}

double min_eigen(const Eigen::MatrixXd& m) { return jacobi(symmetrize(m)).values.front(); }
double max_eigen(const Eigen::MatrixXd& m) { return jacobi(symmetrize(m)).values.back(); }

void require_positive_definite(const Eigen::MatrixXd& p, const char* name) {
  require_symmetric(p, name);
  const double lo = min_eigen(p);
  if (!(lo > 0.0)) {
    std::ostringstream msg;
    msg << name << " is not positive definite (smallest eigenvalue " << lo << ")";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
}

}  // namespace

SymEigen sym_eigen(const DenseMatrix& m) {
  const Eigen::MatrixXd a = to_eigen(m);
  require_symmetric(a, "matrix");
  return jacobi(symmetrize(a));
}

double spectral_radius(const DenseMatrix& a) {
  const Eigen::MatrixXd m = to_eigen(a);
  require(m.rows() == m.cols() && m.rows() > 0, "spectral radius needs a square matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

DenseMatrix solve_scaled_stein(const DenseMatrix& a_matrix, double theta, double gamma_bar,
                               const DenseMatrix& q_matrix) {
  require(gamma_bar > 0.0 && gamma_bar < 1.0, "gamma_bar must lie in (0, 1)");
  require(theta > 0.0, "theta must be positive");
  const Eigen::MatrixXd a = to_eigen(a_matrix);
  const Eigen::MatrixXd q = to_eigen(q_matrix);
  require(a.rows() == a.cols() && a.rows() > 0, "A must be square");
  require(q.rows() == a.rows() && q.cols() == a.cols(), "Q must match the size of A");
  require_positive_definite(q, "Q");

  const double k = (1.0 + theta) / gamma_bar;
  const double radius = std::sqrt(k) * spectral_radius(a_matrix);
  if (!(radius < 1.0)) {
    std::ostringstream msg;
    msg << "scaled spectral radius sqrt((1 + theta) / gamma_bar) * rho(A) = " << radius
        << " is not below 1";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }

  const Eigen::MatrixXd q_scaled = q / gamma_bar;
  Eigen::MatrixXd p = q_scaled;
  for (std::size_t it = 0; it < 10'000'000; ++it) {
    Eigen::MatrixXd next = symmetrize(k * a.transpose() * p * a + q_scaled);
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change <= 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) return from_eigen(p);
  }
  fail(ErrorCode::kNumerical, "Stein fixed point did not converge");
}

LmiCheck verify_lmi(const DenseMatrix& p_matrix, const DenseMatrix& a_matrix, double theta,
                    double gamma_bar) {
  const Eigen::MatrixXd p = to_eigen(p_matrix);
  const Eigen::MatrixXd a = to_eigen(a_matrix);
  require_positive_definite(p, "P");
  require(a.rows() == p.rows() && a.cols() == p.cols(), "A must match the size of P");
  LmiCheck check;
  check.margin = min_eigen(gamma_bar * p - (1.0 + theta) * a.transpose() * p * a);
  check.pass = check.margin >= -1e-9;
  return check;
}

double rho_from(const DenseMatrix& p_matrix, const DenseMatrix& b_matrix, double theta) {
  require(theta > 0.0, "theta must be positive");
  const Eigen::MatrixXd p = to_eigen(p_matrix);
  require_positive_definite(p, "P");
  const Eigen::MatrixXd b = to_eigen(b_matrix);
  if (b.cols() == 0) return 0.0;
  require(b.rows() == p.rows(), "B must have as many rows as P");
  return (1.0 + 1.0 / theta) * std::max(0.0, max_eigen(b.transpose() * p * b));
}

std::vector<double> quadratic_coefficients(const DenseMatrix& p) {
  require(p.rows == p.cols && p.rows > 0, "P must be square");
  std::vector<double> q;
  for (std::size_t a = 0; a < p.rows; ++a) {
    for (std::size_t b = a; b < p.cols; ++b) q.push_back(a == b ? p(a, a) : p(a, b) + p(b, a));
  }
  return q;
}

ModelBasedResult model_based_evaluate(const std::vector<LinearModel>& models,
                                      const NetworkTopology& topology,
                                      const ModelBasedOptions& options) {
  require(!models.empty(), "no linear models given");
  require(models.size() == topology.m, "model count does not match network size");
  require(options.p_override.empty() || options.p_override.size() == models.size(),
          "P overrides must cover every subsystem");
  require(options.rho_override.empty() || options.rho_override.size() == models.size(),
          "rho overrides must cover every subsystem");

  ModelBasedResult result;
  bool lmi_ok = true;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const LinearModel& m = models[i];
    const bool p_given = !options.p_override.empty() && options.p_override[i].has_value();
    if (!p_given) {
      const double radius =
          std::sqrt((1.0 + options.theta) / options.gamma_bar) * spectral_radius(m.a);
      if (!(radius < 1.0)) {
        std::ostringstream msg;
        msg << "lmi stage: subsystem " << i + 1 << " admits no design, scaled spectral radius "
            << radius << " is not below 1";
        fail(ErrorCode::kRefused, msg.str());
      }
    }
    DenseMatrix p = p_given ? *options.p_override[i]
                            : solve_scaled_stein(m.a, options.theta, options.gamma_bar,
                                                 from_eigen(Eigen::MatrixXd::Identity(
                                                     static_cast<long>(m.a.rows),
                                                     static_cast<long>(m.a.rows))));
    const LmiCheck lmi = verify_lmi(p, m.a, options.theta, options.gamma_bar);
    lmi_ok = lmi_ok && lmi.pass;
    const SymEigen eig = sym_eigen(p);
    const bool rho_given = !options.rho_override.empty() && options.rho_override[i].has_value();
    const double rho = rho_given ? *options.rho_override[i] : rho_from(p, m.b, options.theta);
    result.gains.push_back({options.gamma_bar, rho, eig.values.front(), eig.values.back()});
    result.lmi.push_back(lmi);
    result.p.push_back(std::move(p));
  }
  result.composition = evaluate_composition(result.gains, topology);

  if (lmi_ok && result.composition.pass) {
    NetworkCertificate net;
    net.composition = result.composition;
    for (std::size_t i = 0; i < models.size(); ++i) {
      SopSolution s;
      s.tpl = LyapunovTemplate::full_quadratic(models[i].a.rows);
      s.q = quadratic_coefficients(result.p[i]);
      s.alpha_lo = result.gains[i].alpha_lo;
      s.alpha_hi = result.gains[i].alpha_hi;
      s.gamma = result.gains[i].gamma;
      s.rho = result.gains[i].rho;
      s.phi_star = s.rho / (1.0 - s.gamma);
      SubsystemCertificate cert;
      cert.id = static_cast<int>(i + 1);
      cert.solution = std::move(s);
      cert.pass = true;
      cert.source = "model";
      cert.details = {{"lmi_margin", result.lmi[i].margin}};
      net.certificates.push_back(std::move(cert));
      net.assignment.push_back(i);
    }
    net.pass = true;
    result.certificate = std::move(net);
  }
  return result;
}

NetworkCertificate model_based_certify(const std::vector<LinearModel>& models,
                                       const NetworkTopology& topology,
                                       const ModelBasedOptions& options) {
  ModelBasedResult result = model_based_evaluate(models, topology, options);
  for (std::size_t i = 0; i < result.lmi.size(); ++i) {
    if (!result.lmi[i].pass) {
      std::ostringstream msg;
      msg << "lmi stage: subsystem " << i + 1 << " fails the LMI (margin " << result.lmi[i].margin
          << ")";
      fail(ErrorCode::kRefused, msg.str());
    }
  }
  if (!result.composition.pass) {
    fail(ErrorCode::kRefused, "compose stage: " + result.composition.reason);
  }
  return std::move(*result.certificate);
}

}  // namespace deltacert
