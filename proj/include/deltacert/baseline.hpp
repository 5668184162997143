#pragma once

// Model-based reference path for linear subsystems x+ = A x + B w with
// quadratic storage (x - x')' P (x - x'). Used to cross-check the
// data-driven certificates.

#include <optional>
#include <utility>
#include <vector>

#include "deltacert/builtin.hpp"
#include "deltacert/certify.hpp"

namespace deltacert {

using builtin::DenseMatrix;

struct SymEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymEigen sym_eigen(const DenseMatrix& m);

double spectral_radius(const DenseMatrix& a);

/// P with (1 + theta) A'PA - gamma_bar P = -Q, by fixed-point iteration.
DenseMatrix solve_scaled_stein(const DenseMatrix& a, double theta, double gamma_bar,
                               const DenseMatrix& q);

struct LmiCheck {
  bool pass = false;
  double margin = 0.0;  // lambda_min(gamma_bar P - (1 + theta) A'PA)
};

LmiCheck verify_lmi(const DenseMatrix& p, const DenseMatrix& a, double theta,
                    double gamma_bar);

/// (1 + 1/theta) lambda_max(B'PB).
double rho_from(const DenseMatrix& p, const DenseMatrix& b, double theta);

struct LinearModel {
  DenseMatrix a;
  DenseMatrix b;
};

struct ModelBasedOptions {
  double theta = 1.0;
  double gamma_bar = 0.99;
  /// Per-subsystem replacements for the designed P or computed rho.
  std::vector<std::optional<DenseMatrix>> p_override;
  std::vector<std::optional<double>> rho_override;
};

struct ModelBasedResult {
  std::vector<DenseMatrix> p;
  std::vector<LmiCheck> lmi;
  std::vector<ComponentGains> gains;
  Composition composition;
  /// Present when every LMI holds and the small-gain condition passes.
  std::optional<NetworkCertificate> certificate;
};

/// Template coefficients over the full quadratic basis for x' P x.
std::vector<double> quadratic_coefficients(const DenseMatrix& p);

/// Designs or takes each P, checks the LMI, derives (gamma_bar, rho,
/// lambda_min(P), lambda_max(P)) and composes. Does not throw on a failing
/// LMI or composition; see the result fields.
ModelBasedResult model_based_evaluate(const std::vector<LinearModel>& models,
                                      const NetworkTopology& topology,
                                      const ModelBasedOptions& options = {});

/// As model_based_evaluate, but throws ErrorCode::kRefused naming the stage
/// that failed.
NetworkCertificate model_based_certify(const std::vector<LinearModel>& models,
                                       const NetworkTopology& topology,
                                       const ModelBasedOptions& options = {});

}  // namespace deltacert
