#pragma once

// Data-driven Lipschitz constants: maxima of sampled slopes over many
// batches, extrapolated to the upper endpoint of a fitted reverse Weibull.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "deltacert/dynamics.hpp"
#include "deltacert/sop.hpp"

namespace deltacert {

struct LipschitzConfig {
  double lambda = 0.05;          // max distance between the two points of a pair
  std::size_t phi_count = 500;   // slopes per batch
  std::size_t sigma_count = 100; // batches
  std::uint64_t seed = 1;
  double safety_factor = 1.1;

  void validate() const;
};

/// Scalar function on the unit sphere of R^dim.
using SphereFn = std::function<double(std::span<const double>)>;

/// Largest |g(u) - g(v)| / ||u - v|| over phi_count random close pairs.
double batch_max_slope(const SphereFn& g, std::size_t dim, const LipschitzConfig& config,
                       std::uint64_t batch_seed);

/// sigma_count batch maxima; batch b uses a seed derived from (config.seed, stream, b).
std::vector<double> batch_maxima(const SphereFn& g, std::size_t dim,
                                 const LipschitzConfig& config, std::uint64_t stream = 0,
                                 std::size_t jobs = 1);

struct WeibullFit {
  double location = 0.0;
  double scale = 0.0;
  double shape = 1.0;
  double fit_residual = 0.0;  // Kolmogorov-Smirnov distance to the data
};

/// F(t) = exp(-((location - t) / scale)^shape) for t <= location, fitted by
/// profile likelihood over the location.
WeibullFit fit_reverse_weibull(std::span<const double> maxima);

struct LipschitzEstimate {
  double l1 = 0.0;  // alpha_lo ||x - x'||^2 - S
  double l2 = 0.0;  // S - alpha_hi ||x - x'||^2
  double l3 = 0.0;  // S(f, f') - gamma S - rho ||w - w'||^2
  double l = 0.0;   // safety_factor * max(l1, l2, l3)
  WeibullFit fit1, fit2, fit3;
  LipschitzConfig config;
};

/// Estimate for a function already known to be sampled: location of the
/// fitted endpoint, clamped at zero.
double estimate_lipschitz(const SphereFn& g, std::size_t dim, const LipschitzConfig& config,
                          std::uint64_t stream = 0, std::size_t jobs = 1,
                          WeibullFit* fit = nullptr);

LipschitzEstimate estimate_constants(const SopSolution& solution, const BlackBoxSubsystem& sub,
                                     const LipschitzConfig& config, std::size_t jobs = 1);

nlohmann::json to_json(const LipschitzConfig& config);
LipschitzConfig lipschitz_config_from_json(const nlohmann::json& doc,
                                           LipschitzConfig base = {});
nlohmann::json to_json(const LipschitzEstimate& estimate);
LipschitzEstimate lipschitz_estimate_from_json(const nlohmann::json& doc);

}  // namespace deltacert
