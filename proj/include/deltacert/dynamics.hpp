#pragma once

// Black-box subsystems, their interconnection into a network, and trajectory
// simulation. A subsystem is only ever seen through its step oracle; nothing
// in the certification path inspects the map symbolically.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace deltacert {

using Vector = std::vector<double>;

/// next = f(x, w). Must be safe to call concurrently.
using StepFn = std::function<Vector(std::span<const double> x,
                                    std::span<const double> w)>;

struct BlackBoxSubsystem {
  int id = 0;
  std::size_t n = 0;  // state dimension
  std::size_t p = 0;  // internal-input dimension
  StepFn step;
  // Identifies the dynamics (kind + parameters). Subsystems with equal
  // signatures are interchangeable for certification purposes.
  std::string signature;
  bool homogeneous = true;
};

/// Evaluates f(x, w) after checking dimensions of both inputs and the output.
Vector step_subsystem(const BlackBoxSubsystem& sub, std::span<const double> x,
                      std::span<const double> w);

/// sources[i] lists, in order, the subsystems whose states are stacked to
/// form w_i.
struct NetworkTopology {
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> sources;

  static NetworkTopology ring(std::size_t m);
  static NetworkTopology from_edges(
      std::size_t m,
      const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  std::size_t edge_count() const;
};

/// Immutable interconnected network. Shareable read-only across threads.
class NetworkDef {
 public:
  NetworkDef(std::vector<BlackBoxSubsystem> subsystems, NetworkTopology topology);

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t size() const noexcept { return subsystems_.size(); }
  const std::vector<BlackBoxSubsystem>& subsystems() const noexcept {
    return subsystems_;
  }
  const BlackBoxSubsystem& subsystem(std::size_t i) const {
    return subsystems_.at(i);
  }
  const NetworkTopology& topology() const noexcept { return topology_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }

  /// Internal input of subsystem i for global state x.
  Vector internal_input(std::size_t i, std::span<const double> x) const;
  Vector step(std::span<const double> x) const;

 private:
  std::vector<BlackBoxSubsystem> subsystems_;
  NetworkTopology topology_;
  std::vector<std::size_t> offsets_;
  std::size_t state_dim_ = 0;
};

NetworkDef assemble_network(std::vector<BlackBoxSubsystem> subsystems,
                            NetworkTopology topology);

Vector step_network(const NetworkDef& net, std::span<const double> x);

/// Returns k_max + 1 states starting with x0.
std::vector<Vector> simulate(const NetworkDef& net, std::span<const double> x0,
                             std::size_t k_max);

/// Euclidean distance between two simulated trajectories at k = 0..k_max.
Vector divergence_series(const NetworkDef& net, std::span<const double> x0,
                         std::span<const double> x0_prime, std::size_t k_max);

struct HomogeneityReport {
  double max_deviation = 0.0;
  std::size_t samples = 0;
  bool pass = false;
};

/// Samples (x, w) uniformly in [-1, 1] and measures
/// ||f(eta x, eta w) - eta f(x, w)|| / max(1, eta ||f(x, w)||).
HomogeneityReport check_homogeneity(const BlackBoxSubsystem& sub,
                                    std::size_t sample_count,
                                    std::span<const double> eta_set, double tol,
                                    std::uint64_t seed = 1);

double euclidean_norm(std::span<const double> v);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace deltacert
