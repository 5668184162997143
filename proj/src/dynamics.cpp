#include "deltacert/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "deltacert/error.hpp"

namespace deltacert {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kRefused: return "refused";
    case ErrorCode::kOracle: return "oracle";
  }
  return "unknown";
}

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "distance between vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Vector step_subsystem(const BlackBoxSubsystem& sub, std::span<const double> x,
                      std::span<const double> w) {
  if (x.size() != sub.n || w.size() != sub.p) {
    std::ostringstream msg;
    msg << "subsystem " << sub.id << ": expected x of length " << sub.n
        << " and w of length " << sub.p << ", got " << x.size() << " and "
        << w.size();
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  if (!sub.step) fail(ErrorCode::kInvalidArgument, "subsystem has no step oracle");
  Vector next = sub.step(x, w);
  if (next.size() != sub.n) {
    std::ostringstream msg;
    msg << "subsystem " << sub.id << ": oracle returned " << next.size()
        << " values, expected " << sub.n;
    fail(ErrorCode::kOracle, msg.str());
  }
  return next;
}

NetworkTopology NetworkTopology::ring(std::size_t m) {
  require(m >= 2, "a ring needs at least two subsystems");
  NetworkTopology t;
  t.m = m;
  t.sources.resize(m);
  // w_i = x_{i-1}, with x_0 taken as x_M.
  for (std::size_t i = 0; i < m; ++i) t.sources[i] = {(i + m - 1) % m};
  return t;
}

NetworkTopology NetworkTopology::from_edges(
    std::size_t m, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  NetworkTopology t;
  t.m = m;
  t.sources.resize(m);
  for (const auto& [i, j] : edges) {
    require(i < m && j < m, "edge references a subsystem index out of range");
    t.sources[i].push_back(j);
  }
  return t;
}

std::size_t NetworkTopology::edge_count() const {
  std::size_t count = 0;
  for (const auto& s : sources) count += s.size();
  return count;
}

NetworkDef::NetworkDef(std::vector<BlackBoxSubsystem> subsystems,
                       NetworkTopology topology)
    : subsystems_(std::move(subsystems)), topology_(std::move(topology)) {
  require(!subsystems_.empty(), "network has no subsystems");
  require(topology_.m == subsystems_.size() &&
              topology_.sources.size() == subsystems_.size(),
          "topology size does not match the number of subsystems");
  offsets_.resize(subsystems_.size());
  for (std::size_t i = 0; i < subsystems_.size(); ++i) {
    offsets_[i] = state_dim_;
    state_dim_ += subsystems_[i].n;
  }
  for (std::size_t i = 0; i < subsystems_.size(); ++i) {
    std::size_t input_dim = 0;
    for (std::size_t j : topology_.sources[i]) {
      if (j == i) {
        fail(ErrorCode::kInvalidArgument,
             "self-edge on subsystem index " + std::to_string(i));
      }
      require(j < subsystems_.size(), "edge source out of range");
      input_dim += subsystems_[j].n;
    }
    if (input_dim != subsystems_[i].p) {
      std::ostringstream msg;
      msg << "subsystem index " << i << " has p = " << subsystems_[i].p
          << " but its sources provide " << input_dim << " values";
      fail(ErrorCode::kInvalidArgument, msg.str());
    }
  }
}

Vector NetworkDef::internal_input(std::size_t i, std::span<const double> x) const {
  Vector w;
  w.reserve(subsystems_[i].p);
  for (std::size_t j : topology_.sources[i]) {
    const auto block = x.subspan(offsets_[j], subsystems_[j].n);
    w.insert(w.end(), block.begin(), block.end());
  }
  return w;
}

Vector NetworkDef::step(std::span<const double> x) const {
  require(x.size() == state_dim_, "global state has length " +
                                      std::to_string(x.size()) + ", expected " +
                                      std::to_string(state_dim_));
  Vector next(state_dim_);
  for (std::size_t i = 0; i < subsystems_.size(); ++i) {
    const auto& sub = subsystems_[i];
    const Vector w = internal_input(i, x);
    const Vector xi = step_subsystem(sub, x.subspan(offsets_[i], sub.n), w);
    std::copy(xi.begin(), xi.end(), next.begin() + static_cast<long>(offsets_[i]));
  }
  return next;
}

NetworkDef assemble_network(std::vector<BlackBoxSubsystem> subsystems,
                            NetworkTopology topology) {
  return NetworkDef(std::move(subsystems), std::move(topology));
}

Vector step_network(const NetworkDef& net, std::span<const double> x) {
  return net.step(x);
}

std::vector<Vector> simulate(const NetworkDef& net, std::span<const double> x0,
                             std::size_t k_max) {
  require(x0.size() == net.state_dim(), "initial state has wrong dimension");
  std::vector<Vector> traj;
  traj.reserve(k_max + 1);
  traj.emplace_back(x0.begin(), x0.end());
  for (std::size_t k = 0; k < k_max; ++k) traj.push_back(net.step(traj.back()));
  return traj;
}

Vector divergence_series(const NetworkDef& net, std::span<const double> x0,
                         std::span<const double> x0_prime, std::size_t k_max) {
  require(x0.size() == net.state_dim() && x0_prime.size() == net.state_dim(),
          "initial states have wrong dimension");
  Vector series;
  series.reserve(k_max + 1);
  Vector a(x0.begin(), x0.end());
  Vector b(x0_prime.begin(), x0_prime.end());
  series.push_back(euclidean_distance(a, b));
  for (std::size_t k = 0; k < k_max; ++k) {
    a = net.step(a);
    b = net.step(b);
    series.push_back(euclidean_distance(a, b));
  }
  return series;
}

HomogeneityReport check_homogeneity(const BlackBoxSubsystem& sub,
                                    std::size_t sample_count,
                                    std::span<const double> eta_set, double tol,
                                    std::uint64_t seed) {
  require(tol > 0.0, "homogeneity tolerance must be positive");
  require(!eta_set.empty(), "empty eta set");
  for (double eta : eta_set) require(eta > 0.0, "eta values must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  HomogeneityReport report;
  Vector x(sub.n), w(sub.p), sx(sub.n), sw(sub.p);
  for (std::size_t s = 0; s < sample_count; ++s) {
    for (auto& v : x) v = unit(rng);
    for (auto& v : w) v = unit(rng);
    const Vector fx = step_subsystem(sub, x, w);
    const double fnorm = euclidean_norm(fx);
    for (double eta : eta_set) {
      for (std::size_t k = 0; k < sub.n; ++k) sx[k] = eta * x[k];
      for (std::size_t k = 0; k < sub.p; ++k) sw[k] = eta * w[k];
      const Vector fs = step_subsystem(sub, sx, sw);
      double dev = 0.0;
      for (std::size_t k = 0; k < sub.n; ++k) {
        const double d = fs[k] - eta * fx[k];
        dev += d * d;
      }
      dev = std::sqrt(dev) / std::max(1.0, eta * fnorm);
      report.max_deviation = std::max(report.max_deviation, dev);
      ++report.samples;
    }
  }
  report.pass = report.max_deviation <= tol;
  return report;
}

}  // namespace deltacert
