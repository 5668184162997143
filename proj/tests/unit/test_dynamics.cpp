#include <doctest.h>

#include <cmath>
#include <vector>

#include "deltacert/builtin.hpp"
#include "deltacert/dynamics.hpp"
#include "deltacert/error.hpp"
#include "deltacert/network_io.hpp"

using namespace deltacert;

TEST_CASE("ring node matches its closed form") {
  const auto sub = builtin::ring_subsystem(1);
  const std::vector<double> x = {0.3, -1.2}, w = {2.0, 0.5};
  const Vector f = step_subsystem(sub, x, w);
  const double r = std::hypot(x[0], x[1]);
  CHECK(f[0] == doctest::Approx(0.8 * x[0] - 0.1 * r - 0.02 * w[0]).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.9 * x[1] - 0.1 * x[0] - 0.03 * w[1]).epsilon(1e-15));
}

TEST_CASE("step_subsystem rejects wrong dimensions") {
  const auto sub = builtin::ring_subsystem(1);
  const std::vector<double> x = {1.0}, w = {0.0, 0.0};
  CHECK_THROWS_AS(step_subsystem(sub, x, w), Error);
}

TEST_CASE("ring topology wires node i to node i-1") {
  const auto t = NetworkTopology::ring(4);
  CHECK(t.sources[0] == std::vector<std::size_t>{3});
  CHECK(t.sources[2] == std::vector<std::size_t>{1});
  CHECK(t.edge_count() == 4);
}

TEST_CASE("two-subsystem network step equals the coupling matrix") {
  const NetworkDef net = builtin::two_subsystem_network();
  const auto m = builtin::closed_form::two_subsystem_coupling();
  const std::vector<double> x = {0.5, -1.0, 2.0, 0.25};
  const Vector next = net.step(x);
  for (std::size_t r = 0; r < 4; ++r) {
    double expect = 0.0;
    for (std::size_t c = 0; c < 4; ++c) expect += m(r, c) * x[c];
    CHECK(next[r] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("ring network step uses the predecessor's state as input") {
  const NetworkDef net = builtin::ring_network(3);
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const Vector next = net.step(x);
  const std::vector<double> xi = {1, 2}, wi = {5, 6};
  const Vector expect = builtin::closed_form::ring_step(xi, wi);
  CHECK(next[0] == doctest::Approx(expect[0]));
  CHECK(next[1] == doctest::Approx(expect[1]));
}

TEST_CASE("divergence series starts at the initial distance and simulate has k_max + 1 states") {
  const NetworkDef net = builtin::ring_network(5);
  std::vector<double> a(10, 1.0), b(10, -1.0);
  const Vector s = divergence_series(net, a, b, 20);
  REQUIRE(s.size() == 21);
  CHECK(s[0] == doctest::Approx(std::sqrt(40.0)));
  CHECK(s[20] < s[0]);
  CHECK(simulate(net, a, 7).size() == 8);
}

TEST_CASE("built-in subsystems are homogeneous of degree one") {
  const std::vector<double> etas = {0.5, 2, 10, 100};
  CHECK(check_homogeneity(builtin::ring_subsystem(1), 100, etas, 1e-9).pass);
  const NetworkDef two = builtin::two_subsystem_network();
  for (const auto& s : two.subsystems()) CHECK(check_homogeneity(s, 100, etas, 1e-9).pass);
}

TEST_CASE("a non-homogeneous oracle fails the homogeneity check") {
  BlackBoxSubsystem sub;
  sub.n = 1;
  sub.p = 0;
  sub.step = [](std::span<const double> x, std::span<const double>) {
    return Vector{x[0] + 0.1};
  };
  const std::vector<double> etas = {2.0};
  CHECK_FALSE(check_homogeneity(sub, 10, etas, 1e-9).pass);
}

TEST_CASE("network descriptions parse, honour m overrides and reject bad input") {
  using nlohmann::json;
  CHECK(network_from_json(json::parse(R"({"generator": {"kind": "ring", "m": 7}})")).size() == 7);
  CHECK(network_from_json(json::parse(R"({"generator": {"kind": "ring", "m": 7}})"), 12).size() == 12);
  const NetworkDef lin = network_from_json(json::parse(R"({
    "subsystems": [{"n": 1, "p": 1, "kind": "linear", "params": {"A": [[0.5]], "B": [[0.25]]}},
                   {"n": 1, "p": 1, "kind": "linear", "params": {"A": [[0.1]], "B": [[1.0]]}}],
    "edges": [[0, 1], [1, 0]]})"));
  const Vector next = lin.step(std::vector<double>{2.0, 4.0});
  CHECK(next[0] == doctest::Approx(0.5 * 2 + 0.25 * 4));
  CHECK(next[1] == doctest::Approx(0.1 * 4 + 1.0 * 2));
  CHECK_THROWS_AS(network_from_json(json::parse(R"({"generator": {"kind": "torus"}})")), Error);
  CHECK_THROWS_AS(network_from_json(json::parse(R"({"subsystems": [{"kind": "quantum"}]})")), Error);
  CHECK_THROWS_AS(load_network("/nonexistent/network.json"), Error);
}

TEST_CASE("external process oracles speak the line protocol") {
  using nlohmann::json;
  const NetworkDef net = network_from_json(json::parse(R"({
    "subsystems": [{"n": 1, "p": 0, "kind": "external",
                    "params": {"command": "while read x; do awk -v x=\"$x\" 'BEGIN { print 0.5 * x }'; done"}}]})"));
  const Vector next = net.step(std::vector<double>{3.0});
  CHECK(next[0] == doctest::Approx(1.5));
  CHECK(net.step(std::vector<double>{-8.0})[0] == doctest::Approx(-4.0));
}

TEST_CASE("built-in networks fix the origin and agree with their subsystems blockwise") {
  for (const NetworkDef& net : {builtin::ring_network(4), builtin::two_subsystem_network()}) {
    const Vector zero(net.state_dim(), 0.0);
    for (double v : net.step(zero)) CHECK(v == 0.0);
    std::vector<double> x(net.state_dim());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sin(1.0 + static_cast<double>(k));
    const Vector next = net.step(x);
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto& sub = net.subsystem(i);
      const std::span<const double> xi(x.data() + net.offset(i), sub.n);
      const Vector f = step_subsystem(sub, xi, net.internal_input(i, x));
      for (std::size_t k = 0; k < sub.n; ++k) CHECK(next[net.offset(i) + k] == f[k]);
    }
  }
}
