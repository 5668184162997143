#include "deltacert/builtin.hpp"

#include <cmath>
#include <sstream>

#include "deltacert/error.hpp"

namespace deltacert::builtin {

namespace closed_form {

DenseMatrix a1() { return {2, 2, {0.1, 0.2, 0.3, -0.1}}; }
DenseMatrix b1() { return {2, 2, {0.01, 0.0, 0.0, 0.02}}; }
DenseMatrix a2() { return {2, 2, {-0.4, 0.1, 0.6, 0.5}}; }
DenseMatrix b2() { return {2, 2, {0.04, 0.0, 0.0, 0.03}}; }

DenseMatrix two_subsystem_coupling() {
  const auto a_1 = a1(), b_1 = b1(), a_2 = a2(), b_2 = b2();
  DenseMatrix m{4, 4, std::vector<double>(16, 0.0)};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      m.values[r * 4 + c] = a_1(r, c);
      m.values[r * 4 + c + 2] = -b_1(r, c);
      m.values[(r + 2) * 4 + c] = b_2(r, c);
      m.values[(r + 2) * 4 + c + 2] = a_2(r, c);
    }
  }
  return m;
}

Vector ring_step(std::span<const double> x, std::span<const double> w) {
  return {0.8 * x[0] - 0.1 * std::hypot(x[0], x[1]) - 0.02 * w[0],
          0.9 * x[1] - 0.1 * x[0] - 0.03 * w[1]};
}

}  // namespace closed_form

BlackBoxSubsystem linear_subsystem(int id, const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows == a.cols && a.rows > 0, "A must be square and non-empty");
  require(a.values.size() == a.rows * a.cols, "A has the wrong number of entries");
  require(b.values.size() == b.rows * b.cols, "B has the wrong number of entries");
  require(b.cols == 0 || b.rows == a.rows, "B must have as many rows as A");
  for (double v : a.values) require(std::isfinite(v), "A has a non-finite entry");
  for (double v : b.values) require(std::isfinite(v), "B has a non-finite entry");

  BlackBoxSubsystem sub;
  sub.id = id;
  sub.n = a.rows;
  sub.p = b.cols;
  std::ostringstream sig;
  sig.precision(17);
  sig << "linear:" << a.rows << "x" << b.cols << ":";
  for (double v : a.values) sig << v << ",";
  sig << ";";
  for (double v : b.values) sig << v << ",";
  sub.signature = sig.str();
  sub.step = [a, b](std::span<const double> x, std::span<const double> w) {
    Vector next(a.rows, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) s += a(r, c) * x[c];
      for (std::size_t c = 0; c < b.cols; ++c) s += b(r, c) * w[c];
      next[r] = s;
    }
    return next;
  };
  return sub;
}

BlackBoxSubsystem ring_subsystem(int id) {
  BlackBoxSubsystem sub;
  sub.id = id;
  sub.n = 2;
  sub.p = 2;
  sub.signature = "ring";
  sub.step = [](std::span<const double> x, std::span<const double> w) {
    return closed_form::ring_step(x, w);
  };
  return sub;
}

NetworkDef two_subsystem_network() {
  DenseMatrix neg_b1 = closed_form::b1();
  for (auto& v : neg_b1.values) v = -v;
  std::vector<BlackBoxSubsystem> subs;
  subs.push_back(linear_subsystem(1, closed_form::a1(), neg_b1));
  subs.push_back(linear_subsystem(2, closed_form::a2(), closed_form::b2()));
  return assemble_network(std::move(subs),
                          NetworkTopology::from_edges(2, {{0, 1}, {1, 0}}));
}

NetworkDef ring_network(std::size_t m) {
  std::vector<BlackBoxSubsystem> subs;
  subs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) subs.push_back(ring_subsystem(static_cast<int>(i + 1)));
  return assemble_network(std::move(subs), NetworkTopology::ring(m));
}

}  // namespace deltacert::builtin
