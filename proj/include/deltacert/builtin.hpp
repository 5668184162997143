#pragma once

// Built-in example systems. Each factory wraps a closed-form map in an opaque
// step oracle; the closed forms live in builtin::closed_form and are meant for
// test generation only.

#include <cstddef>
#include <vector>

#include "deltacert/dynamics.hpp"

namespace deltacert::builtin {

/// Row-major dense matrix used to describe linear subsystems.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

/// x+ = A x + B w.
BlackBoxSubsystem linear_subsystem(int id, const DenseMatrix& a, const DenseMatrix& b);

/// Degree-one homogeneous ring node:
///   x1+ = 0.8 x1 - 0.1 sqrt(x1^2 + x2^2) - 0.02 w1
///   x2+ = 0.9 x2 - 0.1 x1 - 0.03 w2
BlackBoxSubsystem ring_subsystem(int id);

/// Two linear subsystems in negative feedback; the network map is
/// [[A1, -B1], [B2, A2]].
NetworkDef two_subsystem_network();

/// M ring nodes, node i reading node i-1 (node 0 reads node M-1).
NetworkDef ring_network(std::size_t m);

namespace closed_form {

DenseMatrix a1();
DenseMatrix b1();
DenseMatrix a2();
DenseMatrix b2();
/// The 4x4 map of the two-subsystem feedback network.
DenseMatrix two_subsystem_coupling();

Vector ring_step(std::span<const double> x, std::span<const double> w);

}  // namespace closed_form

}  // namespace deltacert::builtin
