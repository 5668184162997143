#pragma once

// Sample collection over pair space (x, w, x', w'), projection onto the unit
// sphere, and dispersion of the projected samples.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltacert/dynamics.hpp"

namespace deltacert {

enum class SamplingScheme { kGrid, kUniformRandom };

const char* to_string(SamplingScheme scheme);
SamplingScheme sampling_scheme_from_string(const std::string& name);

struct SamplingSpec {
  SamplingScheme scheme = SamplingScheme::kGrid;
  std::size_t points_per_axis = 5;  // grid
  std::size_t count = 1000;         // uniform-random
  double bound = 1.0;
  std::uint64_t seed = 1;

  friend bool operator==(const SamplingSpec&, const SamplingSpec&) = default;
};

nlohmann::json to_json(const SamplingSpec& spec);
/// Fields missing from the document keep their value in `base`.
SamplingSpec sampling_spec_from_json(const nlohmann::json& doc, SamplingSpec base = {});

/// One sampled tuple, viewed in place inside a Dataset.
struct RecordView {
  std::span<const double> x, w, xp, wp, fx, fxp;
  /// The concatenated (x, w, x', w') block.
  std::span<const double> pair;
};

/// Records are stored contiguously as [x w x' w' fx fx'] rows.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int id, std::size_t n, std::size_t p);

  int id() const noexcept { return id_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t pair_dim() const noexcept { return 2 * (n_ + p_); }
  std::size_t stride() const noexcept { return 2 * (n_ + p_) + 2 * n_; }
  std::size_t size() const noexcept { return stride() ? data_.size() / stride() : 0; }
  bool empty() const noexcept { return size() == 0; }
  bool normalized() const noexcept { return normalized_; }

  RecordView record(std::size_t i) const;
  std::span<const double> row(std::size_t i) const;
  void push_row(std::span<const double> row);
  void reserve(std::size_t records) { data_.reserve(records * stride()); }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& mutable_data() noexcept { return data_; }
  void set_normalized(bool v) noexcept { normalized_ = v; }

  SamplingSpec meta;  // how the records were produced

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  int id_ = 0;
  std::size_t n_ = 0, p_ = 0;
  bool normalized_ = false;
  std::vector<double> data_;
};

/// Evaluates the oracle on every pair-space point of the chosen scheme in
/// [-b, b]^{2(n+p)}. The all-zero pair point is skipped.
Dataset collect(const BlackBoxSubsystem& sub, const SamplingSpec& spec,
                std::size_t jobs = 1);

/// Divides all six vectors of each record by ||(x, w, x', w')||.
Dataset normalize(const Dataset& raw);

struct DispersionEstimate {
  double epsilon = 0.0;
  double epsilon_conservative = 0.0;
  std::size_t test_set_size = 0;
  double grid_resolution = 0.0;  // test grid spacing
  std::size_t test_points_per_axis = 0;
};

/// Max over a test grid on the unit sphere of the distance to the nearest
/// record. The test grid is the surface of the ambient cube [-1, 1]^d sampled
/// with `test_points_per_axis` points per axis and projected radially; every
/// sphere point lies within h = sqrt(d) * spacing / 2 of a projected test
/// point, so epsilon + h bounds the true dispersion. Passing 0 picks the
/// finest grid whose size stays under `test_budget` points.
DispersionEstimate estimate_dispersion(const Dataset& normalized,
                                       std::size_t test_points_per_axis = 0,
                                       std::size_t jobs = 1,
                                       std::size_t test_budget = 2'000'000);

/// JSON-lines file: a header line then one record per line.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

/// FNV-1a hash of the dataset's header fields and values, as 16 hex digits.
std::string dataset_hash(const Dataset& dataset);

/// Points (rows of length d, zero excluded) of the cube-surface test grid.
std::vector<double> cube_surface_grid(std::size_t d, std::size_t points_per_axis);

}  // namespace deltacert
