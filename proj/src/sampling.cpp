#include "deltacert/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "deltacert/error.hpp"
#include "deltacert/parallel.hpp"
#include "kdtree.hpp"

namespace deltacert {

using nlohmann::json;

const char* to_string(SamplingScheme scheme) {
  return scheme == SamplingScheme::kGrid ? "grid" : "uniform-random";
}

SamplingScheme sampling_scheme_from_string(const std::string& name) {
  if (name == "grid") return SamplingScheme::kGrid;
  if (name == "uniform-random" || name == "uniform") return SamplingScheme::kUniformRandom;
  fail(ErrorCode::kInvalidArgument, "unknown sampling scheme '" + name + "'");
}

Dataset::Dataset(int id, std::size_t n, std::size_t p) : id_(id), n_(n), p_(p) {
  require(n > 0, "dataset state dimension must be positive");
}

std::span<const double> Dataset::row(std::size_t i) const {
  require(i < size(), "record index out of range");
  return std::span<const double>(data_).subspan(i * stride(), stride());
}

RecordView Dataset::record(std::size_t i) const {
  const auto r = row(i);
  RecordView v;
  std::size_t off = 0;
  auto take = [&](std::size_t len) {
    auto s = r.subspan(off, len);
    off += len;
    return s;
  };
  v.x = take(n_);
  v.w = take(p_);
  v.xp = take(n_);
  v.wp = take(p_);
  v.fx = take(n_);
  v.fxp = take(n_);
  v.pair = r.subspan(0, pair_dim());
  return v;
}

void Dataset::push_row(std::span<const double> row) {
  require(row.size() == stride(), "record has the wrong length");
  data_.insert(data_.end(), row.begin(), row.end());
}

namespace {

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t limit) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (out > limit / base) {
      fail(ErrorCode::kInvalidArgument,
           "grid of " + std::to_string(base) + "^" + std::to_string(exp) +
               " points is too large");
    }
    out *= base;
  }
  return out;
}

// Grid coordinate k of t points spanning [-b, b]; the centre of an odd grid is
// exactly zero.
double grid_value(std::size_t k, std::size_t t, double b) {
  const double twice = 2.0 * static_cast<double>(k) - static_cast<double>(t - 1);
  return b * twice / static_cast<double>(t - 1);
}

void evaluate_record(const BlackBoxSubsystem& sub, std::span<const double> pair,
                     std::span<double> out, std::size_t index) {
  const std::size_t n = sub.n, p = sub.p;
  std::copy(pair.begin(), pair.end(), out.begin());
  try {
    const Vector fx = step_subsystem(sub, pair.subspan(0, n), pair.subspan(n, p));
    const Vector fxp = step_subsystem(sub, pair.subspan(n + p, n), pair.subspan(2 * n + p, p));
    std::copy(fx.begin(), fx.end(), out.begin() + static_cast<long>(pair.size()));
    std::copy(fxp.begin(), fxp.end(), out.begin() + static_cast<long>(pair.size() + n));
  } catch (const Error& e) {
    fail(ErrorCode::kOracle, "record " + std::to_string(index) + ": " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kOracle, "record " + std::to_string(index) + ": " + e.what());
  }
}

}  // namespace

Dataset collect(const BlackBoxSubsystem& sub, const SamplingSpec& spec,
                std::size_t jobs) {
  require(spec.bound > 0.0, "sampling bound must be positive");
  Dataset ds(sub.id, sub.n, sub.p);
  ds.meta = spec;
  const std::size_t d = ds.pair_dim();
  const std::size_t stride = ds.stride();

  std::vector<double> pairs;  // row-major pair points to evaluate
  if (spec.scheme == SamplingScheme::kGrid) {
    require(spec.points_per_axis >= 2, "grid needs at least two points per axis");
    const std::size_t t = spec.points_per_axis;
    const std::size_t total = checked_power(t, d, 200'000'000);
    pairs.reserve(total * d);
    std::vector<std::size_t> digits(d, 0);
    std::vector<double> point(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
      bool zero = true;
      for (std::size_t a = 0; a < d; ++a) {
        point[a] = grid_value(digits[a], t, spec.bound);
        zero = zero && point[a] == 0.0;
      }
      if (!zero) pairs.insert(pairs.end(), point.begin(), point.end());
      for (std::size_t a = d; a-- > 0;) {  // last axis varies fastest
        if (++digits[a] < t) break;
        digits[a] = 0;
      }
    }
  } else {
    require(spec.count >= 2, "uniform sampling needs at least two points");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> dist(-spec.bound, spec.bound);
    pairs.reserve(spec.count * d);
    std::vector<double> point(d);
    for (std::size_t s = 0; s < spec.count; ++s) {
      bool zero = true;
      for (auto& v : point) {
        v = dist(rng);
        zero = zero && v == 0.0;
      }
      if (!zero) pairs.insert(pairs.end(), point.begin(), point.end());
    }
  }

  const std::size_t count = pairs.size() / d;
  auto& data = ds.mutable_data();
  data.assign(count * stride, 0.0);
  parallel_chunks(count, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      evaluate_record(sub, std::span<const double>(pairs).subspan(i * d, d),
                      std::span<double>(data).subspan(i * stride, stride), i);
    }
  });
  return ds;
}

Dataset normalize(const Dataset& raw) {
  Dataset out = raw;
  const std::size_t d = raw.pair_dim();
  const std::size_t stride = raw.stride();
  auto& data = out.mutable_data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double* row = data.data() + i * stride;
    const double norm = euclidean_norm(std::span<const double>(row, d));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorCode::kInvalidArgument,
           "record " + std::to_string(i) + " has zero or non-finite pair norm");
    }
    for (std::size_t k = 0; k < stride; ++k) row[k] /= norm;
  }
  out.set_normalized(true);
  return out;
}

namespace {

std::size_t surface_count(std::size_t t, std::size_t d, std::size_t limit) {
  // t^d - (t-2)^d, saturating at limit + 1.
  auto power = [&](std::size_t base) {
    long double v = 1.0L;
    for (std::size_t i = 0; i < d; ++i) v *= static_cast<long double>(base);
    return v;
  };
  const long double c = power(t) - power(t >= 2 ? t - 2 : 0);
  return c > static_cast<long double>(limit) ? limit + 1 : static_cast<std::size_t>(c);
}

// Calls fn(point) for every cube-surface grid point with index in [begin, end)
// of the full t^d enumeration.
template <typename Fn>
void for_surface_points(std::size_t d, std::size_t t, std::size_t begin,
                        std::size_t end, Fn&& fn) {
  std::vector<std::size_t> digits(d, 0);
  std::size_t rest = begin;
  for (std::size_t a = d; a-- > 0;) {
    digits[a] = rest % t;
    rest /= t;
  }
  std::vector<double> point(d);
  for (std::size_t idx = begin; idx < end; ++idx) {
    bool surface = false;
    for (std::size_t a = 0; a < d; ++a) {
      surface = surface || digits[a] == 0 || digits[a] == t - 1;
      point[a] = grid_value(digits[a], t, 1.0);
    }
    if (surface) fn(std::span<const double>(point));
    for (std::size_t a = d; a-- > 0;) {
      if (++digits[a] < t) break;
      digits[a] = 0;
    }
  }
}

}  // namespace

std::vector<double> cube_surface_grid(std::size_t d, std::size_t points_per_axis) {
  require(points_per_axis >= 2, "test grid needs at least two points per axis");
  const std::size_t total = checked_power(points_per_axis, d, 100'000'000);
  std::vector<double> out;
  for_surface_points(d, points_per_axis, 0, total, [&](std::span<const double> pt) {
    out.insert(out.end(), pt.begin(), pt.end());
  });
  return out;
}

DispersionEstimate estimate_dispersion(const Dataset& normalized,
                                       std::size_t test_points_per_axis,
                                       std::size_t jobs, std::size_t test_budget) {
  require(normalized.normalized(), "dispersion needs a normalized dataset");
  require(!normalized.empty(), "dispersion of an empty dataset");
  const std::size_t d = normalized.pair_dim();

  std::size_t t = test_points_per_axis;
  if (t == 0) {
    t = 2;
    while (surface_count(t + 1, d, test_budget) <= test_budget) ++t;
  }
  require(t >= 2, "test grid needs at least two points per axis");

  std::vector<double> points;
  points.reserve(normalized.size() * d);
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto pair = normalized.record(i).pair;
    points.insert(points.end(), pair.begin(), pair.end());
  }
  const detail::KdTree tree(std::move(points), d);

  const std::size_t total = checked_power(t, d, 1'000'000'000);
  const std::size_t chunks = chunk_count(total, jobs);
  std::vector<double> chunk_max(chunks, 0.0);
  std::vector<std::size_t> chunk_points(chunks, 0);
  parallel_chunks(total, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<double> unit(d);
    for_surface_points(d, t, begin, end, [&](std::span<const double> pt) {
      const double norm = euclidean_norm(pt);
      for (std::size_t a = 0; a < d; ++a) unit[a] = pt[a] / norm;
      chunk_max[c] = std::max(chunk_max[c], tree.nearest_sq(unit));
      ++chunk_points[c];
    });
  });

  DispersionEstimate est;
  est.test_points_per_axis = t;
  est.grid_resolution = 2.0 / static_cast<double>(t - 1);
  for (std::size_t c = 0; c < chunks; ++c) {
    est.epsilon = std::max(est.epsilon, std::sqrt(chunk_max[c]));
    est.test_set_size += chunk_points[c];
  }
  // Cube-surface points have norm >= 1, where radial projection is
  // non-expansive.
  const double min_projection_norm = 1.0;
  const double h = std::sqrt(static_cast<double>(d)) * est.grid_resolution / 2.0 /
                   min_projection_norm;
  est.epsilon_conservative = est.epsilon + h;
  return est;
}

json to_json(const SamplingSpec& s) {
  return {{"scheme", to_string(s.scheme)},
          {"points_per_axis", s.points_per_axis},
          {"count", s.count},
          {"bound", s.bound},
          {"seed", s.seed}};
}

SamplingSpec sampling_spec_from_json(const json& j, SamplingSpec base) {
  try {
    if (j.contains("scheme")) base.scheme = sampling_scheme_from_string(j.at("scheme").get<std::string>());
    base.points_per_axis = j.value("points_per_axis", base.points_per_axis);
    base.count = j.value("count", base.count);
    base.bound = j.value("bound", base.bound);
    base.seed = j.value("seed", base.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("sampling spec: ") + e.what());
  }
  return base;
}

namespace {

json span_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  json header = {{"id", dataset.id()},
                 {"n", dataset.n()},
                 {"p", dataset.p()},
                 {"normalized", dataset.normalized()},
                 {"count", dataset.size()},
                 {"meta", to_json(dataset.meta)}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto r = dataset.record(i);
    json line = {{"x", span_json(r.x)},   {"w", span_json(r.w)},
                 {"xp", span_json(r.xp)}, {"wp", span_json(r.wp)},
                 {"fx", span_json(r.fx)}, {"fxp", span_json(r.fxp)}};
    out << line.dump() << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write to " + path + " failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  auto parse_line = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  };

  if (!std::getline(in, line)) fail(ErrorCode::kParse, path + ":1: missing header");
  ++line_no;
  Dataset ds;
  std::size_t expected = 0;
  try {
    const json header = parse_line(line);
    ds = Dataset(header.at("id").get<int>(), header.at("n").get<std::size_t>(),
                 header.at("p").get<std::size_t>());
    ds.set_normalized(header.at("normalized").get<bool>());
    expected = header.at("count").get<std::size_t>();
    ds.meta = sampling_spec_from_json(header.value("meta", json::object()));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path + ":1: bad header: " + e.what());
  }

  ds.reserve(expected);
  std::vector<double> row(ds.stride());
  const std::pair<const char*, std::size_t> fields[] = {
      {"x", ds.n()}, {"w", ds.p()}, {"xp", ds.n()}, {"wp", ds.p()}, {"fx", ds.n()}, {"fxp", ds.n()}};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json rec = parse_line(line);
    std::size_t off = 0;
    try {
      for (const auto& [name, len] : fields) {
        const auto& arr = rec.at(name);
        if (!arr.is_array() || arr.size() != len) {
          fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": field '" +
                                      name + "' must have " + std::to_string(len) +
                                      " entries");
        }
        for (const auto& v : arr) row[off++] = v.get<double>();
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ds.push_row(row);
  }
  if (ds.size() != expected) {
    fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(expected) + " records, found " +
                                std::to_string(ds.size()));
  }
  if (ds.normalized()) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double norm = euclidean_norm(ds.record(i).pair);
      if (std::abs(norm - 1.0) > 1e-12) {
        fail(ErrorCode::kInvalidArgument,
             path + ":" + std::to_string(i + 2) + ": record marked normalized has pair norm " +
                 std::to_string(norm));
      }
    }
  }
  return ds;
}

std::string dataset_hash(const Dataset& dataset) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* bytes, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t header[] = {static_cast<std::uint64_t>(dataset.id()), dataset.n(),
                                  dataset.p(), dataset.normalized() ? 1ULL : 0ULL};
  mix(header, sizeof header);
  mix(dataset.data().data(), dataset.data().size() * sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace deltacert
