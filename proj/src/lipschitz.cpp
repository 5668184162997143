#include "deltacert/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "deltacert/error.hpp"
#include "deltacert/parallel.hpp"

namespace deltacert {

using nlohmann::json;

void LipschitzConfig::validate() const {
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  require(phi_count >= 1, "phi_count must be at least 1");
  require(sigma_count >= 1, "sigma_count must be at least 1");
  require(std::isfinite(safety_factor) && safety_factor >= 1.0,
          "safety_factor must be at least 1");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t batch) {
  return splitmix(splitmix(splitmix(seed) ^ stream) ^ batch);
}

void random_unit(std::mt19937_64& rng, std::span<double> out) {
  std::normal_distribution<double> normal;
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : out) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm < 1e-24);
  norm = std::sqrt(norm);
  for (double& v : out) v /= norm;
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ProfilePoint {
  double log_likelihood;
  double scale;
  double shape;
};

// Two-parameter Weibull MLE for y = location - maxima (all positive).
ProfilePoint profile(const std::vector<double>& maxima, double location) {
  const std::size_t n = maxima.size();
  std::vector<double> y(n), log_z(n);
  double y_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = location - maxima[i];
    y_max = std::max(y_max, y[i]);
  }
  double mean_log_z = 0.0;
  double sum_log_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    log_z[i] = std::log(y[i] / y_max);
    mean_log_z += log_z[i];
    sum_log_y += std::log(y[i]);
  }
  mean_log_z /= static_cast<double>(n);

  // Shape equation 1/k + mean(ln z) - sum z^k ln z / sum z^k = 0, decreasing in k.
  auto equation = [&](double k) {
    double s = 0.0;
    double sl = 0.0;
    for (double lz : log_z) {
      const double zk = std::exp(k * lz);
      s += zk;
      sl += zk * lz;
    }
    return 1.0 / k + mean_log_z - sl / s;
  };
  double lo = std::log(1e-2);
  double hi = std::log(1e2);
  double k = 0.0;
  if (equation(std::exp(lo)) <= 0.0) {
    k = std::exp(lo);
  } else if (equation(std::exp(hi)) >= 0.0) {
    k = std::exp(hi);
  } else {
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (equation(std::exp(mid)) > 0.0 ? lo : hi) = mid;
    }
    k = std::exp(0.5 * (lo + hi));
  }
  double mean_zk = 0.0;
  for (double lz : log_z) mean_zk += std::exp(k * lz);
  mean_zk /= static_cast<double>(n);
  const double scale = y_max * std::pow(mean_zk, 1.0 / k);

  double sum_pow = 0.0;
  for (double v : y) sum_pow += std::pow(v / scale, k);
  const double nn = static_cast<double>(n);
  const double ll = nn * std::log(k) - nn * k * std::log(scale) + (k - 1.0) * sum_log_y - sum_pow;
  return {ll, scale, k};
}

}  // namespace

double batch_max_slope(const SphereFn& g, std::size_t dim, const LipschitzConfig& config,
                       std::uint64_t batch_seed) {
  require(dim >= 2, "sphere needs ambient dimension at least 2");
  config.validate();
  std::mt19937_64 rng(batch_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(dim), v(dim), dir(dim);
  double best = 0.0;
  for (std::size_t k = 0; k < config.phi_count; ++k) {
    random_unit(rng, u);
    double dist = 0.0;
    std::size_t attempts = 0;
    for (;; ++attempts) {
      if (attempts >= 1000) {
        fail(ErrorCode::kNumerical, "could not draw a pair within lambda after 1000 attempts");
      }
      random_unit(rng, dir);
      const double radius = config.lambda * unit(rng);
      double norm = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        v[a] = u[a] + radius * dir[a];
        norm += v[a] * v[a];
      }
      norm = std::sqrt(norm);
      if (norm < 1e-12) continue;
      dist = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        v[a] /= norm;
        dist += (u[a] - v[a]) * (u[a] - v[a]);
      }
      dist = std::sqrt(dist);
      if (dist >= 1e-12 && dist <= config.lambda) break;
    }
    const double slope = std::abs(g(u) - g(v)) / dist;
    require(std::isfinite(slope), "sampled function returned a non-finite value");
    best = std::max(best, slope);
  }
  return best;
}

std::vector<double> batch_maxima(const SphereFn& g, std::size_t dim,
                                 const LipschitzConfig& config, std::uint64_t stream,
                                 std::size_t jobs) {
  config.validate();
  std::vector<double> maxima(config.sigma_count);
  parallel_chunks(config.sigma_count, jobs,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t b = begin; b < end; ++b) {
                      maxima[b] = batch_max_slope(g, dim, config,
                                                  derive_seed(config.seed, stream, b));
                    }
                  });
  return maxima;
}

WeibullFit fit_reverse_weibull(std::span<const double> maxima) {
  require(maxima.size() >= 3, "reverse Weibull fit needs at least 3 maxima");
  for (double m : maxima) require(std::isfinite(m), "reverse Weibull fit got a non-finite value");
  std::vector<double> sorted(maxima.begin(), maxima.end());
  std::sort(sorted.begin(), sorted.end());
  const double top = sorted.back();
  const double range = top - sorted.front();
  if (range <= 1e-14 * std::max(1.0, std::abs(top))) return {top, 0.0, 1.0, 0.0};

  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? iqr : range;
  const double off_lo = 1e-4 * spread;
  const double off_hi = 3.0 * spread;
  constexpr int kGrid = 200;
  const double log_lo = std::log(off_lo);
  const double step = (std::log(off_hi) - log_lo) / (kGrid - 1);

  int best = 0;
  ProfilePoint best_point{-std::numeric_limits<double>::infinity(), 0.0, 1.0};
  for (int i = 0; i < kGrid; ++i) {
    const ProfilePoint pt = profile(sorted, top + std::exp(log_lo + step * i));
    if (pt.log_likelihood > best_point.log_likelihood) {
      best_point = pt;
      best = i;
    }
  }
  // Golden-section refinement between the neighbouring grid points.
  double a = log_lo + step * std::max(0, best - 1);
  double b = log_lo + step * std::min(kGrid - 1, best + 1);
  double best_log_off = log_lo + step * best;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  ProfilePoint pc = profile(sorted, top + std::exp(c));
  ProfilePoint pd = profile(sorted, top + std::exp(d));
  for (int it = 0; it < 40; ++it) {
    if (pc.log_likelihood > pd.log_likelihood) {
      b = d;
      d = c;
      pd = pc;
      c = b - ratio * (b - a);
      pc = profile(sorted, top + std::exp(c));
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + ratio * (b - a);
      pd = profile(sorted, top + std::exp(d));
    }
  }
  const ProfilePoint& refined = pc.log_likelihood > pd.log_likelihood ? pc : pd;
  if (refined.log_likelihood > best_point.log_likelihood) {
    best_point = refined;
    best_log_off = pc.log_likelihood > pd.log_likelihood ? c : d;
  }

  WeibullFit fit{top + std::exp(best_log_off), best_point.scale, best_point.shape, 0.0};
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = std::exp(-std::pow((fit.location - sorted[i]) / fit.scale, fit.shape));
    fit.fit_residual = std::max({fit.fit_residual, std::abs(cdf - static_cast<double>(i) / n),
                                 std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  return fit;
}

double estimate_lipschitz(const SphereFn& g, std::size_t dim, const LipschitzConfig& config,
                          std::uint64_t stream, std::size_t jobs, WeibullFit* fit) {
  const std::vector<double> maxima = batch_maxima(g, dim, config, stream, jobs);
  WeibullFit result;
  if (maxima.size() >= 3) {
    result = fit_reverse_weibull(maxima);
  } else {
    result.location = *std::max_element(maxima.begin(), maxima.end());
  }
  if (fit) *fit = result;
  return std::max(0.0, result.location);
}

LipschitzEstimate estimate_constants(const SopSolution& solution, const BlackBoxSubsystem& sub,
                                     const LipschitzConfig& config, std::size_t jobs) {
  config.validate();
  const LyapunovTemplate& tpl = solution.tpl;
  require(tpl.n == sub.n, "solution template does not match the subsystem state dimension");
  const std::size_t n = sub.n;
  const std::size_t p = sub.p;

  auto sq_diff = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
  };

  const SphereFn g1 = [&](std::span<const double> u) {
    const auto x = u.subspan(0, n);
    const auto xp = u.subspan(n, n);
    return solution.alpha_lo * sq_diff(x, xp) - evaluate_template(tpl, solution.q, x, xp);
  };
  const SphereFn g2 = [&](std::span<const double> u) {
    const auto x = u.subspan(0, n);
    const auto xp = u.subspan(n, n);
    return evaluate_template(tpl, solution.q, x, xp) - solution.alpha_hi * sq_diff(x, xp);
  };
  const SphereFn g3 = [&](std::span<const double> u) {
    const auto x = u.subspan(0, n);
    const auto w = u.subspan(n, p);
    const auto xp = u.subspan(n + p, n);
    const auto wp = u.subspan(2 * n + p, p);
    const Vector fx = step_subsystem(sub, x, w);
    const Vector fxp = step_subsystem(sub, xp, wp);
    return evaluate_template(tpl, solution.q, fx, fxp) -
           solution.gamma * evaluate_template(tpl, solution.q, x, xp) -
           solution.rho * sq_diff(w, wp);
  };

  LipschitzEstimate est;
  est.config = config;
  est.l1 = estimate_lipschitz(g1, 2 * n, config, 1, jobs, &est.fit1);
  est.l2 = estimate_lipschitz(g2, 2 * n, config, 2, jobs, &est.fit2);
  est.l3 = estimate_lipschitz(g3, 2 * (n + p), config, 3, jobs, &est.fit3);
  est.l = config.safety_factor * std::max({est.l1, est.l2, est.l3});
  return est;
}

json to_json(const LipschitzConfig& c) {
  return {{"lambda", c.lambda},
          {"phi", c.phi_count},
          {"sigma", c.sigma_count},
          {"seed", c.seed},
          {"safety_factor", c.safety_factor}};
}

LipschitzConfig lipschitz_config_from_json(const json& doc, LipschitzConfig base) {
  try {
    base.lambda = doc.value("lambda", base.lambda);
    base.phi_count = doc.value("phi", base.phi_count);
    base.sigma_count = doc.value("sigma", base.sigma_count);
    base.seed = doc.value("seed", base.seed);
    base.safety_factor = doc.value("safety_factor", base.safety_factor);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("lipschitz config: ") + e.what());
  }
  base.validate();
  return base;
}

namespace {

json fit_json(const WeibullFit& f) {
  return {{"location", f.location},
          {"scale", f.scale},
          {"shape", f.shape},
          {"fit_residual", f.fit_residual}};
}

}  // namespace

json to_json(const LipschitzEstimate& e) {
  return {{"l1", e.l1},
          {"l2", e.l2},
          {"l3", e.l3},
          {"l", e.l},
          {"fits", {fit_json(e.fit1), fit_json(e.fit2), fit_json(e.fit3)}},
          {"config", to_json(e.config)}};
}

LipschitzEstimate lipschitz_estimate_from_json(const json& doc) {
  try {
    LipschitzEstimate e;
    e.l1 = doc.at("l1").get<double>();
    e.l2 = doc.at("l2").get<double>();
    e.l3 = doc.at("l3").get<double>();
    e.l = doc.at("l").get<double>();
    if (doc.contains("config")) e.config = lipschitz_config_from_json(doc.at("config"));
    require(e.l1 >= 0.0 && e.l2 >= 0.0 && e.l3 >= 0.0 && e.l >= 0.0,
            "Lipschitz estimates must be non-negative");
    return e;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("lipschitz estimate: ") + e.what());
  }
}

}  // namespace deltacert
