#include "deltacert/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "deltacert/error.hpp"
#include "deltacert/network_io.hpp"

namespace deltacert {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
  require(!network.empty(), "no network description given");
  require(!m || *m >= 1, "m must be positive");
  require(sampling.bound > 0.0, "sampling bound must be positive");
  if (sampling.scheme == SamplingScheme::kGrid) {
    require(sampling.points_per_axis >= 2, "points_per_axis must be at least 2");
  } else {
    require(sampling.count >= 1, "sample count must be positive");
  }
  sop.validate();
  lipschitz.validate();
  require(!output_dir.empty(), "output directory is empty");
  require(jobs >= 1, "jobs must be at least 1");
  require(max_records >= 1, "max_records must be positive");
  require(dispersion_budget >= 1, "dispersion budget must be positive");
}

json to_json(const RunConfig& c) {
  json doc = {{"network", c.network},
              {"sampling", to_json(c.sampling)},
              {"sop",
               {{"gamma_grid", c.sop.gamma_grid},
                {"q_bound", c.sop.q_bound},
                {"alpha_hi_bound", c.sop.alpha_hi_bound},
                {"rho_bound", c.sop.rho_bound},
                {"mu_bound", c.sop.mu_bound},
                {"phi_bound", c.sop.phi_bound},
                {"feasibility_tol", c.sop.feasibility_tol}}},
              {"lipschitz", to_json(c.lipschitz)},
              {"output_dir", c.output_dir},
              {"conservative_epsilon", c.conservative_epsilon},
              {"shared_dynamics", c.shared_dynamics},
              {"jobs", c.jobs},
              {"retries", c.retries},
              {"max_records", c.max_records},
              {"dispersion_points_per_axis", c.dispersion_points_per_axis},
              {"dispersion_budget", c.dispersion_budget},
              {"validation_samples", c.validation_samples},
              {"write_datasets", c.write_datasets}};
  doc["m"] = c.m ? json(*c.m) : json(nullptr);
  return doc;
}

RunConfig run_config_from_json(const json& doc, RunConfig base) {
  require(doc.is_object(), "run configuration must be a JSON object");
  try {
    base.network = doc.value("network", base.network);
    if (doc.contains("m")) {
      base.m = doc.at("m").is_null() ? std::nullopt
                                     : std::optional<std::size_t>(doc.at("m").get<std::size_t>());
    }
    if (doc.contains("sampling")) base.sampling = sampling_spec_from_json(doc.at("sampling"), base.sampling);
    if (doc.contains("sop")) {
      const json& s = doc.at("sop");
      base.sop.gamma_grid = s.value("gamma_grid", base.sop.gamma_grid);
      base.sop.q_bound = s.value("q_bound", base.sop.q_bound);
      base.sop.alpha_hi_bound = s.value("alpha_hi_bound", base.sop.alpha_hi_bound);
      base.sop.rho_bound = s.value("rho_bound", base.sop.rho_bound);
      base.sop.mu_bound = s.value("mu_bound", base.sop.mu_bound);
      base.sop.phi_bound = s.value("phi_bound", base.sop.phi_bound);
      base.sop.feasibility_tol = s.value("feasibility_tol", base.sop.feasibility_tol);
    }
    if (doc.contains("lipschitz")) {
      base.lipschitz = lipschitz_config_from_json(doc.at("lipschitz"), base.lipschitz);
    }
    base.output_dir = doc.value("output_dir", base.output_dir);
    base.conservative_epsilon = doc.value("conservative_epsilon", base.conservative_epsilon);
    base.shared_dynamics = doc.value("shared_dynamics", base.shared_dynamics);
    base.jobs = doc.value("jobs", base.jobs);
    base.retries = doc.value("retries", base.retries);
    base.max_records = doc.value("max_records", base.max_records);
    base.dispersion_points_per_axis =
        doc.value("dispersion_points_per_axis", base.dispersion_points_per_axis);
    base.dispersion_budget = doc.value("dispersion_budget", base.dispersion_budget);
    base.validation_samples = doc.value("validation_samples", base.validation_samples);
    base.write_datasets = doc.value("write_datasets", base.write_datasets);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("run configuration: ") + e.what());
  }
  return base;
}

std::size_t densified_points_per_axis(std::size_t ppa, std::size_t d) {
  require(d >= 1, "dimension must be positive");
  const double next = std::ceil(static_cast<double>(ppa) * std::pow(2.0, 1.0 / static_cast<double>(d)) - 1e-9);
  return std::max(ppa + 1, static_cast<std::size_t>(next));
}

namespace {

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::size_t record_count(const SamplingSpec& spec, std::size_t pair_dim) {
  if (spec.scheme == SamplingScheme::kUniformRandom) return spec.count;
  const double total = std::pow(static_cast<double>(spec.points_per_axis),
                                static_cast<double>(pair_dim));
  return total > 1e18 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(total) - 1;
}

SamplingSpec densify(const SamplingSpec& spec, std::size_t pair_dim) {
  SamplingSpec next = spec;
  if (spec.scheme == SamplingScheme::kGrid) {
    next.points_per_axis = densified_points_per_axis(spec.points_per_axis, pair_dim);
  } else {
    next.count = 2 * spec.count;
  }
  return next;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kIo: return kExitConfig;
    case ErrorCode::kInfeasible: return kExitInfeasible;
    case ErrorCode::kRefused: return kExitCompose;
    case ErrorCode::kNumerical:
    case ErrorCode::kOracle: return kExitInternal;
  }
  return kExitInternal;
}

struct Group {
  std::size_t representative;        // subsystem index
  std::vector<std::size_t> members;  // subsystem indices
};

std::vector<Group> group_subsystems(const NetworkDef& net, bool shared) {
  std::vector<Group> groups;
  std::map<std::string, std::size_t> by_signature;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const std::string& sig = net.subsystem(i).signature;
    if (shared && !sig.empty()) {
      const auto [it, inserted] = by_signature.emplace(sig, groups.size());
      if (!inserted) {
        groups[it->second].members.push_back(i);
        continue;
      }
    }
    groups.push_back({i, {i}});
  }
  return groups;
}

std::string summarize(const PipelineResult& r) {
  std::ostringstream out;
  out << "status: " << (r.exit_code == kExitPass ? "PASS" : "FAIL") << " (exit " << r.exit_code
      << ")\n";
  out << "attempts: " << r.attempts << '\n';
  if (!r.stage.empty()) out << "stage: " << r.stage << '\n';
  if (!r.diagnosis.empty()) out << "blocked by: " << r.diagnosis << '\n';
  if (!r.message.empty()) out << "message: " << r.message << '\n';
  for (const auto& c : r.subsystem_certificates) {
    out << "subsystem " << c.id << ": mu*=" << c.solution.mu_star << " gamma=" << c.solution.gamma
        << " rho=" << c.solution.rho << " alpha=[" << c.solution.alpha_lo << ", "
        << c.solution.alpha_hi << "] epsilon=" << c.epsilon << " L=" << c.l
        << " margin=" << c.margin << (c.pass ? " pass" : " FAIL") << '\n';
  }
  if (r.certificate) {
    const Composition& c = r.certificate->composition;
    out << "network: zeta=" << c.zeta << " gamma_net=" << c.gamma_net << " alpha=["
        << c.alpha_lo_net << ", " << c.alpha_hi_net << "]\n";
  }
  return out.str();
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
  PipelineResult result;
  fs::path out_dir;
  auto finish = [&](PipelineResult& r) -> PipelineResult {
    r.summary = summarize(r);
    if (!out_dir.empty()) {
      try {
        write_text(out_dir / "summary.txt", r.summary);
        if (r.exit_code != kExitPass) {
          json err = {{"exit_code", r.exit_code},
                      {"stage", r.stage},
                      {"diagnosis", r.diagnosis},
                      {"message", r.message},
                      {"attempts", r.attempts}};
          write_text(out_dir / "error.json", err.dump(2) + "\n");
        }
      } catch (const Error& e) {
        r.message += std::string(r.message.empty() ? "" : "; ") + e.what();
        if (r.exit_code == kExitPass) r.exit_code = kExitConfig;
      }
    }
    return std::move(r);
  };

  try {
    config.validate();
    out_dir = config.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create output directory " + out_dir.string());
  } catch (const Error& e) {
    result.exit_code = kExitConfig;
    result.stage = "config";
    result.message = e.what();
    return finish(result);
  }

  std::string stage = "load";
  try {
    const NetworkDef net = load_network(config.network, config.m);
    const std::vector<Group> groups = group_subsystems(net, config.shared_dynamics);
    std::vector<SamplingSpec> specs(groups.size(), config.sampling);

    for (std::size_t attempt = 0;; ++attempt) {
      result.attempts = attempt + 1;
      std::vector<SubsystemCertificate> certs;
      json hashes = json::object();
      bool mu_blocked = false;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const BlackBoxSubsystem& sub = net.subsystem(groups[g].representative);
        stage = "sample";
        Dataset ds = normalize(collect(sub, specs[g], config.jobs));
        const std::string hash = dataset_hash(ds);
        if (config.write_datasets) {
          save_dataset(ds, (out_dir / ("dataset_" + std::to_string(sub.id) + ".jsonl")).string());
        }
        stage = "dispersion";
        const DispersionEstimate disp = estimate_dispersion(
            ds, config.dispersion_points_per_axis, config.jobs, config.dispersion_budget);
        stage = "solve";
        const SopSolution sol =
            solve_sop(ds, LyapunovTemplate::full_quadratic(sub.n), config.sop, config.jobs);
        ds = Dataset();
        stage = "lipschitz";
        const LipschitzEstimate lip = estimate_constants(sol, sub, config.lipschitz, config.jobs);
        stage = "margin";
        const double eps = config.conservative_epsilon ? disp.epsilon_conservative : disp.epsilon;
        SubsystemCertificate cert = check_subsystem(sol, eps, lip.l, sub.id);
        cert.dataset_hash = hash;
        cert.details = {{"sampling", to_json(specs[g])},
                        {"dispersion",
                         {{"epsilon", disp.epsilon},
                          {"epsilon_conservative", disp.epsilon_conservative},
                          {"test_set_size", disp.test_set_size},
                          {"test_points_per_axis", disp.test_points_per_axis},
                          {"grid_resolution", disp.grid_resolution}}},
                        {"lipschitz", to_json(lip)},
                        {"members", groups[g].members.size()}};
        write_text(out_dir / ("subsystem_" + std::to_string(sub.id) + ".json"),
                   to_json(cert).dump(2) + "\n");
        hashes[std::to_string(sub.id)] = hash;
        if (!cert.pass && sol.mu_star >= 0.0) mu_blocked = true;
        certs.push_back(std::move(cert));
      }
      result.subsystem_certificates = certs;

      bool margins_ok = true;
      const SubsystemCertificate* worst = nullptr;
      for (const auto& c : certs) {
        if (!c.pass) {
          margins_ok = false;
          if (!worst || c.margin > worst->margin) worst = &c;
        }
      }

      std::optional<Composition> composition;
      std::vector<std::size_t> assignment(net.size());
      for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t i : groups[g].members) assignment[i] = g;
      }
      if (margins_ok) {
        stage = "compose";
        composition = evaluate_composition(expand_gains(certs, assignment), net.topology());
        if (composition->pass) {
          NetworkCertificate nc = compose(certs, net.topology(), assignment);
          json provenance = {{"dataset_hashes", hashes},
                             {"config", to_json(config)},
                             {"attempts", result.attempts},
                             {"timestamp", timestamp_utc()}};
          if (config.validation_samples > 0) {
            stage = "validate";
            const ValidationReport v =
                validate_network(nc, net, config.validation_samples, config.sampling.seed, 1e-6,
                                 config.jobs);
            provenance["validation"] = {{"samples", v.samples},
                                        {"violations", v.violations},
                                        {"max_lower_violation", v.max_lower_violation},
                                        {"max_upper_violation", v.max_upper_violation},
                                        {"max_decay_violation", v.max_decay_violation},
                                        {"pass", v.pass}};
          }
          nc.provenance = std::move(provenance);
          write_text(out_dir / "network_certificate.json", to_json(nc).dump(2) + "\n");
          result.certificate = std::move(nc);
          result.exit_code = kExitPass;
          result.stage = "done";
          return finish(result);
        }
      }

      // Certification failed at this density.
      if (!margins_ok) {
        result.exit_code = kExitMargin;
        result.stage = "margin";
        std::ostringstream msg;
        msg << "subsystem " << worst->id << " margin " << worst->margin << " = mu* "
            << worst->solution.mu_star << " + L " << worst->l << " * epsilon " << worst->epsilon;
        result.message = msg.str();
        if (mu_blocked) {
          result.diagnosis = "mu_star";
        } else {
          result.diagnosis =
              worst->l * worst->epsilon > 10.0 * std::abs(worst->solution.mu_star) ? "lipschitz"
                                                                                   : "epsilon";
        }
      } else {
        result.exit_code = kExitCompose;
        result.stage = "compose";
        result.diagnosis = "zeta";
        result.message = composition->reason;
      }
      // More data cannot lower mu*: it only adds constraints.
      if (mu_blocked || attempt >= config.retries) return finish(result);
      bool can_grow = true;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const BlackBoxSubsystem& sub = net.subsystem(groups[g].representative);
        const SamplingSpec next = densify(specs[g], 2 * (sub.n + sub.p));
        if (record_count(next, 2 * (sub.n + sub.p)) > config.max_records) can_grow = false;
        specs[g] = next;
      }
      if (!can_grow) {
        result.message += "; densified data would exceed max_records";
        return finish(result);
      }
    }
  } catch (const Error& e) {
    result.exit_code = exit_code_for(e);
    result.stage = stage;
    result.message = e.what();
    if (e.code() == ErrorCode::kInfeasible) result.diagnosis = "mu_star";
    return finish(result);
  } catch (const std::exception& e) {
    result.exit_code = kExitInternal;
    result.stage = stage;
    result.message = e.what();
    return finish(result);
  }
}

}  // namespace deltacert
