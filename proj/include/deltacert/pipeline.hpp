#pragma once

// End-to-end certification run: sample each distinct subsystem, solve its
// scenario program, estimate Lipschitz constants, check margins, compose,
// and write the artifacts. Densifies the data and retries on failure.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltacert/certify.hpp"
#include "deltacert/lipschitz.hpp"
#include "deltacert/sampling.hpp"
#include "deltacert/sop.hpp"

namespace deltacert {

struct RunConfig {
  std::string network;                 // network description path
  std::optional<std::size_t> m;        // overrides a generator's size
  SamplingSpec sampling;
  SopConfig sop;
  LipschitzConfig lipschitz;
  std::string output_dir = "deltacert-out";
  bool conservative_epsilon = true;
  bool shared_dynamics = false;
  std::size_t jobs = 1;
  std::size_t retries = 2;
  std::size_t max_records = 2'000'000;  // densification stops beyond this
  std::size_t dispersion_points_per_axis = 0;  // 0 = largest grid within budget
  std::size_t dispersion_budget = 2'000'000;
  std::size_t validation_samples = 10'000;
  bool write_datasets = true;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Fields missing from `doc` keep their value in `base`.
RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {});

enum ExitCode : int {
  kExitPass = 0,
  kExitInternal = 1,
  kExitMargin = 2,
  kExitCompose = 3,
  kExitInfeasible = 4,
  kExitConfig = 5,
};

struct PipelineResult {
  int exit_code = kExitInternal;
  std::string stage;      // stage that ended the run
  std::string diagnosis;  // epsilon, lipschitz, mu_star or zeta when certification failed
  std::string message;
  std::size_t attempts = 0;
  std::optional<NetworkCertificate> certificate;
  std::vector<SubsystemCertificate> subsystem_certificates;
  std::string summary;
};

PipelineResult run_pipeline(const RunConfig& config);

/// Grid points per axis giving at least twice the records of `ppa` in
/// dimension d: ceil(ppa * 2^(1/d)).
std::size_t densified_points_per_axis(std::size_t ppa, std::size_t d);

}  // namespace deltacert
