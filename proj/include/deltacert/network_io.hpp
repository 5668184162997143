#pragma once

// Network description files.
//
//   {"subsystems": [{"id": 1, "n": 2, "p": 2, "kind": "linear",
//                    "params": {"A": [[...], ...], "B": [[...], ...]}}, ...],
//    "edges": [[i, j], ...]}
//
// Edge [i, j] (0-based positions in "subsystems") means subsystem i reads the
// state of subsystem j; the order of edges for a given i fixes the block order
// of w_i. Supported kinds: "linear", "ring", and "external" (params.command
// is started once through /bin/sh and driven over a line protocol: one line
// "x... w..." in, one line with the next state out).
//
// A generator form is also accepted:
//   {"generator": {"kind": "ring", "m": 100}}
//   {"generator": {"kind": "two_subsystem"}}

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "deltacert/builtin.hpp"
#include "deltacert/dynamics.hpp"

namespace deltacert {

/// m_override replaces "m" of a generator description.
NetworkDef network_from_json(const nlohmann::json& doc,
                             std::optional<std::size_t> m_override = std::nullopt);
NetworkDef load_network(const std::string& path,
                        std::optional<std::size_t> m_override = std::nullopt);

/// Linear subsystems of a description (kind "linear" only), for the
/// model-based baseline.
std::vector<std::pair<builtin::DenseMatrix, builtin::DenseMatrix>> linear_models_from_json(
    const nlohmann::json& doc);

/// Oracle backed by a child process speaking the line protocol.
StepFn external_process_oracle(const std::string& command, std::size_t n,
                               std::size_t p);

nlohmann::json read_json_file(const std::string& path);

}  // namespace deltacert
