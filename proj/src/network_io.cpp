#include "deltacert/network_io.hpp"

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "deltacert/error.hpp"

namespace deltacert {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

namespace {

builtin::DenseMatrix matrix_from_json(const json& j, std::size_t rows,
                                      std::size_t cols, const char* name) {
  builtin::DenseMatrix m{rows, cols, {}};
  if (cols == 0) return m;
  if (!j.is_array() || j.size() != rows) {
    fail(ErrorCode::kParse, std::string(name) + " must be an array of " +
                                std::to_string(rows) + " rows");
  }
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) {
      fail(ErrorCode::kParse, std::string(name) + " rows must have " +
                                  std::to_string(cols) + " entries");
    }
    for (const auto& v : row) m.values.push_back(v.get<double>());
  }
  return m;
}

struct ChildProcess {
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;
  std::mutex mutex;

  ~ChildProcess() {
    if (to_child) std::fclose(to_child);
    if (from_child) std::fclose(from_child);
    if (pid > 0) {
      int status = 0;
      if (waitpid(pid, &status, WNOHANG) == 0) {
        kill(pid, SIGTERM);
        waitpid(pid, &status, 0);
      }
    }
  }
};

std::shared_ptr<ChildProcess> spawn(const std::string& command) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    fail(ErrorCode::kIo, "pipe() failed for external oracle");
  }
  const pid_t pid = fork();
  if (pid < 0) fail(ErrorCode::kIo, "fork() failed for external oracle");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  auto child = std::make_shared<ChildProcess>();
  child->pid = pid;
  child->to_child = fdopen(in_pipe[1], "w");
  child->from_child = fdopen(out_pipe[0], "r");
  if (!child->to_child || !child->from_child) {
    fail(ErrorCode::kIo, "fdopen() failed for external oracle");
  }
  return child;
}

}  // namespace

StepFn external_process_oracle(const std::string& command, std::size_t n,
                               std::size_t p) {
  // Writing to a child that died must surface as an error, not a signal.
  ::signal(SIGPIPE, SIG_IGN);
  auto child = spawn(command);
  return [child, command, n, p](std::span<const double> x,
                                std::span<const double> w) -> Vector {
    std::lock_guard lock(child->mutex);
    std::ostringstream line;
    line.precision(17);
    for (std::size_t i = 0; i < n; ++i) line << (i ? " " : "") << x[i];
    for (std::size_t i = 0; i < p; ++i) line << " " << w[i];
    line << "\n";
    const std::string out = line.str();
    if (std::fputs(out.c_str(), child->to_child) < 0 ||
        std::fflush(child->to_child) != 0) {
      fail(ErrorCode::kOracle, "external oracle '" + command + "' closed its input");
    }
    std::string reply;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, child->from_child)) {
      reply += buf;
      if (!reply.empty() && reply.back() == '\n') break;
    }
    if (reply.empty()) {
      fail(ErrorCode::kOracle, "external oracle '" + command + "' produced no output");
    }
    std::istringstream parse(reply);
    Vector next;
    double v;
    while (parse >> v) next.push_back(v);
    if (next.size() != n) {
      fail(ErrorCode::kOracle, "external oracle '" + command + "' returned " +
                                   std::to_string(next.size()) + " values, expected " +
                                   std::to_string(n));
    }
    return next;
  };
}

namespace {

BlackBoxSubsystem subsystem_from_json(const json& s, std::size_t index) {
  const std::string kind = s.value("kind", "");
  const int id = s.value("id", static_cast<int>(index + 1));
  const json params = s.value("params", json::object());
  if (kind == "ring") {
    auto sub = builtin::ring_subsystem(id);
    if (s.contains("n") && s["n"].get<std::size_t>() != 2) {
      fail(ErrorCode::kParse, "ring subsystems have n = 2");
    }
    return sub;
  }
  if (kind == "linear") {
    const auto n = s.at("n").get<std::size_t>();
    const auto p = s.value("p", std::size_t{0});
    auto a = matrix_from_json(params.at("A"), n, n, "A");
    auto b = matrix_from_json(params.value("B", json::array()), n, p, "B");
    return builtin::linear_subsystem(id, a, b);
  }
  if (kind == "external") {
    BlackBoxSubsystem sub;
    sub.id = id;
    sub.n = s.at("n").get<std::size_t>();
    sub.p = s.value("p", std::size_t{0});
    const auto command = params.at("command").get<std::string>();
    sub.signature = "external:" + command;
    sub.homogeneous = params.value("homogeneous", true);
    sub.step = external_process_oracle(command, sub.n, sub.p);
    return sub;
  }
  fail(ErrorCode::kParse, "unknown subsystem kind '" + kind + "'");
}

}  // namespace

NetworkDef network_from_json(const json& doc, std::optional<std::size_t> m_override) {
  try {
    if (doc.contains("generator")) {
      const auto& g = doc["generator"];
      const std::string kind = g.at("kind").get<std::string>();
      if (kind == "ring") {
        const std::size_t m = m_override.value_or(g.value("m", std::size_t{3}));
        return builtin::ring_network(m);
      }
      if (kind == "two_subsystem") return builtin::two_subsystem_network();
      fail(ErrorCode::kParse, "unknown generator kind '" + kind + "'");
    }
    const auto& subs_json = doc.at("subsystems");
    std::vector<BlackBoxSubsystem> subs;
    for (std::size_t i = 0; i < subs_json.size(); ++i) {
      subs.push_back(subsystem_from_json(subs_json[i], i));
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : doc.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) fail(ErrorCode::kParse, "edges must be [i, j] pairs");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    return assemble_network(std::move(subs),
                            NetworkTopology::from_edges(subs_json.size(), edges));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("network description: ") + e.what());
  }
}

NetworkDef load_network(const std::string& path, std::optional<std::size_t> m_override) {
  return network_from_json(read_json_file(path), m_override);
}

std::vector<std::pair<builtin::DenseMatrix, builtin::DenseMatrix>> linear_models_from_json(
    const json& doc) {
  std::vector<std::pair<builtin::DenseMatrix, builtin::DenseMatrix>> models;
  try {
    if (doc.contains("generator")) {
      if (doc["generator"].at("kind").get<std::string>() != "two_subsystem") {
        fail(ErrorCode::kInvalidArgument, "generator does not describe linear subsystems");
      }
      auto neg_b1 = builtin::closed_form::b1();
      for (auto& v : neg_b1.values) v = -v;
      models.emplace_back(builtin::closed_form::a1(), neg_b1);
      models.emplace_back(builtin::closed_form::a2(), builtin::closed_form::b2());
      return models;
    }
    for (const auto& s : doc.at("subsystems")) {
      if (s.value("kind", "") != "linear") {
        fail(ErrorCode::kInvalidArgument, "model-based certification needs linear subsystems");
      }
      const auto n = s.at("n").get<std::size_t>();
      const auto p = s.value("p", std::size_t{0});
      const json params = s.value("params", json::object());
      models.emplace_back(matrix_from_json(params.at("A"), n, n, "A"),
                          matrix_from_json(params.value("B", json::array()), n, p, "B"));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("network description: ") + e.what());
  }
  return models;
}

}  // namespace deltacert
