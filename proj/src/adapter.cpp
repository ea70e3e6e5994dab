#include "synmix/adapter.hpp"

#include <chrono>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/manifest.hpp"

extern char** environ;

namespace synmix {
namespace fs = std::filesystem;

namespace {

std::mutex g_bindir_mutex;
fs::path g_bindir;

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string tail_of_file(const fs::path& path, std::size_t max_bytes = 2000) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error&) {
    return {};
  }
  if (text.size() > max_bytes) text = "..." + text.substr(text.size() - max_bytes);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

std::string_view to_string(AdapterRole r) noexcept {
  switch (r) {
    case AdapterRole::Segmenter: return "segmenter";
    case AdapterRole::Generator: return "generator";
    case AdapterRole::Annotator: return "annotator";
    case AdapterRole::Detector: return "detector";
  }
  return "?";
}

AdapterRole adapter_role_from_string(std::string_view s) {
  if (s == "segmenter") return AdapterRole::Segmenter;
  if (s == "generator") return AdapterRole::Generator;
  if (s == "annotator") return AdapterRole::Annotator;
  if (s == "detector") return AdapterRole::Detector;
  throw Error(Errc::ConfigInvalid, fmt::format("unknown adapter role '{}'", s));
}

AdapterSpec AdapterSpec::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  AdapterSpec s;
  try {
    s.role = adapter_role_from_string(j.at("role").get<std::string>());
    const auto& cmd = j.at("command");
    if (cmd.is_string()) {
      std::string text = cmd.get<std::string>();
      std::size_t i = 0;
      while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        const auto end = text.find(' ', i);
        if (i < text.size()) s.command.push_back(text.substr(i, end - i));
        i = end == std::string::npos ? text.size() : end;
      }
    } else {
      s.command = cmd.get<std::vector<std::string>>();
    }
    if (j.contains("workdir")) s.workdir = j.at("workdir").get<std::string>();
    s.timeout_seconds = j.value("timeout", s.timeout_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("adapter spec: ") + e.what());
  }
  if (s.command.empty()) throw Error(Errc::ConfigInvalid, "adapter command is empty");
  if (!(s.timeout_seconds > 0)) throw Error(Errc::ConfigInvalid, "adapter timeout must be positive");
  if (!base_dir.empty()) {
    if (!s.workdir.empty() && s.workdir.is_relative()) s.workdir = base_dir / s.workdir;
    const fs::path exe = s.command.front();
    if (exe.is_relative() && exe.has_parent_path() && fs::exists(base_dir / exe)) {
      s.command.front() = (base_dir / exe).string();
    }
  }
  return s;
}

AdapterSpec AdapterSpec::load(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

nlohmann::json AdapterSpec::to_json() const {
  nlohmann::json j{{"role", to_string(role)}, {"command", command}, {"timeout", timeout_seconds}};
  if (!workdir.empty()) j["workdir"] = workdir.string();
  return j;
}

AdapterSpec AdapterSpec::stub(AdapterRole role, double timeout_seconds) {
  AdapterSpec s;
  s.role = role;
  s.command = {"{bindir}/synmix_stub_adapter", "{role}", "{request}", "{output}"};
  s.timeout_seconds = timeout_seconds;
  return s;
}

fs::path adapter_bindir() {
  std::lock_guard lock(g_bindir_mutex);
  if (!g_bindir.empty()) return g_bindir;
  if (const char* env = std::getenv("SYNMIX_BINDIR"); env && *env) return env;
  std::error_code ec;
  const auto self = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::current_path() : self.parent_path();
}

void set_adapter_bindir(fs::path dir) {
  std::lock_guard lock(g_bindir_mutex);
  g_bindir = std::move(dir);
}

nlohmann::json run_adapter(const AdapterSpec& spec, nlohmann::json request,
                           const fs::path& output_dir) {
  fs::create_directories(output_dir);
  const fs::path out_abs = fs::absolute(output_dir);
  const fs::path request_path = out_abs / "request.json";
  const fs::path response_path = out_abs / "response.json";
  const fs::path log_path = out_abs / "adapter.log";
  fs::remove(response_path);

  request["schema"] = kRequestSchema;
  request["role"] = to_string(spec.role);
  write_json_file(request_path, request);

  const std::string bindir = adapter_bindir().string();
  std::vector<std::string> argv_s;
  for (std::string a : spec.command) {
    replace_all(a, "{request}", request_path.string());
    replace_all(a, "{output}", out_abs.string());
    replace_all(a, "{role}", std::string(to_string(spec.role)));
    replace_all(a, "{bindir}", bindir);
    argv_s.push_back(std::move(a));
  }
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  if (!spec.workdir.empty()) {
    posix_spawn_file_actions_addchdir_np(&actions, spec.workdir.c_str());
  }
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw Error(Errc::AdapterFailure,
                fmt::format("{} adapter: cannot launch '{}': {}", to_string(spec.role), argv_s[0],
                            std::strerror(rc)));
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(spec.timeout_seconds);
  int status = 0;
  auto delay = std::chrono::milliseconds(1);
  while (true) {
    const pid_t w = waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) {
      throw Error(Errc::AdapterFailure, fmt::format("waitpid failed: {}", std::strerror(errno)));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw Error(Errc::AdapterTimeout, fmt::format("{} adapter exceeded {} s",
                                                    to_string(spec.role), spec.timeout_seconds));
    }
    std::this_thread::sleep_for(delay);
    delay = std::min(delay * 2, std::chrono::milliseconds(50));
  }

  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (exit_code != 0) {
    throw Error(Errc::AdapterFailure, fmt::format("{} adapter exited with {}: {}",
                                                  to_string(spec.role), exit_code,
                                                  tail_of_file(log_path)));
  }
  if (!fs::exists(response_path)) {
    throw Error(Errc::SchemaViolation,
                fmt::format("{} adapter wrote no response.json", to_string(spec.role)));
  }
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(read_text_file(response_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, fmt::format("response.json: {}", e.what()));
  }
  if (!response.is_object() || response.value("schema", "") != kResponseSchema ||
      response.value("role", "") != to_string(spec.role)) {
    throw Error(Errc::SchemaViolation,
                fmt::format("{} adapter response lacks schema '{}' or role", to_string(spec.role),
                            kResponseSchema));
  }
  return response;
}

}  // namespace synmix
