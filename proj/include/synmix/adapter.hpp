#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace synmix {

enum class AdapterRole { Segmenter, Generator, Annotator, Detector };

std::string_view to_string(AdapterRole r) noexcept;
AdapterRole adapter_role_from_string(std::string_view s);

inline constexpr std::string_view kRequestSchema = "synmix.adapter.request/1";
inline constexpr std::string_view kResponseSchema = "synmix.adapter.response/1";

/// How to launch an external model runner. `command` is an argv template;
/// the tokens {request}, {output}, {role} and {bindir} are substituted.
struct AdapterSpec {
  AdapterRole role = AdapterRole::Detector;
  std::vector<std::string> command;
  std::filesystem::path workdir;
  double timeout_seconds = 3600.0;

  /// Relative workdir and a relative first argv element are resolved
  /// against `base_dir` when they name an existing file.
  static AdapterSpec from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
  static AdapterSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// The bundled deterministic stub for `role`.
  static AdapterSpec stub(AdapterRole role, double timeout_seconds = 60.0);
};

/// Directory holding synmix executables; substituted for {bindir}.
/// Defaults to $SYNMIX_BINDIR or the directory of the running executable.
std::filesystem::path adapter_bindir();
void set_adapter_bindir(std::filesystem::path dir);

/// Writes `request` (schema and role filled in) to output_dir/request.json,
/// runs the adapter and returns the parsed output_dir/response.json after
/// checking its schema and role. stdout/stderr go to adapter.log.
nlohmann::json run_adapter(const AdapterSpec& spec, nlohmann::json request,
                           const std::filesystem::path& output_dir);

}  // namespace synmix
