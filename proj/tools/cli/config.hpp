#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "hetens/eval.hpp"

namespace hetens::cli {

using Json = nlohmann::ordered_json;

/// A fully resolved run configuration: profile defaults, then the config
/// file, then command-line overrides.
struct RunConfig {
  std::string profile = "desk";
  ExperimentConfig experiment;
  double alpha = 0.05;
  /// Resolved values in config-file layout (what the manifest records).
  Json snapshot;
  /// Hash of the snapshot without the thread count; cells computed under a
  /// different hash are never reused.
  std::uint64_t hash = 0;
};

struct Overrides {
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

/// Profile defaults: "paper" (t=1001, b=10, stride=13, 100 repetitions) or
/// "desk" (t=101, b=5, stride=13 apportioned, 20 repetitions).
ExperimentConfig profile_defaults(const std::string& profile);

/// Parses config text. Syntax errors are reported with line and column;
/// schema errors name the key path and the line it appears on. Relative CSV
/// paths are resolved against `base_dir`. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin, const Overrides& overrides,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides);

/// Rebuilds the snapshot and hash after fields were changed in code.
void refresh_snapshot(RunConfig& cfg);

/// Thread count: explicit flag, else HETENS_THREADS, else the fallback.
std::size_t resolve_threads(std::optional<std::size_t> flag, std::size_t fallback);

}  // namespace hetens::cli
