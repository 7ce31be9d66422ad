#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roofkit/dataset.hpp"
#include "roofkit/optim.hpp"
#include "roofkit/roofeval.hpp"

namespace roofkit::cli {

/// Every tunable of the pipeline in one place. All fields have defaults; the
/// config file and --set overrides may only touch known keys.
struct RunConfig {
  std::uint64_t seed = 0;

  SegmentationParams seg;
  EvalConfig eval;           // seg copied in when resolved
  PadConfig pad;
  bool pad_enabled = true;
  OptimizerConfig optim;

  /// Applies `key = value`; throws InvalidArgument for unknown keys or bad
  /// values.
  void set(const std::string& key, const std::string& value);

  /// The fully-resolved key=value listing, fixed order, suitable for echoing
  /// into output directories.
  std::string resolved() const;
};

/// Parses a config file of `key = value` lines (# comments). Later keys win.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides);

/// Writes through a temp file then renames, so concurrent writers never
/// interleave.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace roofkit::cli
