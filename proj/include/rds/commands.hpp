#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace rds::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAborted = 3;
inline constexpr int kExitInternal = 1;

/// Trains a policy and writes split.csv, dynamics.csv, policy.txt and
/// config.resolved.json to output.dir (plus best_sampled_split.csv when a
/// sampled split was recorded). Progress goes to `err`.
int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Writes split.csv for a random or stratified baseline to output.dir.
int cmd_baseline(const std::filesystem::path& config_path, const std::string& method, std::ostream& out,
                 std::ostream& err);

/// One report row per split file; prints report.csv to `out` and writes it
/// to output.dir.
int cmd_evaluate(const std::filesystem::path& config_path, const std::vector<std::filesystem::path>& split_paths,
                 std::ostream& out, std::ostream& err);

}  // namespace rds::cli
