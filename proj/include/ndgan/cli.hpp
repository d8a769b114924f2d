#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace ndgan::cli {

inline constexpr const char* kCodeVersion = "ndgan 0.1.0";

enum class Exit : int { ok = 0, validation = 2, runtime = 3, tolerance = 4 };

/// Raised for bad configs and flags before any work starts.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses argv, runs one subcommand, maps failures to exit codes.
int main(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

// Each command takes a resolved config (flags already merged) and returns an exit code.
int cmd_synth(const nlohmann::json& config);
int cmd_train(const nlohmann::json& config);
int cmd_score(const nlohmann::json& config);
int cmd_eval(const nlohmann::json& config);
int cmd_oracle(const nlohmann::json& config);

/// FNV-1a 64 of a file's bytes as 16 hex digits.
std::string file_checksum(const std::string& path);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace ndgan::cli
