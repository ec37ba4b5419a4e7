#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace iclcp::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kBudget = 3,
  kNumerical = 4,
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

/// Hex FNV-1a of the canonical (sorted-key, compact) dump of `config`.
std::string config_hash(const nlohmann::json& config);

/// Runs the command line `args` (args[0] is the program name). Never throws;
/// errors are reported on `err` and mapped to an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace iclcp::cli
