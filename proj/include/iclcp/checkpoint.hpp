#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "iclcp/lsa_model.hpp"

namespace iclcp {

/// Checkpoint layout (all integers and floats little-endian):
///   8 bytes   magic "ICLCPCK1"
///   uint64    header length H
///   H bytes   JSON header {format_version, d, n_trained, L, init_seed, train_config}
///   float64[] for each layer: W_K, W_Q, W_V, W_O, each (d+1)^2 values row-major
struct CheckpointHeader {
  int format_version = 1;
  int d = 0;
  int n_trained = 0;
  int layers = 0;
  std::uint64_t init_seed = 0;
  nlohmann::json train_config = nlohmann::json::object();
};

struct Checkpoint {
  CheckpointHeader header;
  LsaParams params;
};

inline constexpr int kCheckpointFormatVersion = 1;

void write_checkpoint(std::ostream& out, const LsaParams& params, const CheckpointHeader& header);
void save_checkpoint(const std::filesystem::path& path, const LsaParams& params,
                     const CheckpointHeader& header);

/// Validates magic, version, payload size and (when given) the expected d and L.
Checkpoint read_checkpoint(std::istream& in, std::optional<int> expected_d = std::nullopt,
                           std::optional<int> expected_layers = std::nullopt);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<int> expected_d = std::nullopt,
                           std::optional<int> expected_layers = std::nullopt);

}  // namespace iclcp
