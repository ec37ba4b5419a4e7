#include "iclcp/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {
namespace {

constexpr std::array<char, 8> kMagic = {'I', 'C', 'L', 'C', 'P', 'C', 'K', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ArgumentError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
  }
}

void get_matrix(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_u64(in));
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const LsaParams& params, const CheckpointHeader& header) {
  params.validate();
  if (header.d != params.dim() || header.layers != params.num_layers()) {
    throw DimensionError("checkpoint header does not describe the parameters");
  }
  nlohmann::json j{{"format_version", header.format_version},
                   {"d", header.d},
                   {"n_trained", header.n_trained},
                   {"L", header.layers},
                   {"init_seed", header.init_seed},
                   {"train_config", header.train_config}};
  const std::string text = j.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : params.layers) {
    put_matrix(out, layer.key);
    put_matrix(out, layer.query);
    put_matrix(out, layer.value);
    put_matrix(out, layer.output);
  }
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const LsaParams& params,
                     const CheckpointHeader& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, params, header);
}

Checkpoint read_checkpoint(std::istream& in, std::optional<int> expected_d,
                           std::optional<int> expected_layers) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ArgumentError("checkpoint: bad magic");
  const std::uint64_t header_len = get_u64(in);
  if (header_len > (1u << 26)) throw ArgumentError("checkpoint: header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ArgumentError("checkpoint: truncated header");

  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(text);
    ck.header.format_version = j.at("format_version").get<int>();
    ck.header.d = j.at("d").get<int>();
    ck.header.n_trained = j.at("n_trained").get<int>();
    ck.header.layers = j.at("L").get<int>();
    ck.header.init_seed = j.at("init_seed").get<std::uint64_t>();
    ck.header.train_config = j.value("train_config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (ck.header.format_version != kCheckpointFormatVersion) {
    throw ArgumentError("checkpoint: unsupported format_version " +
                        std::to_string(ck.header.format_version));
  }
  if (ck.header.d < 1 || ck.header.layers < 1) throw ArgumentError("checkpoint: invalid shape");
  if (expected_d && *expected_d != ck.header.d) {
    throw DimensionError("checkpoint has d=" + std::to_string(ck.header.d) + ", expected d=" +
                         std::to_string(*expected_d));
  }
  if (expected_layers && *expected_layers != ck.header.layers) {
    throw DimensionError("checkpoint has L=" + std::to_string(ck.header.layers) +
                         ", expected L=" + std::to_string(*expected_layers));
  }

  ck.params = LsaParams::zeros(ck.header.d, ck.header.layers);
  for (auto& layer : ck.params.layers) {
    get_matrix(in, layer.key);
    get_matrix(in, layer.query);
    get_matrix(in, layer.value);
    get_matrix(in, layer.output);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ArgumentError("checkpoint: trailing bytes after weights");
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_d,
                           std::optional<int> expected_layers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in, expected_d, expected_layers);
}

}  // namespace iclcp
