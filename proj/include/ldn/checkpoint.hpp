#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ldn/feature_dump.hpp"
#include "ldn/matrix.hpp"
#include "ldn/model.hpp"

namespace ldn {

// Trainable tensors at full precision plus the config text that produced them.
// Tensor order is the serialization order, so a round trip is byte-identical.
struct CheckpointData {
  std::string config_echo;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const CheckpointData& ck) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'L', 'D', 'C', 'K'});
  wire::put_u32(out, kCheckpointVersion);
  wire::put_u32(out, static_cast<std::uint32_t>(ck.config_echo.size()));
  out.insert(out.end(), ck.config_echo.begin(), ck.config_echo.end());
  wire::put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, m] : ck.tensors) {
    wire::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    wire::put_u32(out, static_cast<std::uint32_t>(m.rows));
    wire::put_u32(out, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) wire::put_f64(out, v);
  }
  return out;
}

inline CheckpointData parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  wire::Reader r{bytes};
  r.expect_magic("LDCK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  CheckpointData ck;
  ck.config_echo = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u32());
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix m(rows, cols);
    for (double& v : m.data) v = r.f64();
    ck.tensors.emplace_back(name, std::move(m));
  }
  r.done();
  return ck;
}

inline CheckpointData checkpoint_from_state(const TrainState& state,
                                            const std::string& config_echo) {
  CheckpointData ck;
  ck.config_echo = config_echo;
  for (const auto& [name, m] : state.params) ck.tensors.emplace_back(name, m);
  return ck;
}

inline void write_checkpoint(const std::string& path, const CheckpointData& ck) {
  write_file_bytes(path, serialize_checkpoint(ck));
}

inline CheckpointData read_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file_bytes(path));
}

}  // namespace ldn
