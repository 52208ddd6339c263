#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/analysis.hpp"
#include "ldn/image.hpp"
#include "ldn/matrix.hpp"

namespace ldn {
namespace wire {

// All multi-byte fields are little-endian regardless of host order.
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw std::runtime_error("truncated binary file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return s;
  }
  void expect_magic(const char* magic) {
    if (str(4) != magic) throw std::runtime_error(std::string("bad magic, expected ") + magic);
  }
  void done() const {
    if (pos != bytes.size()) throw std::runtime_error("trailing bytes in binary file");
  }
};

}  // namespace wire

// Layer features plus labels. Features travel as 32-bit floats: the dump is a
// measurement artefact, not a training state, so the narrowing is acceptable
// and halves the size.
inline constexpr std::uint32_t kFeatureDumpVersion = 1;

inline std::vector<std::uint8_t> serialize_feature_dump(const FeatureDump& dump) {
  const std::size_t n = dump.labels.size();
  for (const auto& layer : dump.layers)
    if (layer.features.rows != n)
      throw std::invalid_argument("feature dump: layer row count must match label count");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'L', 'D', 'F', 'D'});
  wire::put_u32(out, kFeatureDumpVersion);
  wire::put_u32(out, static_cast<std::uint32_t>(dump.layers.size()));
  for (const auto& layer : dump.layers) {
    wire::put_u32(out, layer.index);
    wire::put_u32(out, static_cast<std::uint32_t>(layer.features.rows));
    wire::put_u32(out, static_cast<std::uint32_t>(layer.features.cols));
    for (double v : layer.features.data) wire::put_f32(out, static_cast<float>(v));
  }
  for (std::int32_t label : dump.labels) wire::put_i32(out, label);
  return out;
}

inline FeatureDump parse_feature_dump(const std::vector<std::uint8_t>& bytes) {
  wire::Reader r{bytes};
  r.expect_magic("LDFD");
  const std::uint32_t version = r.u32();
  if (version != kFeatureDumpVersion)
    throw std::runtime_error("feature dump: unsupported version " + std::to_string(version));
  FeatureDump dump;
  const std::uint32_t layer_count = r.u32();
  std::size_t n = 0;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    FeatureLayer layer;
    layer.index = r.u32();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (l == 0)
      n = rows;
    else if (rows != n)
      throw std::runtime_error("feature dump: layers disagree on row count");
    layer.features = Matrix(rows, cols);
    for (double& v : layer.features.data) v = static_cast<double>(r.f32());
    dump.layers.push_back(std::move(layer));
  }
  dump.labels.resize(n);
  for (auto& label : dump.labels) label = r.i32();
  r.done();
  return dump;
}

inline void write_feature_dump(const std::string& path, const FeatureDump& dump) {
  write_file_bytes(path, serialize_feature_dump(dump));
}

inline FeatureDump read_feature_dump(const std::string& path) {
  FeatureDump dump = parse_feature_dump(read_file_bytes(path));
  dump.metadata = path;
  return dump;
}

}  // namespace ldn
