#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ldn/image.hpp"
#include "ldn/image_corruption.hpp"
#include "ldn/sha256.hpp"

namespace ldn {

struct ProtocolConfig {
  std::uint64_t seed = 0;
  Family family = Family::noise;
  int severity = 3;
};

inline void validate(const ProtocolConfig& cfg) {
  if (cfg.severity < 1 || cfg.severity > 5)
    throw std::invalid_argument("protocol severity must be in 1..5");
}

struct ManifestRow {
  std::string id;
  std::string family;
  std::string subtype;
  int severity = 0;
  std::string sha256;  // digest of the emitted file; empty when skipped
};

inline std::string manifest_csv(const std::vector<ManifestRow>& rows) {
  std::string out = "id,family,subtype,severity,sha256\n";
  for (const auto& r : rows) {
    out += r.id;
    out += ',';
    out += r.family;
    out += ',';
    out += r.subtype;
    out += ',';
    out += std::to_string(r.severity);
    out += ',';
    out += r.sha256;
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  const std::string text = manifest_csv(rows);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// LD_THREADS caps the worker count; unset or invalid falls back to the hardware.
inline unsigned worker_count() {
  if (const char* env = std::getenv("LD_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

namespace detail {

struct CorruptJob {
  std::string id;
  std::filesystem::path in_path;
  std::filesystem::path out_path;
};

struct CorruptOutcome {
  bool ok = false;
  std::string subtype;
  std::string digest;
  std::vector<std::uint8_t> bytes;
};

inline CorruptOutcome run_corrupt_job(const CorruptJob& job, const ProtocolConfig& cfg) {
  CorruptOutcome out;
  ImageBuffer img;
  try {
    img = read_ppm(job.in_path.string());
  } catch (const std::exception&) {
    return out;  // recorded as skipped; the batch keeps going
  }
  const auto result = corrupt_one(img, cfg.family, cfg.severity, cfg.seed, job.id);
  out.bytes = serialize_ppm(result.image);
  out.digest = sha256_hex(out.bytes);
  out.subtype = subtype_names(cfg.family)[result.subtype];
  out.ok = true;
  return out;
}

}  // namespace detail

// Corrupts every .ppm in in_dir into out_dir (same filenames) and returns the
// manifest rows in filename order. Workers only fill a pre-sized slot vector,
// so thread count and scheduling cannot change a single output byte.
inline std::vector<ManifestRow> corrupt_dataset(const std::string& in_dir,
                                                const std::string& out_dir,
                                                const ProtocolConfig& cfg) {
  validate(cfg);
  namespace fs = std::filesystem;
  if (!fs::is_directory(in_dir)) throw std::runtime_error("input is not a directory: " + in_dir);
  fs::create_directories(out_dir);

  std::vector<detail::CorruptJob> jobs;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".ppm") continue;
    detail::CorruptJob job;
    job.in_path = entry.path();
    job.id = entry.path().stem().string();
    job.out_path = fs::path(out_dir) / entry.path().filename();
    jobs.push_back(std::move(job));
  }
  std::sort(jobs.begin(), jobs.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<detail::CorruptOutcome> outcomes(jobs.size());
  const unsigned workers = std::min<unsigned>(worker_count(),
                                              std::max<std::size_t>(jobs.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      outcomes[i] = detail::run_corrupt_job(jobs[i], cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
          outcomes[i] = detail::run_corrupt_job(jobs[i], cfg);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<ManifestRow> rows(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ManifestRow& row = rows[i];
    row.id = jobs[i].id;
    row.family = to_string(cfg.family);
    row.severity = cfg.severity;
    if (outcomes[i].ok) {
      write_file_bytes(jobs[i].out_path.string(), outcomes[i].bytes);
      row.subtype = outcomes[i].subtype;
      row.sha256 = outcomes[i].digest;
    } else {
      row.subtype = "skipped";
    }
  }
  return rows;
}

}  // namespace ldn
