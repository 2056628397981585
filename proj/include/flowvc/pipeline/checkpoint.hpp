#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowvc/numerics/tensor.hpp"

namespace flowvc::pipeline {

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'O', 'W', 'V', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  num::Shape shape;
  std::vector<double> values;

  bool operator==(const TensorRecord&) const = default;
};

/// Binary layout, all integers little-endian:
///   magic[8] | u32 version | u64 len, config text | u64 step | u64 count |
///   count x (u32 len, name | u32 ndim | ndim x u64 dim | numel x f64)
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::uint64_t step = 0;
  std::vector<TensorRecord> records;

  const TensorRecord* find(const std::string& name) const;

  std::string serialize() const;
  /// Throws CheckpointError on bad magic, unsupported version, truncation or
  /// trailing bytes.
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;
};

}  // namespace flowvc::pipeline
