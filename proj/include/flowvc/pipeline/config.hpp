#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "flowvc/dsp/mel.hpp"

namespace flowvc::pipeline {

/// Reference sizes of the full-scale system, kept for documentation and for
/// `full_scale_config`. The desk-scale defaults below are far smaller.
namespace full_scale {
inline constexpr std::size_t kCodebookSize = 8200;
inline constexpr std::size_t kCodebookDim = 1024;
inline constexpr std::size_t kAttentionHeads = 8;
inline constexpr std::size_t kAttentionLayers = 6;
inline constexpr std::size_t kAttentionDim = 1024;
inline constexpr std::size_t kUNetHidden = 1280;
inline constexpr std::size_t kBatchSize = 16;
inline constexpr double kLearningRate = 1e-4;
}  // namespace full_scale

struct ModelDims {
  std::size_t n_symbols = 12;
  std::size_t ppg_hop = 320;
  double ppg_smoothing = 0.0;
  std::size_t ssl_hidden = 64;
  std::size_t ssl_dim = 64;
  std::size_t speaker_dim = 192;
  std::size_t fusion_hidden = 64;
  std::size_t memory_hidden = 64;
  std::size_t memory_heads = 4;
  std::size_t memory_blocks = 4;
  std::size_t memory_groups = 8;
  std::size_t context_dim = 128;
  std::size_t context_heads = 4;
  std::size_t context_blocks = 2;
  std::size_t context_ffn = 256;
  std::size_t unet_hidden = 128;
  std::size_t unet_levels = 3;
  std::size_t unet_res_blocks = 2;
  std::size_t unet_time_dim = 128;
  std::size_t unet_groups = 8;

  bool operator==(const ModelDims&) const = default;
};

struct RvqSettings {
  std::size_t size = 256;
  std::size_t stages = 1;
  double weight = 0.01;  // lambda in L_cfm + lambda * L_vq
  double decay = 0.99;
  double epsilon = 1e-5;
  double dead_threshold = 1e-3;

  bool operator==(const RvqSettings&) const = default;
};

struct CfmSettings {
  double sigma_min = 1e-4;
  std::size_t steps = 10;
  double guidance = 0.7;
  double drop_prob = 0.2;

  bool operator==(const CfmSettings&) const = default;
};

struct OptimSettings {
  double lr = full_scale::kLearningRate;
  std::size_t batch_size = full_scale::kBatchSize;
  std::size_t steps = 2000;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const OptimSettings&) const = default;
};

struct TrainSettings {
  double crop_seconds = 1.5;
  double ref_min_seconds = 2.0;
  double ref_max_seconds = 4.0;
  /// Periodic checkpoint interval in steps; 0 writes only the final one.
  std::size_t checkpoint_every = 0;
  std::size_t vocoder_iters = 32;

  bool operator==(const TrainSettings&) const = default;
};

struct Seeds {
  std::uint64_t model = 1;
  std::uint64_t data = 2;
  std::uint64_t ssl = 3;
  std::uint64_t speaker = 4;

  bool operator==(const Seeds&) const = default;
};

struct Paths {
  std::string corpus;
  /// Loss log; empty means "<checkpoint>.log".
  std::string log;

  bool operator==(const Paths&) const = default;
};

struct RunConfig {
  dsp::MelConfig mel;
  ModelDims dims;
  RvqSettings rvq;
  CfmSettings cfm;
  OptimSettings optim;
  TrainSettings train;
  Seeds seeds;
  Paths paths;

  /// Throws InputError on non-positive dims, negative lambda and the like.
  void validate() const;
  /// One `key = value` line per field, in a fixed order; doubles are written
  /// with 17 significant digits so parsing restores them exactly.
  std::string to_text() const;
  /// Starts from defaults and applies every key present. Blank lines and
  /// lines starting with '#' are skipped; unknown keys are errors.
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const RunConfig&) const = default;
};

/// Defaults with the full-scale codebook, attention and U-Net sizes.
RunConfig full_scale_config();

}  // namespace flowvc::pipeline
