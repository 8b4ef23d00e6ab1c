#pragma once

// Checkpoint container, little-endian:
//
//   "MMDG" | version u32 | n u32 | m u32 | k u32
//   A (m x n) | a (m) | B (k x m) | b (k) | M (k x (m+1)) | N (m x (n+1))
//   iteration u64
//
// Matrices are float64, row-major. The training configuration and the
// dataset scale mode go into a JSON sidecar at `<path>.json`.

#include <cstdint>
#include <optional>
#include <string>

#include "mmdgen/dataset.hpp"
#include "mmdgen/generator.hpp"
#include "mmdgen/trainer.hpp"

namespace mmdgen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  GeneratorParams<double> params;
  GradPower power;
  std::uint64_t iteration = 0;
};

struct CheckpointMetadata {
  TrainConfig config;
  ScaleMode scale = ScaleMode::none;
  std::string data_path;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint,
                     const CheckpointMetadata& metadata);

Checkpoint load_checkpoint(const std::string& path);
// Rejects a checkpoint whose layer widths differ from `expected`.
Checkpoint load_checkpoint(const std::string& path, const NetShape& expected);

std::string sidecar_path(const std::string& checkpoint_path);
std::optional<CheckpointMetadata> load_checkpoint_metadata(const std::string& checkpoint_path);

// JSON text for a configuration, and the inverse. Missing keys keep the
// values already in `base`.
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& json_text, TrainConfig base = {});

}  // namespace mmdgen
