#pragma once

// RHYM1 checkpoint, all integers little-endian:
//   offset 0   char[4]  "RHYM"
//   offset 4   u32      version (1)
//   offset 8   u32      header length H
//   offset 12  char[H]  UTF-8 JSON header: model config, train config,
//                       protocol, tensor table {name, shape, offset, nbytes}
//   offset 12+H         f64 tensor blobs in header order; offsets are
//                       relative to the start of this region

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rhyme/network.hpp"
#include "rhyme/params.hpp"
#include "rhyme/training.hpp"

namespace rhyme {

inline constexpr char kCheckpointMagic[4] = {'R', 'H', 'Y', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Data selection a model was trained under.
struct Protocol {
  std::string manifest;
  std::optional<std::string> train_corpus;
  std::optional<std::string> test_corpus;
  std::vector<std::string> exclude_generators;

  friend bool operator==(const Protocol &, const Protocol &) = default;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  Protocol protocol;
  ParameterStore params;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

nlohmann::json to_json(const ModelConfig &config);
ModelConfig model_config_from_json(const nlohmann::json &j);
nlohmann::json to_json(const TrainConfig &config);
TrainConfig train_config_from_json(const nlohmann::json &j);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ckpt);
/// Throws FormatError (with byte offset) for bad magic, version, header or
/// truncated/oversized tensor payloads, and when the tensor table does not
/// match the layout implied by the model config.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

nlohmann::json to_json(const TrainLog &log, bool include_time);

} // namespace rhyme
