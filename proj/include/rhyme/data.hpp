#pragma once

// Embedding archives (RHYE1 files + JSON-lines manifests), cross-corpus
// protocol selection and the synthetic archive generator.
//
// RHYE1 layout, all little-endian:
//   offset 0   char[4]  "RHYE"
//   offset 4   u32      version (1)
//   offset 8   u32      T (frames)
//   offset 12  u32      D (dimension)
//   offset 16  f32[T*D] frame-major values

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rhyme/embedding.hpp"

namespace rhyme::data {

inline constexpr char kEmbeddingMagic[4] = {'R', 'H', 'Y', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

enum class Label { bonafide, spoof };
enum class Split { train, dev, test };

std::string_view to_string(Label l) noexcept;
std::string_view to_string(Split s) noexcept;
int class_index(Label l) noexcept;

struct ManifestRecord {
  std::string id;
  /// Relative to the manifest directory. Several paths are concatenated
  /// along the feature axis (one stream per encoder).
  std::vector<std::string> paths;
  Label label = Label::bonafide;
  std::string corpus = "default";
  std::string generator = "none";
  Split split = Split::train;

  friend bool operator==(const ManifestRecord &, const ManifestRecord &) = default;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;
};

void write_embedding(const std::filesystem::path &path, const EmbeddingSequence &seq);
/// Throws FormatError (with byte offset) on bad magic, version, truncation or
/// non-finite payload; IoError when the file cannot be opened.
EmbeddingSequence read_embedding(const std::filesystem::path &path);
std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence &seq);
EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes);

/// Throws ManifestError naming the offending line.
std::vector<ManifestRecord> parse_manifest(std::istream &in);
Manifest load_manifest(const std::filesystem::path &path);
void write_manifest(const std::filesystem::path &path, const std::vector<ManifestRecord> &records);

/// Reads (and concatenates) the embedding streams of one record.
EmbeddingSequence load_record(const Manifest &manifest, const ManifestRecord &record);

struct ProtocolSelection {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> dev;
  std::vector<ManifestRecord> test;
};

/// train: corpus == train_corpus, split == train, generator not excluded.
/// dev:   same filter with split == dev.
/// test:  corpus == test_corpus, split == test.
/// An absent corpus tag matches every corpus. Throws ConfigError when the
/// training selection is empty, or when an explicit test corpus selects
/// nothing.
ProtocolSelection protocol_select(const std::vector<ManifestRecord> &records,
                                  const std::optional<std::string> &train_corpus,
                                  const std::optional<std::string> &test_corpus,
                                  const std::set<std::string> &exclude_generators);

struct SyntheticSpec {
  std::size_t n_per_class = 1000;
  std::size_t frames = 50;
  std::size_t dim = 64;
  double separation = 2.0;
  /// Amplitude of the periodic cue added to coordinate 2 of spoof frames.
  double periodic_amplitude = 0.5;
  double periodic_period = 8.0;
  std::uint64_t seed = 7;
};

/// Writes out_dir/manifest.jsonl and one RHYE1 file per utterance under
/// out_dir/emb. Returns the manifest records.
std::vector<ManifestRecord> generate_synthetic(const SyntheticSpec &spec, const std::filesystem::path &out_dir);

} // namespace rhyme::data
