#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rhyme {

/// Frame-level embeddings of one utterance: T frames of dimension D, stored
/// frame-major as 32-bit floats.
class EmbeddingSequence {
public:
  EmbeddingSequence() = default;
  EmbeddingSequence(std::size_t frames, std::size_t dim);
  EmbeddingSequence(std::size_t frames, std::size_t dim, std::vector<float> values);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t dim() const noexcept { return dim_; }

  float &at(std::size_t t, std::size_t d) noexcept { return values_[t * dim_ + d]; }
  float at(std::size_t t, std::size_t d) const noexcept { return values_[t * dim_ + d]; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const EmbeddingSequence &, const EmbeddingSequence &) = default;

private:
  std::size_t frames_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// Concatenates per-frame features of several streams of the same utterance
/// along the feature axis. All streams must have the same frame count.
EmbeddingSequence concat_streams(std::span<const EmbeddingSequence> streams);

} // namespace rhyme
