#include "rhyme/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "rhyme/error.hpp"

namespace rhyme {

EmbeddingSequence::EmbeddingSequence(std::size_t frames, std::size_t dim)
    : frames_(frames), dim_(dim), values_(frames * dim, 0.0F) {}

EmbeddingSequence::EmbeddingSequence(std::size_t frames, std::size_t dim, std::vector<float> values)
    : frames_(frames), dim_(dim), values_(std::move(values)) {
  if (values_.size() != frames_ * dim_) {
    throw ShapeError("EmbeddingSequence: value count does not match frames * dim");
  }
}

bool EmbeddingSequence::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

EmbeddingSequence concat_streams(std::span<const EmbeddingSequence> streams) {
  if (streams.empty()) {
    throw ShapeError("concat_streams: no streams");
  }
  const std::size_t frames = streams.front().frames();
  std::size_t dim = 0;
  for (const auto &s : streams) {
    if (s.frames() != frames) {
      throw ShapeError("concat_streams: streams have different frame counts");
    }
    dim += s.dim();
  }
  EmbeddingSequence out(frames, dim);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t offset = 0;
    for (const auto &s : streams) {
      for (std::size_t d = 0; d < s.dim(); ++d) {
        out.at(t, offset + d) = s.at(t, d);
      }
      offset += s.dim();
    }
  }
  return out;
}

} // namespace rhyme
