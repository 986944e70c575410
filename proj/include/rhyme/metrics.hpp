#pragma once

#include <cstddef>
#include <vector>

namespace rhyme::metrics {

/// Detection scores (spoof probability) with labels 0 = bonafide, 1 = spoof.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;

  void add(double score, int label);
  std::size_t size() const noexcept { return scores.size(); }
  std::size_t n_bonafide() const noexcept;
  std::size_t n_spoof() const noexcept;
};

/// Operating point at threshold theta: a score > theta is classified spoof.
///   far = fraction of bonafide with score > theta
///   frr = fraction of spoof with score <= theta
/// The first point of a curve has threshold -infinity (far = 1, frr = 0).
struct RocPoint {
  double threshold;
  double far;
  double frr;

  friend bool operator==(const RocPoint &, const RocPoint &) = default;
};

struct EerResult {
  double eer_percent;
  double threshold;
};

/// One point per distinct score, preceded by the -infinity point.
std::vector<RocPoint> roc_points(const ScoreSet &set);

/// Equal error rate at the far/frr crossing, linearly interpolated between
/// adjacent operating points when they do not cross exactly. When the rates
/// are equal over a plateau the threshold is the plateau midpoint, and a
/// crossing before the lowest score reports that score. Throws
/// InvalidArgument unless both classes are present.
EerResult compute_eer(const ScoreSet &set);

struct ReliabilityBin {
  double lo;
  double hi;
  double mean_confidence;
  double accuracy;
  std::size_t count;

  friend bool operator==(const ReliabilityBin &, const ReliabilityBin &) = default;
};

struct Reliability {
  std::vector<ReliabilityBin> bins;
  double ece;
};

/// Equal-width confidence bins with confidence = max(score, 1 - score) and
/// prediction spoof iff score > 0.5. Empty bins report zero confidence and
/// accuracy. Throws InvalidArgument for an empty set or n_bins == 0.
Reliability reliability(const ScoreSet &set, std::size_t n_bins = 10);

} // namespace rhyme::metrics
