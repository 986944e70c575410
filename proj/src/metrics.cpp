#include "rhyme/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "rhyme/error.hpp"

namespace rhyme::metrics {

void ScoreSet::add(double score, int label) {
  scores.push_back(score);
  labels.push_back(label);
}

std::size_t ScoreSet::n_bonafide() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 0));
}

std::size_t ScoreSet::n_spoof() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

namespace {

void validate(const ScoreSet &set) {
  if (set.scores.size() != set.labels.size()) {
    throw InvalidArgument("score set: scores and labels differ in length");
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!std::isfinite(set.scores[i])) {
      throw InvalidArgument("score set: non-finite score");
    }
    if (set.labels[i] != 0 && set.labels[i] != 1) {
      throw InvalidArgument("score set: labels must be 0 or 1");
    }
  }
}

// Cumulative counts at every distinct score, ascending.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> bona_at_or_below;
  std::vector<std::size_t> spoof_at_or_below;
  std::size_t n_bona = 0;
  std::size_t n_spoof = 0;
};

Sweep sweep(const ScoreSet &set) {
  validate(set);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  Sweep s;
  s.n_bona = set.n_bonafide();
  s.n_spoof = set.n_spoof();
  std::size_t bona = 0;
  std::size_t spoof = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    (set.labels[i] == 0 ? bona : spoof) += 1;
    const bool last_of_value = k + 1 == order.size() || set.scores[order[k + 1]] != set.scores[i];
    if (last_of_value) {
      s.thresholds.push_back(set.scores[i]);
      s.bona_at_or_below.push_back(bona);
      s.spoof_at_or_below.push_back(spoof);
    }
  }
  return s;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

std::vector<RocPoint> roc_points(const ScoreSet &set) {
  const Sweep s = sweep(set);
  std::vector<RocPoint> points;
  points.reserve(s.thresholds.size() + 1);
  points.push_back({-std::numeric_limits<double>::infinity(), s.n_bona > 0 ? 1.0 : 0.0, 0.0});
  for (std::size_t j = 0; j < s.thresholds.size(); ++j) {
    points.push_back({s.thresholds[j], ratio(s.n_bona - s.bona_at_or_below[j], s.n_bona),
                      ratio(s.spoof_at_or_below[j], s.n_spoof)});
  }
  return points;
}

EerResult compute_eer(const ScoreSet &set) {
  const Sweep s = sweep(set);
  if (s.n_bona == 0 || s.n_spoof == 0) {
    throw InvalidArgument("compute_eer: both classes must be present");
  }
  const auto nb = static_cast<std::int64_t>(s.n_bona);
  const auto ns = static_cast<std::int64_t>(s.n_spoof);
  // sign of far - frr, exact in integers
  auto gap_sign = [&](std::size_t j) {
    const auto accepted = static_cast<std::int64_t>(s.bona_at_or_below[j]);
    const auto missed = static_cast<std::int64_t>(s.spoof_at_or_below[j]);
    const std::int64_t diff = (nb - accepted) * ns - missed * nb;
    return (diff > 0) - (diff < 0);
  };
  auto far = [&](std::size_t j) { return ratio(s.n_bona - s.bona_at_or_below[j], s.n_bona); };
  auto frr = [&](std::size_t j) { return ratio(s.spoof_at_or_below[j], s.n_spoof); };

  // At the last threshold far = 0 and frr = 1, so a crossing always exists.
  std::size_t j = 0;
  while (gap_sign(j) > 0) {
    ++j;
  }
  if (gap_sign(j) == 0) {
    const double theta =
        j + 1 < s.thresholds.size() ? 0.5 * (s.thresholds[j] + s.thresholds[j + 1]) : s.thresholds[j];
    return {100.0 * far(j), theta};
  }
  const double far_prev = j == 0 ? 1.0 : far(j - 1);
  const double frr_prev = j == 0 ? 0.0 : frr(j - 1);
  const double theta_prev = j == 0 ? s.thresholds[0] : s.thresholds[j - 1];
  const double d_prev = far_prev - frr_prev;
  const double d_next = far(j) - frr(j);
  const double lambda = d_prev / (d_prev - d_next);
  // no finite interval to interpolate over before the lowest score
  const double theta = j == 0 ? s.thresholds[0] : theta_prev + lambda * (s.thresholds[j] - theta_prev);
  return {100.0 * (far_prev + lambda * (far(j) - far_prev)), theta};
}

Reliability reliability(const ScoreSet &set, std::size_t n_bins) {
  validate(set);
  if (set.size() == 0) {
    throw InvalidArgument("reliability: empty score set");
  }
  if (n_bins == 0) {
    throw InvalidArgument("reliability: n_bins must be positive");
  }
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<std::size_t> correct(n_bins, 0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double s = set.scores[i];
    const double confidence = std::max(s, 1.0 - s);
    const int predicted = s > 0.5 ? 1 : 0;
    const auto bin = std::min(static_cast<std::size_t>(confidence * static_cast<double>(n_bins)), n_bins - 1);
    conf_sum[bin] += confidence;
    correct[bin] += predicted == set.labels[i] ? 1 : 0;
    count[bin] += 1;
  }
  Reliability out;
  out.ece = 0.0;
  const double total = static_cast<double>(set.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    ReliabilityBin bin{static_cast<double>(b) / static_cast<double>(n_bins),
                       static_cast<double>(b + 1) / static_cast<double>(n_bins), 0.0, 0.0, count[b]};
    if (count[b] > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
      bin.accuracy = static_cast<double>(correct[b]) / static_cast<double>(count[b]);
      out.ece += static_cast<double>(count[b]) / total * std::abs(bin.accuracy - bin.mean_confidence);
    }
    out.bins.push_back(bin);
  }
  return out;
}

} // namespace rhyme::metrics
