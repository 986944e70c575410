#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rhyme/error.hpp"
#include "rhyme/metrics.hpp"
#include "rhyme/report.hpp"
#include "support.hpp"

using namespace rhyme;
using namespace rhyme::metrics;

namespace {

ScoreSet make(const std::vector<double> &bona, const std::vector<double> &spoof) {
  ScoreSet s;
  for (double v : bona) {
    s.add(v, 0);
  }
  for (double v : spoof) {
    s.add(v, 1);
  }
  return s;
}

} // namespace

TEST_CASE("EER examples") {
  const EerResult r = compute_eer(make({0.1, 0.2, 0.4}, {0.3, 0.6, 0.9}));
  CHECK(r.eer_percent == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  CHECK(r.threshold > 0.3);
  CHECK(r.threshold < 0.4);

  CHECK(compute_eer(make({0.1, 0.2, 0.3}, {0.5, 0.7})).eer_percent == 0.0);
  CHECK(compute_eer(make({0.9}, {0.1})).eer_percent == 100.0);

  CHECK_THROWS_AS(compute_eer(make({0.1, 0.2}, {})), InvalidArgument);
  CHECK_THROWS_AS(compute_eer(make({}, {0.1})), InvalidArgument);
}

TEST_CASE("ROC points follow the tie convention") {
  const auto pts = roc_points(make({0.2, 0.5}, {0.5, 0.8}));
  REQUIRE(pts.size() == 4);
  CHECK(std::isinf(pts[0].threshold));
  CHECK(pts[0].far == 1.0);
  CHECK(pts[0].frr == 0.0);
  // at theta = 0.5 the tied scores count as accepted
  CHECK(pts[2].threshold == 0.5);
  CHECK(pts[2].far == 0.0);
  CHECK(pts[2].frr == 0.5);
  CHECK(pts.back().far == 0.0);
  CHECK(pts.back().frr == 1.0);
}

TEST_CASE("EER equals the exhaustive sweep") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(2, 500);
  for (int trial = 0; trial < 1000; ++trial) {
    const ScoreSet s = oracle::random_score_set(rng, size(rng));
    const EerResult fast = compute_eer(s);
    const oracle::EerPoint slow = oracle::brute_force_eer(s.scores, s.labels);
    CAPTURE(trial);
    CHECK(std::abs(fast.eer_percent - slow.eer_percent) <= 1e-12);
    CHECK(std::abs(fast.threshold - slow.threshold) <= 1e-12);
  }
}

TEST_CASE("EER is a rank statistic") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreSet s = oracle::random_score_set(rng, 2 + rng() % 200);
    ScoreSet warped = s;
    for (double &v : warped.scores) {
      v = std::exp(3.0 * v) - 7.0;
    }
    CHECK(std::abs(compute_eer(s).eer_percent - compute_eer(warped).eer_percent) <= 1e-9);
  }
}

TEST_CASE("EER symmetry under flipping scores and labels") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreSet s = oracle::random_score_set(rng, 2 + rng() % 200);
    ScoreSet flipped;
    for (std::size_t i = 0; i < s.size(); ++i) {
      flipped.add(1.0 - s.scores[i], 1 - s.labels[i]);
    }
    CHECK(std::abs(compute_eer(s).eer_percent - compute_eer(flipped).eer_percent) <= 1e-9);
  }
}

TEST_CASE("reliability examples") {
  SUBCASE("confidence 0.7 with 70 percent correct is calibrated") {
    ScoreSet s;
    for (int i = 0; i < 100; ++i) {
      s.add(0.7, i < 70 ? 1 : 0);
    }
    const Reliability r = reliability(s, 10);
    CHECK(std::abs(r.ece) <= 1e-12);
  }
  SUBCASE("one bin, confidence 0.9, accuracy 0.5") {
    ScoreSet s;
    s.add(0.9, 1);
    s.add(0.1, 1);
    const Reliability r = reliability(s, 1);
    REQUIRE(r.bins.size() == 1);
    CHECK(r.bins[0].mean_confidence == doctest::Approx(0.9));
    CHECK(r.bins[0].accuracy == 0.5);
    CHECK(r.ece == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(reliability(ScoreSet{}, 10), InvalidArgument);
    CHECK_THROWS_AS(reliability(make({0.2}, {}), 0), InvalidArgument);
  }
}

TEST_CASE("reliability bins partition the unit interval") {
  std::mt19937_64 rng(7);
  for (std::size_t bins : {1u, 3u, 10u, 17u}) {
    const ScoreSet s = oracle::random_score_set(rng, 300);
    const Reliability r = reliability(s, bins);
    REQUIRE(r.bins.size() == bins);
    CHECK(r.bins.front().lo == 0.0);
    CHECK(r.bins.back().hi == 1.0);
    std::size_t total = 0;
    for (std::size_t b = 0; b < bins; ++b) {
      total += r.bins[b].count;
      if (b > 0) {
        CHECK(r.bins[b].lo == r.bins[b - 1].hi);
      }
    }
    CHECK(total == s.size());
    CHECK(r.ece >= 0.0);
    CHECK(r.ece <= 1.0);
  }
}

TEST_CASE("ECE vanishes when every bin is calibrated") {
  // each bin holds confidence p with round(p * n) correct predictions
  ScoreSet s;
  for (int k = 0; k < 10; ++k) {
    const double conf = 0.5 + 0.05 * k + 0.025;
    const int n = 40;
    const int correct = static_cast<int>(std::lround(conf * n));
    const double exact_conf = static_cast<double>(correct) / n;
    for (int i = 0; i < n; ++i) {
      s.add(exact_conf, i < correct ? 1 : 0);
    }
  }
  CHECK(reliability(s, 10).ece <= 1e-12);
}

TEST_CASE("report JSON round trip is exact") {
  std::vector<UtteranceScore> u;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    const std::string gen = label == 0 ? "none" : (i % 4 == 1 ? "D1" : "F2");
    u.push_back({"utt" + std::to_string(i), label, gen, d(rng), d(rng)});
  }
  EvalReport r = build_report(u, true, 10);
  r.metadata = {"rhym1:abc", "jsonl:def", "2026-01-01T00:00:00Z"};
  CHECK(r.per_generator.size() == 2);
  CHECK(r.n_bonafide == 20);
  CHECK(r.n_spoof == 20);
  CHECK(r.roc.size() >= 2);

  CHECK(report_from_json(to_json(r)) == r);
  CHECK(report_from_json(nlohmann::json::parse(to_json(r).dump())) == r);

  test::TempDir dir("report");
  emit_report(r, dir / "r.json", ReportFormat::json);
  CHECK(read_report(dir / "r.json") == r);

  r.metadata.timestamp.clear();
  CHECK(to_json(r)["metadata"]["timestamp"].is_null());
  CHECK(report_from_json(to_json(r)) == r);
}

TEST_CASE("report CSV") {
  EvalReport r;
  r.eer_percent = 3.5;
  r.per_generator = {{"D1", 14.14}};
  CHECK(to_csv(r) == "generator,eer_percent\nD1,14.14\noverall,3.5\n");
  r.per_generator.clear();
  CHECK(to_csv(r) == "generator,eer_percent\noverall,3.5\n");

  test::TempDir dir("csv");
  emit_report(r, dir / "r.csv", ReportFormat::csv);
  const auto bytes = test::slurp(dir / "r.csv");
  CHECK(std::string(bytes.begin(), bytes.end()) == to_csv(r));
  CHECK_THROWS_AS(emit_report(r, dir / "missing-dir/r.csv", ReportFormat::csv), IoError);
}

TEST_CASE("per-generator EER pits each generator against all bonafide") {
  std::vector<UtteranceScore> u = {
      {"b1", 0, "none", 0.1, 0.5}, {"b2", 0, "none", 0.2, 0.5}, {"s1", 1, "A", 0.9, 0.5},
      {"s2", 1, "A", 0.8, 0.5},    {"s3", 1, "B", 0.02, 0.5},   {"s4", 1, "B", 0.01, 0.5},
  };
  const EvalReport r = build_report(u, true, 10);
  CHECK(r.per_generator.at("A") == 0.0);
  CHECK(r.per_generator.at("B") == 100.0);
  CHECK(build_report(u, false, 10).per_generator.empty());
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 14.14, 1e-300, 123456789.0, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(14.14) == "14.14");
}
