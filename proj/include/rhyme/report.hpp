#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rhyme/metrics.hpp"

namespace rhyme {

inline constexpr const char *kReportSchema = "rhyme.eval_report";
inline constexpr int kReportVersion = 1;

struct UtteranceScore {
  std::string id;
  int label = 0;
  std::string generator;
  double score = 0.0;
  double alpha = 0.0;

  friend bool operator==(const UtteranceScore &, const UtteranceScore &) = default;
};

struct ReportMetadata {
  std::string model_id;
  std::string manifest_id;
  std::string timestamp; // empty when timestamps are disabled

  friend bool operator==(const ReportMetadata &, const ReportMetadata &) = default;
};

struct EvalReport {
  double eer_percent = 0.0;
  double eer_threshold = 0.0;
  double ece = 0.0;
  std::size_t n_bonafide = 0;
  std::size_t n_spoof = 0;
  std::vector<metrics::ReliabilityBin> reliability;
  std::vector<metrics::RocPoint> roc;
  /// Spoof generator tag -> EER (%) of that generator against all bonafide.
  std::map<std::string, double> per_generator;
  std::vector<UtteranceScore> utterances;
  ReportMetadata metadata;

  friend bool operator==(const EvalReport &, const EvalReport &) = default;
};

enum class ReportFormat { json, csv };

/// Builds the report from per-utterance scores. per_generator is filled only
/// when by_generator is set.
EvalReport build_report(std::vector<UtteranceScore> utterances, bool by_generator, std::size_t n_bins = 10);

nlohmann::json to_json(const EvalReport &report);
/// Throws FormatError on schema mismatch.
EvalReport report_from_json(const nlohmann::json &j);

/// Header `generator,eer_percent`, one row per generator, then `overall`.
std::string to_csv(const EvalReport &report);

/// Throws IoError when the path is not writable.
void emit_report(const EvalReport &report, const std::filesystem::path &path, ReportFormat format);
EvalReport read_report(const std::filesystem::path &path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

} // namespace rhyme
