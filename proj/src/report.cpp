#include "rhyme/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rhyme/error.hpp"

namespace rhyme {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EvalReport build_report(std::vector<UtteranceScore> utterances, bool by_generator, std::size_t n_bins) {
  metrics::ScoreSet all;
  for (const auto &u : utterances) {
    all.add(u.score, u.label);
  }
  EvalReport r;
  r.n_bonafide = all.n_bonafide();
  r.n_spoof = all.n_spoof();
  const metrics::EerResult eer = metrics::compute_eer(all);
  r.eer_percent = eer.eer_percent;
  r.eer_threshold = eer.threshold;
  const metrics::Reliability rel = metrics::reliability(all, n_bins);
  r.ece = rel.ece;
  r.reliability = rel.bins;
  r.roc = metrics::roc_points(all);

  if (by_generator) {
    std::set<std::string> tags;
    for (const auto &u : utterances) {
      if (u.label == 1) {
        tags.insert(u.generator);
      }
    }
    for (const auto &tag : tags) {
      metrics::ScoreSet subset;
      for (const auto &u : utterances) {
        if (u.label == 0 || u.generator == tag) {
          subset.add(u.score, u.label);
        }
      }
      if (subset.n_bonafide() > 0) {
        r.per_generator[tag] = metrics::compute_eer(subset).eer_percent;
      }
    }
  }
  r.utterances = std::move(utterances);
  return r;
}

namespace {

json threshold_to_json(double t) { return std::isinf(t) ? json(nullptr) : json(t); }
double threshold_from_json(const json &j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

} // namespace

json to_json(const EvalReport &r) {
  json j;
  j["schema"] = kReportSchema;
  j["version"] = kReportVersion;
  j["eer_percent"] = r.eer_percent;
  j["eer_threshold"] = r.eer_threshold;
  j["ece"] = r.ece;
  j["n_bonafide"] = r.n_bonafide;
  j["n_spoof"] = r.n_spoof;
  j["tie_convention"] = "score > threshold is classified spoof";
  j["reliability"] = json::array();
  for (const auto &b : r.reliability) {
    j["reliability"].push_back(
        {{"lo", b.lo}, {"hi", b.hi}, {"mean_confidence", b.mean_confidence}, {"accuracy", b.accuracy}, {"count", b.count}});
  }
  j["roc"] = json::array();
  for (const auto &p : r.roc) {
    j["roc"].push_back({{"threshold", threshold_to_json(p.threshold)}, {"far", p.far}, {"frr", p.frr}});
  }
  j["per_generator"] = json::object();
  for (const auto &[tag, eer] : r.per_generator) {
    j["per_generator"][tag] = eer;
  }
  j["utterances"] = json::array();
  for (const auto &u : r.utterances) {
    j["utterances"].push_back({{"id", u.id},
                               {"label", u.label},
                               {"generator", u.generator},
                               {"score", u.score},
                               {"alpha", u.alpha}});
  }
  j["metadata"] = {{"model_id", r.metadata.model_id},
                   {"manifest_id", r.metadata.manifest_id},
                   {"timestamp", r.metadata.timestamp.empty() ? json(nullptr) : json(r.metadata.timestamp)}};
  return j;
}

EvalReport report_from_json(const json &j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema || j.at("version").get<int>() != kReportVersion) {
      throw FormatError("unsupported report schema", 0);
    }
    EvalReport r;
    r.eer_percent = j.at("eer_percent").get<double>();
    r.eer_threshold = j.at("eer_threshold").get<double>();
    r.ece = j.at("ece").get<double>();
    r.n_bonafide = j.at("n_bonafide").get<std::size_t>();
    r.n_spoof = j.at("n_spoof").get<std::size_t>();
    for (const auto &b : j.at("reliability")) {
      r.reliability.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(),
                               b.at("mean_confidence").get<double>(), b.at("accuracy").get<double>(),
                               b.at("count").get<std::size_t>()});
    }
    for (const auto &p : j.at("roc")) {
      r.roc.push_back({threshold_from_json(p.at("threshold")), p.at("far").get<double>(), p.at("frr").get<double>()});
    }
    for (const auto &[tag, eer] : j.at("per_generator").items()) {
      r.per_generator[tag] = eer.get<double>();
    }
    for (const auto &u : j.at("utterances")) {
      r.utterances.push_back({u.at("id").get<std::string>(), u.at("label").get<int>(),
                              u.at("generator").get<std::string>(), u.at("score").get<double>(),
                              u.at("alpha").get<double>()});
    }
    const auto &meta = j.at("metadata");
    r.metadata.model_id = meta.at("model_id").get<std::string>();
    r.metadata.manifest_id = meta.at("manifest_id").get<std::string>();
    r.metadata.timestamp = meta.at("timestamp").is_null() ? "" : meta.at("timestamp").get<std::string>();
    return r;
  } catch (const json::exception &e) {
    throw FormatError(std::string("malformed report: ") + e.what(), 0);
  }
}

std::string to_csv(const EvalReport &r) {
  std::ostringstream out;
  out << "generator,eer_percent\n";
  for (const auto &[tag, eer] : r.per_generator) {
    out << tag << ',' << format_double(eer) << '\n';
  }
  out << "overall," << format_double(r.eer_percent) << '\n';
  return out.str();
}

void emit_report(const EvalReport &report, const std::filesystem::path &path, ReportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  if (format == ReportFormat::json) {
    out << to_json(report).dump(2) << '\n';
  } else {
    out << to_csv(report);
  }
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

EvalReport read_report(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what(), e.byte);
  }
  return report_from_json(j);
}

} // namespace rhyme
