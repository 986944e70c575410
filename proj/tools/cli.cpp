#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "rhyme/checkpoint.hpp"
#include "rhyme/data.hpp"
#include "rhyme/error.hpp"
#include "rhyme/metrics.hpp"
#include "rhyme/report.hpp"
#include "rhyme/training.hpp"

namespace rhyme::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::uint64_t seed = 7;
  bool quiet = false;
};

struct GenSynthOptions {
  std::string out;
  std::size_t n_per_class = 1000;
  std::size_t frames = 50;
  std::size_t dim = 64;
  double sep = 2.0;
  bool no_periodic = false;
};

struct TrainOptions {
  std::string manifest;
  std::optional<std::string> train_corpus;
  std::optional<std::string> test_corpus;
  std::vector<std::string> exclude_generators;
  std::string ablation = "full";
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t patience = 5;
  std::size_t folds = 0;
  std::string out;
  bool no_timestamp = false;
  ModelConfig model;
};

struct EvalOptions {
  std::string model;
  std::string manifest;
  bool by_generator = false;
  std::string report;
  std::string csv;
  std::size_t bins = 10;
  bool no_timestamp = false;
};

struct GradcheckOptions {
  std::size_t dim = 8;
  std::string ablation;
};

std::string fnv1a_hex(const std::vector<std::uint8_t> &bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::vector<std::uint8_t> file_bytes(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + p.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<Example> load_examples(const data::Manifest &manifest, const std::vector<data::ManifestRecord> &records,
                                   std::optional<std::size_t> expected_dim) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto &rec : records) {
    Example ex{data::load_record(manifest, rec), data::class_index(rec.label)};
    if (!expected_dim) {
      expected_dim = ex.sequence.dim();
    }
    if (ex.sequence.dim() != *expected_dim) {
      throw ShapeError("record '" + rec.id + "' has dimension " + std::to_string(ex.sequence.dim()) +
                       ", expected " + std::to_string(*expected_dim));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void write_json(const fs::path &path, const json &j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << j.dump(2) << '\n';
}

int cmd_gen_synth(const GenSynthOptions &o, const GlobalOptions &g, std::ostream &out) {
  data::SyntheticSpec spec;
  spec.n_per_class = o.n_per_class;
  spec.frames = o.frames;
  spec.dim = o.dim;
  spec.separation = o.sep;
  spec.seed = g.seed;
  if (o.no_periodic) {
    spec.periodic_amplitude = 0.0;
  }
  data::generate_synthetic(spec, o.out);
  out << (fs::path(o.out) / "manifest.jsonl").string() << '\n';
  return kOk;
}

int cmd_train(TrainOptions o, const GlobalOptions &g, std::ostream &out) {
  const data::Manifest manifest = data::load_manifest(o.manifest);
  const std::set<std::string> excluded(o.exclude_generators.begin(), o.exclude_generators.end());
  const data::ProtocolSelection sel = data::protocol_select(manifest.records, o.train_corpus, o.test_corpus, excluded);

  std::vector<Example> train_set = load_examples(manifest, sel.train, std::nullopt);
  const std::size_t dim = train_set.front().sequence.dim();
  std::vector<Example> dev_set = load_examples(manifest, sel.dev, dim);

  ModelConfig model = o.model;
  model.input_dim = dim;
  model.ablation = parse_ablation(o.ablation);
  model.validate();

  TrainConfig tc;
  tc.lr = o.lr;
  tc.batch_size = o.batch;
  tc.epochs = o.epochs;
  tc.patience = o.patience;
  tc.seed = g.seed;
  tc.threads = threads_from_env();
  tc.record_time = !o.no_timestamp;
  if (o.folds > 0) {
    tc.folds = o.folds;
  }
  tc.validate();

  json log_json;
  if (o.folds > 0) {
    // Cross-validation over the pooled train+dev records of the protocol.
    std::vector<Example> pool = train_set;
    pool.insert(pool.end(), dev_set.begin(), dev_set.end());
    std::vector<int> labels;
    for (const auto &ex : pool) {
      labels.push_back(ex.label);
    }
    json folds = json::array();
    double eer_sum = 0.0;
    for (const FoldSplit &fold : kfold_split(labels, o.folds, g.seed)) {
      std::vector<Example> fit;
      std::vector<Example> held;
      for (std::size_t i : fold.train) {
        fit.push_back(pool[i]);
      }
      for (std::size_t i : fold.val) {
        held.push_back(pool[i]);
      }
      const TrainResult r = train(fit, {}, tc, model);
      const EvalOutput ev = evaluate(held, r.params, model, tc.threads);
      metrics::ScoreSet scores;
      for (std::size_t i = 0; i < held.size(); ++i) {
        scores.add(ev.scores[i], held[i].label);
      }
      const double eer = metrics::compute_eer(scores).eer_percent;
      eer_sum += eer;
      folds.push_back({{"eer_percent", eer}, {"epochs", r.log.epochs.size()}});
      if (!g.quiet) {
        out << "fold " << folds.size() << ": EER " << eer << "%\n";
      }
    }
    log_json["cross_validation"] = {{"folds", std::move(folds)},
                                    {"mean_eer_percent", eer_sum / static_cast<double>(o.folds)}};
  }

  const TrainResult result = train(train_set, dev_set, tc, model);

  Checkpoint ckpt;
  ckpt.model = model;
  ckpt.train = tc;
  ckpt.protocol.manifest = fs::path(o.manifest).filename().string();
  ckpt.protocol.train_corpus = o.train_corpus;
  ckpt.protocol.test_corpus = o.test_corpus;
  ckpt.protocol.exclude_generators.assign(excluded.begin(), excluded.end());
  ckpt.params = result.params;
  save_checkpoint(o.out, ckpt);

  log_json["training"] = to_json(result.log, !o.no_timestamp);
  log_json["ablation"] = std::string(to_string(model.ablation));
  if (!model.gated()) {
    log_json["fixed_alpha"] = 0.5;
  }
  write_json(o.out + ".log.json", log_json);

  if (!g.quiet) {
    const auto &epochs = result.log.epochs;
    out << "trained " << epochs.size() << " epoch(s) on " << result.log.train_size << " utterances";
    if (!epochs.empty() && std::isfinite(epochs[result.log.best_epoch - 1].val_eer)) {
      out << ", best epoch " << result.log.best_epoch << " val EER " << epochs[result.log.best_epoch - 1].val_eer
          << "%";
    }
    out << "\ncheckpoint: " << o.out << '\n';
  }
  return kOk;
}

int cmd_eval(const EvalOptions &o, const GlobalOptions &g, std::ostream &out) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const data::Manifest manifest = data::load_manifest(o.manifest);

  std::vector<data::ManifestRecord> records;
  for (const auto &rec : manifest.records) {
    if (rec.split == data::Split::test && (!ckpt.protocol.test_corpus || *ckpt.protocol.test_corpus == rec.corpus)) {
      records.push_back(rec);
    }
  }
  if (records.empty()) {
    throw ConfigError("manifest has no test records for this model's protocol");
  }
  const std::vector<Example> set = load_examples(manifest, records, ckpt.model.input_dim);
  const EvalOutput ev = evaluate(set, ckpt.params, ckpt.model, threads_from_env());

  std::vector<UtteranceScore> scored;
  scored.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    scored.push_back({records[i].id, set[i].label, records[i].generator, ev.scores[i], ev.alphas[i]});
  }
  EvalReport report = build_report(std::move(scored), o.by_generator, o.bins);
  report.metadata.model_id = "rhym1:" + fnv1a_hex(file_bytes(o.model));
  report.metadata.manifest_id = "jsonl:" + fnv1a_hex(file_bytes(o.manifest));
  if (!o.no_timestamp) {
    report.metadata.timestamp = utc_timestamp();
  }
  emit_report(report, o.report, ReportFormat::json);
  if (!o.csv.empty()) {
    emit_report(report, o.csv, ReportFormat::csv);
  }
  if (!g.quiet) {
    out << "EER " << report.eer_percent << "% at threshold " << report.eer_threshold << ", ECE " << report.ece
        << " (" << report.n_bonafide << " bonafide, " << report.n_spoof << " spoof)\n";
    for (const auto &[tag, eer] : report.per_generator) {
      out << "  " << tag << ": " << eer << "%\n";
    }
  }
  return kOk;
}

int cmd_gradcheck(const GradcheckOptions &o, const GlobalOptions &g, std::ostream &out, const Hooks &hooks) {
  std::vector<Ablation> modes(kAllAblations.begin(), kAllAblations.end());
  if (!o.ablation.empty()) {
    modes = {parse_ablation(o.ablation)};
  }
  GradCheckOptions opts;
  opts.corrupt = hooks.corrupt_gradients;
  constexpr double kTolerance = 1e-4;
  bool ok = true;
  for (Ablation mode : modes) {
    const GradCheckReport report = grad_check(gradcheck_model(o.dim, mode), g.seed, opts);
    for (const auto &group : report.groups) {
      const bool pass = group.max_rel_error < kTolerance;
      ok = ok && pass;
      if (!g.quiet || !pass) {
        out << to_string(mode) << ' ' << group.name << " n=" << group.count << " max_rel_err=" << std::scientific
            << std::setprecision(3) << group.max_rel_error << std::defaultfloat << (pass ? " ok" : " FAIL") << '\n';
      }
    }
  }
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
  return ok ? kOk : kNumericError;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, const Hooks &hooks) {
  CLI::App app{"Geometry-aware spoofed-speech detector over pre-extracted embeddings", "rhyme"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
  app.add_flag("--quiet", global.quiet, "Suppress progress output");

  GenSynthOptions gen;
  CLI::App *gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic embedding archive");
  gen_cmd->fallthrough();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n-per-class", gen.n_per_class, "Utterances per class")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Frames per utterance")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Embedding dimension")->capture_default_str();
  gen_cmd->add_option("--sep", gen.sep, "Class mean separation")->capture_default_str();
  gen_cmd->add_flag("--no-periodic", gen.no_periodic, "Omit the periodic cue on spoof frames");

  TrainOptions tr;
  CLI::App *train_cmd = app.add_subcommand("train", "Train a detector from a manifest");
  train_cmd->fallthrough();
  train_cmd->add_option("--train-manifest", tr.manifest, "JSON-lines manifest")->required();
  train_cmd->add_option("--train-corpus", tr.train_corpus, "Corpus tag used for training");
  train_cmd->add_option("--test-corpus", tr.test_corpus, "Corpus tag used for testing");
  train_cmd->add_option("--exclude-generators", tr.exclude_generators, "Comma-separated generator tags")
      ->delimiter(',');
  train_cmd->add_option("--ablation", tr.ablation, "full|no_gating|no_spherical|no_hyperbolic|euclidean_fusion")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--batch", tr.batch)->capture_default_str();
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience in epochs")->capture_default_str();
  train_cmd->add_option("--folds", tr.folds, "Run k-fold cross-validation first (0 = off)")->capture_default_str();
  train_cmd->add_option("--channels", tr.model.conv_channels)->capture_default_str();
  train_cmd->add_option("--conv-layers", tr.model.conv_layers)->capture_default_str();
  train_cmd->add_option("--kernel", tr.model.kernel_size)->capture_default_str();
  train_cmd->add_option("--utt-dim", tr.model.utterance_dim)->capture_default_str();
  train_cmd->add_option("--dropout", tr.model.dropout)->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_flag("--no-timestamp", tr.no_timestamp, "Omit wall-clock times from the log");

  EvalOptions ev;
  CLI::App *eval_cmd = app.add_subcommand("eval", "Score the test split and write a report");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--model", ev.model, "Checkpoint path")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "JSON-lines manifest")->required();
  eval_cmd->add_flag("--by-generator", ev.by_generator, "Per-generator EER");
  eval_cmd->add_option("--report", ev.report, "Report JSON path")->required();
  eval_cmd->add_option("--csv", ev.csv, "Also write the per-generator CSV here");
  eval_cmd->add_option("--bins", ev.bins, "Reliability bins")->capture_default_str();
  eval_cmd->add_flag("--no-timestamp", ev.no_timestamp, "Omit the report timestamp");

  GradcheckOptions gc;
  CLI::App *grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad_cmd->fallthrough();
  grad_cmd->add_option("--dim", gc.dim, "Input dimension")->capture_default_str();
  grad_cmd->add_option("--ablation", gc.ablation, "Restrict to one ablation mode (default: all)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App *failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      return cmd_gen_synth(gen, global, out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr, global, out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ev, global, out);
    }
    return cmd_gradcheck(gc, global, out, hooks);
  } catch (const NumericError &e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

} // namespace rhyme::cli
