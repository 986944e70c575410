#include "rhyme/data.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

#include "json.hpp"

#include "byte_io.hpp"
#include "rhyme/error.hpp"

namespace rhyme::data {

using nlohmann::json;

std::string_view to_string(Label l) noexcept { return l == Label::bonafide ? "bonafide" : "spoof"; }

std::string_view to_string(Split s) noexcept {
  switch (s) {
  case Split::train:
    return "train";
  case Split::dev:
    return "dev";
  case Split::test:
    return "test";
  }
  return "train";
}

int class_index(Label l) noexcept { return l == Label::bonafide ? 0 : 1; }

std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence &seq) {
  if (seq.frames() == 0 || seq.dim() == 0) {
    throw InvalidArgument("write_embedding: empty sequence");
  }
  if (!seq.all_finite()) {
    throw InvalidArgument("write_embedding: non-finite values");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderBytes + 4 * seq.values().size());
  out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
  detail::put_le<std::uint32_t>(out, kEmbeddingVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.frames()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.dim()));
  for (float v : seq.values()) {
    detail::put_f32(out, v);
  }
  return out;
}

EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEmbeddingHeaderBytes) {
    throw FormatError("truncated RHYE1 header: need " + std::to_string(kEmbeddingHeaderBytes) + " bytes, found " +
                          std::to_string(bytes.size()),
                      bytes.size());
  }
  if (!std::equal(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic), bytes.begin())) {
    throw FormatError("bad RHYE1 magic", 0);
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kEmbeddingVersion) {
    throw FormatError("unsupported RHYE1 version " + std::to_string(version), 4);
  }
  const auto frames = detail::get_le<std::uint32_t>(bytes, 8);
  const auto dim = detail::get_le<std::uint32_t>(bytes, 12);
  if (frames == 0) {
    throw FormatError("RHYE1 frame count is zero", 8);
  }
  if (dim == 0) {
    throw FormatError("RHYE1 dimension is zero", 12);
  }
  const std::uint64_t count = std::uint64_t{frames} * dim;
  const std::uint64_t payload = bytes.size() - kEmbeddingHeaderBytes;
  if (payload < 4 * count) {
    throw FormatError("truncated RHYE1 payload: expected " + std::to_string(4 * count) + " bytes, found " +
                          std::to_string(payload),
                      bytes.size());
  }
  if (payload > 4 * count) {
    throw FormatError("trailing bytes after RHYE1 payload", kEmbeddingHeaderBytes + 4 * count);
  }
  std::vector<float> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t offset = kEmbeddingHeaderBytes + 4 * i;
    values[i] = detail::get_f32(bytes, offset);
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite RHYE1 value", offset);
    }
  }
  return EmbeddingSequence(frames, dim, std::move(values));
}

void write_embedding(const std::filesystem::path &path, const EmbeddingSequence &seq) {
  detail::write_file(path, encode_embedding(seq));
}

EmbeddingSequence read_embedding(const std::filesystem::path &path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_embedding(bytes);
  } catch (const FormatError &e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

namespace {

std::string required_string(const json &obj, const char *key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ManifestError(std::string("missing field '") + key + "'", line);
  }
  if (!it->is_string() || it->get_ref<const std::string &>().empty()) {
    throw ManifestError(std::string("field '") + key + "' must be a non-empty string", line);
  }
  return it->get<std::string>();
}

std::string optional_string(const json &obj, const char *key, std::string fallback, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    return fallback;
  }
  if (!it->is_string() || it->get_ref<const std::string &>().empty()) {
    throw ManifestError(std::string("field '") + key + "' must be a non-empty string", line);
  }
  return it->get<std::string>();
}

ManifestRecord parse_record(const json &obj, std::size_t line) {
  if (!obj.is_object()) {
    throw ManifestError("expected a JSON object", line);
  }
  ManifestRecord rec;
  rec.id = required_string(obj, "id", line);

  const auto path = obj.find("path");
  if (path == obj.end()) {
    throw ManifestError("missing field 'path'", line);
  }
  if (path->is_string()) {
    rec.paths.push_back(path->get<std::string>());
  } else if (path->is_array() && !path->empty()) {
    for (const auto &p : *path) {
      if (!p.is_string()) {
        throw ManifestError("'path' entries must be strings", line);
      }
      rec.paths.push_back(p.get<std::string>());
    }
  } else {
    throw ManifestError("'path' must be a string or a non-empty array of strings", line);
  }

  const std::string label = required_string(obj, "label", line);
  if (label == "bonafide") {
    rec.label = Label::bonafide;
  } else if (label == "spoof") {
    rec.label = Label::spoof;
  } else {
    throw ManifestError("unknown label '" + label + "' (expected bonafide or spoof)", line);
  }

  const std::string split = required_string(obj, "split", line);
  if (split == "train") {
    rec.split = Split::train;
  } else if (split == "dev") {
    rec.split = Split::dev;
  } else if (split == "test") {
    rec.split = Split::test;
  } else {
    throw ManifestError("unknown split '" + split + "' (expected train, dev or test)", line);
  }

  rec.corpus = optional_string(obj, "corpus", "default", line);
  rec.generator = optional_string(obj, "generator", "none", line);
  return rec;
}

json record_to_json(const ManifestRecord &rec) {
  json obj;
  obj["id"] = rec.id;
  if (rec.paths.size() == 1) {
    obj["path"] = rec.paths.front();
  } else {
    obj["path"] = rec.paths;
  }
  obj["label"] = to_string(rec.label);
  obj["corpus"] = rec.corpus;
  obj["generator"] = rec.generator;
  obj["split"] = to_string(rec.split);
  return obj;
}

} // namespace

std::vector<ManifestRecord> parse_manifest(std::istream &in) {
  std::vector<ManifestRecord> records;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error &e) {
      throw ManifestError(std::string("invalid JSON: ") + e.what(), line);
    }
    ManifestRecord rec = parse_record(obj, line);
    if (!ids.insert(rec.id).second) {
      throw ManifestError("duplicate id '" + rec.id + "'", line);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

Manifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest '" + path.string() + "'");
  }
  Manifest m;
  m.base_dir = path.parent_path();
  m.records = parse_manifest(in);
  return m;
}

void write_manifest(const std::filesystem::path &path, const std::vector<ManifestRecord> &records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open manifest '" + path.string() + "' for writing");
  }
  for (const auto &rec : records) {
    out << record_to_json(rec).dump() << '\n';
  }
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

EmbeddingSequence load_record(const Manifest &manifest, const ManifestRecord &record) {
  std::vector<EmbeddingSequence> streams;
  streams.reserve(record.paths.size());
  for (const auto &p : record.paths) {
    streams.push_back(read_embedding(manifest.base_dir / p));
  }
  if (streams.size() == 1) {
    return std::move(streams.front());
  }
  return concat_streams(streams);
}

ProtocolSelection protocol_select(const std::vector<ManifestRecord> &records,
                                  const std::optional<std::string> &train_corpus,
                                  const std::optional<std::string> &test_corpus,
                                  const std::set<std::string> &exclude_generators) {
  auto matches = [](const std::optional<std::string> &tag, const std::string &corpus) {
    return !tag || *tag == corpus;
  };
  ProtocolSelection sel;
  for (const auto &rec : records) {
    const bool train_side = matches(train_corpus, rec.corpus) && !exclude_generators.contains(rec.generator);
    if (train_side && rec.split == Split::train) {
      sel.train.push_back(rec);
    } else if (train_side && rec.split == Split::dev) {
      sel.dev.push_back(rec);
    }
    if (matches(test_corpus, rec.corpus) && rec.split == Split::test) {
      sel.test.push_back(rec);
    }
  }
  if (sel.train.empty()) {
    throw ConfigError("protocol selects no training records");
  }
  if (test_corpus && sel.test.empty()) {
    throw ConfigError("protocol selects no test records for corpus '" + *test_corpus + "'");
  }
  return sel;
}

std::vector<ManifestRecord> generate_synthetic(const SyntheticSpec &spec, const std::filesystem::path &out_dir) {
  if (spec.n_per_class == 0 || spec.frames == 0 || spec.dim == 0 || !(spec.separation >= 0.0) ||
      !(spec.periodic_period > 0.0)) {
    throw ConfigError("synthetic archive: sizes must be positive and separation non-negative");
  }
  if (spec.periodic_amplitude != 0.0 && spec.dim < 2) {
    throw ConfigError("synthetic archive: periodic cue needs dim >= 2");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "emb", ec);
  if (ec) {
    throw IoError("cannot create '" + (out_dir / "emb").string() + "': " + ec.message());
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = spec.n_per_class;

  // Stratified 80/10/10 assignment from its own stream so frame values do
  // not depend on the split.
  std::mt19937_64 split_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  auto class_splits = [&]() {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
      order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const auto n_dev = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    std::vector<Split> splits(n, Split::test);
    for (std::size_t rank = 0; rank < n; ++rank) {
      splits[order[rank]] = rank < n_train ? Split::train : (rank < n_train + n_dev ? Split::dev : Split::test);
    }
    return splits;
  };
  const std::vector<Split> bona_splits = class_splits();
  const std::vector<Split> spoof_splits = class_splits();

  std::vector<ManifestRecord> records;
  records.reserve(2 * n);
  for (Label label : {Label::bonafide, Label::spoof}) {
    const bool spoof = label == Label::spoof;
    for (std::size_t i = 0; i < n; ++i) {
      EmbeddingSequence seq(spec.frames, spec.dim);
      for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t d = 0; d < spec.dim; ++d) {
          double v = normal(rng);
          if (spoof && d == 0) {
            v += spec.separation;
          }
          if (spoof && d == 1) {
            const double tau = static_cast<double>(t + 1);
            v += spec.periodic_amplitude * std::sin(2.0 * std::numbers::pi * tau / spec.periodic_period);
          }
          seq.at(t, d) = static_cast<float>(v);
        }
      }
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%05zu", spoof ? "spoof" : "bona", i);
      ManifestRecord rec;
      rec.id = id;
      rec.paths = {std::string("emb/") + id + ".rhye"};
      rec.label = label;
      rec.corpus = "SYN";
      rec.generator = spoof ? "synth" : "none";
      rec.split = spoof ? spoof_splits[i] : bona_splits[i];
      write_embedding(out_dir / rec.paths.front(), seq);
      records.push_back(std::move(rec));
    }
  }
  write_manifest(out_dir / "manifest.jsonl", records);
  return records;
}

} // namespace rhyme::data
