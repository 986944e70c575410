#include "doctest.h"

#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rhyme/data.hpp"
#include "rhyme/error.hpp"
#include "support.hpp"

using namespace rhyme;
using namespace rhyme::data;
using rhyme::test::TempDir;

namespace {

template <typename Fn> std::size_t format_offset(Fn &&fn) {
  try {
    fn();
  } catch (const FormatError &e) {
    return e.offset();
  }
  FAIL("expected a format error");
  return 0;
}

template <typename Fn> std::size_t manifest_line(Fn &&fn) {
  try {
    fn();
  } catch (const ManifestError &e) {
    return e.line();
  }
  FAIL("expected a manifest error");
  return 0;
}

std::vector<ManifestRecord> parse(const std::string &text) {
  std::istringstream in(text);
  return parse_manifest(in);
}

ManifestRecord rec(std::string id, Label label, std::string corpus, std::string generator, Split split) {
  ManifestRecord r;
  r.id = std::move(id);
  r.paths = {r.id + ".rhye"};
  r.label = label;
  r.corpus = std::move(corpus);
  r.generator = std::move(generator);
  r.split = split;
  return r;
}

} // namespace

TEST_CASE("RHYE1 round trip is bit exact") {
  const EmbeddingSequence s = oracle::random_sequence(3, 4, 1);
  TempDir dir("rhye");
  write_embedding(dir / "a.rhye", s);
  const EmbeddingSequence back = read_embedding(dir / "a.rhye");
  CHECK(back.frames() == 3);
  CHECK(back.dim() == 4);
  CHECK(std::memcmp(back.values().data(), s.values().data(), 12 * sizeof(float)) == 0);

  const auto bytes = encode_embedding(s);
  CHECK(bytes.size() == 16 + 48);
  CHECK(std::memcmp(bytes.data(), "RHYE", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);
  CHECK(bytes[12] == 4);
  CHECK(encode_embedding(decode_embedding(bytes)) == bytes);

  // negative zero and subnormals survive
  EmbeddingSequence odd(1, 2, {-0.0f, 1e-40f});
  const EmbeddingSequence odd_back = decode_embedding(encode_embedding(odd));
  CHECK(std::signbit(odd_back.at(0, 0)));
  CHECK(odd_back.at(0, 1) == 1e-40f);
}

TEST_CASE("RHYE1 format errors carry byte offsets") {
  const auto good = encode_embedding(oracle::random_sequence(2, 3, 2));

  auto bad_magic = good;
  std::memcpy(bad_magic.data(), "XXXX", 4);
  CHECK(format_offset([&] { decode_embedding(bad_magic); }) == 0);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(format_offset([&] { decode_embedding(bad_version); }) == 4);

  // T=2, D=3 needs 24 payload bytes; 20 present
  auto truncated = good;
  truncated.resize(16 + 20);
  CHECK(format_offset([&] { decode_embedding(truncated); }) == 36);

  auto header_only = good;
  header_only.resize(10);
  CHECK_THROWS_AS(decode_embedding(header_only), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(format_offset([&] { decode_embedding(trailing); }) == 40);

  auto zero_frames = good;
  zero_frames[8] = 0;
  CHECK(format_offset([&] { decode_embedding(zero_frames); }) == 8);

  auto nan_value = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_value.data() + 16 + 4 * 5, &nan, 4);
  CHECK(format_offset([&] { decode_embedding(nan_value); }) == 36);

  TempDir dir("rhye-bad");
  test::spit(dir / "t.rhye", truncated);
  CHECK_THROWS_AS(read_embedding(dir / "t.rhye"), FormatError);
  CHECK_THROWS_AS(read_embedding(dir / "missing.rhye"), IoError);

  EmbeddingSequence inf(1, 1, {std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(write_embedding(dir / "inf.rhye", inf), InvalidArgument);
}

TEST_CASE("manifest parsing") {
  const std::string line1 = R"({"id":"a","path":"a.rhye","label":"bonafide","corpus":"ASV","split":"train"})";
  const std::string line2 =
      R"({"id":"b","path":["b1.rhye","b2.rhye"],"label":"spoof","corpus":"ASV","generator":"D1","split":"test"})";

  SUBCASE("two valid lines") {
    const auto records = parse(line1 + "\n" + line2 + "\n");
    REQUIRE(records.size() == 2);
    CHECK(records[0].id == "a");
    CHECK(records[0].generator == "none");
    CHECK(records[1].paths.size() == 2);
    CHECK(records[1].label == Label::spoof);
    CHECK(records[1].split == Split::test);
  }
  SUBCASE("duplicate id names its line") {
    std::string text = line1 + "\n" + line2 + "\n";
    text += R"({"id":"c","path":"c.rhye","label":"spoof","split":"dev"})" "\n";
    text += R"({"id":"d","path":"d.rhye","label":"spoof","split":"dev"})" "\n";
    text += R"({"id":"a","path":"e.rhye","label":"spoof","split":"dev"})" "\n";
    CHECK(manifest_line([&] { parse(text); }) == 5);
  }
  SUBCASE("only bonafide and spoof labels") {
    CHECK(manifest_line([&] { parse(R"({"id":"x","path":"x","label":"fake","split":"train"})"); }) == 1);
  }
  SUBCASE("other malformed lines") {
    CHECK(manifest_line([&] { parse(line1 + "\n{not json\n"); }) == 2);
    CHECK(manifest_line([&] { parse(R"({"id":"x","label":"spoof","split":"train"})"); }) == 1);
    CHECK(manifest_line([&] { parse(R"({"id":"x","path":"x","label":"spoof","split":"eval"})"); }) == 1);
    CHECK(manifest_line([&] { parse(R"([1,2])"); }) == 1);
  }
  SUBCASE("blank lines are skipped but counted") {
    const auto records = parse("\n" + line1 + "\n\n");
    CHECK(records.size() == 1);
    CHECK(manifest_line([&] { parse("\n\n" + std::string(R"({"id":"x"})")); }) == 3);
  }
}

TEST_CASE("manifest round trip and record loading") {
  TempDir dir("manifest");
  std::filesystem::create_directories(dir / "emb");
  const EmbeddingSequence a = oracle::random_sequence(4, 3, 1);
  const EmbeddingSequence b = oracle::random_sequence(4, 2, 2);
  write_embedding(dir / "emb/a.rhye", a);
  write_embedding(dir / "emb/b.rhye", b);

  ManifestRecord r = rec("u1", Label::spoof, "ASV", "D2", Split::dev);
  r.paths = {"emb/a.rhye", "emb/b.rhye"};
  write_manifest(dir / "m.jsonl", {r});
  const Manifest m = load_manifest(dir / "m.jsonl");
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0] == r);

  const EmbeddingSequence joined = load_record(m, m.records[0]);
  CHECK(joined.frames() == 4);
  CHECK(joined.dim() == 5);
  CHECK(joined.at(2, 1) == a.at(2, 1));
  CHECK(joined.at(3, 4) == b.at(3, 1));

  CHECK_THROWS_AS(load_manifest(dir / "nope.jsonl"), IoError);
}

TEST_CASE("concat_streams requires equal frame counts") {
  const std::vector<EmbeddingSequence> ok = {oracle::random_sequence(3, 2, 1), oracle::random_sequence(3, 1, 2)};
  CHECK(concat_streams(ok).dim() == 3);
  const std::vector<EmbeddingSequence> bad = {oracle::random_sequence(3, 2, 1), oracle::random_sequence(4, 1, 2)};
  CHECK_THROWS_AS(concat_streams(bad), ShapeError);
}

TEST_CASE("protocol selection") {
  std::vector<ManifestRecord> records;
  int n = 0;
  for (const char *corpus : {"ASV", "DFADD"}) {
    for (const char *gen : {"none", "D1", "D2", "D3", "F1", "F2"}) {
      for (Split split : {Split::train, Split::dev, Split::test}) {
        const Label label = std::string(gen) == "none" ? Label::bonafide : Label::spoof;
        records.push_back(rec(std::string(corpus) + "_" + std::to_string(n++), label, corpus, gen, split));
      }
    }
  }

  SUBCASE("cross-corpus training never sees the test corpus") {
    const auto sel = protocol_select(records, "ASV", "DFADD", {});
    CHECK_FALSE(sel.train.empty());
    for (const auto &r : sel.train) {
      CHECK(r.corpus == "ASV");
      CHECK(r.split == Split::train);
    }
    for (const auto &r : sel.test) {
      CHECK(r.corpus == "DFADD");
      CHECK(r.split == Split::test);
    }
    std::set<std::string> ids;
    for (const auto &r : sel.train) {
      ids.insert(r.id);
    }
    for (const auto &r : sel.dev) {
      ids.insert(r.id);
    }
    for (const auto &r : sel.test) {
      CHECK(ids.count(r.id) == 0);
    }
  }
  SUBCASE("single-synthesizer hold-out") {
    const auto sel = protocol_select(records, "DFADD", "DFADD", {"D2", "D3", "F1", "F2"});
    for (const auto &r : sel.train) {
      CHECK((r.generator == "D1" || r.generator == "none"));
      CHECK((r.label == Label::bonafide) == (r.generator == "none"));
    }
    // the test side keeps every generator
    std::set<std::string> test_gens;
    for (const auto &r : sel.test) {
      test_gens.insert(r.generator);
    }
    CHECK(test_gens.size() == 6);
  }
  SUBCASE("within-corpus split honours the split field") {
    const auto sel = protocol_select(records, "DFADD", "DFADD", {});
    CHECK(sel.train.size() == 6);
    CHECK(sel.dev.size() == 6);
    CHECK(sel.test.size() == 6);
  }
  SUBCASE("empty selections are configuration errors") {
    CHECK_THROWS_AS(protocol_select(records, "LA2019", std::nullopt, {}), ConfigError);
    CHECK_THROWS_AS(protocol_select(records, "ASV", "LA2019", {}), ConfigError);
    CHECK_THROWS_AS(protocol_select(records, "ASV", std::nullopt, {"none", "D1", "D2", "D3", "F1", "F2"}),
                    ConfigError);
  }
}

TEST_CASE("synthetic generator") {
  TempDir dir("synth");
  SyntheticSpec spec;
  spec.n_per_class = 500;
  spec.frames = 20;
  spec.dim = 6;
  spec.seed = 3;
  const auto records = generate_synthetic(spec, dir.path());
  REQUIRE(records.size() == 1000);

  const Manifest m = load_manifest(dir / "manifest.jsonl");
  CHECK(m.records == records);

  std::map<std::pair<Label, Split>, std::size_t> counts;
  Eigen::VectorXd bona_mean = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd spoof_mean = Eigen::VectorXd::Zero(6);
  double phase_bona = 0.0;
  double phase_spoof = 0.0;
  for (const auto &r : m.records) {
    ++counts[{r.label, r.split}];
    CHECK(r.corpus == "SYN");
    const EmbeddingSequence s = load_record(m, r);
    CHECK(s.frames() == 20);
    CHECK(s.dim() == 6);
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(6);
    double phase = 0.0;
    for (std::size_t t = 0; t < 20; ++t) {
      for (std::size_t d = 0; d < 6; ++d) {
        pooled[static_cast<Eigen::Index>(d)] += s.at(t, d) / 20.0;
      }
      phase += s.at(t, 1) * std::sin(2.0 * M_PI * static_cast<double>(t + 1) / 8.0);
    }
    if (r.label == Label::spoof) {
      spoof_mean += pooled / 500.0;
      phase_spoof += phase / 500.0;
      CHECK(r.generator != "none");
    } else {
      bona_mean += pooled / 500.0;
      phase_bona += phase / 500.0;
    }
  }
  // 80/10/10 in each class
  for (Label l : {Label::bonafide, Label::spoof}) {
    CHECK(counts[{l, Split::train}] == 400);
    CHECK(counts[{l, Split::dev}] == 50);
    CHECK(counts[{l, Split::test}] == 50);
  }
  const Eigen::VectorXd gap = spoof_mean - bona_mean;
  CHECK(std::abs(gap[0] - 2.0) <= 0.05 * 2.0);
  for (Eigen::Index d = 2; d < 6; ++d) {
    CHECK(std::abs(gap[d]) < 0.1);
  }
  // the periodic cue: sum_t 0.5 sin^2 over 20 frames = 5; the noise term has
  // standard deviation sqrt(2 * 10 / 500) = 0.2
  CHECK(std::abs(phase_spoof - phase_bona - 5.0) < 0.8);
}

TEST_CASE("synthetic generator is deterministic and respects its switches") {
  TempDir a("synth-a");
  TempDir b("synth-b");
  SyntheticSpec spec;
  spec.n_per_class = 10;
  spec.frames = 4;
  spec.dim = 3;
  generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  CHECK(test::slurp(a / "manifest.jsonl") == test::slurp(b / "manifest.jsonl"));
  for (const auto &entry : std::filesystem::directory_iterator(a / "emb")) {
    CHECK(test::slurp(entry.path()) == test::slurp(b / ("emb/" + entry.path().filename().string())));
  }

  spec.separation = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec, a.path()), ConfigError);
}

TEST_CASE("sep 0 without the periodic cue gives identical class distributions") {
  TempDir dir("synth0");
  SyntheticSpec spec;
  spec.n_per_class = 400;
  spec.frames = 10;
  spec.dim = 4;
  spec.separation = 0.0;
  spec.periodic_amplitude = 0.0;
  const auto records = generate_synthetic(spec, dir.path());
  const Manifest m = load_manifest(dir / "manifest.jsonl");
  double gap = 0.0;
  for (const auto &r : records) {
    const EmbeddingSequence s = load_record(m, r);
    double mean = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
      mean += s.at(t, 0) / 10.0;
    }
    gap += (r.label == Label::spoof ? mean : -mean) / 400.0;
  }
  // standard error of the gap is sqrt(2 / 4000) ~ 0.022
  CHECK(std::abs(gap) < 0.1);
}
