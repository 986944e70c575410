#include "rhyme/checkpoint.hpp"

#include <algorithm>
#include <cmath>

#include "byte_io.hpp"
#include "rhyme/error.hpp"

namespace rhyme {

using nlohmann::json;

namespace {

constexpr std::size_t kPrefixBytes = 12;

json optional_to_json(const std::optional<std::string> &v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> optional_from_json(const json &j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  return j.get<std::string>();
}

json nan_as_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

} // namespace

json to_json(const ModelConfig &c) {
  json j = {{"input_dim", c.input_dim},
            {"conv_channels", c.conv_channels},
            {"conv_layers", c.conv_layers},
            {"kernel_size", c.kernel_size},
            {"utterance_dim", c.utterance_dim},
            {"dropout", c.dropout},
            {"initial_c", c.initial_c},
            {"c_min", c.c_min},
            {"shrink", c.shrink},
            {"margin", c.margin},
            {"ablation", std::string(to_string(c.ablation))}};
  if (!c.gated()) {
    j["fixed_alpha"] = 0.5;
  }
  return j;
}

ModelConfig model_config_from_json(const json &j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.conv_channels = j.at("conv_channels").get<std::size_t>();
  c.conv_layers = j.at("conv_layers").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.utterance_dim = j.at("utterance_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.initial_c = j.at("initial_c").get<double>();
  c.c_min = j.at("c_min").get<double>();
  c.shrink = j.at("shrink").get<double>();
  c.margin = j.at("margin").get<double>();
  c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  return c;
}

json to_json(const TrainConfig &c) {
  json j = {{"lr", c.lr},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"patience", c.patience},
            {"val_fraction", c.val_fraction},
            {"folds", c.folds},
            {"seed", c.seed},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps}};
  j["shuffle_seed"] = c.shuffle_seed ? json(*c.shuffle_seed) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json &j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.folds = j.at("folds").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  if (!j.at("shuffle_seed").is_null()) {
    c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  }
  return c;
}

json to_json(const TrainLog &log, bool include_time) {
  json epochs = json::array();
  for (const auto &e : log.epochs) {
    json rec = {{"epoch", e.epoch},
                {"train_loss", nan_as_null(e.train_loss)},
                {"val_loss", nan_as_null(e.val_loss)},
                {"val_eer", nan_as_null(e.val_eer)}};
    if (include_time) {
      rec["wall_seconds"] = e.wall_seconds;
    }
    epochs.push_back(std::move(rec));
  }
  return {{"epochs", std::move(epochs)},
          {"early_stopped", log.early_stopped},
          {"best_epoch", log.best_epoch},
          {"train_size", log.train_size},
          {"val_size", log.val_size}};
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ckpt) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto &t : ckpt.params.tensors()) {
    const std::uint64_t nbytes = 8 * t.size();
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json header = {{"format", "RHYM1"},
                       {"model_config", to_json(ckpt.model)},
                       {"train_config", to_json(ckpt.train)},
                       {"protocol",
                        {{"manifest", ckpt.protocol.manifest},
                         {"train_corpus", optional_to_json(ckpt.protocol.train_corpus)},
                         {"test_corpus", optional_to_json(ckpt.protocol.test_corpus)},
                         {"exclude_generators", ckpt.protocol.exclude_generators}}},
                       {"tensors", std::move(tensors)}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPrefixBytes + text.size() + offset);
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto &t : ckpt.params.tensors()) {
    for (double v : t.data) {
      detail::put_f64(out, v);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPrefixBytes) {
    throw FormatError("truncated RHYM1 prefix", bytes.size());
  }
  if (!std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin())) {
    throw FormatError("bad RHYM1 magic", 0);
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported RHYM1 version " + std::to_string(version), 4);
  }
  const auto header_len = detail::get_le<std::uint32_t>(bytes, 8);
  if (bytes.size() - kPrefixBytes < header_len) {
    throw FormatError("truncated RHYM1 header", bytes.size());
  }
  const std::string text(bytes.begin() + kPrefixBytes, bytes.begin() + kPrefixBytes + header_len);
  const std::size_t blob_start = kPrefixBytes + header_len;

  Checkpoint ckpt;
  json header;
  try {
    header = json::parse(text);
    if (header.at("format").get<std::string>() != "RHYM1") {
      throw FormatError("RHYM1 header has wrong format tag", kPrefixBytes);
    }
    ckpt.model = model_config_from_json(header.at("model_config"));
    ckpt.model.validate();
    ckpt.train = train_config_from_json(header.at("train_config"));
    const json &proto = header.at("protocol");
    ckpt.protocol.manifest = proto.at("manifest").get<std::string>();
    ckpt.protocol.train_corpus = optional_from_json(proto.at("train_corpus"));
    ckpt.protocol.test_corpus = optional_from_json(proto.at("test_corpus"));
    ckpt.protocol.exclude_generators = proto.at("exclude_generators").get<std::vector<std::string>>();
  } catch (const json::exception &e) {
    throw FormatError(std::string("malformed RHYM1 header: ") + e.what(), kPrefixBytes);
  } catch (const ConfigError &e) {
    throw FormatError(std::string("invalid model config in RHYM1 header: ") + e.what(), kPrefixBytes);
  }

  const ParameterStore expected = init_params(ckpt.model, 0);
  const auto expected_tensors = expected.tensors();
  const auto table_it = header.find("tensors");
  if (table_it == header.end() || !table_it->is_array() || table_it->size() != expected_tensors.size()) {
    throw FormatError("RHYM1 tensor table does not match the model config", kPrefixBytes);
  }
  const json &table = *table_it;

  const std::uint64_t blob_bytes = bytes.size() - blob_start;
  std::uint64_t cursor = 0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const json &entry = table[k];
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::uint64_t>();
      nbytes = entry.at("nbytes").get<std::uint64_t>();
    } catch (const json::exception &e) {
      throw FormatError(std::string("malformed RHYM1 tensor entry: ") + e.what(), kPrefixBytes);
    }
    const Tensor &want = expected_tensors[k];
    if (name != want.name || shape != want.shape || nbytes != 8 * want.size() || offset != cursor) {
      throw FormatError("RHYM1 tensor '" + name + "' does not match the model config", kPrefixBytes);
    }
    if (offset + nbytes > blob_bytes) {
      throw FormatError("truncated RHYM1 tensor '" + name + "'", bytes.size());
    }
    Tensor &t = ckpt.params.add(name, shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.data[i] = detail::get_f64(bytes, blob_start + offset + 8 * i);
    }
    cursor += nbytes;
  }
  if (cursor != blob_bytes) {
    throw FormatError("trailing bytes after RHYM1 tensors", blob_start + cursor);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  return decode_checkpoint(detail::read_file(path));
}

} // namespace rhyme
