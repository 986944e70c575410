#include "rhyme/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "rhyme/error.hpp"
#include "rhyme/metrics.hpp"

namespace rhyme {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags keep the independent random streams of one seed apart.
enum : std::uint64_t { kShuffleStream = 1, kDropoutStream = 2, kHoldoutStream = 3, kFoldStream = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results by index.
template <typename Fn> void parallel_for(std::size_t n, std::size_t threads, Fn &&fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) {
            fn(i);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

void require_both_classes(std::span<const Example> set, const char *what) {
  bool bona = false;
  bool spoof = false;
  for (const auto &ex : set) {
    if (ex.label != kBonafide && ex.label != kSpoof) {
      throw ConfigError(std::string(what) + ": labels must be 0 or 1");
    }
    (ex.label == kBonafide ? bona : spoof) = true;
  }
  if (!bona || !spoof) {
    throw ConfigError(std::string(what) + " must contain both bonafide and spoof examples");
  }
}

std::vector<int> labels_of(std::span<const Example> set) {
  std::vector<int> labels;
  labels.reserve(set.size());
  for (const auto &ex : set) {
    labels.push_back(ex.label);
  }
  return labels;
}

} // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ConfigError("lr must be finite and non-negative");
  }
  if (batch_size == 0) {
    throw ConfigError("batch_size must be at least 1");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

AdamState AdamState::zeros_like(const ParameterStore &params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterStore &params, const ParameterStore &grads, AdamState &state, const AdamOptions &o) {
  if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
      !params.same_layout(state.second_moment)) {
    throw ShapeError("adam_step: parameter, gradient and moment layouts differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(o.beta1, t);
  const double bias2 = 1.0 - std::pow(o.beta2, t);
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].data.size(); ++i) {
      const double gi = g[k].data[i];
      double &mi = m[k].data[i];
      double &vi = v[k].data[i];
      mi = o.beta1 * mi + (1.0 - o.beta1) * gi;
      vi = o.beta2 * vi + (1.0 - o.beta2) * gi * gi;
      p[k].data[i] -= o.lr * (mi / bias1) / (std::sqrt(vi / bias2) + o.eps);
    }
  }
}

double cross_entropy(const Eigen::Vector2d &y_hat, int label) {
  if (label < 0 || label >= kNumClasses) {
    throw InvalidArgument("cross_entropy: label out of range");
  }
  return -std::log(y_hat[label]);
}

double cross_entropy_from_logits(const Eigen::Vector2d &logits, int label) {
  if (label < 0 || label >= kNumClasses) {
    throw InvalidArgument("cross_entropy: label out of range");
  }
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits[label];
}

EvalOutput evaluate(std::span<const Example> set, const ParameterStore &params, const ModelConfig &model,
                    std::size_t threads) {
  EvalOutput out;
  out.scores.resize(set.size());
  out.alphas.resize(set.size());
  std::vector<double> losses(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) {
    const ForwardTrace tr = forward(set[i].sequence, params, model, Mode::eval);
    out.scores[i] = tr.y_hat[kSpoof];
    out.alphas[i] = tr.alpha;
    losses[i] = cross_entropy_from_logits(tr.logits, set[i].label);
  });
  double sum = 0.0;
  for (double l : losses) {
    sum += l;
  }
  out.mean_loss = set.empty() ? kNaN : sum / static_cast<double>(set.size());
  return out;
}

FoldSplit stratified_holdout(std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, kHoldoutStream);
  FoldSplit out;
  for (int cls : {kBonafide, kSpoof}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) {
        members.push_back(i);
      }
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    held = std::min(held, members.size() > 0 ? members.size() - 1 : 0);
    out.val.insert(out.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(held));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(held), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::vector<FoldSplit> kfold_split(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) {
    throw ConfigError("kfold_split: need at least 2 folds");
  }
  if (folds > labels.size()) {
    throw ConfigError("kfold_split: more folds than records");
  }
  std::mt19937_64 rng = make_rng(seed, kFoldStream);
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t next = 0;
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int cls : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) {
        members.push_back(i);
      }
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) {
      fold_of[i] = next;
      next = (next + 1) % folds;
    }
  }
  std::vector<FoldSplit> out(folds);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < folds; ++f) {
      (fold_of[i] == f ? out[f].val : out[f].train).push_back(i);
    }
  }
  return out;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig &config,
                  const ModelConfig &model) {
  model.validate();
  return train_from(init_params(model, config.seed), train_set, val_set, config, model);
}

TrainResult train_from(ParameterStore params, std::span<const Example> train_input, std::span<const Example> val_input,
                       const TrainConfig &config, const ModelConfig &model) {
  config.validate();
  model.validate();
  require_both_classes(train_input, "training set");

  // Materialize the effective train/validation partition as index lists.
  std::vector<const Example *> train_items;
  std::vector<Example> held_out;
  std::span<const Example> val_set = val_input;
  if (val_input.empty()) {
    const std::vector<int> labels = labels_of(train_input);
    const FoldSplit split = stratified_holdout(labels, config.val_fraction, config.seed);
    for (std::size_t i : split.train) {
      train_items.push_back(&train_input[i]);
    }
    for (std::size_t i : split.val) {
      held_out.push_back(train_input[i]);
    }
    val_set = held_out;
  } else {
    for (const auto &ex : train_input) {
      train_items.push_back(&ex);
    }
  }

  TrainResult result;
  result.log.train_size = train_items.size();
  result.log.val_size = val_set.size();
  if (config.epochs == 0) {
    result.params = std::move(params);
    return result;
  }

  const bool have_val = !val_set.empty();
  bool val_both_classes = false;
  if (have_val) {
    const std::vector<int> vl = labels_of(val_set);
    val_both_classes = std::count(vl.begin(), vl.end(), kBonafide) > 0 && std::count(vl.begin(), vl.end(), kSpoof) > 0;
  }

  const AdamOptions adam{config.lr, config.beta1, config.beta2, config.eps};
  AdamState state = AdamState::zeros_like(params);
  ParameterStore best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::mt19937_64 shuffle_rng = make_rng(config.shuffle_seed.value_or(config.seed), kShuffleStream);
  std::vector<std::size_t> order(train_items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t slot_count = config.threads > 1 ? std::min(config.batch_size, train_items.size()) : 1;
  std::vector<ParameterStore> slots(slot_count, params.zeros_like());
  std::vector<double> losses(config.batch_size);
  ParameterStore batch_grad = params.zeros_like();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      // Members are reduced in index order, independent of the shuffle.
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(batch.begin(), batch.end());
      batch_grad.set_zero();

      auto item_gradient = [&](std::size_t k, ParameterStore &slot) {
        const std::size_t idx = batch[k];
        const Example &ex = *train_items[idx];
        std::mt19937_64 drop = make_rng(config.seed, kDropoutStream, epoch, idx);
        const ForwardTrace tr = forward(ex.sequence, params, model, Mode::train, &drop);
        losses[k] = cross_entropy_from_logits(tr.logits, ex.label);
        backward(tr, params, model, ex.label, slot);
      };

      if (slot_count == 1) {
        for (std::size_t k = 0; k < batch.size(); ++k) {
          item_gradient(k, slots[0]);
          batch_grad.axpy(1.0, slots[0]);
        }
      } else {
        for (std::size_t chunk = 0; chunk < batch.size(); chunk += slot_count) {
          const std::size_t n = std::min(slot_count, batch.size() - chunk);
          parallel_for(n, config.threads, [&](std::size_t s) { item_gradient(chunk + s, slots[s]); });
          for (std::size_t s = 0; s < n; ++s) {
            batch_grad.axpy(1.0, slots[s]);
          }
        }
      }
      for (std::size_t k = 0; k < batch.size(); ++k) {
        loss_sum += losses[k];
      }
      batch_grad.scale(1.0 / static_cast<double>(batch.size()));
      adam_step(params, batch_grad, state, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = kNaN;
    rec.val_eer = kNaN;
    if (have_val) {
      const EvalOutput ev = evaluate(val_set, params, model, config.threads);
      rec.val_loss = ev.mean_loss;
      if (val_both_classes) {
        metrics::ScoreSet scores;
        for (std::size_t i = 0; i < val_set.size(); ++i) {
          scores.add(ev.scores[i], val_set[i].label);
        }
        rec.val_eer = metrics::compute_eer(scores).eer_percent;
      }
    }
    if (config.record_time) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.epochs.push_back(rec);

    if (!have_val) {
      best = params;
      result.log.best_epoch = epoch;
      continue;
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = params;
      result.log.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.log.early_stopped = true;
      break;
    }
  }
  result.params = std::move(best);
  return result;
}

double GradCheckReport::max_rel_error() const noexcept {
  double worst = 0.0;
  for (const auto &g : groups) {
    worst = std::max(worst, g.max_rel_error);
  }
  return worst;
}

bool GradCheckReport::passed(double tolerance) const noexcept { return max_rel_error() < tolerance; }

ModelConfig gradcheck_model(std::size_t input_dim, Ablation ablation) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.conv_channels = 12;
  m.conv_layers = 2;
  m.kernel_size = 3;
  m.utterance_dim = 16;
  m.ablation = ablation;
  return m;
}

GradCheckReport grad_check(const ModelConfig &model, std::uint64_t seed, const GradCheckOptions &options) {
  ParameterStore params = init_params(model, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingSequence seq(options.frames, model.input_dim);
  for (float &v : seq.values()) {
    v = static_cast<float>(normal(rng));
  }
  const int label = static_cast<int>(rng() % 2);

  auto run = [&](const ParameterStore &p) {
    std::mt19937_64 drop = make_rng(seed, kDropoutStream);
    return forward(seq, p, model, Mode::train, &drop);
  };

  ParameterStore analytic = backward(run(params), params, model, label);
  if (options.corrupt) {
    options.corrupt(analytic);
  }

  GradCheckReport report;
  report.ablation = model.ablation;
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    GradCheckGroup group{tensors[k].name, tensors[k].size(), 0.0};
    const auto &exact = analytic.tensors()[k].data;
    for (std::size_t i = 0; i < tensors[k].size(); ++i) {
      double &theta = tensors[k].data[i];
      const double saved = theta;
      theta = saved + options.step;
      const double up = cross_entropy_from_logits(run(params).logits, label);
      theta = saved - options.step;
      const double down = cross_entropy_from_logits(run(params).logits, label);
      theta = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double denom = std::max({std::abs(exact[i]), std::abs(numeric), options.floor});
      group.max_rel_error = std::max(group.max_rel_error, std::abs(exact[i] - numeric) / denom);
    }
    report.groups.push_back(group);
  }
  return report;
}

std::size_t threads_from_env() {
  const char *raw = std::getenv("RHYME_THREADS");
  if (raw == nullptr || *raw == '\0') {
    return 1;
  }
  char *end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (*end != '\0' || n < 1) {
    throw ConfigError("RHYME_THREADS must be a positive integer");
  }
  return static_cast<std::size_t>(n);
}

} // namespace rhyme
