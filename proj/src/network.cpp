#include "rhyme/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rhyme/error.hpp"

namespace rhyme {

namespace mf = manifold;

namespace {

std::string conv_weight(std::size_t layer) { return "conv" + std::to_string(layer) + ".weight"; }
std::string conv_bias(std::size_t layer) { return "conv" + std::to_string(layer) + ".bias"; }

constexpr const char *kProjWeight = "proj.weight";
constexpr const char *kProjBias = "proj.bias";
constexpr const char *kGateWeight = "gate.weight";
constexpr const char *kGateBias = "gate.bias";
constexpr const char *kRho = "rho";
constexpr const char *kClsWeight = "cls.weight";
constexpr const char *kClsBias = "cls.bias";

void check_finite(const Eigen::MatrixXd &m, Stage stage) {
  if (!m.allFinite()) {
    throw NumericError(std::string(to_string(stage)));
  }
}

void check_finite(double v, Stage stage) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(to_string(stage)));
  }
}

// columns(i*k + j, t) = input(i, t + j - pad), zero outside [0, T).
Eigen::MatrixXd unfold(const Eigen::MatrixXd &input, std::size_t kernel) {
  const Eigen::Index channels = input.rows();
  const Eigen::Index frames = input.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index pad = (k - 1) / 2;
  Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(channels * k, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src < 0 || src >= frames) {
        continue;
      }
      for (Eigen::Index i = 0; i < channels; ++i) {
        columns(i * k + j, t) = input(i, src);
      }
    }
  }
  return columns;
}

Eigen::MatrixXd fold(const Eigen::MatrixXd &columns, Eigen::Index channels, std::size_t kernel) {
  const Eigen::Index frames = columns.cols();
  const Eigen::Index k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index pad = (k - 1) / 2;
  Eigen::MatrixXd input = Eigen::MatrixXd::Zero(channels, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src < 0 || src >= frames) {
        continue;
      }
      for (Eigen::Index i = 0; i < channels; ++i) {
        input(i, src) += columns(i * k + j, t);
      }
    }
  }
  return input;
}

Eigen::MatrixXd to_channel_major(const EmbeddingSequence &seq) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(seq.dim()), static_cast<Eigen::Index>(seq.frames()));
  for (std::size_t t = 0; t < seq.frames(); ++t) {
    for (std::size_t d = 0; d < seq.dim(); ++d) {
      x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t)) = seq.at(t, d);
    }
  }
  return x;
}

std::vector<ConvLayerCache> run_encoder(const EmbeddingSequence &seq, const ParameterStore &params,
                                        const ModelConfig &config) {
  if (seq.dim() != config.input_dim) {
    throw ShapeError("input dimension " + std::to_string(seq.dim()) + " does not match model input_dim " +
                     std::to_string(config.input_dim));
  }
  if (seq.frames() == 0) {
    throw ShapeError("embedding sequence has no frames");
  }
  if (!seq.all_finite()) {
    throw NumericError("input");
  }
  std::vector<ConvLayerCache> layers(config.conv_layers);
  Eigen::MatrixXd input = to_channel_major(seq);
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    ConvLayerCache &cache = layers[l];
    cache.columns = unfold(input, config.kernel_size);
    const ConstMatrixMap w = params.matrix(conv_weight(l));
    const ConstVectorMap b = params.vector(conv_bias(l));
    cache.activations.noalias() = w * cache.columns;
    cache.activations.colwise() += b;
    cache.activations = cache.activations.cwiseMax(0.0);
    input = cache.activations;
  }
  check_finite(layers.back().activations, Stage::encode);
  return layers;
}

} // namespace

std::string_view to_string(Ablation a) noexcept {
  switch (a) {
  case Ablation::full:
    return "full";
  case Ablation::no_gating:
    return "no_gating";
  case Ablation::no_spherical:
    return "no_spherical";
  case Ablation::no_hyperbolic:
    return "no_hyperbolic";
  case Ablation::euclidean_fusion:
    return "euclidean_fusion";
  }
  return "unknown";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : kAllAblations) {
    if (to_string(a) == name) {
      return a;
    }
  }
  throw ConfigError("unknown ablation mode '" + std::string(name) + "'");
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
  case Stage::encode:
    return "encode";
  case Stage::pool:
    return "pool";
  case Stage::dropout:
    return "dropout";
  case Stage::gate:
    return "gate";
  case Stage::split:
    return "split";
  case Stage::hyperbolic:
    return "hyperbolic";
  case Stage::spherical:
    return "spherical";
  case Stage::fusion:
    return "fusion";
  case Stage::readout:
    return "readout";
  case Stage::classify:
    return "classify";
  }
  return "unknown";
}

void ModelConfig::validate() const {
  if (input_dim == 0 || conv_channels == 0 || conv_layers == 0 || utterance_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be a positive odd integer");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (!(c_min > 0.0) || !(initial_c > c_min)) {
    throw ConfigError("initial_c must exceed c_min > 0");
  }
  if (!(shrink > 0.0 && shrink <= 1.0)) {
    throw ConfigError("shrink must lie in (0, 1]");
  }
  if (!(margin > 0.0 && margin < 1.0)) {
    throw ConfigError("margin must lie in (0, 1)");
  }
}

bool ModelConfig::uses_hyperbolic() const noexcept {
  return ablation == Ablation::full || ablation == Ablation::no_gating || ablation == Ablation::no_spherical;
}

bool ModelConfig::uses_spherical() const noexcept {
  return ablation == Ablation::full || ablation == Ablation::no_gating || ablation == Ablation::no_hyperbolic;
}

bool ForwardTrace::ran(Stage s) const noexcept { return std::find(stages.begin(), stages.end(), s) != stages.end(); }

bool ForwardTrace::used_manifold() const noexcept {
  return ran(Stage::hyperbolic) || ran(Stage::spherical) || ran(Stage::fusion) || ran(Stage::readout);
}

ParameterStore init_params(const ModelConfig &config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterStore params;
  auto fill_uniform = [&rng](Tensor &t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto &v : t.data) {
      v = dist(rng);
    }
  };

  std::size_t in_channels = config.input_dim;
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    const std::size_t fan_in = in_channels * config.kernel_size;
    fill_uniform(params.add(conv_weight(l), {config.conv_channels, in_channels, config.kernel_size}), fan_in);
    fill_uniform(params.add(conv_bias(l), {config.conv_channels}), fan_in);
    in_channels = config.conv_channels;
  }
  fill_uniform(params.add(kProjWeight, {config.utterance_dim, config.conv_channels}), config.conv_channels);
  fill_uniform(params.add(kProjBias, {config.utterance_dim}), config.conv_channels);
  fill_uniform(params.add(kGateWeight, {config.utterance_dim}), config.utterance_dim);
  params.add(kGateBias, {1});
  params.add(kRho, {1}).data[0] = mf::Curvature::from_value(config.initial_c, config.c_min).rho();
  fill_uniform(params.add(kClsWeight, {static_cast<std::size_t>(kNumClasses), config.utterance_dim}),
               config.utterance_dim);
  fill_uniform(params.add(kClsBias, {static_cast<std::size_t>(kNumClasses)}), config.utterance_dim);
  return params;
}

Eigen::MatrixXd conv_encode(const EmbeddingSequence &seq, const ParameterStore &params, const ModelConfig &config) {
  return run_encoder(seq, params, config).back().activations;
}

Eigen::Vector2d softmax(const Eigen::Vector2d &logits) noexcept {
  const double top = logits.maxCoeff();
  const Eigen::Vector2d e = (logits.array() - top).exp();
  return e / e.sum();
}

ForwardTrace forward(const EmbeddingSequence &seq, const ParameterStore &params, const ModelConfig &config,
                     Mode mode, std::mt19937_64 *rng) {
  ForwardTrace tr;
  tr.mode = mode;
  tr.ablation = config.ablation;

  tr.layers = run_encoder(seq, params, config);
  tr.stages.push_back(Stage::encode);

  tr.pooled = tr.encoded().rowwise().mean();
  tr.u_pre = params.matrix(kProjWeight) * tr.pooled + params.vector(kProjBias);
  check_finite(tr.u_pre, Stage::pool);
  tr.stages.push_back(Stage::pool);

  tr.u = tr.u_pre;
  if (mode == Mode::train && config.dropout > 0.0) {
    if (rng == nullptr) {
      throw ConfigError("train-mode forward with dropout requires an rng");
    }
    const double keep = 1.0 - config.dropout;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    tr.dropout_mask.resize(tr.u.size());
    for (Eigen::Index i = 0; i < tr.u.size(); ++i) {
      tr.dropout_mask[i] = unit(*rng) < keep ? 1.0 / keep : 0.0;
    }
    tr.u = tr.u.cwiseProduct(tr.dropout_mask);
    tr.stages.push_back(Stage::dropout);
  }

  if (config.gated()) {
    tr.alpha = mf::sigmoid(params.vector(kGateWeight).dot(tr.u) + params.scalar(kGateBias));
    check_finite(tr.alpha, Stage::gate);
    tr.stages.push_back(Stage::gate);
  } else {
    tr.alpha = 0.5;
  }

  tr.u_h = tr.alpha * tr.u;
  tr.u_s = (1.0 - tr.alpha) * tr.u;
  tr.stages.push_back(Stage::split);

  const mf::Curvature curvature(params.scalar(kRho), config.c_min);
  const double c = curvature.value();
  tr.curvature = c;

  if (config.ablation == Ablation::euclidean_fusion) {
    tr.r = tr.alpha * tr.u_h + (1.0 - tr.alpha) * tr.u_s;
  } else {
    if (config.uses_hyperbolic()) {
      tr.x_h = mf::exp_map(tr.u_h, c);
      check_finite(tr.x_h, Stage::hyperbolic);
      tr.stages.push_back(Stage::hyperbolic);
    }
    if (config.uses_spherical()) {
      // u_s / |u_s| == u / |u| since 1 - alpha > 0; normalizing u keeps the
      // gate out of this branch exactly instead of up to rounding.
      try {
        tr.x_s = mf::sphere_normalize(tr.u);
      } catch (const DegenerateInput &) {
        tr.x_s = Eigen::VectorXd::Unit(tr.u_s.size(), 0);
        tr.sphere_degenerate = true;
      }
      tr.y_s = mf::stereographic_to_ball(tr.x_s, c, config.shrink, config.margin);
      check_finite(tr.y_s, Stage::spherical);
      tr.stages.push_back(Stage::spherical);
    }
    switch (config.ablation) {
    case Ablation::no_spherical:
      tr.z_star = tr.x_h;
      break;
    case Ablation::no_hyperbolic:
      tr.z_star = tr.y_s;
      break;
    default:
      tr.z_star = mf::barycentric_fuse(tr.x_h, tr.y_s, tr.alpha, c, config.margin);
      check_finite(tr.z_star, Stage::fusion);
      tr.stages.push_back(Stage::fusion);
      break;
    }
    tr.r = mf::log_map(tr.z_star, c);
    tr.stages.push_back(Stage::readout);
  }
  check_finite(tr.r, Stage::readout);

  tr.logits = params.matrix(kClsWeight) * tr.r + params.vector(kClsBias);
  check_finite(tr.logits, Stage::classify);
  tr.y_hat = softmax(tr.logits);
  tr.stages.push_back(Stage::classify);
  return tr;
}

void backward(const ForwardTrace &tr, const ParameterStore &params, const ModelConfig &config, int label,
              ParameterStore &grads) {
  if (label < 0 || label >= kNumClasses) {
    throw InvalidArgument("label out of range");
  }
  if (!grads.same_layout(params) || tr.layers.size() != config.conv_layers ||
      tr.u.size() != static_cast<Eigen::Index>(config.utterance_dim)) {
    throw ShapeError("backward: trace, parameters and gradient store disagree");
  }
  grads.set_zero();

  Eigen::Vector2d g_logits = tr.y_hat;
  g_logits[label] -= 1.0;
  grads.matrix(kClsWeight).noalias() = g_logits * tr.r.transpose();
  grads.vector(kClsBias) = g_logits;
  const Eigen::VectorXd g_r = params.matrix(kClsWeight).transpose() * g_logits;

  const double c = tr.curvature;
  double g_c = 0.0;
  double g_alpha = 0.0;
  Eigen::VectorXd g_uh = Eigen::VectorXd::Zero(tr.u.size());
  Eigen::VectorXd g_us = Eigen::VectorXd::Zero(tr.u.size());
  Eigen::VectorXd g_u = Eigen::VectorXd::Zero(tr.u.size());

  if (config.ablation == Ablation::euclidean_fusion) {
    g_uh = tr.alpha * g_r;
    g_us = (1.0 - tr.alpha) * g_r;
    g_alpha += g_r.dot(tr.u_h - tr.u_s);
  } else {
    const mf::PointCotangent readout = mf::log_map_vjp(tr.z_star, c, g_r);
    g_c += readout.c;
    Eigen::VectorXd g_xh;
    Eigen::VectorXd g_ys;
    switch (config.ablation) {
    case Ablation::no_spherical:
      g_xh = readout.point;
      break;
    case Ablation::no_hyperbolic:
      g_ys = readout.point;
      break;
    default: {
      const mf::FuseCotangent fuse =
          mf::barycentric_fuse_vjp(tr.x_h, tr.y_s, tr.alpha, c, readout.point, config.margin);
      g_xh = fuse.x_h;
      g_ys = fuse.y_s;
      g_alpha += fuse.alpha;
      g_c += fuse.c;
      break;
    }
    }
    if (config.uses_hyperbolic()) {
      const mf::PointCotangent hyp = mf::exp_map_vjp(tr.u_h, c, g_xh);
      g_uh = hyp.point;
      g_c += hyp.c;
    }
    if (config.uses_spherical()) {
      const mf::PointCotangent sph = mf::stereographic_to_ball_vjp(tr.x_s, c, g_ys, config.shrink, config.margin);
      g_c += sph.c;
      if (!tr.sphere_degenerate) {
        g_u = mf::sphere_normalize_vjp(tr.u, sph.point);
      }
    }
  }

  grads.scalar(kRho) = g_c * mf::Curvature(params.scalar(kRho), config.c_min).dvalue_drho();

  g_u += tr.alpha * g_uh + (1.0 - tr.alpha) * g_us;
  g_alpha += tr.u.dot(g_uh - g_us);
  if (config.gated()) {
    const double g_pre = g_alpha * tr.alpha * (1.0 - tr.alpha);
    grads.vector(kGateWeight) = g_pre * tr.u;
    grads.scalar(kGateBias) = g_pre;
    g_u += g_pre * params.vector(kGateWeight);
  }

  const Eigen::VectorXd g_upre = tr.dropout_mask.size() > 0 ? Eigen::VectorXd(g_u.cwiseProduct(tr.dropout_mask)) : g_u;
  grads.matrix(kProjWeight).noalias() = g_upre * tr.pooled.transpose();
  grads.vector(kProjBias) = g_upre;
  const Eigen::VectorXd g_pooled = params.matrix(kProjWeight).transpose() * g_upre;

  const Eigen::Index frames = tr.encoded().cols();
  Eigen::MatrixXd g_act = (g_pooled / static_cast<double>(frames)).replicate(1, frames);
  for (std::size_t l = config.conv_layers; l-- > 0;) {
    const ConvLayerCache &cache = tr.layers[l];
    const Eigen::MatrixXd g_pre = (cache.activations.array() > 0.0).select(g_act, 0.0);
    grads.matrix(conv_weight(l)).noalias() = g_pre * cache.columns.transpose();
    grads.vector(conv_bias(l)) = g_pre.rowwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd g_columns = params.matrix(conv_weight(l)).transpose() * g_pre;
      g_act = fold(g_columns, tr.layers[l - 1].activations.rows(), config.kernel_size);
    }
  }
}

ParameterStore backward(const ForwardTrace &trace, const ParameterStore &params, const ModelConfig &config,
                        int label) {
  ParameterStore grads = params.zeros_like();
  backward(trace, params, config, label, grads);
  return grads;
}

double predict_score(const EmbeddingSequence &seq, const ParameterStore &params, const ModelConfig &config) {
  return forward(seq, params, config, Mode::eval).y_hat[kSpoof];
}

} // namespace rhyme
