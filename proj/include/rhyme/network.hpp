#pragma once

// Differentiable detector: temporal convolution, average pooling, a learned
// gate splitting the utterance vector between a hyperbolic and a spherical
// branch, barycentric fusion in the Poincare ball, and a linear softmax
// classifier on the log-mapped fused point.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rhyme/embedding.hpp"
#include "rhyme/manifold.hpp"
#include "rhyme/params.hpp"

namespace rhyme {

enum class Ablation { full, no_gating, no_spherical, no_hyperbolic, euclidean_fusion };

inline constexpr std::array<Ablation, 5> kAllAblations = {
    Ablation::full, Ablation::no_gating, Ablation::no_spherical, Ablation::no_hyperbolic,
    Ablation::euclidean_fusion};

std::string_view to_string(Ablation a) noexcept;
/// Throws ConfigError for unknown names.
Ablation parse_ablation(std::string_view name);

inline constexpr int kBonafide = 0;
inline constexpr int kSpoof = 1;
inline constexpr int kNumClasses = 2;

struct ModelConfig {
  std::size_t input_dim = 64;
  std::size_t conv_channels = 256;
  std::size_t conv_layers = 2;
  std::size_t kernel_size = 3;
  std::size_t utterance_dim = 128;
  double dropout = 0.1;
  double initial_c = 1.0;
  double c_min = manifold::kDefaultCMin;
  double shrink = manifold::kDefaultShrink;
  double margin = manifold::kDefaultMargin;
  Ablation ablation = Ablation::full;

  /// Throws ConfigError.
  void validate() const;

  bool gated() const noexcept { return ablation != Ablation::no_gating; }
  bool uses_hyperbolic() const noexcept;
  bool uses_spherical() const noexcept;

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

enum class Mode { train, eval };

enum class Stage { encode, pool, dropout, gate, split, hyperbolic, spherical, fusion, readout, classify };

std::string_view to_string(Stage s) noexcept;

struct ConvLayerCache {
  Eigen::MatrixXd columns;     // unfolded input, (C_in * k) x T
  Eigen::MatrixXd activations; // post-ReLU output, C_out x T
};

/// Every intermediate of one forward pass. Manifold fields stay empty for
/// branches the ablation disables.
struct ForwardTrace {
  Mode mode = Mode::eval;
  Ablation ablation = Ablation::full;
  std::vector<ConvLayerCache> layers;
  Eigen::VectorXd pooled;
  Eigen::VectorXd u_pre;
  Eigen::VectorXd dropout_mask; // empty unless dropout ran
  Eigen::VectorXd u;
  double alpha = 0.5;
  Eigen::VectorXd u_h;
  Eigen::VectorXd u_s;
  Eigen::VectorXd x_h;
  Eigen::VectorXd x_s;
  Eigen::VectorXd y_s;
  Eigen::VectorXd z_star;
  bool sphere_degenerate = false;
  Eigen::VectorXd r;
  Eigen::Vector2d logits = Eigen::Vector2d::Zero();
  Eigen::Vector2d y_hat = Eigen::Vector2d::Constant(0.5);
  double curvature = 1.0;
  std::vector<Stage> stages;

  const Eigen::MatrixXd &encoded() const { return layers.back().activations; }
  bool ran(Stage s) const noexcept;
  /// True when any Poincare-ball or sphere map was evaluated.
  bool used_manifold() const noexcept;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); gate bias 0; curvature at
/// config.initial_c. Deterministic in seed.
ParameterStore init_params(const ModelConfig &config, std::uint64_t seed);

/// Stacked same-padded 1D convolutions with ReLU. Returns C x T.
Eigen::MatrixXd conv_encode(const EmbeddingSequence &seq, const ParameterStore &params,
                            const ModelConfig &config);

/// Eval mode needs no rng; train mode with dropout > 0 requires one.
ForwardTrace forward(const EmbeddingSequence &seq, const ParameterStore &params, const ModelConfig &config,
                     Mode mode, std::mt19937_64 *rng = nullptr);

/// Gradient of the cross-entropy loss of one labelled trace, written into
/// grads (overwritten, not accumulated).
void backward(const ForwardTrace &trace, const ParameterStore &params, const ModelConfig &config, int label,
              ParameterStore &grads);
ParameterStore backward(const ForwardTrace &trace, const ParameterStore &params, const ModelConfig &config,
                        int label);

/// Spoof-class probability in eval mode.
double predict_score(const EmbeddingSequence &seq, const ParameterStore &params, const ModelConfig &config);

Eigen::Vector2d softmax(const Eigen::Vector2d &logits) noexcept;

} // namespace rhyme
