#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tasu/posterior.hpp"

namespace tasu {

/// Affine -> SiLU -> affine map from a V-dim posterior vector to a D-dim
/// embedding. Weights are row-major: w1 is bottleneck x V, w2 is D x bottleneck.
struct ProjectorModel {
  std::size_t input_dim = 0;
  std::size_t bottleneck = 0;
  std::size_t output_dim = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  static ProjectorModel zeros(std::size_t input_dim, std::size_t bottleneck,
                              std::size_t output_dim);

  /// Every tensor uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static ProjectorModel random(std::size_t input_dim, std::size_t bottleneck,
                               std::size_t output_dim, std::uint64_t seed);

  /// Parameter tensors in declaration order (w1, b1, w2, b2).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;

  bool all_finite() const;
  /// Throws ShapeMismatch if a tensor's size disagrees with the dims.
  void check_shapes() const;

  friend bool operator==(const ProjectorModel&, const ProjectorModel&) = default;
};

/// Gradients share the parameter layout.
using ProjectorGradients = ProjectorModel;

/// Fixed V x D readout standing in for the frozen language model: class
/// logits are readout * embedding. Never updated by training.
struct FrozenDecoder {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 0;
  std::vector<double> readout;

  /// Entries uniform in [-1, 1].
  static FrozenDecoder from_seed(std::size_t vocab_size, std::size_t embed_dim,
                                 std::uint64_t seed);

  /// FNV-1a over the raw parameter bytes.
  std::uint64_t fingerprint() const;

  friend bool operator==(const FrozenDecoder&, const FrozenDecoder&) = default;
};

/// Frames with one target class each, stored flat as float32.
struct FrameDataset {
  std::size_t dim = 0;
  std::vector<float> features;
  std::vector<TokenId> targets;

  std::size_t size() const { return targets.size(); }
  bool empty() const { return targets.empty(); }
  std::span<const float> feature(std::size_t i) const { return {features.data() + i * dim, dim}; }
  void add(std::span<const float> frame, TokenId target);
  void append(const FrameDataset& other);
};

double silu(double z);

std::vector<double> forward(const ProjectorModel& model, std::span<const double> input);
std::vector<double> forward(const ProjectorModel& model, std::span<const float> input);

/// Class logits readout * forward(input).
std::vector<double> logits(const ProjectorModel& model, const FrozenDecoder& decoder,
                           std::span<const float> input);

/// Argmax class (lowest index on ties).
TokenId classify(const ProjectorModel& model, const FrozenDecoder& decoder,
                 std::span<const float> input);

struct LossAndGrads {
  double loss = 0.0;
  ProjectorGradients grads;
};

/// Mean softmax cross-entropy over `batch` (indices into `data`) and its
/// gradient with respect to the projector parameters only.
LossAndGrads loss_and_grads(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& data, std::span<const std::size_t> batch);

/// Whole-dataset variant.
LossAndGrads loss_and_grads(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& data);

/// Mean loss only.
double mean_loss(const ProjectorModel& model, const FrozenDecoder& decoder,
                 const FrameDataset& data, std::span<const std::size_t> batch);
double mean_loss(const ProjectorModel& model, const FrozenDecoder& decoder,
                 const FrameDataset& data);

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer(const std::string& name);
const char* to_string(OptimizerKind kind);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void check() const;
};

struct TrainResult {
  ProjectorModel model;
  /// Mean training loss of each epoch, accumulated over its minibatches.
  std::vector<double> epoch_loss;
  /// Held-out loss after each epoch (empty without a held-out set).
  std::vector<double> heldout_loss;
  /// 1-based epoch whose parameters were returned; 0 when no epoch ran.
  std::size_t selected_epoch = 0;
  std::size_t steps = 0;
};

/// Minibatch training with a seeded shuffle per epoch; single-threaded, so a
/// fixed (model, data, config) reproduces the same parameters bit for bit.
/// With a held-out set, the parameters of the epoch with the lowest held-out
/// loss are returned. Throws NonFiniteLoss on divergence.
TrainResult train(const ProjectorModel& model, const FrozenDecoder& decoder,
                  const FrameDataset& data, const TrainConfig& config,
                  const FrameDataset* heldout = nullptr);

/// Frame accuracy of the argmax classifier on `data`.
double frame_accuracy(const ProjectorModel& model, const FrozenDecoder& decoder,
                      const FrameDataset& data);

struct GradCheckReport {
  double max_relative_error = 0.0;
  /// Per tensor, in declaration order.
  std::vector<double> tensor_max_relative_error;
  std::size_t parameters_checked = 0;
};

/// Compares analytic gradients against central differences with step `h`.
/// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
/// parameters with vanishing gradients from dividing by zero.
inline constexpr double kGradCheckFloor = 1e-6;

GradCheckReport gradient_check(const ProjectorModel& model, const FrozenDecoder& decoder,
                               const FrameDataset& data, double h = 1e-4);

}  // namespace tasu
