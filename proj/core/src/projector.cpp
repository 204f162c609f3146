#include "tasu/projector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <fmt/format.h>

#include "tasu/error.hpp"
#include "tasu/rng.hpp"

namespace tasu {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void fill_uniform(std::vector<double>& v, double bound, RngStream& rng) {
  for (double& x : v) x = rng.uniform(-bound, bound);
}

// Per-example activations and gradient buffers, sized once per call.
struct Workspace {
  explicit Workspace(const ProjectorModel& m, std::size_t classes)
      : x(m.input_dim), z1(m.bottleneck), a(m.bottleneck), y(m.output_dim), logit(classes),
        g_logit(classes), g_y(m.output_dim), g_a(m.bottleneck) {}

  std::vector<double> x, z1, a, y, logit;
  std::vector<double> g_logit, g_y, g_a;
};

void check_compatible(const ProjectorModel& model, const FrozenDecoder& decoder,
                      const FrameDataset& data) {
  model.check_shapes();
  if (decoder.embed_dim != model.output_dim) {
    throw ShapeMismatch(fmt::format("decoder expects {}-dim embeddings, projector emits {}",
                                    decoder.embed_dim, model.output_dim));
  }
  if (decoder.readout.size() != decoder.vocab_size * decoder.embed_dim) {
    throw ShapeMismatch("decoder readout size disagrees with its dims");
  }
  if (data.dim != model.input_dim) {
    throw ShapeMismatch(
        fmt::format("frames have {} entries, projector expects {}", data.dim, model.input_dim));
  }
}

// Forward pass for ws.x; fills z1, a, y, logit.
void forward_into(const ProjectorModel& m, const FrozenDecoder& dec, Workspace& ws) {
  const std::size_t in = m.input_dim, hid = m.bottleneck, out = m.output_dim;
  for (std::size_t h = 0; h < hid; ++h) {
    const double* row = m.w1.data() + h * in;
    double acc = m.b1[h];
    for (std::size_t v = 0; v < in; ++v) acc += row[v] * ws.x[v];
    ws.z1[h] = acc;
    ws.a[h] = acc * sigmoid(acc);
  }
  for (std::size_t d = 0; d < out; ++d) {
    const double* row = m.w2.data() + d * hid;
    double acc = m.b2[d];
    for (std::size_t h = 0; h < hid; ++h) acc += row[h] * ws.a[h];
    ws.y[d] = acc;
  }
  for (std::size_t k = 0; k < dec.vocab_size; ++k) {
    const double* row = dec.readout.data() + k * out;
    double acc = 0.0;
    for (std::size_t d = 0; d < out; ++d) acc += row[d] * ws.y[d];
    ws.logit[k] = acc;
  }
}

// Cross-entropy of ws.logit against `target`; leaves softmax in ws.g_logit.
double cross_entropy(Workspace& ws, TokenId target) {
  const double peak = *std::max_element(ws.logit.begin(), ws.logit.end());
  double total = 0.0;
  for (std::size_t k = 0; k < ws.logit.size(); ++k) {
    ws.g_logit[k] = std::exp(ws.logit[k] - peak);
    total += ws.g_logit[k];
  }
  for (double& p : ws.g_logit) p /= total;
  return peak + std::log(total) - ws.logit[static_cast<std::size_t>(target)];
}

// Accumulates scale * d(loss)/d(params) into g; ws.g_logit holds the softmax.
void backward_into(const ProjectorModel& m, const FrozenDecoder& dec, Workspace& ws,
                   TokenId target, double scale, ProjectorGradients& g) {
  const std::size_t in = m.input_dim, hid = m.bottleneck, out = m.output_dim;
  ws.g_logit[static_cast<std::size_t>(target)] -= 1.0;
  for (double& v : ws.g_logit) v *= scale;

  std::fill(ws.g_y.begin(), ws.g_y.end(), 0.0);
  for (std::size_t k = 0; k < dec.vocab_size; ++k) {
    const double gk = ws.g_logit[k];
    const double* row = dec.readout.data() + k * out;
    for (std::size_t d = 0; d < out; ++d) ws.g_y[d] += row[d] * gk;
  }

  std::fill(ws.g_a.begin(), ws.g_a.end(), 0.0);
  for (std::size_t d = 0; d < out; ++d) {
    const double gd = ws.g_y[d];
    g.b2[d] += gd;
    const double* w_row = m.w2.data() + d * hid;
    double* g_row = g.w2.data() + d * hid;
    for (std::size_t h = 0; h < hid; ++h) {
      g_row[h] += gd * ws.a[h];
      ws.g_a[h] += w_row[h] * gd;
    }
  }

  for (std::size_t h = 0; h < hid; ++h) {
    const double z = ws.z1[h];
    const double s = sigmoid(z);
    const double gz = ws.g_a[h] * s * (1.0 + z * (1.0 - s));
    g.b1[h] += gz;
    double* g_row = g.w1.data() + h * in;
    for (std::size_t v = 0; v < in; ++v) g_row[v] += gz * ws.x[v];
  }
}

void load(Workspace& ws, std::span<const float> frame) {
  for (std::size_t v = 0; v < frame.size(); ++v) ws.x[v] = frame[v];
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void check_targets(const FrameDataset& data, std::span<const std::size_t> batch,
                   std::size_t classes) {
  for (std::size_t i : batch) {
    if (i >= data.size()) throw ShapeMismatch(fmt::format("batch index {} out of range", i));
    const TokenId t = data.targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) throw TokenOutOfRange(t, classes);
  }
}

double batch_loss(const ProjectorModel& model, const FrozenDecoder& decoder,
                  const FrameDataset& data, std::span<const std::size_t> batch,
                  ProjectorGradients* grads) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  Workspace ws(model, decoder.vocab_size);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i : batch) {
    load(ws, data.feature(i));
    forward_into(model, decoder, ws);
    const TokenId target = data.targets[i];
    total += cross_entropy(ws, target);
    if (grads) backward_into(model, decoder, ws, target, scale, *grads);
  }
  return total * scale;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const ProjectorModel& shape)
      : config_(config), first_(ProjectorModel::zeros(shape.input_dim, shape.bottleneck,
                                                      shape.output_dim)),
        second_(first_) {}

  void step(ProjectorModel& model, const ProjectorGradients& grads) {
    ++t_;
    auto params = model.tensors();
    auto g = grads.tensors();
    auto m = first_.tensors();
    auto v = second_.tensors();
    const double lr = config_.learning_rate;
    if (config_.optimizer == OptimizerKind::kSgd) {
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size(); ++i) params[p][i] -= lr * g[p][i];
      }
      return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size(); ++i) {
        const double gi = g[p][i];
        m[p][i] = b1 * m[p][i] + (1.0 - b1) * gi;
        v[p][i] = b2 * v[p][i] + (1.0 - b2) * gi * gi;
        const double m_hat = m[p][i] / c1;
        const double v_hat = v[p][i] / c2;
        params[p][i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& config_;
  ProjectorModel first_;
  ProjectorModel second_;
  std::uint64_t t_ = 0;
};

void zero(ProjectorGradients& g) {
  for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 0.0);
}

}  // namespace

ProjectorModel ProjectorModel::zeros(std::size_t input_dim, std::size_t bottleneck,
                                     std::size_t output_dim) {
  if (input_dim == 0 || bottleneck == 0 || output_dim == 0) {
    throw ShapeMismatch("projector dimensions must be positive");
  }
  ProjectorModel m;
  m.input_dim = input_dim;
  m.bottleneck = bottleneck;
  m.output_dim = output_dim;
  m.w1.assign(bottleneck * input_dim, 0.0);
  m.b1.assign(bottleneck, 0.0);
  m.w2.assign(output_dim * bottleneck, 0.0);
  m.b2.assign(output_dim, 0.0);
  return m;
}

ProjectorModel ProjectorModel::random(std::size_t input_dim, std::size_t bottleneck,
                                      std::size_t output_dim, std::uint64_t seed) {
  ProjectorModel m = zeros(input_dim, bottleneck, output_dim);
  RngStream rng(seed, Stage::kProjectorInit);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(bottleneck));
  fill_uniform(m.w1, bound1, rng);
  fill_uniform(m.b1, bound1, rng);
  fill_uniform(m.w2, bound2, rng);
  fill_uniform(m.b2, bound2, rng);
  return m;
}

std::vector<std::span<double>> ProjectorModel::tensors() { return {w1, b1, w2, b2}; }

std::vector<std::span<const double>> ProjectorModel::tensors() const {
  return {w1, b1, w2, b2};
}

std::size_t ProjectorModel::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

bool ProjectorModel::all_finite() const {
  for (auto t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void ProjectorModel::check_shapes() const {
  if (w1.size() != bottleneck * input_dim || b1.size() != bottleneck ||
      w2.size() != output_dim * bottleneck || b2.size() != output_dim) {
    throw ShapeMismatch(fmt::format("projector tensors disagree with dims ({}, {}, {})",
                                    input_dim, bottleneck, output_dim));
  }
}

FrozenDecoder FrozenDecoder::from_seed(std::size_t vocab_size, std::size_t embed_dim,
                                       std::uint64_t seed) {
  FrozenDecoder dec;
  dec.vocab_size = vocab_size;
  dec.embed_dim = embed_dim;
  dec.readout.resize(vocab_size * embed_dim);
  RngStream rng(seed, Stage::kDecoderInit);
  fill_uniform(dec.readout, 1.0, rng);
  return dec;
}

std::uint64_t FrozenDecoder::fingerprint() const {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  auto mix = [&hash](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 0x100000001b3ull;
    }
  };
  const std::uint64_t dims[2] = {vocab_size, embed_dim};
  mix(dims, sizeof(dims));
  mix(readout.data(), readout.size() * sizeof(double));
  return hash;
}

void FrameDataset::add(std::span<const float> frame, TokenId target) {
  if (frame.size() != dim) {
    throw ShapeMismatch(fmt::format("frame has {} entries, dataset holds {}", frame.size(), dim));
  }
  features.insert(features.end(), frame.begin(), frame.end());
  targets.push_back(target);
}

void FrameDataset::append(const FrameDataset& other) {
  if (other.empty()) return;
  if (other.dim != dim) throw ShapeMismatch("cannot append datasets of different width");
  features.insert(features.end(), other.features.begin(), other.features.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

double silu(double z) { return z * sigmoid(z); }

std::vector<double> forward(const ProjectorModel& model, std::span<const double> input) {
  model.check_shapes();
  if (input.size() != model.input_dim) {
    throw ShapeMismatch(fmt::format("input has {} entries, projector expects {}", input.size(),
                                    model.input_dim));
  }
  std::vector<double> hidden(model.bottleneck);
  for (std::size_t h = 0; h < model.bottleneck; ++h) {
    double acc = model.b1[h];
    for (std::size_t v = 0; v < model.input_dim; ++v) {
      acc += model.w1[h * model.input_dim + v] * input[v];
    }
    hidden[h] = silu(acc);
  }
  std::vector<double> out(model.output_dim);
  for (std::size_t d = 0; d < model.output_dim; ++d) {
    double acc = model.b2[d];
    for (std::size_t h = 0; h < model.bottleneck; ++h) {
      acc += model.w2[d * model.bottleneck + h] * hidden[h];
    }
    out[d] = acc;
  }
  return out;
}

std::vector<double> forward(const ProjectorModel& model, std::span<const float> input) {
  std::vector<double> wide(input.begin(), input.end());
  return forward(model, std::span<const double>(wide));
}

std::vector<double> logits(const ProjectorModel& model, const FrozenDecoder& decoder,
                           std::span<const float> input) {
  const std::vector<double> embedding = forward(model, input);
  if (decoder.embed_dim != embedding.size()) {
    throw ShapeMismatch("decoder and projector output dims differ");
  }
  std::vector<double> out(decoder.vocab_size);
  for (std::size_t k = 0; k < decoder.vocab_size; ++k) {
    double acc = 0.0;
    for (std::size_t d = 0; d < decoder.embed_dim; ++d) {
      acc += decoder.readout[k * decoder.embed_dim + d] * embedding[d];
    }
    out[k] = acc;
  }
  return out;
}

TokenId classify(const ProjectorModel& model, const FrozenDecoder& decoder,
                 std::span<const float> input) {
  const std::vector<double> scores = logits(model, decoder, input);
  return argmax(std::span<const double>(scores));
}

LossAndGrads loss_and_grads(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& data, std::span<const std::size_t> batch) {
  check_compatible(model, decoder, data);
  check_targets(data, batch, decoder.vocab_size);
  LossAndGrads out{0.0, ProjectorModel::zeros(model.input_dim, model.bottleneck,
                                              model.output_dim)};
  out.loss = batch_loss(model, decoder, data, batch, &out.grads);
  if (!std::isfinite(out.loss)) throw NonFiniteLoss(0);
  return out;
}

LossAndGrads loss_and_grads(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& data) {
  const auto all = iota_indices(data.size());
  return loss_and_grads(model, decoder, data, all);
}

double mean_loss(const ProjectorModel& model, const FrozenDecoder& decoder,
                 const FrameDataset& data, std::span<const std::size_t> batch) {
  check_compatible(model, decoder, data);
  check_targets(data, batch, decoder.vocab_size);
  return batch_loss(model, decoder, data, batch, nullptr);
}

double mean_loss(const ProjectorModel& model, const FrozenDecoder& decoder,
                 const FrameDataset& data) {
  const auto all = iota_indices(data.size());
  return mean_loss(model, decoder, data, all);
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError(fmt::format("unknown optimizer '{}' (expected sgd or adam)", name));
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

void TrainConfig::check() const {
  if (!(learning_rate >= 0.0 && std::isfinite(learning_rate))) {
    throw ConfigError(fmt::format("learning_rate must be finite and >= 0, got {}", learning_rate));
  }
  if (epochs < 0) throw ConfigError(fmt::format("epochs must be >= 0, got {}", epochs));
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw ConfigError("adam hyperparameters out of range");
  }
}

TrainResult train(const ProjectorModel& model, const FrozenDecoder& decoder,
                  const FrameDataset& data, const TrainConfig& config,
                  const FrameDataset* heldout) {
  config.check();
  check_compatible(model, decoder, data);
  if (data.empty()) throw ConfigError("training set is empty");
  check_targets(data, iota_indices(data.size()), decoder.vocab_size);

  TrainResult result;
  result.model = model;
  ProjectorModel best = model;
  double best_heldout = std::numeric_limits<double>::infinity();

  Optimizer optimizer(config, model);
  ProjectorGradients grads =
      ProjectorModel::zeros(model.input_dim, model.bottleneck, model.output_dim);
  std::vector<std::size_t> order = iota_indices(data.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream shuffle_rng(config.seed, Stage::kShuffle, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());

    double weighted = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      zero(grads);
      const double loss = batch_loss(result.model, decoder, data, batch, &grads);
      if (!std::isfinite(loss)) throw NonFiniteLoss(result.steps);
      weighted += loss * static_cast<double>(batch.size());
      optimizer.step(result.model, grads);
      ++result.steps;
    }
    result.epoch_loss.push_back(weighted / static_cast<double>(data.size()));

    if (heldout && !heldout->empty()) {
      const double held = mean_loss(result.model, decoder, *heldout);
      if (!std::isfinite(held)) throw NonFiniteLoss(result.steps);
      result.heldout_loss.push_back(held);
      if (held < best_heldout) {
        best_heldout = held;
        best = result.model;
        result.selected_epoch = static_cast<std::size_t>(epoch) + 1;
      }
    } else {
      result.selected_epoch = static_cast<std::size_t>(epoch) + 1;
    }
  }
  if (heldout && !heldout->empty() && result.selected_epoch > 0) result.model = std::move(best);
  return result;
}

double frame_accuracy(const ProjectorModel& model, const FrozenDecoder& decoder,
                      const FrameDataset& data) {
  check_compatible(model, decoder, data);
  if (data.empty()) return 0.0;
  Workspace ws(model, decoder.vocab_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    load(ws, data.feature(i));
    forward_into(model, decoder, ws);
    if (argmax(std::span<const double>(ws.logit)) == data.targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

GradCheckReport gradient_check(const ProjectorModel& model, const FrozenDecoder& decoder,
                               const FrameDataset& data, double h) {
  const LossAndGrads analytic = loss_and_grads(model, decoder, data);
  const auto all = iota_indices(data.size());
  ProjectorModel probe = model;
  GradCheckReport report;
  auto probe_tensors = probe.tensors();
  auto grad_tensors = analytic.grads.tensors();
  for (std::size_t p = 0; p < probe_tensors.size(); ++p) {
    double worst = 0.0;
    for (std::size_t i = 0; i < probe_tensors[p].size(); ++i) {
      double& theta = probe_tensors[p][i];
      const double saved = theta;
      theta = saved + h;
      const double plus = batch_loss(probe, decoder, data, all, nullptr);
      theta = saved - h;
      const double minus = batch_loss(probe, decoder, data, all, nullptr);
      theta = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double exact = grad_tensors[p][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
      ++report.parameters_checked;
    }
    report.tensor_max_relative_error.push_back(worst);
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace tasu
