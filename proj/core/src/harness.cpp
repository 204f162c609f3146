#include "tasu/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tasu/error.hpp"

namespace tasu {
namespace {

// Salts for seeds derived from the data seed.
constexpr std::uint64_t kCpsTrainSalt = 0xC0FFEE01;
constexpr std::uint64_t kCpsHeldoutSalt = 0xC0FFEE02;
constexpr std::uint64_t kDomainBSalt = 0xB0B0B0B0;

// Most frequent label among labels[rows[begin..end)]; ties go to the label
// seen first.
TokenId majority_label(std::span<const TokenId> labels, std::span<const std::size_t> rows,
                       std::size_t begin, std::size_t end) {
  std::map<TokenId, std::size_t> counts;
  std::size_t best_count = 0;
  for (std::size_t i = begin; i < end; ++i) {
    best_count = std::max(best_count, ++counts[labels[rows[i]]]);
  }
  for (std::size_t i = begin; i < end; ++i) {
    if (counts[labels[rows[i]]] == best_count) return labels[rows[i]];
  }
  return labels[rows[begin]];
}

// Appends LSD output frames of `posteriors` with majority labels.
void append_compacted(const PosteriorSequence& posteriors, std::span<const TokenId> labels,
                      const LsdConfig& lsd_config, FrameDataset& out, LsdReport* report) {
  const LsdResult compact = lsd(posteriors, lsd_config);
  for (std::size_t j = 0; j + 1 < compact.run_offsets.size(); ++j) {
    out.add(compact.posteriors.frame(j),
            majority_label(labels, compact.kept_frames, compact.run_offsets[j],
                           compact.run_offsets[j + 1]));
  }
  if (report) *report = compact.report;
}

std::vector<TokenSequence> concat(std::vector<TokenSequence> a, std::vector<TokenSequence> b) {
  a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
  return a;
}

nlohmann::json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
          {"batch_size", t.batch_size},       {"seed", t.seed},
          {"optimizer", to_string(t.optimizer)}, {"beta1", t.beta1},
          {"beta2", t.beta2},                 {"epsilon", t.epsilon}};
}

}  // namespace

// ---------------------------------------------------------------- metrics

std::size_t edit_distance(std::span<const TokenId> ref, std::span<const TokenId> hyp) {
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t above = row[j];
      const std::size_t substitute = diagonal + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      row[j] = std::min({above + 1, row[j - 1] + 1, substitute});
      diagonal = above;
    }
  }
  return row[hyp.size()];
}

double wer(std::span<const TokenId> ref, std::span<const TokenId> hyp, TokenId blank_id) {
  check_blank_free(ref, blank_id);
  check_blank_free(hyp, blank_id);
  const auto edits = static_cast<double>(edit_distance(ref, hyp));
  return ref.empty() ? edits : edits / static_cast<double>(ref.size());
}

// ------------------------------------------------------------ frame sets

FrameLabeledSet build_training_set(std::span<const TokenSequence> corpus,
                                   const CpsConfig& config, std::size_t vocab_size,
                                   std::uint64_t seed,
                                   const std::optional<LsdConfig>& lsd_config) {
  FrameLabeledSet out;
  out.data.dim = vocab_size;
  std::size_t skipped = 0;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const CpsTrace trace = cps_trace(corpus[u], config, vocab_size, seed, u);
    if (trace.posteriors.empty()) {
      ++skipped;
      continue;
    }
    if (lsd_config) {
      const std::size_t before = out.data.size();
      append_compacted(trace.posteriors, trace.labels, *lsd_config, out.data, nullptr);
      // Merged frames lose a single origin; tag them by their label.
      for (std::size_t i = before; i < out.data.size(); ++i) {
        out.origins.push_back(out.data.targets[i] == config.blank_id ? FrameOrigin::kBlankInsert
                                                                     : FrameOrigin::kSmoothed);
      }
      continue;
    }
    for (std::size_t t = 0; t < trace.posteriors.num_frames(); ++t) {
      out.data.add(trace.posteriors.frame(t), trace.labels[t]);
      out.origins.push_back(trace.origins[t]);
    }
  }
  if (skipped > 0) {
    spdlog::warn("skipped {} of {} utterances that lost every frame to deletion", skipped,
                 corpus.size());
  }
  return out;
}

EvalSet build_eval_set(std::span<const TokenSequence> corpus, const SynthConfig& synth,
                       const LsdConfig& lsd_config, std::size_t vocab_size, TokenId blank_id,
                       std::uint64_t seed, Stage stage) {
  EvalSet out;
  out.blank_id = blank_id;
  out.frames.dim = vocab_size;
  out.offsets.push_back(0);
  double ratio_sum = 0.0;
  std::size_t finite = 0;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const Utterance utt = synth_utterance(corpus[u], synth, vocab_size, blank_id, seed, u, stage);
    LsdReport report;
    append_compacted(utt.posteriors, utt.frame_labels, lsd_config, out.frames, &report);
    out.frames_before_lsd += report.frames_in;
    if (std::isfinite(report.downsampling_ratio)) {
      ratio_sum += report.downsampling_ratio;
      ++finite;
    }
    out.references.push_back(corpus[u]);
    out.offsets.push_back(out.frames.size());
  }
  out.mean_downsampling_ratio = finite ? ratio_sum / static_cast<double>(finite) : 1.0;
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"arm", r.arm},
          {"wer", r.wer},
          {"frame_accuracy", r.frame_accuracy},
          {"train_frame_accuracy", r.train_frame_accuracy},
          {"transfer_gap", r.transfer_gap},
          {"downsampling_ratio", r.downsampling_ratio},
          {"utterances", r.utterances},
          {"frames", r.frames},
          {"reference_tokens", r.reference_tokens},
          {"edits", r.edits},
          {"config", r.config},
          {"seeds", r.seeds}};
}

TokenSequence decode_frames(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& frames, std::size_t begin, std::size_t end,
                            TokenId blank_id) {
  TokenSequence path;
  path.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    path.push_back(classify(model, decoder, frames.feature(i)));
  }
  return collapse_path(path, blank_id);
}

EvalReport evaluate(const ProjectorModel& model, const FrozenDecoder& decoder,
                    const EvalSet& eval, std::string arm) {
  EvalReport report;
  report.arm = std::move(arm);
  report.utterances = eval.references.size();
  report.frames = eval.frames.size();
  report.downsampling_ratio = eval.mean_downsampling_ratio;
  for (std::size_t u = 0; u < eval.references.size(); ++u) {
    const TokenSequence hyp = decode_frames(model, decoder, eval.frames, eval.offsets[u],
                                            eval.offsets[u + 1], eval.blank_id);
    report.edits += edit_distance(eval.references[u], hyp);
    report.reference_tokens += eval.references[u].size();
  }
  report.wer = report.reference_tokens
                   ? static_cast<double>(report.edits) / static_cast<double>(report.reference_tokens)
                   : static_cast<double>(report.edits);
  report.frame_accuracy = frame_accuracy(model, decoder, eval.frames);
  return report;
}

TasuOutcome run_tasu(std::span<const TokenSequence> train_text,
                     std::span<const TokenSequence> heldout_text, const EvalSet& eval,
                     const CpsConfig& cps, const std::optional<LsdConfig>& lsd_on_cps,
                     const ProjectorModel& init, const FrozenDecoder& decoder,
                     const TrainConfig& train_config, std::uint64_t cps_seed) {
  const std::size_t vocab = init.input_dim;
  const FrameLabeledSet train_set =
      build_training_set(train_text, cps, vocab, derive_seed(cps_seed, kCpsTrainSalt), lsd_on_cps);
  const FrameLabeledSet heldout_set = build_training_set(
      heldout_text, cps, vocab, derive_seed(cps_seed, kCpsHeldoutSalt), lsd_on_cps);

  TasuOutcome out;
  out.training = train(init, decoder, train_set.data, train_config,
                       heldout_set.data.empty() ? nullptr : &heldout_set.data);
  out.model = out.training.model;
  out.report = evaluate(out.model, decoder, eval, "tasu");
  out.report.train_frame_accuracy = frame_accuracy(out.model, decoder, train_set.data);
  out.report.transfer_gap = out.report.train_frame_accuracy - out.report.frame_accuracy;
  return out;
}

TasuOutcome run_sft(const ProjectorModel& start, const FrozenDecoder& decoder,
                    const FrameDataset& paired, const FrameDataset* paired_heldout,
                    const EvalSet& eval, const TrainConfig& train_config) {
  TasuOutcome out;
  out.training = train(start, decoder, paired, train_config, paired_heldout);
  out.model = out.training.model;
  out.report = evaluate(out.model, decoder, eval, "sft");
  out.report.train_frame_accuracy = frame_accuracy(out.model, decoder, paired);
  out.report.transfer_gap = out.report.train_frame_accuracy - out.report.frame_accuracy;
  return out;
}

// ------------------------------------------------------------ experiments

ExperimentConfig::ExperimentConfig() {
  cps.blank_id = blank_id;
  train.seed = model_seed;
  sft_train.seed = model_seed;
  sft_train.epochs = 3;
}

void ExperimentConfig::check() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= vocab_size) {
    throw ConfigError(fmt::format("blank_id {} outside [0, {})", blank_id, vocab_size));
  }
  if (cps.blank_id != blank_id) throw ConfigError("cps blank_id disagrees with vocabulary");
  if (len_low < 1 || len_low > len_high) throw ConfigError("need 1 <= len_low <= len_high");
  cps.check();
  lsd.check();
  synth.check(vocab_size);
  train.check();
  sft_train.check();
  token_pool(vocab_size, blank_id, token_first, token_last);
  if (model.bottleneck == 0 || model.output_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (domain_b) {
    domain_b->synth.check(vocab_size);
    token_pool(vocab_size, blank_id, domain_b->token_first, domain_b->token_last);
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {
      {"vocab_size", vocab_size},
      {"blank_id", blank_id},
      {"corpus",
       {{"train_utts", train_utts},
        {"heldout_utts", heldout_utts},
        {"eval_utts", eval_utts},
        {"len_low", len_low},
        {"len_high", len_high},
        {"token_first", token_first},
        {"token_last", token_last}}},
      {"cps",
       {{"lambda_low", cps.lambda_low},
        {"lambda_high", cps.lambda_high},
        {"p_del", cps.p_del},
        {"p_ins", cps.p_ins},
        {"per_token_alpha", cps.per_token_alpha},
        {"apply_lsd", lsd_on_cps}}},
      {"lsd", {{"tau", lsd.tau}}},
      {"synth", tasu::to_json(synth)},
      {"model", {{"bottleneck", model.bottleneck}, {"out_dim", model.output_dim}}},
      {"train", train_json(train)},
      {"sft",
       {{"train_utts", sft_utts}, {"heldout_utts", sft_heldout_utts}, {"train", train_json(sft_train)}}},
  };
  if (domain_b) {
    j["domain_b"] = {{"synth", tasu::to_json(domain_b->synth)},
                     {"token_first", domain_b->token_first},
                     {"token_last", domain_b->token_last},
                     {"text_utts", domain_b->text_utts},
                     {"eval_utts", domain_b->eval_utts}};
  }
  return j;
}

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)),
      decoder_(FrozenDecoder::from_seed(config_.vocab_size, config_.model.output_dim,
                                        config_.model_seed)) {
  config_.check();
}

ProjectorModel Experiment::initial_model() const {
  return ProjectorModel::random(config_.vocab_size, config_.model.bottleneck,
                                config_.model.output_dim, config_.model_seed);
}

std::vector<TokenSequence> Experiment::train_text() const {
  const auto& c = config_;
  auto pool = token_pool(c.vocab_size, c.blank_id, c.token_first, c.token_last);
  auto text = gen_corpus(c.train_utts, c.len_low, c.len_high, pool, c.data_seed,
                         Stage::kCorpusTrain);
  if (c.domain_b) {
    auto pool_b = token_pool(c.vocab_size, c.blank_id, c.domain_b->token_first,
                             c.domain_b->token_last);
    text = concat(std::move(text),
                  gen_corpus(c.domain_b->text_utts, c.len_low, c.len_high, pool_b,
                             derive_seed(c.data_seed, kDomainBSalt), Stage::kCorpusTrain));
  }
  return text;
}

std::vector<TokenSequence> Experiment::heldout_text() const {
  const auto& c = config_;
  auto pool = token_pool(c.vocab_size, c.blank_id, c.token_first, c.token_last);
  auto text = gen_corpus(c.heldout_utts, c.len_low, c.len_high, pool, c.data_seed,
                         Stage::kCorpusHeldout);
  if (c.domain_b) {
    auto pool_b = token_pool(c.vocab_size, c.blank_id, c.domain_b->token_first,
                             c.domain_b->token_last);
    text = concat(std::move(text),
                  gen_corpus(c.heldout_utts, c.len_low, c.len_high, pool_b,
                             derive_seed(c.data_seed, kDomainBSalt), Stage::kCorpusHeldout));
  }
  return text;
}

const EvalSet& Experiment::eval_set() {
  if (!eval_) {
    const auto& c = config_;
    auto pool = token_pool(c.vocab_size, c.blank_id, c.token_first, c.token_last);
    auto text =
        gen_corpus(c.eval_utts, c.len_low, c.len_high, pool, c.data_seed, Stage::kCorpusEval);
    eval_ = build_eval_set(text, c.synth, c.lsd, c.vocab_size, c.blank_id, c.data_seed,
                           Stage::kSynthEval);
  }
  return *eval_;
}

const EvalSet& Experiment::eval_set_b() {
  if (!config_.domain_b) throw ConfigError("experiment has no domain_b profile");
  if (!eval_b_) {
    const auto& c = config_;
    const auto& b = *c.domain_b;
    const std::uint64_t seed = derive_seed(c.data_seed, kDomainBSalt);
    auto pool = token_pool(c.vocab_size, c.blank_id, b.token_first, b.token_last);
    auto text = gen_corpus(b.eval_utts, c.len_low, c.len_high, pool, seed, Stage::kCorpusEval);
    eval_b_ = build_eval_set(text, b.synth, c.lsd, c.vocab_size, c.blank_id, seed,
                             Stage::kSynthEval);
  }
  return *eval_b_;
}

const FrameDataset& Experiment::sft_set() {
  if (!sft_) {
    const auto& c = config_;
    auto pool = token_pool(c.vocab_size, c.blank_id, c.token_first, c.token_last);
    auto text =
        gen_corpus(c.sft_utts, c.len_low, c.len_high, pool, c.data_seed, Stage::kCorpusSft);
    sft_ = build_eval_set(text, c.synth, c.lsd, c.vocab_size, c.blank_id, c.data_seed,
                          Stage::kSynthSft)
               .frames;
  }
  return *sft_;
}

const FrameDataset& Experiment::sft_heldout_set() {
  if (!sft_heldout_) {
    const auto& c = config_;
    auto pool = token_pool(c.vocab_size, c.blank_id, c.token_first, c.token_last);
    auto text = gen_corpus(c.sft_heldout_utts, c.len_low, c.len_high, pool, c.data_seed,
                           Stage::kCorpusSftHeldout);
    sft_heldout_ = build_eval_set(text, c.synth, c.lsd, c.vocab_size, c.blank_id, c.data_seed,
                                  Stage::kSynthSftHeldout)
                       .frames;
  }
  return *sft_heldout_;
}

TasuOutcome Experiment::tasu() { return tasu_with(config_.cps); }

TasuOutcome Experiment::tasu_with(const CpsConfig& cps) {
  const auto train = train_text();
  const auto heldout = heldout_text();
  std::optional<LsdConfig> lsd_on_cps;
  if (config_.lsd_on_cps) lsd_on_cps = config_.lsd;
  TasuOutcome out = run_tasu(train, heldout, eval_set(), cps, lsd_on_cps, initial_model(),
                             decoder_, config_.train, config_.data_seed);
  out.report = stamp(std::move(out.report));
  out.report.config["cps"]["p_ins"] = cps.p_ins;
  out.report.config["cps"]["p_del"] = cps.p_del;
  return out;
}

TasuOutcome Experiment::sft_from(const ProjectorModel& start, const std::string& arm) {
  const FrameDataset& heldout = sft_heldout_set();
  TasuOutcome out = run_sft(start, decoder_, sft_set(), heldout.empty() ? nullptr : &heldout,
                            eval_set(), config_.sft_train);
  out.report.arm = arm;
  out.report = stamp(std::move(out.report));
  return out;
}

EvalReport Experiment::chance_baseline() {
  const ProjectorModel zero = ProjectorModel::zeros(config_.vocab_size, config_.model.bottleneck,
                                                    config_.model.output_dim);
  return stamp(evaluate(zero, decoder_, eval_set(), "chance"));
}

nlohmann::json Experiment::seeds_json() const {
  return {{"data", config_.data_seed},
          {"model", config_.model_seed},
          {"train", config_.train.seed},
          {"sft", config_.sft_train.seed}};
}

EvalReport Experiment::stamp(EvalReport report) const {
  report.config = config_.to_json();
  report.seeds = seeds_json();
  return report;
}

}  // namespace tasu
