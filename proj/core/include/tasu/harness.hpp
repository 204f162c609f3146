#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tasu/cps.hpp"
#include "tasu/lsd.hpp"
#include "tasu/projector.hpp"
#include "tasu/synthvoice.hpp"

namespace tasu {

// ---------------------------------------------------------------- metrics

/// Levenshtein distance with unit substitution, deletion and insertion costs.
std::size_t edit_distance(std::span<const TokenId> ref, std::span<const TokenId> hyp);

/// edit_distance / |ref|. With an empty reference the raw insertion count is
/// returned (0 for an empty hypothesis). Throws BlankInSequence when either
/// side contains `blank_id`.
double wer(std::span<const TokenId> ref, std::span<const TokenId> hyp, TokenId blank_id);

// ------------------------------------------------------------ frame sets

/// Pseudo-posterior frames with their supervision label and CPS origin.
struct FrameLabeledSet {
  FrameDataset data;
  std::vector<FrameOrigin> origins;
};

/// Runs CPS over every utterance (utterance i uses CPS stream i) and keeps
/// the per-frame labels. Utterances that lose every frame are skipped with a
/// warning. With `lsd_config`, each CPS output is also compacted by LSD and
/// merged frames take their majority label.
FrameLabeledSet build_training_set(std::span<const TokenSequence> corpus,
                                   const CpsConfig& config, std::size_t vocab_size,
                                   std::uint64_t seed,
                                   const std::optional<LsdConfig>& lsd_config = std::nullopt);

/// Synthetic-encoder utterances after LSD, with per-frame ground truth taken
/// from the generator's alignment (majority label of each merged run).
struct EvalSet {
  std::vector<TokenSequence> references;
  FrameDataset frames;
  /// Frames of utterance u are [offsets[u], offsets[u+1]).
  std::vector<std::size_t> offsets;
  std::size_t frames_before_lsd = 0;
  double mean_downsampling_ratio = 1.0;
  TokenId blank_id = 0;
};

EvalSet build_eval_set(std::span<const TokenSequence> corpus, const SynthConfig& synth,
                       const LsdConfig& lsd_config, std::size_t vocab_size, TokenId blank_id,
                       std::uint64_t seed, Stage stage = Stage::kSynthEval);

struct EvalReport {
  std::string arm;
  double wer = 0.0;
  double frame_accuracy = 0.0;
  double train_frame_accuracy = 0.0;
  double transfer_gap = 0.0;
  double downsampling_ratio = 1.0;
  std::size_t utterances = 0;
  std::size_t frames = 0;
  std::size_t reference_tokens = 0;
  std::size_t edits = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
};

nlohmann::json to_json(const EvalReport& report);

/// Decodes one utterance: per-frame argmax class, repeats merged, blanks dropped.
TokenSequence decode_frames(const ProjectorModel& model, const FrozenDecoder& decoder,
                            const FrameDataset& frames, std::size_t begin, std::size_t end,
                            TokenId blank_id);

/// Corpus-level WER (total edits / total reference tokens) and frame accuracy.
EvalReport evaluate(const ProjectorModel& model, const FrozenDecoder& decoder,
                    const EvalSet& eval, std::string arm = "eval");

// ------------------------------------------------------------ experiments

struct ModelShape {
  std::size_t bottleneck = 64;
  std::size_t output_dim = 64;
};

/// Everything one experiment needs. Defaults are the desk-scale settings.
struct ExperimentConfig {
  std::size_t vocab_size = 64;
  TokenId blank_id = 63;

  std::uint64_t data_seed = 1;
  std::uint64_t model_seed = 2;

  std::size_t train_utts = 5000;
  std::size_t heldout_utts = 250;
  std::size_t eval_utts = 500;
  std::size_t len_low = 8;
  std::size_t len_high = 32;
  TokenId token_first = 0;
  TokenId token_last = -1;

  CpsConfig cps;
  /// Also pass CPS output through LSD before training (off: the training
  /// path consumes CPS output directly).
  bool lsd_on_cps = false;
  LsdConfig lsd;
  SynthConfig synth;
  ModelShape model;
  TrainConfig train;

  std::size_t sft_utts = 1000;
  std::size_t sft_heldout_utts = 100;
  TrainConfig sft_train;

  struct DomainB {
    SynthConfig synth;
    TokenId token_first = 0;
    TokenId token_last = -1;
    std::size_t text_utts = 5000;  // added to the TASU text corpus
    std::size_t eval_utts = 500;
  };
  std::optional<DomainB> domain_b;

  ExperimentConfig();
  void check() const;
  nlohmann::json to_json() const;
};

/// Products of one experiment run: frozen decoder, trained models, reports.
struct TasuOutcome {
  ProjectorModel model;
  TrainResult training;
  EvalReport report;
};

/// Text-only training on CPS frames, then zero-shot evaluation on `eval`.
TasuOutcome run_tasu(std::span<const TokenSequence> train_text,
                     std::span<const TokenSequence> heldout_text, const EvalSet& eval,
                     const CpsConfig& cps, const std::optional<LsdConfig>& lsd_on_cps,
                     const ProjectorModel& init, const FrozenDecoder& decoder,
                     const TrainConfig& train_config, std::uint64_t cps_seed);

/// Continues training `start` on paired synthetic-encoder frames, then
/// evaluates on `eval`. Zero epochs reproduce the start model's report.
TasuOutcome run_sft(const ProjectorModel& start, const FrozenDecoder& decoder,
                    const FrameDataset& paired, const FrameDataset* paired_heldout,
                    const EvalSet& eval, const TrainConfig& train_config);

/// Corpora, sets and models derived from an ExperimentConfig.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const FrozenDecoder& decoder() const { return decoder_; }
  ProjectorModel initial_model() const;

  /// TASU text: domain A corpus plus domain B text when configured.
  std::vector<TokenSequence> train_text() const;
  std::vector<TokenSequence> heldout_text() const;
  const EvalSet& eval_set();
  /// Domain B eval set; throws ConfigError when no domain B is configured.
  const EvalSet& eval_set_b();
  const FrameDataset& sft_set();
  const FrameDataset& sft_heldout_set();

  TasuOutcome tasu();
  TasuOutcome tasu_with(const CpsConfig& cps);
  TasuOutcome sft_from(const ProjectorModel& start, const std::string& arm);
  /// Zero-initialised projector on the domain A eval set.
  EvalReport chance_baseline();

  nlohmann::json seeds_json() const;

 private:
  EvalReport stamp(EvalReport report) const;

  ExperimentConfig config_;
  FrozenDecoder decoder_;
  std::optional<EvalSet> eval_;
  std::optional<EvalSet> eval_b_;
  std::optional<FrameDataset> sft_;
  std::optional<FrameDataset> sft_heldout_;
};

}  // namespace tasu
