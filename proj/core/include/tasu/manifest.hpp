#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "tasu/harness.hpp"
#include "tasu/posterior.hpp"

namespace tasu {

/// Experiment manifest. Every section and key is optional and falls back to
/// the ExperimentConfig defaults; unknown keys are rejected. Relative paths
/// resolve against the manifest's directory.
///
///   {
///     "vocab": "vocab.txt",            // or "vocab_size" + "blank_id"
///     "seeds":  {"data": 1, "model": 2},
///     "corpus": {"train_utts", "heldout_utts", "eval_utts", "len_low",
///                "len_high", "token_first", "token_last"},
///     "cps":    {"lambda_low", "lambda_high", "p_del", "p_ins",
///                "per_token_alpha", "apply_lsd"},
///     "lsd":    {"tau"},
///     "synth":  {SynthConfig fields, or "blank_peak" for both blank bounds},
///     "model":  {"bottleneck", "out_dim"},
///     "train":  {"learning_rate", "epochs", "batch_size", "seed",
///                "optimizer", "beta1", "beta2", "epsilon"},
///     "sft":    {"train_utts", "heldout_utts", "train": {...}},
///     "domain_b": {"synth": {...}, "token_first", "token_last",
///                  "text_utts", "eval_utts"},
///     "input":  {"checkpoint"},
///     "output": {"checkpoint", "report"}
///   }
struct Manifest {
  std::filesystem::path base_dir;
  std::optional<std::filesystem::path> vocab_path;
  ExperimentConfig experiment;
  std::optional<std::filesystem::path> input_checkpoint;
  std::optional<std::filesystem::path> output_checkpoint;
  std::optional<std::filesystem::path> output_report;

  Vocab vocab() const;
};

/// Throws ConfigError on unknown keys, wrong types, missing files or
/// invalid configuration values.
Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

SynthConfig parse_synth_config(const nlohmann::json& doc, SynthConfig base = {});

}  // namespace tasu
