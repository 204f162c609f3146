#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "common.hpp"
#include "tasu/checkpoint.hpp"
#include "tasu/error.hpp"
#include "tasu/manifest.hpp"
#include "tasu/posterior_io.hpp"

namespace tasu::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json training_json(const TrainResult& result) {
  return {{"epoch_loss", result.epoch_loss},
          {"heldout_loss", result.heldout_loss},
          {"selected_epoch", result.selected_epoch},
          {"steps", result.steps}};
}

json decoder_json(const Experiment& e) {
  return {{"seed", e.config().model_seed},
          {"vocab_size", e.decoder().vocab_size},
          {"embed_dim", e.decoder().embed_dim},
          {"fingerprint", e.decoder().fingerprint()}};
}

void save_checkpoint(const ProjectorModel& model, const fs::path& path, const Experiment& e,
                     const json& training) {
  write_checkpoint(model, path);
  const json sidecar = {{"blank_id", e.config().blank_id},
                        {"decoder", decoder_json(e)},
                        {"config", e.config().to_json()},
                        {"seeds", e.seeds_json()},
                        {"training", training}};
  std::ofstream out(sidecar_path(path));
  out << sidecar.dump(2) << '\n';
  if (!out) throw Error(fmt::format("cannot write {}", sidecar_path(path).string()));
  spdlog::info("wrote {}", path.string());
}

json read_sidecar(const fs::path& checkpoint) {
  const fs::path path = sidecar_path(checkpoint);
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("missing checkpoint metadata {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

/// Rejects a checkpoint trained against a different frozen decoder.
void check_decoder(const fs::path& checkpoint, const ProjectorModel& model, const Experiment& e) {
  if (model.input_dim != e.config().vocab_size || model.output_dim != e.decoder().embed_dim) {
    throw ShapeMismatch(fmt::format("checkpoint {} is {}->{}, experiment needs {}->{}",
                                    checkpoint.string(), model.input_dim, model.output_dim,
                                    e.config().vocab_size, e.decoder().embed_dim));
  }
  if (!fs::exists(sidecar_path(checkpoint))) return;
  const json sidecar = read_sidecar(checkpoint);
  if (sidecar.contains("decoder") &&
      sidecar["decoder"].value("fingerprint", std::uint64_t{0}) != e.decoder().fingerprint()) {
    throw ConfigError(fmt::format("checkpoint {} was trained against a different decoder",
                                  checkpoint.string()));
  }
}

EvalReport evaluate_b(const ProjectorModel& model, Experiment& e, const std::string& arm) {
  EvalReport report = evaluate(model, e.decoder(), e.eval_set_b(), arm);
  report.config = e.config().to_json();
  report.seeds = e.seeds_json();
  return report;
}

void finish(const std::vector<EvalReport>& reports, const Manifest& m, const std::string& out) {
  print_report_table(reports);
  std::string path = out;
  if (path.empty() && m.output_report) path = m.output_report->string();
  emit_json(reports_json(reports), path);
}

constexpr const char* kManifestDefaults = R"(Manifest defaults:
  cps    lambda 0.8..1.0, p_del 0.05, p_ins 0.05 (reference settings)
  lsd    tau 0.9 (reference setting)
  model  bottleneck 64, out_dim 64 (reference bottleneck 1024)
  train  adam, learning_rate 1e-3 (reference 5e-5), epochs 5 (reference 5), batch 64
  sft    epochs 3, 1000 paired utterances)";

struct ManifestOptions {
  std::string manifest;
  std::string out;
  std::string checkpoint;
};

std::shared_ptr<ManifestOptions> manifest_options(CLI::App* sub, const char* checkpoint_help) {
  auto opt = std::make_shared<ManifestOptions>();
  sub->footer(kManifestDefaults);
  sub->add_option("--manifest", opt->manifest, "Experiment manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", opt->out, "Report path (overrides output.report; default stdout)");
  sub->add_option("--checkpoint", opt->checkpoint, checkpoint_help);
  return opt;
}

}  // namespace

// --------------------------------------------------------------------- train

void add_train(CLI::App& app, Action& action) {
  auto* sub = app.add_subcommand(
      "train", "Text-only training of the projector on CPS frames, then zero-shot evaluation");
  auto opt = manifest_options(sub, "Checkpoint path (overrides output.checkpoint)");
  sub->callback([opt, &action] {
    action = [opt] {
      const Manifest m = load_manifest(opt->manifest);
      Experiment e(m.experiment);
      std::vector<EvalReport> reports{e.chance_baseline()};
      TasuOutcome tasu = e.tasu();
      reports.push_back(tasu.report);
      if (e.config().domain_b) reports.push_back(evaluate_b(tasu.model, e, "tasu_b"));

      fs::path ckpt = opt->checkpoint;
      if (ckpt.empty() && m.output_checkpoint) ckpt = *m.output_checkpoint;
      if (!ckpt.empty()) save_checkpoint(tasu.model, ckpt, e, training_json(tasu.training));
      finish(reports, m, opt->out);
    };
  });
}

// ----------------------------------------------------------------------- sft

void add_sft(CLI::App& app, Action& action) {
  auto* sub = app.add_subcommand(
      "sft", "Fine-tune a projector on paired synthetic-encoder frames and compare arms");
  auto opt = manifest_options(sub, "Where to save the fine-tuned checkpoint");
  sub->callback([opt, &action] {
    action = [opt] {
      const Manifest m = load_manifest(opt->manifest);
      Experiment e(m.experiment);
      ProjectorModel start;
      if (m.input_checkpoint) {
        start = read_checkpoint(*m.input_checkpoint);
        check_decoder(*m.input_checkpoint, start, e);
      } else {
        spdlog::info("no input checkpoint; training the text-only projector first");
        start = e.tasu().model;
      }
      std::vector<EvalReport> reports;
      EvalReport zero_shot = evaluate(start, e.decoder(), e.eval_set(), "tasu");
      zero_shot.config = e.config().to_json();
      zero_shot.seeds = e.seeds_json();
      reports.push_back(std::move(zero_shot));

      TasuOutcome tuned = e.sft_from(start, "tasu_sft");
      reports.push_back(tuned.report);
      TasuOutcome only = e.sft_from(e.initial_model(), "sft_only");
      reports.push_back(only.report);
      if (e.config().domain_b) {
        reports.push_back(evaluate_b(start, e, "tasu_b"));
        reports.push_back(evaluate_b(tuned.model, e, "tasu_sft_b"));
        reports.push_back(evaluate_b(only.model, e, "sft_only_b"));
      }

      fs::path ckpt = opt->checkpoint;
      if (ckpt.empty() && m.output_checkpoint) ckpt = *m.output_checkpoint;
      if (!ckpt.empty()) save_checkpoint(tuned.model, ckpt, e, training_json(tuned.training));
      finish(reports, m, opt->out);
    };
  });
}

// ---------------------------------------------------------------------- eval

void add_eval(CLI::App& app, Action& action) {
  auto* sub = app.add_subcommand("eval", "Evaluate a saved projector on synthetic speech");
  auto opt = manifest_options(
      sub, "Checkpoint to evaluate (default input.checkpoint, then output.checkpoint)");
  sub->callback([opt, &action] {
    action = [opt] {
      const Manifest m = load_manifest(opt->manifest);
      fs::path ckpt = opt->checkpoint;
      if (ckpt.empty() && m.input_checkpoint) ckpt = *m.input_checkpoint;
      if (ckpt.empty() && m.output_checkpoint) ckpt = *m.output_checkpoint;
      if (ckpt.empty()) throw ConfigError("eval needs --checkpoint or a manifest checkpoint");
      if (!fs::exists(ckpt)) throw ConfigError(fmt::format("no checkpoint at {}", ckpt.string()));

      Experiment e(m.experiment);
      const ProjectorModel model = read_checkpoint(ckpt);
      check_decoder(ckpt, model, e);
      std::vector<EvalReport> reports{e.chance_baseline()};
      EvalReport report = evaluate(model, e.decoder(), e.eval_set(), "eval");
      report.config = e.config().to_json();
      report.seeds = e.seeds_json();
      reports.push_back(std::move(report));
      if (e.config().domain_b) reports.push_back(evaluate_b(model, e, "eval_b"));
      finish(reports, m, opt->out);
    };
  });
}

// -------------------------------------------------------------------- decode

void add_decode(CLI::App& app, Action& action) {
  struct Options {
    std::string checkpoint, vocab, input, text;
    std::uint64_t seed = 0;
    LsdConfig lsd;
    bool no_lsd = false;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand(
      "decode", "Decode posteriors (from files, or synthesized for --text) with a projector");
  sub->add_option("--checkpoint", opt->checkpoint, "Projector checkpoint with its .json sidecar")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--vocab", opt->vocab, "Vocabulary file (default: synthetic w00..wNN)")
      ->check(CLI::ExistingFile);
  auto* input = sub->add_option("--input", opt->input, "Posterior file or directory")
                    ->check(CLI::ExistingPath);
  auto* text = sub->add_option("--text", opt->text, "Tokens to synthesize and decode");
  input->excludes(text);
  sub->add_option("--seed", opt->seed, "Synthesis seed for --text")->capture_default_str();
  sub->add_option("--tau", opt->lsd.tau, "Compaction threshold (reference setting 0.9)")
      ->capture_default_str();
  sub->add_flag("--no-lsd", opt->no_lsd, "Decode raw frames without compaction");
  sub->callback([opt, &action] {
    action = [opt] {
      if (opt->input.empty() && opt->text.empty()) {
        throw ConfigError("decode needs --input or --text");
      }
      opt->lsd.check();
      const ProjectorModel model = read_checkpoint(opt->checkpoint);
      const json sidecar = read_sidecar(opt->checkpoint);
      FrozenDecoder decoder;
      TokenId blank = 0;
      SynthConfig synth;
      try {
        const json& d = sidecar.at("decoder");
        decoder = FrozenDecoder::from_seed(d.at("vocab_size").get<std::size_t>(),
                                           d.at("embed_dim").get<std::size_t>(),
                                           d.at("seed").get<std::uint64_t>());
        if (decoder.fingerprint() != d.at("fingerprint").get<std::uint64_t>()) {
          throw ConfigError("decoder fingerprint in the sidecar does not match its seed");
        }
        blank = sidecar.at("blank_id").get<TokenId>();
        if (sidecar.contains("config") && sidecar["config"].contains("synth")) {
          synth = parse_synth_config(sidecar["config"]["synth"]);
        }
      } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad checkpoint metadata: {}", e.what()));
      }
      if (model.input_dim != decoder.vocab_size || model.output_dim != decoder.embed_dim) {
        throw ShapeMismatch("checkpoint and decoder dimensions disagree");
      }
      const Vocab vocab =
          opt->vocab.empty() ? Vocab::synthetic(decoder.vocab_size, blank) : read_vocab(opt->vocab);
      if (vocab.size() != decoder.vocab_size || vocab.blank_id() != blank) {
        throw ShapeMismatch("vocabulary does not match the checkpoint");
      }

      auto decode_one = [&](const PosteriorSequence& post) {
        if (post.vocab_size() != vocab.size() || post.blank_id() != blank) {
          throw ShapeMismatch(fmt::format("posteriors are V={} blank={}, checkpoint V={} blank={}",
                                          post.vocab_size(), post.blank_id(), vocab.size(),
                                          blank));
        }
        const PosteriorSequence frames = opt->no_lsd ? post : lsd(post, opt->lsd).posteriors;
        FrameDataset data;
        data.dim = frames.vocab_size();
        for (std::size_t t = 0; t < frames.num_frames(); ++t) data.add(frames.frame(t), blank);
        return vocab.decode(decode_frames(model, decoder, data, 0, data.size(), blank));
      };

      if (!opt->text.empty()) {
        const TokenSequence ids = vocab.encode(opt->text);
        const auto post = synth_posteriors(ids, synth, vocab.size(), blank, opt->seed);
        fmt::print("{}\n", decode_one(post));
        return;
      }
      std::vector<fs::path> paths;
      if (fs::is_directory(opt->input)) {
        paths = posterior_files(opt->input);
      } else {
        paths.push_back(opt->input);
      }
      for (const auto& path : paths) {
        fmt::print("{}\t{}\n", path.filename().string(), decode_one(read_posteriors(path)));
      }
    };
  });
}

// ----------------------------------------------------------------- gradcheck

void add_gradcheck(CLI::App& app, Action& action) {
  struct Options {
    std::uint64_t seed = 7;
    std::size_t vocab_size = 12;
    std::size_t bottleneck = 10;
    std::size_t out_dim = 8;
    std::size_t frames = 16;
    double h = 1e-4;
    double tolerance = 1e-4;
    std::string out;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand(
      "gradcheck", "Compare analytic projector gradients with central finite differences");
  sub->add_option("--seed", opt->seed, "Seed for model, decoder and frames")->capture_default_str();
  sub->add_option("--vocab-size", opt->vocab_size, "Input and class dimension")
      ->capture_default_str();
  sub->add_option("--bottleneck", opt->bottleneck, "Hidden width")->capture_default_str();
  sub->add_option("--out-dim", opt->out_dim, "Embedding width")->capture_default_str();
  sub->add_option("--frames", opt->frames, "Frames in the probe batch")->capture_default_str();
  sub->add_option("--step", opt->h, "Finite-difference step")->capture_default_str();
  sub->add_option("--tolerance", opt->tolerance, "Largest accepted relative error")
      ->capture_default_str();
  sub->add_option("--out", opt->out, "Write the JSON report here instead of stdout");
  sub->callback([opt, &action] {
    action = [opt] {
      if (opt->vocab_size < 2 || opt->bottleneck == 0 || opt->out_dim == 0 || opt->frames == 0) {
        throw ConfigError("gradcheck needs V >= 2 and non-zero widths and frame count");
      }
      const auto blank = static_cast<TokenId>(opt->vocab_size) - 1;
      const ProjectorModel model = ProjectorModel::random(opt->vocab_size, opt->bottleneck,
                                                          opt->out_dim, opt->seed);
      const FrozenDecoder decoder =
          FrozenDecoder::from_seed(opt->vocab_size, opt->out_dim, opt->seed);
      SynthConfig synth;
      synth.off_label_concentration = 1.0;
      FrameDataset data;
      data.dim = opt->vocab_size;
      const auto text =
          gen_corpus(opt->frames, 1, 4, opt->vocab_size, blank, opt->seed, Stage::kGradCheck);
      for (std::size_t i = 0; data.size() < opt->frames; ++i) {
        const Utterance utt =
            synth_utterance(text[i], synth, opt->vocab_size, blank, opt->seed, i, Stage::kGradCheck);
        for (std::size_t t = 0; t < utt.posteriors.num_frames() && data.size() < opt->frames;
             ++t) {
          data.add(utt.posteriors.frame(t), utt.frame_labels[t]);
        }
      }
      const GradCheckReport report = gradient_check(model, decoder, data, opt->h);
      const bool pass = report.max_relative_error < opt->tolerance;
      emit_json({{"max_relative_error", report.max_relative_error},
                 {"tensor_max_relative_error",
                  {{"w1", report.tensor_max_relative_error.at(0)},
                   {"b1", report.tensor_max_relative_error.at(1)},
                   {"w2", report.tensor_max_relative_error.at(2)},
                   {"b2", report.tensor_max_relative_error.at(3)}}},
                 {"parameters_checked", report.parameters_checked},
                 {"h", opt->h},
                 {"tolerance", opt->tolerance},
                 {"pass", pass}},
                opt->out);
      if (!pass) {
        throw RuntimeFailure(fmt::format("gradient check failed: max relative error {:.3g}",
                                         report.max_relative_error));
      }
    };
  });
}

}  // namespace tasu::cli
