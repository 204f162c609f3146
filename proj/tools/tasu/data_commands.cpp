#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "common.hpp"
#include "tasu/cps.hpp"
#include "tasu/error.hpp"
#include "tasu/lsd.hpp"
#include "tasu/posterior_io.hpp"
#include "tasu/synthvoice.hpp"

namespace tasu::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json ratio_json(double ratio) {
  if (!std::isfinite(ratio)) return "inf";
  return ratio;
}

Vocab vocab_from_options(const std::string& path, std::size_t size, int blank_id) {
  if (!path.empty()) return read_vocab(path);
  const TokenId blank = blank_id < 0 ? static_cast<TokenId>(size) - 1 : blank_id;
  return Vocab::synthetic(size, blank);
}

}  // namespace

// ------------------------------------------------------------------ simulate

void add_simulate(CLI::App& app, Action& action) {
  struct Options {
    std::string corpus, vocab, out_dir, summary;
    CpsConfig cps;
    std::uint64_t seed = 0;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand(
      "simulate", "Turn text (one utterance per line) into pseudo CTC posteriors");
  sub->add_option("--corpus", opt->corpus, "Text file, one utterance of tokens per line")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--vocab", opt->vocab, "Vocabulary file, one token per line, with <blank>")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--lambda-low", opt->cps.lambda_low,
                  "Lower bound of the smoothing weight (reference setting 0.8)")
      ->capture_default_str();
  sub->add_option("--lambda-high", opt->cps.lambda_high,
                  "Upper bound of the smoothing weight (reference setting 1.0)")
      ->capture_default_str();
  sub->add_option("--p-del", opt->cps.p_del, "Per-frame deletion probability (reference 0.05)")
      ->capture_default_str();
  sub->add_option("--p-ins", opt->cps.p_ins,
                  "Insertion ratio; floor(|S| * p) insertions (reference 0.05)")
      ->capture_default_str();
  sub->add_flag("--per-token-alpha", opt->cps.per_token_alpha,
                "Draw the smoothing weight per token instead of once per utterance");
  sub->add_option("--seed", opt->seed, "Random seed")->capture_default_str();
  sub->add_option("--out-dir", opt->out_dir, "Directory for <line>.ctcp files")->required();
  sub->add_option("--out", opt->summary, "Write the JSON summary here instead of stdout");
  sub->callback([opt, &action] {
    action = [opt] {
      const Vocab vocab = read_vocab(opt->vocab);
      CpsConfig cps = opt->cps;
      cps.blank_id = vocab.blank_id();
      cps.check();
      const auto lines = read_lines(opt->corpus);
      std::vector<TokenSequence> corpus;
      corpus.reserve(lines.size());
      for (const auto& line : lines) corpus.push_back(vocab.encode(line));
      ensure_directory(opt->out_dir);
      std::size_t frames = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const PosteriorSequence post = cps_simulate(corpus[i], cps, vocab.size(), opt->seed, i);
        frames += post.num_frames();
        write_posteriors(post, fs::path(opt->out_dir) / (utterance_name(i) + ".ctcp"));
      }
      emit_json({{"command", "simulate"},
                 {"utterances", lines.size()},
                 {"frames", frames},
                 {"seed", opt->seed},
                 {"out_dir", opt->out_dir}},
                opt->summary);
    };
  });
}

// ------------------------------------------------------------------- compact

void add_compact(CLI::App& app, Action& action) {
  struct Options {
    std::string input, output, report;
    LsdConfig lsd;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand(
      "compact", "Label-synchronous compaction: drop blank frames, merge repeated labels");
  sub->add_option("--tau", opt->lsd.tau,
                  "Drop frames whose blank probability exceeds tau (reference setting 0.9)")
      ->capture_default_str();
  sub->add_option("--input", opt->input, "Posterior file (.ctcp or JSON) or a directory of them")
      ->required()
      ->check(CLI::ExistingPath);
  sub->add_option("--output", opt->output,
                  "Output file (JSON when it ends in .json), or directory in batch mode");
  sub->add_option("--report", opt->report, "Write the JSON report here instead of stdout");
  sub->callback([opt, &action] {
    action = [opt] {
      opt->lsd.check();
      if (!fs::is_directory(opt->input)) {
        const PosteriorSequence in = read_posteriors(opt->input);
        const LsdResult out = lsd(in, opt->lsd);
        if (!opt->output.empty()) write_posteriors(out.posteriors, opt->output);
        json report = to_json(out.report);
        report["tau"] = opt->lsd.tau;
        emit_json(report, opt->report);
        return;
      }

      if (!opt->output.empty()) ensure_directory(opt->output);
      json files = json::array();
      std::size_t frames_in = 0, frames_out = 0, all_removed = 0, finite = 0;
      double sum = 0.0;
      double low = std::numeric_limits<double>::infinity();
      double high = 0.0;
      const auto paths = posterior_files(opt->input);
      for (const auto& path : paths) {
        const LsdResult out = lsd(read_posteriors(path), opt->lsd);
        if (!opt->output.empty()) {
          write_posteriors(out.posteriors, fs::path(opt->output) / path.filename());
        }
        json entry = to_json(out.report);
        entry["file"] = path.filename().string();
        files.push_back(std::move(entry));
        frames_in += out.report.frames_in;
        frames_out += out.report.frames_out;
        const double r = out.report.downsampling_ratio;
        if (std::isfinite(r)) {
          sum += r;
          ++finite;
          low = std::min(low, r);
          high = std::max(high, r);
        } else {
          ++all_removed;
        }
      }
      json ratio = {{"mean", finite ? json(sum / static_cast<double>(finite)) : json(nullptr)},
                    {"min", finite ? json(low) : json(nullptr)},
                    {"max", all_removed ? json("inf") : (finite ? json(high) : json(nullptr))},
                    {"overall", ratio_json(downsampling_ratio(frames_in, frames_out))}};
      emit_json({{"tau", opt->lsd.tau},
                 {"utterances", paths.size()},
                 {"frames_in", frames_in},
                 {"frames_out", frames_out},
                 {"fully_removed_utterances", all_removed},
                 {"downsampling_ratio", ratio},
                 {"files", files}},
                opt->report);
    };
  });
}

// --------------------------------------------------------------------- synth

void add_synth(CLI::App& app, Action& action) {
  struct Options {
    std::string vocab, out_dir, summary;
    std::size_t vocab_size = 64;
    int blank_id = -1;
    std::size_t n_utts = 100;
    std::vector<std::size_t> len_range{5, 20};
    std::uint64_t seed = 0;
    SynthConfig synth;
    double blank_peak = -1.0;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand(
      "synth", "Generate random utterances and synthetic-encoder CTC posteriors for them");
  sub->add_option("--vocab", opt->vocab, "Vocabulary file (default: synthetic w00..wNN)")
      ->check(CLI::ExistingFile);
  sub->add_option("--vocab-size", opt->vocab_size, "Size of the synthetic vocabulary")
      ->capture_default_str();
  sub->add_option("--blank-id", opt->blank_id, "Blank id of the synthetic vocabulary (default V-1)");
  sub->add_option("--n-utts", opt->n_utts, "Number of utterances")->capture_default_str();
  sub->add_option("--len-range", opt->len_range, "Utterance length bounds (two integers)")
      ->expected(2)
      ->capture_default_str();
  sub->add_option("--seed", opt->seed, "Random seed")->capture_default_str();
  sub->add_option("--out-dir", opt->out_dir, "Output directory")->required();
  sub->add_option("--min-repeat", opt->synth.min_repeat, "Fewest frames per token")
      ->capture_default_str();
  sub->add_option("--max-repeat", opt->synth.max_repeat, "Most frames per token")
      ->capture_default_str();
  sub->add_option("--blank-gap-prob", opt->synth.blank_gap_prob,
                  "Probability of a blank run between tokens")
      ->capture_default_str();
  sub->add_option("--min-blank", opt->synth.min_blank, "Shortest blank run")->capture_default_str();
  sub->add_option("--max-blank", opt->synth.max_blank, "Longest blank run")->capture_default_str();
  sub->add_option("--peak-low", opt->synth.peak_low, "Lowest label mass of a token frame")
      ->capture_default_str();
  sub->add_option("--peak-high", opt->synth.peak_high, "Highest label mass of a token frame")
      ->capture_default_str();
  sub->add_option("--blank-peak-low", opt->synth.blank_peak_low,
                  "Lowest blank mass of a blank frame")
      ->capture_default_str();
  sub->add_option("--blank-peak-high", opt->synth.blank_peak_high,
                  "Highest blank mass of a blank frame")
      ->capture_default_str();
  sub->add_option("--blank-peak", opt->blank_peak, "Fixed blank mass (sets both bounds)");
  sub->add_option("--off-label-concentration", opt->synth.off_label_concentration,
                  "0 spreads off-label mass uniformly; larger values concentrate it")
      ->capture_default_str();
  sub->add_option("--out", opt->summary, "Write the JSON summary here instead of stdout");
  sub->callback([opt, &action] {
    action = [opt] {
      const Vocab vocab = vocab_from_options(opt->vocab, opt->vocab_size, opt->blank_id);
      SynthConfig synth = opt->synth;
      if (opt->blank_peak >= 0.0) synth.blank_peak_low = synth.blank_peak_high = opt->blank_peak;
      synth.check(vocab.size());
      ensure_directory(opt->out_dir);
      const auto corpus = gen_corpus(opt->n_utts, opt->len_range[0], opt->len_range[1],
                                     vocab.size(), vocab.blank_id(), opt->seed);
      std::ofstream transcript(fs::path(opt->out_dir) / "transcript.txt");
      std::ofstream alignment(fs::path(opt->out_dir) / "alignment.txt");
      if (!transcript || !alignment) throw Error("cannot write transcript/alignment files");
      std::size_t frames = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Utterance utt =
            synth_utterance(corpus[i], synth, vocab.size(), vocab.blank_id(), opt->seed, i);
        frames += utt.posteriors.num_frames();
        write_posteriors(utt.posteriors, fs::path(opt->out_dir) / (utterance_name(i) + ".ctcp"));
        transcript << vocab.decode(utt.tokens) << '\n';
        alignment << vocab.decode(utt.frame_labels) << '\n';
      }
      if (!transcript || !alignment) throw Error("failed writing transcript/alignment files");
      emit_json({{"command", "synth"},
                 {"utterances", corpus.size()},
                 {"frames", frames},
                 {"seed", opt->seed},
                 {"vocab_size", vocab.size()},
                 {"blank_id", vocab.blank_id()},
                 {"synth", to_json(synth)},
                 {"out_dir", opt->out_dir}},
                opt->summary);
    };
  });
}

// --------------------------------------------------------------------- stats

void add_stats(CLI::App& app, Action& action) {
  struct Options {
    std::string input, corpus, vocab, out;
    LsdConfig lsd;
  };
  auto opt = std::make_shared<Options>();
  auto* sub = app.add_subcommand("stats", "Summarise posterior files or a text corpus");
  auto* input = sub->add_option("--input", opt->input, "Posterior file or directory")
                    ->check(CLI::ExistingPath);
  auto* corpus = sub->add_option("--corpus", opt->corpus, "Text corpus, one utterance per line")
                     ->check(CLI::ExistingFile);
  input->excludes(corpus);
  sub->add_option("--vocab", opt->vocab, "Vocabulary file (needed with --corpus)")
      ->check(CLI::ExistingFile);
  sub->add_option("--tau", opt->lsd.tau, "Threshold used for the compaction estimate")
      ->capture_default_str();
  sub->add_option("--out", opt->out, "Write the JSON summary here instead of stdout");
  sub->require_option(1, 4);
  sub->callback([opt, &action] {
    action = [opt] {
      if (!opt->corpus.empty()) {
        if (opt->vocab.empty()) throw ConfigError("--corpus needs --vocab");
        const Vocab vocab = read_vocab(opt->vocab);
        const auto lines = read_lines(opt->corpus);
        std::size_t tokens = 0, shortest = std::numeric_limits<std::size_t>::max(), longest = 0;
        std::vector<std::size_t> counts(vocab.size(), 0);
        for (const auto& line : lines) {
          const TokenSequence ids = vocab.encode(line);
          tokens += ids.size();
          shortest = std::min(shortest, ids.size());
          longest = std::max(longest, ids.size());
          for (TokenId id : ids) ++counts[static_cast<std::size_t>(id)];
        }
        const auto distinct = static_cast<std::size_t>(
            std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
        emit_json({{"utterances", lines.size()},
                   {"tokens", tokens},
                   {"mean_length", lines.empty() ? 0.0
                                                 : static_cast<double>(tokens) /
                                                       static_cast<double>(lines.size())},
                   {"min_length", lines.empty() ? 0 : shortest},
                   {"max_length", longest},
                   {"distinct_tokens", distinct}},
                  opt->out);
        return;
      }
      if (opt->input.empty()) throw ConfigError("stats needs --input or --corpus");
      opt->lsd.check();
      std::vector<fs::path> paths;
      if (fs::is_directory(opt->input)) {
        paths = posterior_files(opt->input);
      } else {
        paths.push_back(opt->input);
      }
      std::size_t frames = 0, blank_frames = 0, collapsed = 0, compacted = 0;
      double peak_sum = 0.0, blank_sum = 0.0;
      std::size_t vocab_size = 0;
      TokenId blank_id = 0;
      for (const auto& path : paths) {
        const PosteriorSequence post = read_posteriors(path);
        vocab_size = post.vocab_size();
        blank_id = post.blank_id();
        const auto labels = argmax_labels(post);
        for (std::size_t t = 0; t < post.num_frames(); ++t) {
          const auto row = post.frame(t);
          peak_sum += row[static_cast<std::size_t>(labels[t])];
          blank_sum += row[static_cast<std::size_t>(post.blank_id())];
          if (labels[t] == post.blank_id()) ++blank_frames;
        }
        frames += post.num_frames();
        collapsed += greedy_collapse(post).size();
        compacted += lsd(post, opt->lsd).report.frames_out;
      }
      const double n = frames ? static_cast<double>(frames) : 1.0;
      emit_json({{"utterances", paths.size()},
                 {"frames", frames},
                 {"vocab_size", vocab_size},
                 {"blank_id", blank_id},
                 {"blank_argmax_fraction", static_cast<double>(blank_frames) / n},
                 {"mean_peak_probability", peak_sum / n},
                 {"mean_blank_probability", blank_sum / n},
                 {"collapsed_tokens", collapsed},
                 {"tau", opt->lsd.tau},
                 {"frames_after_lsd", compacted},
                 {"downsampling_ratio", ratio_json(downsampling_ratio(frames, compacted))}},
                opt->out);
    };
  });
}

}  // namespace tasu::cli
