#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tasu/error.hpp"
#include "tasu/manifest.hpp"
#include "tasu/posterior_io.hpp"

namespace tasu {
namespace {

using nlohmann::json;

Manifest parse(const std::string& text, const std::filesystem::path& base = ".") {
  return parse_manifest(json::parse(text), base);
}

TEST(Manifest, DefaultsFromEmptyObject) {
  const Manifest m = parse("{}");
  const ExperimentConfig defaults;
  EXPECT_EQ(m.experiment.vocab_size, defaults.vocab_size);
  EXPECT_EQ(m.experiment.blank_id, defaults.blank_id);
  EXPECT_EQ(m.experiment.cps.p_ins, 0.05);
  EXPECT_EQ(m.experiment.lsd.tau, 0.9);
  EXPECT_FALSE(m.experiment.domain_b.has_value());
  EXPECT_FALSE(m.output_checkpoint.has_value());
}

TEST(Manifest, AllSections) {
  testing::TempDir dir;
  std::ofstream(dir / "p.ckpt") << "x";
  const Manifest m = parse(R"({
    "vocab_size": 32,
    "seeds": {"data": 5, "model": 6},
    "corpus": {"train_utts": 10, "heldout_utts": 2, "eval_utts": 3, "len_low": 2,
               "len_high": 4, "token_first": 0, "token_last": 20},
    "cps": {"lambda_low": 0.7, "lambda_high": 0.9, "p_del": 0.1, "p_ins": 0.2,
            "per_token_alpha": true, "apply_lsd": true},
    "lsd": {"tau": 0.8},
    "synth": {"min_repeat": 1, "blank_peak": 0.97},
    "model": {"bottleneck": 12, "out_dim": 10},
    "train": {"learning_rate": 0.01, "epochs": 2, "batch_size": 8, "optimizer": "sgd"},
    "sft": {"train_utts": 4, "heldout_utts": 1, "train": {"epochs": 1, "seed": 99}},
    "domain_b": {"synth": {"peak_low": 0.5}, "token_first": 10, "text_utts": 7, "eval_utts": 3},
    "input": {"checkpoint": "p.ckpt"},
    "output": {"checkpoint": "out.ckpt", "report": "r.json"}
  })",
                           dir.path());
  const auto& e = m.experiment;
  EXPECT_EQ(e.vocab_size, 32u);
  EXPECT_EQ(e.blank_id, 31);
  EXPECT_EQ(e.cps.blank_id, 31);
  EXPECT_EQ(e.data_seed, 5u);
  EXPECT_EQ(e.model_seed, 6u);
  EXPECT_EQ(e.train.seed, 6u);
  EXPECT_EQ(e.sft_train.seed, 99u);
  EXPECT_EQ(e.token_last, 20);
  EXPECT_TRUE(e.cps.per_token_alpha);
  EXPECT_TRUE(e.lsd_on_cps);
  EXPECT_EQ(e.lsd.tau, 0.8);
  EXPECT_EQ(e.synth.min_repeat, 1);
  EXPECT_EQ(e.synth.blank_peak_low, 0.97);
  EXPECT_EQ(e.synth.blank_peak_high, 0.97);
  EXPECT_EQ(e.model.bottleneck, 12u);
  EXPECT_EQ(e.train.optimizer, OptimizerKind::kSgd);
  ASSERT_TRUE(e.domain_b.has_value());
  EXPECT_EQ(e.domain_b->synth.peak_low, 0.5);
  EXPECT_EQ(e.domain_b->synth.min_repeat, 1);
  EXPECT_EQ(e.domain_b->token_first, 10);
  EXPECT_EQ(*m.input_checkpoint, dir / "p.ckpt");
  EXPECT_EQ(*m.output_report, dir / "r.json");
}

TEST(Manifest, UnknownKeysRejectedEverywhere) {
  for (const char* text : {R"({"bogus": 1})", R"({"cps": {"p_dup": 0.05}})",
                           R"({"train": {"lr": 0.1}})", R"({"sft": {"train": {"x": 1}}})",
                           R"({"domain_b": {"synth": {"peak": 0.5}}})", R"({"seeds": {"eval": 1}})"}) {
    EXPECT_THROW(parse(text), ConfigError) << text;
  }
}

TEST(Manifest, WrongTypesRejected) {
  for (const char* text :
       {R"({"vocab_size": "64"})", R"({"seeds": {"data": -1}})", R"({"train": {"epochs": 2.5}})",
        R"({"cps": {"per_token_alpha": 1}})", R"({"lsd": {"tau": "0.9"}})", R"({"cps": []})",
        R"({"train": {"optimizer": "rmsprop"}})", R"([])"}) {
    EXPECT_THROW(parse(text), ConfigError) << text;
  }
}

TEST(Manifest, InvalidValuesRejected) {
  EXPECT_THROW(parse(R"({"lsd": {"tau": 0}})"), ConfigError);
  EXPECT_THROW(parse(R"({"cps": {"p_del": 1.0}})"), ConfigError);
  EXPECT_THROW(parse(R"({"vocab_size": 8, "blank_id": 8})"), ConfigError);
  EXPECT_THROW(parse(R"({"synth": {"peak_low": 0.01}})"), ConfigError);
}

TEST(Manifest, PathsResolveAgainstManifestDirectory) {
  testing::TempDir dir;
  write_vocab(Vocab({"<blank>", "a", "b"}, 0), dir / "vocab.txt");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "m.json") << R"({"vocab": "../vocab.txt",
      "output": {"checkpoint": "p.ckpt"}})";
  const Manifest m = load_manifest(dir / "sub" / "m.json");
  EXPECT_EQ(m.experiment.vocab_size, 3u);
  EXPECT_EQ(m.experiment.blank_id, 0);
  EXPECT_EQ(m.vocab().token(1), "a");
  EXPECT_EQ(m.output_checkpoint->filename(), "p.ckpt");
  EXPECT_EQ(m.output_checkpoint->parent_path(), dir / "sub");
}

TEST(Manifest, MissingPathsRejected) {
  testing::TempDir dir;
  EXPECT_THROW(parse(R"({"vocab": "nope.txt"})", dir.path()), ConfigError);
  EXPECT_THROW(parse(R"({"input": {"checkpoint": "nope.ckpt"}})", dir.path()), ConfigError);
  EXPECT_THROW(parse(R"({"output": {"report": "no/such/dir/r.json"}})", dir.path()), ConfigError);
  EXPECT_THROW(load_manifest(dir / "missing.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_manifest(dir / "broken.json"), ConfigError);
}

TEST(Manifest, VocabSizeMustAgreeWithFile) {
  testing::TempDir dir;
  write_vocab(Vocab({"<blank>", "a", "b"}, 0), dir / "vocab.txt");
  EXPECT_THROW(parse(R"({"vocab": "vocab.txt", "vocab_size": 4})", dir.path()), ConfigError);
}

}  // namespace
}  // namespace tasu
