#include "tasu/manifest.hpp"

#include <fstream>
#include <set>
#include <string>
#include <type_traits>

#include <fmt/format.h>

#include "tasu/error.hpp"
#include "tasu/posterior_io.hpp"

namespace tasu {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
bool type_matches(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    return v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else {
    return true;
  }
}

// Reads keys from one JSON object and rejects any key nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where_));
  }

  template <typename T>
  bool read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end()) return false;
    if (!type_matches<T>(*it)) {
      throw ConfigError(fmt::format("{}.{} has the wrong type", where_, key));
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("{}.{} has the wrong type", where_, key));
    }
    return true;
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("unknown key {}.{}", where_, key));
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

TrainConfig parse_train(const json& doc, const std::string& where, TrainConfig base) {
  Section s(doc, where);
  s.read("learning_rate", base.learning_rate);
  s.read("epochs", base.epochs);
  s.read("batch_size", base.batch_size);
  s.read("seed", base.seed);
  std::string optimizer;
  if (s.read("optimizer", optimizer)) base.optimizer = parse_optimizer(optimizer);
  s.read("beta1", base.beta1);
  s.read("beta2", base.beta2);
  s.read("epsilon", base.epsilon);
  s.finish();
  return base;
}

SynthConfig parse_synth(const json& doc, const std::string& where, SynthConfig base) {
  Section s(doc, where);
  s.read("min_repeat", base.min_repeat);
  s.read("max_repeat", base.max_repeat);
  s.read("blank_gap_prob", base.blank_gap_prob);
  s.read("min_blank", base.min_blank);
  s.read("max_blank", base.max_blank);
  s.read("peak_low", base.peak_low);
  s.read("peak_high", base.peak_high);
  double blank_peak = 0.0;
  if (s.read("blank_peak", blank_peak)) base.blank_peak_low = base.blank_peak_high = blank_peak;
  s.read("blank_peak_low", base.blank_peak_low);
  s.read("blank_peak_high", base.blank_peak_high);
  s.read("off_label_concentration", base.off_label_concentration);
  s.finish();
  return base;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

fs::path existing_file(const fs::path& base, const std::string& value, const char* what) {
  fs::path p = resolve(base, value);
  if (!fs::is_regular_file(p)) {
    throw ConfigError(fmt::format("{} '{}' does not exist", what, p.string()));
  }
  return p;
}

fs::path writable_file(const fs::path& base, const std::string& value, const char* what) {
  fs::path p = resolve(base, value);
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError(
        fmt::format("directory for {} '{}' does not exist", what, parent.string()));
  }
  return p;
}

}  // namespace

Vocab Manifest::vocab() const {
  if (vocab_path) return read_vocab(*vocab_path);
  return Vocab::synthetic(experiment.vocab_size, experiment.blank_id);
}

SynthConfig parse_synth_config(const nlohmann::json& doc, SynthConfig base) {
  return parse_synth(doc, "synth", base);
}

Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  ExperimentConfig& e = m.experiment;
  Section top(doc, "manifest");

  std::string vocab;
  if (top.read("vocab", vocab)) {
    m.vocab_path = existing_file(base_dir, vocab, "vocab");
    const Vocab v = read_vocab(*m.vocab_path);
    e.vocab_size = v.size();
    e.blank_id = v.blank_id();
  }
  std::size_t vocab_size = e.vocab_size;
  TokenId blank_id = e.blank_id;
  const bool has_size = top.read("vocab_size", vocab_size);
  const bool has_blank = top.read("blank_id", blank_id);
  if (m.vocab_path) {
    if ((has_size && vocab_size != e.vocab_size) || (has_blank && blank_id != e.blank_id)) {
      throw ConfigError("vocab_size/blank_id disagree with the vocabulary file");
    }
  } else {
    e.vocab_size = vocab_size;
    e.blank_id = blank_id;
    if (has_size && !has_blank) e.blank_id = static_cast<TokenId>(vocab_size) - 1;
  }
  e.cps.blank_id = e.blank_id;

  bool train_seed_set = false;
  bool sft_seed_set = false;
  if (const json* seeds = top.child("seeds")) {
    Section s(*seeds, "seeds");
    s.read("data", e.data_seed);
    s.read("model", e.model_seed);
    s.finish();
  }
  if (const json* corpus = top.child("corpus")) {
    Section s(*corpus, "corpus");
    s.read("train_utts", e.train_utts);
    s.read("heldout_utts", e.heldout_utts);
    s.read("eval_utts", e.eval_utts);
    s.read("len_low", e.len_low);
    s.read("len_high", e.len_high);
    s.read("token_first", e.token_first);
    s.read("token_last", e.token_last);
    s.finish();
  }
  if (const json* cps = top.child("cps")) {
    Section s(*cps, "cps");
    s.read("lambda_low", e.cps.lambda_low);
    s.read("lambda_high", e.cps.lambda_high);
    s.read("p_del", e.cps.p_del);
    s.read("p_ins", e.cps.p_ins);
    s.read("per_token_alpha", e.cps.per_token_alpha);
    s.read("apply_lsd", e.lsd_on_cps);
    s.finish();
  }
  if (const json* lsd = top.child("lsd")) {
    Section s(*lsd, "lsd");
    s.read("tau", e.lsd.tau);
    s.finish();
  }
  if (const json* synth = top.child("synth")) e.synth = parse_synth(*synth, "synth", e.synth);
  if (const json* model = top.child("model")) {
    Section s(*model, "model");
    s.read("bottleneck", e.model.bottleneck);
    s.read("out_dim", e.model.output_dim);
    s.finish();
  }
  if (const json* train = top.child("train")) {
    e.train = parse_train(*train, "train", e.train);
    train_seed_set = train->contains("seed");
  }
  if (const json* sft = top.child("sft")) {
    Section s(*sft, "sft");
    s.read("train_utts", e.sft_utts);
    s.read("heldout_utts", e.sft_heldout_utts);
    if (const json* t = s.child("train")) {
      e.sft_train = parse_train(*t, "sft.train", e.sft_train);
      sft_seed_set = t->contains("seed");
    }
    s.finish();
  }
  if (const json* b = top.child("domain_b")) {
    Section s(*b, "domain_b");
    ExperimentConfig::DomainB domain;
    domain.synth = e.synth;
    if (const json* synth = s.child("synth")) {
      domain.synth = parse_synth(*synth, "domain_b.synth", domain.synth);
    }
    s.read("token_first", domain.token_first);
    s.read("token_last", domain.token_last);
    s.read("text_utts", domain.text_utts);
    s.read("eval_utts", domain.eval_utts);
    s.finish();
    e.domain_b = domain;
  }
  if (const json* input = top.child("input")) {
    Section s(*input, "input");
    std::string ckpt;
    if (s.read("checkpoint", ckpt)) {
      m.input_checkpoint = existing_file(base_dir, ckpt, "input checkpoint");
    }
    s.finish();
  }
  if (const json* output = top.child("output")) {
    Section s(*output, "output");
    std::string value;
    if (s.read("checkpoint", value)) {
      m.output_checkpoint = writable_file(base_dir, value, "checkpoint");
    }
    if (s.read("report", value)) m.output_report = writable_file(base_dir, value, "report");
    s.finish();
  }
  top.finish();

  if (!train_seed_set) e.train.seed = e.model_seed;
  if (!sft_seed_set) e.sft_train.seed = e.model_seed;
  e.check();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open manifest '{}'", path.string()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("manifest '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  fs::path base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_manifest(doc, base);
}

}  // namespace tasu
