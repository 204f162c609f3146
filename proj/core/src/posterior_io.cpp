#include "tasu/posterior_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tasu/error.hpp"

namespace tasu {
namespace {

constexpr std::array<char, 4> kMagic = {'C', 'T', 'C', 'P'};

void put_u16(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(bytes, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

bool get_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw ShapeMismatch(fmt::format("{} {} does not fit in u32", what, v));
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_ctcp(const PosteriorSequence& posteriors, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_u16(out, kPosteriorFormatVersion);
  put_u32(out, checked_u32(static_cast<std::size_t>(posteriors.blank_id()), "blank id"));
  put_u32(out, checked_u32(posteriors.num_frames(), "frame count"));
  put_u32(out, checked_u32(posteriors.vocab_size(), "vocab size"));
  for (float v : posteriors.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw Error("failed writing posterior stream");
}

constexpr std::uint32_t kMaxVocab = 1u << 24;

PosteriorSequence read_ctcp(std::istream& in, double tolerance) {
  unsigned char header[18];
  if (!get_bytes(in, header, 4) || std::memcmp(header, kMagic.data(), 4) != 0) {
    throw BadMagic("not a CTCP posterior file");
  }
  if (!get_bytes(in, header + 4, sizeof(header) - 4)) {
    throw TruncatedPayload("posterior header is truncated");
  }
  const unsigned version = header[4] | (header[5] << 8);
  if (version != kPosteriorFormatVersion) throw VersionMismatch(version, kPosteriorFormatVersion);
  const std::uint32_t blank = load_u32(header + 6);
  const std::uint32_t frames = load_u32(header + 10);
  const std::uint32_t vocab = load_u32(header + 14);
  if (vocab == 0 && frames > 0) throw ShapeMismatch("posterior file has V = 0");
  if (vocab > 0 && blank >= vocab) throw TokenOutOfRange(blank, vocab);

  if (vocab > kMaxVocab) {
    throw ShapeMismatch(fmt::format("posterior file declares V = {} (limit {})", vocab, kMaxVocab));
  }

  // Read row by row so a lying header cannot force a huge allocation up front.
  const std::size_t count = static_cast<std::size_t>(frames) * vocab;
  std::vector<float> data;
  data.reserve(std::min<std::size_t>(count, std::size_t{1} << 20));
  std::vector<unsigned char> row(static_cast<std::size_t>(vocab) * 4);
  for (std::uint32_t t = 0; t < frames; ++t) {
    if (!get_bytes(in, row.data(), row.size())) {
      throw TruncatedPayload(
          fmt::format("header declares {} frames but payload ends in frame {}", frames, t));
    }
    for (std::uint32_t k = 0; k < vocab; ++k) {
      data.push_back(std::bit_cast<float>(load_u32(row.data() + 4 * k)));
    }
  }
  PosteriorSequence out(frames, vocab, static_cast<TokenId>(blank), std::move(data));
  validate(out, tolerance);
  return out;
}

nlohmann::json posteriors_to_json(const PosteriorSequence& posteriors) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t t = 0; t < posteriors.num_frames(); ++t) {
    auto row = posteriors.frame(t);
    // float -> double is exact, and the shortest double repr round-trips.
    frames.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"blank_id", posteriors.blank_id()},
          {"vocab_size", posteriors.vocab_size()},
          {"frames", std::move(frames)}};
}

PosteriorSequence posteriors_from_json(const nlohmann::json& doc, double tolerance) {
  try {
    if (!doc.is_object()) throw ValidationError("posterior JSON must be an object");
    for (const auto& [key, _] : doc.items()) {
      if (key != "blank_id" && key != "vocab_size" && key != "frames") {
        throw ValidationError(fmt::format("unknown key '{}' in posterior JSON", key));
      }
    }
    const auto blank = doc.at("blank_id").get<TokenId>();
    const auto& rows = doc.at("frames");
    if (!rows.is_array()) throw ValidationError("'frames' must be an array");
    std::size_t vocab = 0;
    if (doc.contains("vocab_size")) {
      vocab = doc.at("vocab_size").get<std::size_t>();
    } else if (!rows.empty()) {
      vocab = rows.front().size();
    } else {
      throw ValidationError("empty posterior JSON needs 'vocab_size'");
    }
    std::vector<float> data;
    data.reserve(rows.size() * vocab);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const auto& row = rows[t];
      if (!row.is_array() || row.size() != vocab) {
        throw ShapeMismatch(fmt::format("frame {} does not have {} entries", t, vocab));
      }
      for (const auto& v : row) data.push_back(static_cast<float>(v.get<double>()));
    }
    PosteriorSequence out(rows.size(), vocab, blank, std::move(data));
    validate(out, tolerance);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed posterior JSON: {}", e.what()));
  }
}

void write_posteriors(const PosteriorSequence& posteriors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  if (path.extension() == ".json") {
    out << posteriors_to_json(posteriors).dump() << '\n';
  } else {
    write_ctcp(posteriors, out);
  }
  if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

PosteriorSequence read_posteriors(const std::filesystem::path& path, double tolerance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  int first = in.peek();
  while (first == ' ' || first == '\n' || first == '\r' || first == '\t') {
    in.get();
    first = in.peek();
  }
  if (first == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("'{}': {}", path.string(), e.what()));
    }
    return posteriors_from_json(doc, tolerance);
  }
  return read_ctcp(in, tolerance);
}

Vocab read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open vocabulary '{}'", path.string()));
  std::vector<std::string> tokens;
  std::string line;
  TokenId blank = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == kBlankToken) {
      if (blank >= 0) throw ConfigError("vocabulary lists '<blank>' more than once");
      blank = static_cast<TokenId>(tokens.size());
    }
    tokens.push_back(line);
  }
  if (blank < 0) throw ConfigError(fmt::format("vocabulary '{}' has no '<blank>'", path.string()));
  return Vocab(std::move(tokens), blank);
}

void write_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  for (const auto& tok : vocab.tokens()) out << tok << '\n';
}

}  // namespace tasu
