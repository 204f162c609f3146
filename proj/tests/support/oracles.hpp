#pragma once

// Brute-force reference implementations and random input generators used by
// the tests. Written from the definitions, without reusing library code.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tasu/posterior.hpp"

namespace tasu::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double low, double high) { return low + (high - low) * uniform(); }
  int integer(int low, int high) {
    return low + static_cast<int>(engine_() % static_cast<std::uint64_t>(high - low + 1));
  }
  bool coin(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Valid posterior rows with a mix of blank-dominated frames, repeated labels,
// exact two-way ties and diffuse frames.
inline PosteriorSequence random_posteriors(Gen& gen, std::size_t vocab, std::size_t frames,
                                           TokenId blank) {
  PosteriorSequence p(vocab, blank);
  std::vector<double> row(vocab);
  int previous = gen.integer(0, static_cast<int>(vocab) - 1);
  for (std::size_t t = 0; t < frames; ++t) {
    const double mode = gen.uniform();
    if (mode < 0.1 && vocab >= 2) {
      std::fill(row.begin(), row.end(), 0.0);
      const int a = gen.integer(0, static_cast<int>(vocab) - 1);
      int b = gen.integer(0, static_cast<int>(vocab) - 2);
      if (b >= a) ++b;
      row[a] = 0.5;
      row[b] = 0.5;
    } else {
      double total = 0.0;
      for (auto& v : row) {
        v = gen.uniform();
        total += v;
      }
      int hot = -1;
      double mass = 0.0;
      if (mode < 0.4) {
        hot = blank;
        mass = gen.uniform(0.3, 1.0);
      } else if (mode < 0.85) {
        hot = gen.coin(0.5) ? previous : gen.integer(0, static_cast<int>(vocab) - 1);
        mass = gen.uniform(0.3, 1.0);
      }
      if (hot < 0) {
        for (auto& v : row) v /= total;
      } else {
        const double rest = total - row[static_cast<std::size_t>(hot)];
        for (std::size_t k = 0; k < vocab; ++k) {
          row[k] = static_cast<int>(k) == hot ? mass
                   : rest > 0.0               ? (1.0 - mass) * row[k] / rest
                                              : 0.0;
        }
        if (rest <= 0.0) row[static_cast<std::size_t>(hot)] = 1.0;
      }
      previous = hot >= 0 ? hot : previous;
    }
    p.append(std::span<const double>(row));
  }
  return p;
}

inline TokenId naive_argmax(std::span<const float> row) {
  TokenId best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(k);
  }
  return best;
}

inline std::vector<TokenId> naive_labels(const PosteriorSequence& p) {
  std::vector<TokenId> out;
  for (std::size_t t = 0; t < p.num_frames(); ++t) out.push_back(naive_argmax(p.frame(t)));
  return out;
}

inline std::vector<TokenId> naive_dedup(const std::vector<TokenId>& ids) {
  std::vector<TokenId> out;
  for (TokenId id : ids) {
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

inline std::vector<TokenId> naive_collapse(const std::vector<TokenId>& path, TokenId blank) {
  std::vector<TokenId> out;
  for (TokenId id : naive_dedup(path)) {
    if (id != blank) out.push_back(id);
  }
  return out;
}

struct NaiveLsd {
  std::vector<std::vector<double>> kept;    // frames surviving removal
  std::vector<std::vector<double>> merged;  // exact 64-bit run means
  std::vector<TokenId> kept_labels;
};

inline NaiveLsd naive_lsd(const PosteriorSequence& p, double tau) {
  NaiveLsd out;
  const auto b = static_cast<std::size_t>(p.blank_id());
  for (std::size_t t = 0; t < p.num_frames(); ++t) {
    const auto row = p.frame(t);
    if (row[b] > tau) continue;
    out.kept.emplace_back(row.begin(), row.end());
    out.kept_labels.push_back(naive_argmax(row));
  }
  std::size_t i = 0;
  while (i < out.kept.size()) {
    std::size_t j = i;
    while (j < out.kept.size() && out.kept_labels[j] == out.kept_labels[i]) ++j;
    std::vector<double> mean(p.vocab_size(), 0.0);
    for (std::size_t r = i; r < j; ++r) {
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += out.kept[r][k];
    }
    for (auto& v : mean) v /= static_cast<double>(j - i);
    out.merged.push_back(std::move(mean));
    i = j;
  }
  return out;
}

// Plain recursion with memoisation, from the definition of edit distance.
inline std::size_t naive_edit_distance(const std::vector<TokenId>& a,
                                       const std::vector<TokenId>& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> long {
    if (i == a.size()) return static_cast<long>(b.size() - j);
    if (j == b.size()) return static_cast<long>(a.size() - i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    const long sub = d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    m = std::min({sub, d(i + 1, j) + 1, d(i, j + 1) + 1});
    return m;
  };
  return static_cast<std::size_t>(d(0, 0));
}

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tasu-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace tasu::testing
