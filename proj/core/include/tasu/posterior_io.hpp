#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json_fwd.hpp>

#include "tasu/posterior.hpp"

namespace tasu {

// Binary posterior file (".ctcp"), all integers little-endian:
//
//   offset  size  field
//   0       4     magic "CTCP"
//   4       2     version (u16) = 1
//   6       4     blank_id (u32)
//   10      4     T (u32)
//   14      4     V (u32)
//   18      4*T*V frames, float32 (IEEE-754 LE), row-major
//
// The JSON mirror is {"blank_id": b, "vocab_size": V, "frames": [[...], ...]};
// "vocab_size" is optional on read when at least one frame is present.

inline constexpr std::uint16_t kPosteriorFormatVersion = 1;

void write_ctcp(const PosteriorSequence& posteriors, std::ostream& out);

/// Reads and validates (row tolerance `tolerance`). Throws BadMagic,
/// VersionMismatch, TruncatedPayload, or a validation error.
PosteriorSequence read_ctcp(std::istream& in, double tolerance = kDefaultRowTolerance);

nlohmann::json posteriors_to_json(const PosteriorSequence& posteriors);
PosteriorSequence posteriors_from_json(const nlohmann::json& doc,
                                       double tolerance = kDefaultRowTolerance);

/// Writes JSON when the path ends in ".json", the binary format otherwise.
void write_posteriors(const PosteriorSequence& posteriors, const std::filesystem::path& path);

/// Sniffs the content: "CTCP" magic selects the binary reader, a leading '{'
/// the JSON reader. Anything else is BadMagic.
PosteriorSequence read_posteriors(const std::filesystem::path& path,
                                  double tolerance = kDefaultRowTolerance);

/// One token per line; line number is the id. The blank must appear as
/// "<blank>" exactly once.
Vocab read_vocab(const std::filesystem::path& path);
void write_vocab(const Vocab& vocab, const std::filesystem::path& path);

}  // namespace tasu
