#pragma once

#include <filesystem>
#include <iosfwd>

#include "tasu/projector.hpp"

namespace tasu {

// Projector checkpoint, little-endian:
//   "TASU" | version u16 = 1 | V u32 | bottleneck u32 | out_dim u32 |
//   w1, b1, w2, b2 as float64, row-major, in that order.
// Run metadata (configs, seeds, loss curve) lives in a JSON sidecar written
// next to the checkpoint as "<checkpoint>.json".

inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const ProjectorModel& model, std::ostream& out);
ProjectorModel read_checkpoint(std::istream& in);

void write_checkpoint(const ProjectorModel& model, const std::filesystem::path& path);
ProjectorModel read_checkpoint(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace tasu
