#include "tasu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "tasu/error.hpp"

namespace tasu {
namespace {

constexpr char kMagic[4] = {'T', 'A', 'S', 'U'};

template <typename T>
void put_le(std::ostream& out, T v) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw TruncatedPayload(fmt::format("checkpoint truncated in {}", what));
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(const ProjectorModel& model, std::ostream& out) {
  model.check_shapes();
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.bottleneck));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.output_dim));
  for (auto tensor : model.tensors()) {
    for (double v : tensor) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error("failed writing checkpoint");
}

ProjectorModel read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagic("not a TASU checkpoint");
  }
  const auto version = get_le<std::uint16_t>(in, "header");
  if (version != kCheckpointVersion) throw VersionMismatch(version, kCheckpointVersion);
  const auto input_dim = get_le<std::uint32_t>(in, "header");
  const auto bottleneck = get_le<std::uint32_t>(in, "header");
  const auto output_dim = get_le<std::uint32_t>(in, "header");
  ProjectorModel model = ProjectorModel::zeros(input_dim, bottleneck, output_dim);
  for (auto tensor : model.tensors()) {
    for (double& v : tensor) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "parameters"));
  }
  if (!model.all_finite()) throw ValidationError("checkpoint holds non-finite parameters");
  return model;
}

void write_checkpoint(const ProjectorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  write_checkpoint(model, out);
}

ProjectorModel read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open checkpoint '{}'", path.string()));
  return read_checkpoint(in);
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

}  // namespace tasu
