#include "common.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "tasu/error.hpp"

namespace tasu::cli {

void emit_json(const nlohmann::json& doc, const std::string& path) {
  if (path.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path));
  out << doc.dump(2) << '\n';
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

std::vector<std::filesystem::path> posterior_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".ctcp" || ext == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string utterance_name(std::size_t index) { return fmt::format("{:06d}", index); }

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(fmt::format("cannot create directory '{}'", dir.string()));
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void print_report_table(const std::vector<EvalReport>& reports) {
  std::cerr << fmt::format("{:<14} {:>8} {:>10} {:>10} {:>8} {:>8}\n", "arm", "WER",
                           "frame_acc", "train_acc", "gap", "ratio");
  for (const auto& r : reports) {
    std::cerr << fmt::format("{:<14} {:>8.4f} {:>10.4f} {:>10.4f} {:>8.4f} {:>8.3f}\n", r.arm,
                             r.wer, r.frame_accuracy, r.train_frame_accuracy, r.transfer_gap,
                             r.downsampling_ratio);
  }
}

nlohmann::json reports_json(const std::vector<EvalReport>& reports) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : reports) out[r.arm] = to_json(r);
  return out;
}

}  // namespace tasu::cli
