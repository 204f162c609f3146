#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tasu/harness.hpp"
#include "tasu/posterior.hpp"

namespace tasu::cli {

/// Set by a subcommand's parse callback; main runs it inside the
/// exception-to-exit-code mapping.
using Action = std::function<void()>;

void add_simulate(CLI::App& app, Action& action);
void add_compact(CLI::App& app, Action& action);
void add_synth(CLI::App& app, Action& action);
void add_stats(CLI::App& app, Action& action);
void add_train(CLI::App& app, Action& action);
void add_sft(CLI::App& app, Action& action);
void add_eval(CLI::App& app, Action& action);
void add_decode(CLI::App& app, Action& action);
void add_gradcheck(CLI::App& app, Action& action);

/// Pretty JSON to `path`, or to stdout when `path` is empty.
void emit_json(const nlohmann::json& doc, const std::string& path);

/// Posterior files (.ctcp / .json) directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> posterior_files(const std::filesystem::path& dir);

/// Zero-padded utterance file stem: 000042.
std::string utterance_name(std::size_t index);

void ensure_directory(const std::filesystem::path& dir);

/// Reads one utterance per line; blank lines become empty utterances.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Aligned text table of arm -> metrics, for humans, on stderr.
void print_report_table(const std::vector<EvalReport>& reports);

/// {"arm": report, ...} keyed by arm name.
nlohmann::json reports_json(const std::vector<EvalReport>& reports);

}  // namespace tasu::cli
