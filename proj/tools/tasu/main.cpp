// tasu: command-line front end for posterior simulation, compaction,
// synthetic data generation and projector training/evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 invalid input or configuration,
// 3 runtime failure (e.g. a diverging optimizer).

#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "common.hpp"
#include "tasu/error.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("tasu"));

  CLI::App app{"Text-only speech/text alignment toolkit over CTC posteriors", "tasu"};
  app.require_subcommand(1);
  app.fallthrough(false);

  tasu::cli::Action action;
  tasu::cli::add_simulate(app, action);
  tasu::cli::add_compact(app, action);
  tasu::cli::add_synth(app, action);
  tasu::cli::add_stats(app, action);
  tasu::cli::add_train(app, action);
  tasu::cli::add_sft(app, action);
  tasu::cli::add_eval(app, action);
  tasu::cli::add_decode(app, action);
  tasu::cli::add_gradcheck(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const tasu::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const tasu::RuntimeFailure& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
}
