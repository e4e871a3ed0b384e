#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "todflow/errors.hpp"

namespace cli = todflow::cli;

int main(int argc, char** argv) {
  // Logs go to stderr so stdout stays clean for reports and predictions.
  spdlog::set_default_logger(spdlog::stderr_color_mt("todflow"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Infer TOD-Flow graphs from dialogues and use them to filter act predictions"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  cli::InferArgs infer;
  cli::ConditionArgs condition;
  cli::EvalArgs eval;
  cli::ExportArgs exp;
  cli::SynthArgs synth;
  cli::EditArgs edit;
  cli::BenchArgs bench;
  cli::add_infer(app, infer);
  cli::add_condition(app, condition);
  cli::add_eval(app, eval);
  cli::add_export(app, exp);
  cli::add_synth(app, synth);
  cli::add_edit(app, edit);
  cli::add_bench(app, bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto level = spdlog::level::from_str(log_level);
    if (level == spdlog::level::off && log_level != "off") throw todflow::UsageError("unknown --log-level '" + log_level + "'");
    spdlog::set_level(level);

    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    // bench's --config is a benchmark description, not a flag file.
    auto merge = [&](const std::string& path) {
      if (!path.empty()) cli::merge_config(*cmd, path);
    };
    if (name == "infer") {
      merge(infer.config);
      return cli::run_infer(infer);
    }
    if (name == "condition") {
      merge(condition.config);
      return cli::run_condition(condition);
    }
    if (name == "eval") {
      merge(eval.config);
      return cli::run_eval(eval);
    }
    if (name == "export") return cli::run_export(exp);
    if (name == "synth") {
      merge(synth.config);
      return cli::run_synth(synth);
    }
    if (name == "edit") return cli::run_edit(edit);
    if (name == "bench") return cli::run_bench(bench);
  } catch (const todflow::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
