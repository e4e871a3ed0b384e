#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "todflow/learn.hpp"
#include "todflow/synth.hpp"

namespace todflow::cli {

struct CorpusArgs {
  std::string data;
  std::string format;
  std::string rewrite;
  /// "all", "train" or "test".
  std::string split = "all";
  double split_ratio = 0.9;
  std::uint64_t split_seed = 0;
};

struct InferArgs {
  std::string config;
  CorpusArgs corpus;
  std::string method = "todflow";
  std::string target = "system";
  LearnConfig learn;
  std::string out;
  std::string report;
  std::size_t jobs = 1;
};

struct ConditionArgs {
  std::string config;
  std::string graph;
  CorpusArgs corpus;
  std::string speaker = "system";
  std::string provider = "oracle";
  std::string replay;
  std::string provider_cmd;
  std::int64_t timeout_ms = 30000;
  double dropout_p = 0.3;
  double spurious_p = 0.2;
  std::string strategy = "compliance";
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalArgs {
  std::string config;
  std::string pred;
  std::string gold;
  std::string format;
  std::string speaker = "system";
  std::string graph;
  std::string truth;
  std::size_t max_turns = 0;
  std::string contexts_from;
  std::uint64_t seed = 0;
  std::string out;
};

struct ExportArgs {
  std::string graph;
  std::string dot;
  bool no_shd = false;
  bool no_negative_edges = false;
  std::vector<std::string> acts;
};

struct SynthArgs {
  std::string config;
  SynthConfig synth;
  std::string out;
};

struct EditArgs {
  std::string graph;
  std::string script;
  std::string out;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::string table;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 0;
  bool timing = false;
};

void add_infer(CLI::App& app, InferArgs& args);
void add_condition(CLI::App& app, ConditionArgs& args);
void add_eval(CLI::App& app, EvalArgs& args);
void add_export(CLI::App& app, ExportArgs& args);
void add_synth(CLI::App& app, SynthArgs& args);
void add_edit(CLI::App& app, EditArgs& args);
void add_bench(CLI::App& app, BenchArgs& args);

/// Applies a JSON file whose keys mirror the long flags of `cmd` (with
/// '_' for '-') to every option not given on the command line.
void merge_config(CLI::App& cmd, const std::string& path);

int run_infer(const InferArgs& args);
int run_condition(const ConditionArgs& args);
int run_eval(const EvalArgs& args);
int run_export(const ExportArgs& args);
int run_synth(const SynthArgs& args);
int run_edit(const EditArgs& args);
int run_bench(const BenchArgs& args);

}  // namespace todflow::cli
