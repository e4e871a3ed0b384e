#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "todflow/condition.hpp"
#include "todflow/core.hpp"
#include "todflow/graph.hpp"
#include "todflow/ingest.hpp"
#include "todflow/learn.hpp"
#include "todflow/providers.hpp"
#include "todflow/synth.hpp"

namespace todflow {

// ---- turn metrics ----------------------------------------------------------

struct TurnScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  ActionSet predicted;
  ActionSet gold;
};

/// Set precision, recall and F1. Two empty sets score 1; exactly one empty
/// set scores 0.
TurnScore f1_turn(const ActionSet& predicted, const ActionSet& gold);

/// Mean F1 over the turns of one domain. Throws NoTurns when empty.
double score_domain(std::span<const TurnScore> turns);
double score_domain(std::span<const double> turn_f1);

/// Unweighted mean of domain means. Throws NoTurns when empty.
double aggregate_domains(std::span<const double> domain_means);

/// F1 of the pooled true/false positive counts over all turns.
/// Throws NoTurns when empty.
double micro_f1(std::span<const TurnScore> turns);

// ---- graph recovery --------------------------------------------------------

/// Clause and literal differences of an inferred condition against the
/// truth. Literals are pooled over all clauses, so a literal listed as
/// missing is absent from every inferred clause.
struct ConditionDiff {
  std::vector<Clause> missing_clauses;
  std::vector<Clause> redundant_clauses;
  std::vector<Literal> missing_literals;
  std::vector<Literal> redundant_literals;

  bool empty() const {
    return missing_clauses.empty() && redundant_clauses.empty() && missing_literals.empty() &&
           redundant_literals.empty();
  }
};

ConditionDiff diff_conditions(const DnfCondition& inferred, const DnfCondition& truth);

struct ActRecovery {
  ActIndex act = 0;
  std::size_t contexts = 0;
  bool can_shdnt_reachable = false;
  bool can_shdnt_full = false;
  bool shd_reachable = false;
  bool shd_full = false;
  ConditionDiff can_shdnt_diff;
  ConditionDiff shd_diff;
};

struct RecoveryOptions {
  /// Acts to score (all when unset).
  std::optional<ActionSet> acts;
  /// Reachable completions per act (indexed by the truth vocabulary).
  /// Acts without an entry fall back to `contexts`; when both are empty the
  /// reachable figure equals the full one.
  std::vector<std::vector<CompletionVector>> act_contexts;
  std::vector<CompletionVector> contexts;
  std::uint64_t seed = 0;
  /// Random completions used instead of the full table when N > 16.
  std::size_t samples = 100000;
};

struct RecoveryReport {
  std::vector<ActRecovery> acts;
  /// Fractions of scored acts whose can_shdnt is equivalent to the truth.
  double reachable_rate = 1.0;
  double full_rate = 1.0;
  /// Same, for both can_shdnt and shd together.
  double reachable_rate_both = 1.0;
  double full_rate_both = 1.0;
  /// The full table was replaced by random completions.
  bool sampled = false;
};

/// Truth-table comparison of every scored act. The inferred graph is
/// re-indexed onto the truth vocabulary by label first; throws
/// VocabularyError when it references labels the truth lacks.
RecoveryReport graph_recovery_score(const TodFlowGraph& inferred, const TodFlowGraph& truth,
                                    const RecoveryOptions& options = {});

/// Scores user and system acts of a synthetic truth graph over the
/// contexts the simulator can reach at their own decision points.
RecoveryOptions synth_recovery_options(const TodFlowGraph& truth, std::size_t max_turns,
                                       TargetSpeaker target = TargetSpeaker::both);

nlohmann::ordered_json to_json(const RecoveryReport& report, const ActVocabulary& vocab);

// ---- benchmark -------------------------------------------------------------

struct ProviderSpec {
  enum class Kind { oracle, replay, external };
  Kind kind = Kind::oracle;
  /// Oracle draws; its seed is replaced by one derived from the run seed.
  NoisyOracleConfig oracle;
  std::filesystem::path replay;
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{30000};
};

struct BenchmarkConfig {
  /// Synthetic domains; each run's seed replaces SynthConfig::seed.
  std::vector<SynthConfig> synth;
  std::vector<CorpusFile> corpora;
  /// "none", "todflow", "bc", "can-reg".
  std::vector<std::string> methods = {"none", "todflow", "bc", "can-reg"};
  std::vector<RankingStrategy::Kind> strategies = {
      RankingStrategy::Kind::greedy, RankingStrategy::Kind::compliance,
      RankingStrategy::Kind::majority, RankingStrategy::Kind::uniform};
  std::vector<std::uint64_t> seeds = {0};
  ProviderSpec provider;
  std::size_t k = 10;
  LearnConfig learn;
  double split_ratio = 0.9;
  TargetSpeaker target = TargetSpeaker::system;
  std::size_t jobs = 1;

  /// Throws UsageError.
  void validate() const;
};

nlohmann::ordered_json to_json(const BenchmarkConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected with UsageError.
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j, BenchmarkConfig base = {});

struct CellResult {
  std::string method;
  RankingStrategy::Kind strategy = RankingStrategy::Kind::greedy;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  /// Below the no-graph greedy cell of the same run.
  bool regression = false;
};

struct DomainRun {
  std::uint64_t seed = 0;
  std::string domain;
  std::size_t train_trajectories = 0;
  std::size_t test_trajectories = 0;
  std::size_t turns = 0;
  std::size_t skipped_turns = 0;
  std::vector<CellResult> cells;
  /// Reachable can_shdnt equivalence rate per learned method (synthetic only).
  std::map<std::string, double> recovery;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  /// Ordered by seed, then domain in configuration order.
  std::vector<DomainRun> runs;
  double runtime_seconds = 0.0;

  /// Unweighted mean over the domains of one seed (all seeds when unset).
  double cell_mean(const std::string& method, RankingStrategy::Kind strategy,
                   std::optional<std::uint64_t> seed = std::nullopt, bool micro = false) const;
  /// Every (seed, domain, method, strategy) flagged as a regression.
  std::vector<std::string> regressions() const;
};

/// Runs every (seed, domain) combination: split, infer each method's graph
/// on train, request k candidates per test decision point and score each
/// method and strategy. Provider failures on more than 1% of the turns of a
/// run throw BenchmarkError; fewer are skipped and logged.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

/// Runtime is left out unless asked for, so reports of identical runs are
/// byte-identical.
nlohmann::ordered_json to_json(const BenchmarkReport& report, bool include_runtime = false);
/// Method rows by strategy columns, one block per seed plus the mean.
std::string format_table(const BenchmarkReport& report);

}  // namespace todflow
