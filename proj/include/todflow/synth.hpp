#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "todflow/core.hpp"
#include "todflow/graph.hpp"

namespace todflow {

struct SynthConfig {
  /// Split into roles: one DB result when n_acts >= 6, the rest halved
  /// between user (rounded down) and system acts.
  std::size_t n_acts = 8;
  std::size_t max_clause_literals = 3;
  std::size_t clauses_per_condition = 1;
  /// Fraction of user/system acts that get a non-trivial Shd condition.
  double shd_fraction = 0.25;
  std::size_t n_trajectories = 500;
  /// Upper bound on user + system records per dialogue.
  std::size_t max_turns = 16;
  /// Per recorded act occurrence: drop it or swap it for another act of the
  /// same speaker. The latent dialogue state is never affected.
  double annotation_noise_p = 0.0;
  std::uint64_t seed = 0;
  /// "fig3" selects the hand-coded rental-car schema instead of a random graph.
  std::string preset;

  /// Throws UsageError naming the offending field.
  void validate() const;
};

nlohmann::ordered_json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

struct SynthDomain {
  TodFlowGraph truth_graph;
  /// As recorded (with annotation noise).
  std::vector<Trajectory> trajectories;
  /// The same dialogues before annotation noise.
  std::vector<Trajectory> latent;
  /// Per trajectory: stopped because the next speaker had no allowed act.
  std::vector<bool> dead_end;
  std::size_t act_occurrences = 0;
  std::size_t perturbations = 0;
};

/// Speaker of each act of a synthetic or preset vocabulary, from the label
/// prefix ("USER ", "SYSTEM ", "DB ").
std::vector<Speaker> synth_roles(const ActVocabulary& vocab);

/// Random ground-truth graph. Acts get a random order whose first act is a
/// user act; positive literals only reference earlier acts, so no act
/// enables itself. Retries until every user/system act is allowed in some
/// reachable context, or throws SynthError.
TodFlowGraph gen_ground_truth_graph(const SynthConfig& cfg);

/// The rental-car scenario: a user intent, four user informs, four system
/// requests (allowed after the intent while the slot is neither informed nor
/// requested), a query allowed once all four slots are informed, and its DB
/// result.
TodFlowGraph fig3_graph();

/// Runs the exploring agent against `truth`. Each record executes the fired
/// and allowed Shd acts plus every other allowed act with probability 1/2
/// (one allowed act at random if that leaves the record empty). After a
/// system record, an allowed DB result is appended when its Shd fires or on
/// a fair coin. A dialogue ends after max_turns records, when the next
/// speaker has no allowed act, or after a record that completes nothing new.
SynthDomain simulate_dialogues(const TodFlowGraph& truth, const SynthConfig& cfg);

/// Graph (preset or random) plus simulated corpus.
SynthDomain make_synth_domain(const SynthConfig& cfg);

/// Completions seen at the decision points of `speaker` over every
/// execution the simulator can produce within max_turns records.
std::vector<CompletionVector> reachable_contexts(const TodFlowGraph& truth, Speaker speaker,
                                                 std::size_t max_turns);

}  // namespace todflow
