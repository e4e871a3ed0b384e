#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "todflow/core.hpp"
#include "todflow/dnf.hpp"
#include "todflow/graph.hpp"
#include "todflow/ingest.hpp"

namespace todflow {

struct LearnConfig {
  /// Weight of the "not executed where disallowed" term relative to the
  /// "allowed where executed" term.
  double alpha = 0.5;
  std::size_t max_depth = 6;
  std::size_t min_leaf_examples = 5;
  /// A Shd leaf becomes a clause only when at least this fraction of its
  /// examples execute the act.
  double shd_leaf_purity = 0.95;
  double shd_neg_weight = 4.0;
  /// Literal cost of the regularized-Can baseline.
  double complexity_penalty = 0.0;
  /// Family-wise chi-square level a split must reach; 0 disables the test.
  double split_significance = 0.01;
  std::uint64_t seed = 0;

  /// Throws UsageError naming the first out-of-range field.
  void validate() const;
};

nlohmann::ordered_json to_json(const LearnConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
LearnConfig learn_config_from_json(const nlohmann::json& j, LearnConfig base = {});

enum class ObjectiveKind { todflow, bc, can_reg };

std::string_view to_string(ObjectiveKind k);
std::optional<ObjectiveKind> parse_objective_kind(std::string_view s);

/// Confusion counts of a condition f against an act's labels a[n].
struct ObjectiveTerms {
  std::size_t tp = 0;  // f=1, a=1
  std::size_t fp = 0;  // f=1, a=0
  std::size_t fn = 0;  // f=0, a=1
  std::size_t tn = 0;  // f=0, a=0

  std::size_t total() const { return tp + fp + fn + tn; }

  /// P(a=1 | f=1), the Shd objective. Undefined when f never fires.
  std::optional<double> shd_precision() const;
  /// P(f=1 | a=1), the Can objective and the first Can-and-not-Shdnt term.
  std::optional<double> can_recall() const;
  /// P(f=0 | a=0), the second Can-and-not-Shdnt term.
  std::optional<double> shdnt_specificity() const;
  /// can_recall + alpha * shdnt_specificity; an undefined term counts as
  /// satisfied (1) since no example can contradict it.
  std::optional<double> can_shdnt(double alpha) const;
  /// P(f = a), the behavior-cloning objective.
  std::optional<double> bc_accuracy() const;
};

struct FitReport {
  ActIndex act = 0;
  ObjectiveKind kind = ObjectiveKind::todflow;
  ConditionSlot slot = ConditionSlot::can_shdnt;
  ObjectiveTerms train;
  std::optional<ObjectiveTerms> heldout;
  std::size_t literals = 0;
  std::size_t tree_nodes = 0;
  std::vector<double> leaf_purities;
  std::vector<std::string> warnings;
};

struct FitResult {
  DnfCondition condition;
  FitReport report;
};

/// The fitters read only examples of the act's own role: the caller passes
/// a dataset built for that speaker. `heldout`, when given, is scored too.
/// An empty dataset throws EmptyCorpus.
FitResult fit_shd(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                  const ExampleDataset* heldout = nullptr);
FitResult fit_can_shdnt(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                        const ExampleDataset* heldout = nullptr);
FitResult fit_bc(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                 const ExampleDataset* heldout = nullptr);
FitResult fit_can_regularized(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                              const ExampleDataset* heldout = nullptr);

/// Confusion counts of `condition` for act `act` over the dataset.
ObjectiveTerms evaluate_objectives(const DnfCondition& condition, const ExampleDataset& data,
                                   ActIndex act);

/// J_Can minus penalty times literal count, the regularized baseline's score.
double regularized_can_score(const ObjectiveTerms& terms, std::size_t literals, double penalty);

struct InferOptions {
  ObjectiveKind method = ObjectiveKind::todflow;
  LearnConfig learn;
  TargetSpeaker target = TargetSpeaker::system;
  /// Worker threads for per-act fitting; results do not depend on it.
  std::size_t jobs = 1;
  std::string domain_id;
};

struct InferResult {
  TodFlowGraph graph;
  std::vector<FitReport> reports;
};

/// Infers a graph over `vocab` from training trajectories. Each act is
/// fitted on the decision points of the speaker that performs it; acts of
/// other speakers (and DB results) keep default conditions.
InferResult infer_graph(std::span<const Trajectory> train, const ActVocabulary& vocab,
                        const InferOptions& options,
                        std::span<const Trajectory> heldout = {});

/// The speaker that performs each act most often in the corpus, or nullopt
/// for acts that only ever appear as DB results.
std::vector<std::optional<Speaker>> act_roles(std::span<const Trajectory> trajectories,
                                              const ActVocabulary& vocab);

}  // namespace todflow
