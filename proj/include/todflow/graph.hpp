#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "todflow/core.hpp"
#include "todflow/dnf.hpp"

namespace todflow {

/// Conditions attached to one act.
struct ActConditions {
  /// Merged Can and not-Shdnt. Default: always allowed.
  DnfCondition can_shdnt = DnfCondition::always();
  /// Default: never required.
  DnfCondition shd = DnfCondition::never();
  /// Plain Can, filled only by the regularized-Can baseline.
  std::optional<DnfCondition> can_only;

  bool is_default() const { return can_shdnt.is_true() && shd.is_false() && !can_only; }

  friend bool operator==(const ActConditions&, const ActConditions&) = default;
};

enum class ConditionSlot { can_shdnt, shd, can_only };

std::string_view to_string(ConditionSlot s);
std::optional<ConditionSlot> parse_condition_slot(std::string_view s);

struct GraphMetadata {
  std::string domain_id;
  /// "todflow", "bc", "can-reg", "truth", ...
  std::string objective_kind;
  /// Snapshot of the learning configuration (null when not learned).
  nlohmann::ordered_json learn_config;
  std::string corpus_fingerprint;
  /// Which speakers' acts were fitted: "user", "system" or "both".
  std::string targets;
  /// Unrecognized metadata keys, kept for round-trips.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const GraphMetadata&, const GraphMetadata&) = default;
};

class TodFlowGraph {
 public:
  TodFlowGraph() = default;
  explicit TodFlowGraph(ActVocabulary vocabulary);

  const ActVocabulary& vocabulary() const { return vocab_; }
  std::size_t size() const { return vocab_.size(); }

  const ActConditions& conditions(ActIndex act) const { return acts_.at(act); }
  /// Throws VocabularyError when a literal references an act outside the
  /// vocabulary or `act` itself is out of range.
  void set_conditions(ActIndex act, ActConditions conditions);

  const GraphMetadata& metadata() const { return metadata_; }
  GraphMetadata& metadata() { return metadata_; }

  /// Copy in which every act outside `keep` is reset to default conditions.
  TodFlowGraph restricted_to(const ActionSet& keep) const;

  /// The same conditions re-indexed onto another vocabulary, matched by
  /// label. Acts absent from `target` are dropped, new ones get defaults.
  /// Throws VocabularyError when a kept condition references a dropped act.
  TodFlowGraph with_vocabulary(const ActVocabulary& target) const;

  friend bool operator==(const TodFlowGraph&, const TodFlowGraph&) = default;

 private:
  ActVocabulary vocab_;
  std::vector<ActConditions> acts_;
  GraphMetadata metadata_;
};

/// Throws VocabularyError when a literal indexes past c.size().
inline bool eval_condition(const DnfCondition& cond, const CompletionVector& c) {
  return cond.evaluate(c);
}

/// Acts whose can_shdnt condition holds at c. Throws VocabularyError when
/// c is not sized to the vocabulary.
ActionSet allowed_acts(const TodFlowGraph& graph, const CompletionVector& c);
/// Acts whose shd condition holds at c.
ActionSet should_acts(const TodFlowGraph& graph, const CompletionVector& c);

// ---- persistence -----------------------------------------------------------

nlohmann::ordered_json graph_to_json(const TodFlowGraph& graph);
/// Throws GraphFormatError with a JSON pointer to the offending value.
TodFlowGraph graph_from_json(const nlohmann::json& doc);

/// Pretty-printed JSON text, newline-terminated.
std::string serialize(const TodFlowGraph& graph);
TodFlowGraph deserialize(std::string_view text);

TodFlowGraph load_graph(const std::filesystem::path& path);
void save_graph(const std::filesystem::path& path, const TodFlowGraph& graph);

/// Clause list in the graph JSON encoding: [[{"i": 3, "neg": true}, ...], ...].
nlohmann::ordered_json condition_to_json(const DnfCondition& cond);

// ---- DOT export ------------------------------------------------------------

struct DotOptions {
  bool include_shd = true;
  bool include_negative_edges = true;
  /// Only these acts get their conditions drawn (all when empty).
  std::optional<ActionSet> acts;
};

/// Act nodes are a<i>; each clause becomes one AND node (can<i>_<k>,
/// shd<i>_<k>, only<i>_<k>) feeding its act. Negative literals use dashed
/// edges, Shd edges are blue. Conditions at their default are omitted; a
/// False can_shdnt is drawn as a can<i>_false node.
std::string to_dot(const TodFlowGraph& graph, const DotOptions& options = {});

/// Reads a document written by to_dot (with negative edges included) back
/// into a graph. Throws GraphFormatError on anything it cannot interpret.
TodFlowGraph from_dot(std::string_view text);

// ---- editing ---------------------------------------------------------------

struct GraphEdit {
  enum class Op { set_condition, add_clause, remove_clause };
  Op op = Op::set_condition;
  ActIndex act = 0;
  ConditionSlot target = ConditionSlot::can_shdnt;
  /// Payload of set_condition.
  DnfCondition condition;
  /// Payload of add_clause / remove_clause.
  Clause clause;
};

/// Returns an edited copy. Throws EditError for an unknown act, an invalid
/// literal, or removal of a clause that is not present.
TodFlowGraph apply_edit(const TodFlowGraph& graph, const GraphEdit& edit);
TodFlowGraph apply_edits(const TodFlowGraph& graph, std::span<const GraphEdit> edits);

/// Edit script:
///   {"edits": [{"op": "add_clause", "act": "SYSTEM reqmore", "target": "shd",
///               "clause": ["USER thank_you", "!SYSTEM reqmore"]},
///              {"op": "set_condition", "act": "...", "target": "can_shdnt",
///               "condition": [["A", "!B"], ["C"]]}]}
/// A literal is a label (prefix "!" to negate) or {"i": int, "neg": bool};
/// a condition may also be the literal true or false. Throws EditError.
std::vector<GraphEdit> parse_edit_script(const nlohmann::json& script, const ActVocabulary& vocab);

}  // namespace todflow
