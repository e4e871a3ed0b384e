#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "todflow/core.hpp"

namespace todflow {

enum class CorpusFormat { jsonl, sgd };

struct CorpusFile {
  std::filesystem::path path;
  /// Detected from the content when empty.
  std::optional<CorpusFormat> format;
};

enum class TargetSpeaker { user, system, both };
enum class Split { train, test, all };

std::optional<CorpusFormat> parse_corpus_format(std::string_view s);
std::optional<TargetSpeaker> parse_target(std::string_view s);
std::string_view to_string(TargetSpeaker t);
std::string_view to_string(Split s);

/// The (c_t, a_t) graph-inference dataset.
struct ExampleDataset {
  ActVocabulary vocabulary;
  /// Grouped by trajectory, ordered by turn.
  std::vector<GraphExample> examples;
  Split split = Split::all;
};

/// Reads a corpus file. Throws FileNotFound, ParseError (with line number for
/// JSONL) or SchemaError naming the missing field.
std::vector<Trajectory> parse_trajectories(const CorpusFile& file);

/// JSONL, one dialogue per line:
///   {"id"?: str, "domain": str, "turns": [{"speaker": "user"|"system"|"db",
///    "acts": [str], "utterance"?: str, "db_result"?: str}]}
/// Blank lines are skipped; an input without any dialogue is a ParseError.
std::vector<Trajectory> parse_jsonl(std::istream& in, const std::string& source = "<input>");

/// A JSON array of SGD-style dialogues (or a single dialogue object).
std::vector<Trajectory> parse_sgd(std::istream& in, const std::string& source = "<input>");

/// Converts one SGD dialogue. Acts become "<SPEAKER> <act> <slot>" labels
/// (intent acts carry the intent value instead of the slot name). Each
/// service call inserts a "SYSTEM query <Intent>" turn followed by a db turn
/// whose result is "query_success" or "query_failure", ahead of the system
/// response that carries the call.
Trajectory sgd_adapt(const nlohmann::json& dialogue);

/// JSONL encoding of one trajectory (the inverse of parse_jsonl).
nlohmann::ordered_json trajectory_to_json(const Trajectory& traj);
std::string trajectories_to_jsonl(std::span<const Trajectory> trajectories);

/// A user-supplied label rewrite table. Keys are exact labels or prefixes
/// ending in '*'; values are replacement label lists, where '*' stands for
/// the text matched by the key's '*'.
class LabelRewrite {
 public:
  LabelRewrite() = default;
  static LabelRewrite from_json(const nlohmann::json& table);

  std::vector<std::string> apply(const std::string& label) const;
  void apply(Trajectory& traj) const;
  bool empty() const { return rules_.empty(); }

 private:
  struct Rule {
    std::string pattern;
    bool prefix = false;
    std::vector<std::string> replacement;
  };
  std::vector<Rule> rules_;
};

/// One point where the target speaker acts.
struct DecisionPoint {
  std::size_t turn_index = 0;
  Speaker speaker = Speaker::system;
  /// Everything recorded before this turn (same-turn user acts included,
  /// since they sit in earlier records).
  CompletionVector completion;
  ActionSet gold;
};

/// How unknown labels are handled while replaying a trajectory.
enum class UnknownLabels { error, skip };

bool speaker_matches(Speaker s, TargetSpeaker target);

/// Walks a trajectory: c_0 = 0 and c_{t+1} = c_t | acts_t | db_result_t.
/// Returns one point per record of the target speaker (db records never).
std::vector<DecisionPoint> decision_points(const Trajectory& traj, const ActVocabulary& vocab,
                                           TargetSpeaker target,
                                           UnknownLabels unknown = UnknownLabels::error);

/// Builds (c_t, a_t) pairs. Throws VocabularyError naming any label outside
/// the vocabulary.
ExampleDataset build_examples(std::span<const Trajectory> trajectories, const ActVocabulary& vocab,
                              TargetSpeaker target, Split split = Split::all);

struct TrajectorySplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

/// Deterministic per-domain split: trajectories of each domain are ordered
/// by a seeded hash of their id and the first round(ratio * n) go to train.
/// Input order is kept within each side.
TrajectorySplit split_trajectories(std::span<const Trajectory> trajectories, std::uint64_t seed,
                                   double ratio = 0.9);

/// Stable 64-bit hash of the examples and vocabulary, as 16 hex digits.
std::string fingerprint(const ExampleDataset& dataset);

}  // namespace todflow
