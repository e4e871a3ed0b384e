#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "todflow/condition.hpp"
#include "todflow/core.hpp"

namespace todflow {

enum class ProviderMode { acts, responses };

std::string_view to_string(ProviderMode m);

struct ProviderRequest {
  std::string domain_id;
  /// Identify the turn for providers that key on it (replay, oracle).
  std::string trajectory_id;
  std::size_t turn_index = 0;
  /// Turns before the one being predicted.
  std::vector<TurnRecord> history;
  CompletionVector completion;
  std::size_t k = 10;
  ProviderMode mode = ProviderMode::acts;
};

struct ProviderReply {
  /// Rank order; candidates[i].provider_rank == i.
  std::vector<Candidate> candidates;
  /// Filled in responses mode, same rank order.
  std::vector<ResponseCandidate> responses;
  /// Dropped labels and similar non-fatal problems.
  std::vector<std::string> warnings;
};

class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  /// Returns at most request.k candidates or throws a typed error.
  virtual ProviderReply request(const ProviderRequest& request) = 0;
};

/// Candidate lists stored per (trajectory, turn), one JSON object per line:
///   {"traj": str, "turn": int, "candidates": [{"acts": [str], "text"?: str, "score"?: num}]}
class ReplayProvider : public CandidateProvider {
 public:
  ReplayProvider(const std::filesystem::path& file, ActVocabulary vocab);
  ReplayProvider(std::istream& in, ActVocabulary vocab, const std::string& source = "<replay>");

  /// Throws MissingCandidates for a turn that is not stored.
  ProviderReply request(const ProviderRequest& request) override;

 private:
  void load(std::istream& in, const std::string& source);

  ActVocabulary vocab_;
  std::map<std::pair<std::string, std::size_t>, nlohmann::json> stored_;
};

struct NoisyOracleConfig {
  double dropout_p = 0.3;
  double spurious_p = 0.2;
  std::uint64_t seed = 0;
  /// Rank candidates by their draw likelihood instead of draw order.
  bool rank_by_likelihood = false;

  /// Throws UsageError when a probability is outside [0, 1].
  void validate() const;
};

/// Perturbs the recorded act set of each turn. Each of the k candidates
/// drops every true act with dropout_p and inserts every other act of
/// `universe` with spurious_p / |universe|. Draws are seeded per
/// (trajectory, turn), so replies do not depend on request order.
class NoisyOracleProvider : public CandidateProvider {
 public:
  NoisyOracleProvider(std::span<const Trajectory> trajectories, ActVocabulary vocab,
                      ActionSet universe, NoisyOracleConfig cfg);

  /// Throws MissingCandidates for an unknown (trajectory, turn).
  ProviderReply request(const ProviderRequest& request) override;

  /// The k draws for one gold act set, in reply order.
  static std::vector<Candidate> draw(const ActionSet& gold, const ActionSet& universe,
                                     const NoisyOracleConfig& cfg, std::uint64_t stream_seed,
                                     std::size_t k);

 private:
  ActVocabulary vocab_;
  ActionSet universe_;
  NoisyOracleConfig cfg_;
  std::map<std::pair<std::string, std::size_t>, ActionSet> gold_;
};

/// Runs a provider process and talks to it one JSON line per request:
///   request: {"v": 1, "id": int, "domain": str, "k": int, "mode": "acts"|"responses",
///             "history": [turn objects], "completion": [labels]}
///   reply:   {"v": 1, "id": int, "candidates": [{"acts": [str], "text"?: str, "score"?: num}]}
/// The process is (re)started on demand. Spawn failure or an exit
/// mid-request throws ProviderSpawnError carrying the tail of its stderr; a
/// reply that misses the deadline throws ProviderTimeout and kills the
/// process; malformed replies throw ProtocolError.
class ExternalProvider : public CandidateProvider {
 public:
  ExternalProvider(std::vector<std::string> argv, ActVocabulary vocab,
                   std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ExternalProvider() override;

  ExternalProvider(const ExternalProvider&) = delete;
  ExternalProvider& operator=(const ExternalProvider&) = delete;

  ProviderReply request(const ProviderRequest& request) override;

 private:
  void spawn();
  void shutdown();
  std::string read_line(std::chrono::steady_clock::time_point deadline);
  void drain_stderr();
  [[noreturn]] void fail_exited(const std::string& what);

  std::vector<std::string> argv_;
  ActVocabulary vocab_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int err_child_ = -1;
  std::string out_buf_;
  std::string err_tail_;
  std::uint64_t next_id_ = 1;
};

/// Encodes a request on the wire (protocol v1).
nlohmann::ordered_json request_to_json(const ProviderRequest& request, std::uint64_t id,
                                       const ActVocabulary& vocab);

/// Parses a candidate list ({"acts", "text"?, "score"?} objects) against a
/// vocabulary. Unknown labels are dropped and reported in `warnings`.
/// Throws ProtocolError on malformed entries or more than k candidates.
ProviderReply parse_candidates(const nlohmann::json& candidates, const ActVocabulary& vocab,
                               std::size_t k, ProviderMode mode);

}  // namespace todflow
