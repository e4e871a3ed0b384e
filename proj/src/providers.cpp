#include "todflow/providers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <spdlog/spdlog.h>

#include "todflow/errors.hpp"
#include "todflow/ingest.hpp"
#include "todflow/rng.hpp"

namespace todflow {

using nlohmann::json;

std::string_view to_string(ProviderMode m) { return m == ProviderMode::acts ? "acts" : "responses"; }

ProviderReply parse_candidates(const json& candidates, const ActVocabulary& vocab, std::size_t k,
                               ProviderMode mode) {
  if (!candidates.is_array()) throw ProtocolError("'candidates' must be an array");
  if (candidates.size() > k) {
    throw ProtocolError("provider returned " + std::to_string(candidates.size()) +
                        " candidates for k=" + std::to_string(k));
  }
  ProviderReply reply;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const json& cj = candidates[r];
    if (!cj.is_object()) throw ProtocolError("candidate " + std::to_string(r) + " is not an object");
    auto acts = cj.find("acts");
    if (acts == cj.end() || !acts->is_array()) {
      throw ProtocolError("candidate " + std::to_string(r) + " has no 'acts' array");
    }
    Candidate cand;
    cand.provider_rank = r;
    for (const auto& a : *acts) {
      if (!a.is_string()) throw ProtocolError("candidate " + std::to_string(r) + " has a non-string act");
      const std::string label = ActVocabulary::normalize(a.get<std::string>());
      if (auto i = vocab.find(label)) {
        cand.acts.insert(*i);
      } else {
        reply.warnings.push_back("dropped unknown act label '" + label + "' from candidate " +
                                 std::to_string(r));
      }
    }
    if (auto s = cj.find("score"); s != cj.end() && !s->is_null()) {
      if (!s->is_number()) throw ProtocolError("candidate " + std::to_string(r) + " has a non-numeric score");
      cand.provider_score = s->get<double>();
    }
    std::string text;
    if (auto t = cj.find("text"); t != cj.end() && !t->is_null()) {
      if (!t->is_string()) throw ProtocolError("candidate " + std::to_string(r) + " has a non-string text");
      text = t->get<std::string>();
    }
    if (mode == ProviderMode::responses) {
      reply.responses.push_back(ResponseCandidate{text, cand.acts, r});
    }
    reply.candidates.push_back(std::move(cand));
  }
  for (const auto& w : reply.warnings) spdlog::warn("{}", w);
  return reply;
}

// ---- replay ----------------------------------------------------------------

ReplayProvider::ReplayProvider(const std::filesystem::path& file, ActVocabulary vocab)
    : vocab_(std::move(vocab)) {
  std::ifstream in(file);
  if (!in) throw FileNotFound("cannot open replay file '" + file.string() + "'");
  load(in, file.string());
}

ReplayProvider::ReplayProvider(std::istream& in, ActVocabulary vocab, const std::string& source)
    : vocab_(std::move(vocab)) {
  load(in, source);
}

void ReplayProvider::load(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": malformed JSON: " + e.what(), lineno);
    }
    if (!j.is_object()) throw SchemaError(where + ": replay record must be an object", "traj");
    auto traj = j.find("traj");
    if (traj == j.end() || !traj->is_string()) throw SchemaError(where + ": missing 'traj'", "traj");
    auto turn = j.find("turn");
    if (turn == j.end() || !turn->is_number_unsigned()) throw SchemaError(where + ": missing 'turn'", "turn");
    auto cands = j.find("candidates");
    if (cands == j.end() || !cands->is_array()) {
      throw SchemaError(where + ": missing 'candidates'", "candidates");
    }
    stored_[{traj->get<std::string>(), turn->get<std::size_t>()}] = *cands;
  }
}

ProviderReply ReplayProvider::request(const ProviderRequest& request) {
  auto it = stored_.find({request.trajectory_id, request.turn_index});
  if (it == stored_.end()) {
    throw MissingCandidates("no stored candidates for trajectory '" + request.trajectory_id +
                            "' turn " + std::to_string(request.turn_index));
  }
  json cands = json::array();
  for (std::size_t r = 0; r < it->second.size() && r < request.k; ++r) cands.push_back(it->second[r]);
  return parse_candidates(cands, vocab_, request.k, request.mode);
}

// ---- noisy oracle ----------------------------------------------------------

void NoisyOracleConfig::validate() const {
  if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) throw UsageError("dropout_p must be in [0, 1]");
  if (!(spurious_p >= 0.0 && spurious_p <= 1.0)) throw UsageError("spurious_p must be in [0, 1]");
}

NoisyOracleProvider::NoisyOracleProvider(std::span<const Trajectory> trajectories, ActVocabulary vocab,
                                         ActionSet universe, NoisyOracleConfig cfg)
    : vocab_(std::move(vocab)), universe_(std::move(universe)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < traj.turns.size(); ++t) {
      gold_[{traj.id, t}] = to_action_set(vocab_, traj.turns[t].acts);
    }
  }
}

std::vector<Candidate> NoisyOracleProvider::draw(const ActionSet& gold, const ActionSet& universe,
                                                 const NoisyOracleConfig& cfg,
                                                 std::uint64_t stream_seed, std::size_t k) {
  const ActionSet others = universe.minus(gold);
  const double insert_p =
      universe.empty() ? 0.0 : cfg.spurious_p / static_cast<double>(universe.size());
  auto log_p = [](bool event, double p) {
    const double q = event ? p : 1.0 - p;
    return q > 0.0 ? std::log(q) : -std::numeric_limits<double>::infinity();
  };

  Rng rng(stream_seed);
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    Candidate cand;
    double ll = 0.0;
    for (ActIndex a : gold) {
      const bool drop = rng.bernoulli(cfg.dropout_p);
      ll += log_p(drop, cfg.dropout_p);
      if (!drop) cand.acts.insert(a);
    }
    for (ActIndex a : others) {
      const bool insert = rng.bernoulli(insert_p);
      ll += log_p(insert, insert_p);
      if (insert) cand.acts.insert(a);
    }
    cand.provider_score = ll;
    out.push_back(std::move(cand));
  }
  if (cfg.rank_by_likelihood) {
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
      return *a.provider_score > *b.provider_score;
    });
  }
  for (std::size_t r = 0; r < out.size(); ++r) out[r].provider_rank = r;
  return out;
}

ProviderReply NoisyOracleProvider::request(const ProviderRequest& request) {
  auto it = gold_.find({request.trajectory_id, request.turn_index});
  if (it == gold_.end()) {
    throw MissingCandidates("the oracle has no record of trajectory '" + request.trajectory_id +
                            "' turn " + std::to_string(request.turn_index));
  }
  const std::uint64_t stream =
      derive_seed(derive_seed(cfg_.seed, fnv1a(request.trajectory_id)), request.turn_index);
  ProviderReply reply;
  reply.candidates = draw(it->second, universe_, cfg_, stream, request.k);
  if (request.mode == ProviderMode::responses) {
    for (const auto& c : reply.candidates) {
      reply.responses.push_back(ResponseCandidate{{}, c.acts, c.provider_rank});
    }
  }
  return reply;
}

nlohmann::ordered_json request_to_json(const ProviderRequest& request, std::uint64_t id,
                                       const ActVocabulary& vocab) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["id"] = id;
  j["domain"] = request.domain_id;
  j["k"] = request.k;
  j["mode"] = std::string(to_string(request.mode));
  auto history = nlohmann::ordered_json::array();
  for (const auto& turn : request.history) {
    nlohmann::ordered_json tj;
    tj["speaker"] = std::string(to_string(turn.speaker));
    tj["acts"] = turn.acts;
    if (turn.utterance) tj["utterance"] = *turn.utterance;
    if (turn.db_result) tj["db_result"] = *turn.db_result;
    history.push_back(std::move(tj));
  }
  j["history"] = std::move(history);
  auto completion = nlohmann::ordered_json::array();
  for (ActIndex i = 0; i < request.completion.size() && i < vocab.size(); ++i) {
    if (request.completion.test(i)) completion.push_back(vocab.label(i));
  }
  j["completion"] = std::move(completion);
  return j;
}

}  // namespace todflow
