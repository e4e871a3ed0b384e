#include "todflow/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"

namespace todflow {

using nlohmann::json;

std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "sgd") return CorpusFormat::sgd;
  return std::nullopt;
}

std::optional<TargetSpeaker> parse_target(std::string_view s) {
  if (s == "user") return TargetSpeaker::user;
  if (s == "system") return TargetSpeaker::system;
  if (s == "both") return TargetSpeaker::both;
  return std::nullopt;
}

std::string_view to_string(TargetSpeaker t) {
  switch (t) {
    case TargetSpeaker::user: return "user";
    case TargetSpeaker::system: return "system";
    case TargetSpeaker::both: return "both";
  }
  return "both";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::all: return "all";
  }
  return "all";
}

namespace {

const json& require(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw SchemaError(where + ": missing required field '" + field + "'", field);
  }
  return *it;
}

std::string require_string(const json& obj, const char* field, const std::string& where) {
  const json& v = require(obj, field, where);
  if (!v.is_string()) {
    throw SchemaError(where + ": field '" + std::string(field) + "' must be a string", field);
  }
  return v.get<std::string>();
}

void push_unique(std::vector<std::string>& acts, std::string label) {
  label = ActVocabulary::normalize(label);
  if (label.empty()) return;
  if (std::find(acts.begin(), acts.end(), label) == acts.end()) acts.push_back(std::move(label));
}

TurnRecord parse_turn(const json& t, const std::string& where) {
  if (!t.is_object()) throw SchemaError(where + ": turn must be an object", "turns");
  TurnRecord rec;
  const std::string sp = require_string(t, "speaker", where);
  auto speaker = parse_speaker(sp);
  if (!speaker) throw SchemaError(where + ": unknown speaker '" + sp + "'", "speaker");
  rec.speaker = *speaker;

  if (auto it = t.find("acts"); it != t.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaError(where + ": field 'acts' must be an array", "acts");
    for (const auto& a : *it) {
      if (!a.is_string()) throw SchemaError(where + ": act labels must be strings", "acts");
      push_unique(rec.acts, a.get<std::string>());
    }
  } else if (rec.speaker != Speaker::db) {
    throw SchemaError(where + ": missing required field 'acts'", "acts");
  }
  if (auto it = t.find("utterance"); it != t.end() && it->is_string()) {
    rec.utterance = it->get<std::string>();
  }
  if (auto it = t.find("db_result"); it != t.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError(where + ": 'db_result' must be a string", "db_result");
    rec.db_result = ActVocabulary::normalize(it->get<std::string>());
  }
  if (rec.speaker == Speaker::db && (!rec.db_result || rec.db_result->empty())) {
    throw SchemaError(where + ": db turns need a 'db_result'", "db_result");
  }
  return rec;
}

}  // namespace

std::vector<Trajectory> parse_jsonl(std::istream& in, const std::string& source) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what(),
                       lineno);
    }
    const std::string where = source + ":" + std::to_string(lineno);
    if (!doc.is_object()) throw SchemaError(where + ": dialogue must be a JSON object", "domain");
    Trajectory traj;
    traj.domain_id = require_string(doc, "domain", where);
    if (auto it = doc.find("id"); it != doc.end() && it->is_string()) {
      traj.id = it->get<std::string>();
    } else {
      traj.id = traj.domain_id + "-" + std::to_string(out.size());
    }
    const json& turns = require(doc, "turns", where);
    if (!turns.is_array()) throw SchemaError(where + ": field 'turns' must be an array", "turns");
    if (turns.empty()) throw SchemaError(where + ": a dialogue needs at least one turn", "turns");
    for (std::size_t k = 0; k < turns.size(); ++k) {
      traj.turns.push_back(parse_turn(turns[k], where + " turn " + std::to_string(k)));
    }
    out.push_back(std::move(traj));
  }
  if (out.empty()) throw ParseError(source + ": no dialogues found", 0);
  return out;
}

std::vector<Trajectory> parse_sgd(std::istream& in, const std::string& source) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // json reports a byte offset; convert it to a line.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), line);
  }
  std::vector<Trajectory> out;
  if (doc.is_array()) {
    for (const auto& d : doc) out.push_back(sgd_adapt(d));
  } else if (doc.is_object()) {
    out.push_back(sgd_adapt(doc));
  } else {
    throw ParseError(source + ": expected an array of dialogues", 1);
  }
  if (out.empty()) throw ParseError(source + ": no dialogues found", 1);
  return out;
}

std::vector<Trajectory> parse_trajectories(const CorpusFile& file) {
  std::ifstream in(file.path);
  if (!in) throw FileNotFound("cannot open corpus file '" + file.path.string() + "'");
  CorpusFormat format = CorpusFormat::jsonl;
  if (file.format) {
    format = *file.format;
  } else {
    // SGD files are a single JSON array; JSONL lines are objects.
    char ch = 0;
    while (in.get(ch) && std::isspace(static_cast<unsigned char>(ch))) {
    }
    if (!in) throw ParseError(file.path.string() + ": empty file", 0);
    format = ch == '[' ? CorpusFormat::sgd : CorpusFormat::jsonl;
    in.clear();
    in.seekg(0);
  }
  return format == CorpusFormat::sgd ? parse_sgd(in, file.path.string())
                                     : parse_jsonl(in, file.path.string());
}

nlohmann::ordered_json trajectory_to_json(const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["id"] = traj.id;
  j["domain"] = traj.domain_id;
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : traj.turns) {
    nlohmann::ordered_json tj;
    tj["speaker"] = std::string(to_string(t.speaker));
    tj["acts"] = t.acts;
    if (t.utterance) tj["utterance"] = *t.utterance;
    if (t.db_result) tj["db_result"] = *t.db_result;
    turns.push_back(std::move(tj));
  }
  j["turns"] = std::move(turns);
  return j;
}

std::string trajectories_to_jsonl(std::span<const Trajectory> trajectories) {
  std::string out;
  for (const auto& t : trajectories) {
    out += trajectory_to_json(t).dump();
    out += '\n';
  }
  return out;
}

LabelRewrite LabelRewrite::from_json(const json& table) {
  if (!table.is_object()) throw SchemaError("label rewrite table must be a JSON object", "rewrite");
  LabelRewrite rw;
  for (auto it = table.begin(); it != table.end(); ++it) {
    Rule r;
    r.pattern = it.key();
    r.prefix = !r.pattern.empty() && r.pattern.back() == '*';
    if (r.prefix) r.pattern.pop_back();
    const json& v = it.value();
    if (v.is_string()) {
      r.replacement.push_back(v.get<std::string>());
    } else if (v.is_array()) {
      for (const auto& s : v) {
        if (!s.is_string()) throw SchemaError("rewrite targets must be strings", it.key());
        r.replacement.push_back(s.get<std::string>());
      }
    } else {
      throw SchemaError("rewrite value must be a string or array of strings", it.key());
    }
    rw.rules_.push_back(std::move(r));
  }
  // Exact rules win over prefixes; longer prefixes win over shorter ones.
  std::stable_sort(rw.rules_.begin(), rw.rules_.end(), [](const Rule& a, const Rule& b) {
    if (a.prefix != b.prefix) return !a.prefix;
    return a.pattern.size() > b.pattern.size();
  });
  return rw;
}

std::vector<std::string> LabelRewrite::apply(const std::string& label) const {
  for (const auto& r : rules_) {
    if (!r.prefix) {
      if (label == r.pattern) return r.replacement;
      continue;
    }
    if (label.compare(0, r.pattern.size(), r.pattern) != 0) continue;
    const std::string rest = label.substr(r.pattern.size());
    std::vector<std::string> out;
    for (auto repl : r.replacement) {
      if (auto star = repl.find('*'); star != std::string::npos) repl.replace(star, 1, rest);
      out.push_back(ActVocabulary::normalize(repl));
    }
    return out;
  }
  return {label};
}

void LabelRewrite::apply(Trajectory& traj) const {
  if (rules_.empty()) return;
  for (auto& turn : traj.turns) {
    std::vector<std::string> acts;
    for (const auto& a : turn.acts) {
      for (auto& r : apply(a)) push_unique(acts, std::move(r));
    }
    turn.acts = std::move(acts);
    if (turn.db_result) {
      auto r = apply(*turn.db_result);
      if (!r.empty()) turn.db_result = r.front();
    }
  }
}

bool speaker_matches(Speaker s, TargetSpeaker target) {
  switch (target) {
    case TargetSpeaker::user: return s == Speaker::user;
    case TargetSpeaker::system: return s == Speaker::system;
    case TargetSpeaker::both: return s != Speaker::db;
  }
  return false;
}

std::vector<DecisionPoint> decision_points(const Trajectory& traj, const ActVocabulary& vocab,
                                           TargetSpeaker target, UnknownLabels unknown) {
  std::vector<DecisionPoint> out;
  CompletionVector c(vocab.size());
  auto lookup = [&](const std::string& label) -> std::optional<ActIndex> {
    if (auto i = vocab.find(label)) return i;
    if (unknown == UnknownLabels::error) {
      throw VocabularyError("trajectory '" + traj.id + "' uses act '" + label +
                                "' which is not in the vocabulary",
                            label);
    }
    return std::nullopt;
  };
  for (std::size_t t = 0; t < traj.turns.size(); ++t) {
    const TurnRecord& turn = traj.turns[t];
    ActionSet acts;
    for (const auto& label : turn.acts) {
      if (auto i = lookup(label)) acts.insert(*i);
    }
    if (speaker_matches(turn.speaker, target)) {
      out.push_back(DecisionPoint{t, turn.speaker, c, acts});
    }
    for (auto a : acts) c.set(a);
    if (turn.db_result) {
      if (auto i = lookup(*turn.db_result)) c.set(*i);
    }
  }
  return out;
}

ExampleDataset build_examples(std::span<const Trajectory> trajectories, const ActVocabulary& vocab,
                              TargetSpeaker target, Split split) {
  ExampleDataset ds;
  ds.vocabulary = vocab;
  ds.split = split;
  for (const auto& traj : trajectories) {
    for (auto& p : decision_points(traj, vocab, target)) {
      ds.examples.push_back(
          GraphExample{std::move(p.completion), std::move(p.gold), p.turn_index, traj.id});
    }
  }
  return ds;
}

TrajectorySplit split_trajectories(std::span<const Trajectory> trajectories, std::uint64_t seed,
                                   double ratio) {
  std::map<std::string, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    by_domain[trajectories[i].domain_id].push_back(i);
  }
  std::vector<char> in_train(trajectories.size(), 0);
  for (auto& [domain, idx] : by_domain) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    for (auto i : idx) {
      keyed.emplace_back(derive_seed(seed, fnv1a(trajectories[i].id)), i);
    }
    std::sort(keyed.begin(), keyed.end());
    const auto n_train = static_cast<std::size_t>(
        std::llround(std::clamp(ratio, 0.0, 1.0) * static_cast<double>(keyed.size())));
    for (std::size_t k = 0; k < n_train; ++k) in_train[keyed[k].second] = 1;
  }
  TrajectorySplit out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    (in_train[i] ? out.train : out.test).push_back(trajectories[i]);
  }
  return out;
}

std::string fingerprint(const ExampleDataset& dataset) {
  std::uint64_t h = fnv1a("todflow-examples-v1");
  auto feed = [&](std::string_view s) {
    h = fnv1a(s, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  };
  for (const auto& l : dataset.vocabulary.labels()) feed(l);
  for (const auto& ex : dataset.examples) {
    feed(ex.trajectory_id);
    feed(std::to_string(ex.turn_index));
    for (auto w : ex.completion.words()) feed(std::to_string(w));
    for (auto a : ex.action) feed(std::to_string(a));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace todflow
