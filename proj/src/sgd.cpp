#include <algorithm>
#include <cctype>

#include "todflow/errors.hpp"
#include "todflow/ingest.hpp"

namespace todflow {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return s;
}

std::string action_label(const std::string& speaker, const json& action, const std::string& where) {
  if (!action.is_object()) throw SchemaError(where + ": action must be an object", "act");
  auto act = action.find("act");
  if (act == action.end() || !act->is_string()) {
    throw SchemaError(where + ": action without 'act'", "act");
  }
  std::string label = upper(speaker) + " " + lower(act->get<std::string>());
  std::string slot;
  if (auto s = action.find("slot"); s != action.end() && s->is_string()) slot = s->get<std::string>();
  if (slot == "intent") {
    // "USER inform_intent FindRestaurants" rather than a bare "intent" slot.
    auto values = action.find("values");
    if (values != action.end() && values->is_array() && !values->empty() &&
        values->front().is_string()) {
      slot = values->front().get<std::string>();
    }
  }
  if (!slot.empty()) label += " " + slot;
  return ActVocabulary::normalize(label);
}

}  // namespace

Trajectory sgd_adapt(const json& dialogue) {
  if (!dialogue.is_object()) throw SchemaError("SGD dialogue must be an object", "dialogue_id");
  Trajectory traj;
  auto id = dialogue.find("dialogue_id");
  if (id == dialogue.end() || !id->is_string()) {
    throw SchemaError("SGD dialogue is missing 'dialogue_id'", "dialogue_id");
  }
  traj.id = id->get<std::string>();
  if (auto services = dialogue.find("services"); services != dialogue.end() && services->is_array()) {
    for (const auto& s : *services) {
      if (!s.is_string()) continue;
      if (!traj.domain_id.empty()) traj.domain_id += "+";
      traj.domain_id += s.get<std::string>();
    }
  }
  auto turns = dialogue.find("turns");
  if (turns == dialogue.end() || !turns->is_array()) {
    throw SchemaError("SGD dialogue '" + traj.id + "' is missing 'turns'", "turns");
  }
  if (turns->empty()) throw SchemaError("SGD dialogue '" + traj.id + "' has no turns", "turns");

  for (std::size_t k = 0; k < turns->size(); ++k) {
    const json& turn = (*turns)[k];
    const std::string where = "dialogue '" + traj.id + "' turn " + std::to_string(k);
    if (!turn.is_object()) throw SchemaError(where + ": turn must be an object", "turns");
    auto sp = turn.find("speaker");
    if (sp == turn.end() || !sp->is_string()) throw SchemaError(where + ": missing 'speaker'", "speaker");
    const std::string speaker_name = sp->get<std::string>();
    auto speaker = parse_speaker(speaker_name);
    if (!speaker || *speaker == Speaker::db) {
      throw SchemaError(where + ": unknown speaker '" + speaker_name + "'", "speaker");
    }
    auto frames = turn.find("frames");
    if (frames == turn.end() || !frames->is_array() || frames->empty()) {
      throw SchemaError(where + ": turn carries no act annotation", "frames");
    }

    TurnRecord rec;
    rec.speaker = *speaker;
    if (auto u = turn.find("utterance"); u != turn.end() && u->is_string()) rec.utterance = u->get<std::string>();
    std::vector<TurnRecord> inserted;
    for (const auto& frame : *frames) {
      auto actions = frame.find("actions");
      if (actions == frame.end() || !actions->is_array()) {
        throw SchemaError(where + ": frame without 'actions'", "actions");
      }
      if (traj.domain_id.empty()) {
        if (auto s = frame.find("service"); s != frame.end() && s->is_string()) {
          traj.domain_id = s->get<std::string>();
        }
      }
      for (const auto& action : *actions) {
        const std::string label = action_label(speaker_name, action, where);
        if (std::find(rec.acts.begin(), rec.acts.end(), label) == rec.acts.end()) {
          rec.acts.push_back(label);
        }
      }
      auto call = frame.find("service_call");
      if (rec.speaker != Speaker::system || call == frame.end() || !call->is_object()) continue;
      auto method = call->find("method");
      if (method == call->end() || !method->is_string()) {
        throw SchemaError(where + ": service call without 'method'", "method");
      }
      TurnRecord query;
      query.speaker = Speaker::system;
      query.acts.push_back(ActVocabulary::normalize("SYSTEM query " + method->get<std::string>()));
      inserted.push_back(std::move(query));

      bool found = false;
      if (auto results = frame.find("service_results");
          results != frame.end() && results->is_array()) {
        found = !results->empty();
      }
      TurnRecord db;
      db.speaker = Speaker::db;
      db.db_result = found ? "query_success" : "query_failure";
      inserted.push_back(std::move(db));
    }
    for (auto& t : inserted) traj.turns.push_back(std::move(t));
    traj.turns.push_back(std::move(rec));
  }
  if (traj.domain_id.empty()) traj.domain_id = "default";
  return traj;
}

}  // namespace todflow
