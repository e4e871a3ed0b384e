#include "todflow/graph.hpp"

#include "todflow/errors.hpp"

namespace todflow {

std::string_view to_string(ConditionSlot s) {
  switch (s) {
    case ConditionSlot::can_shdnt: return "can_shdnt";
    case ConditionSlot::shd: return "shd";
    case ConditionSlot::can_only: return "can_only";
  }
  return "can_shdnt";
}

std::optional<ConditionSlot> parse_condition_slot(std::string_view s) {
  if (s == "can_shdnt") return ConditionSlot::can_shdnt;
  if (s == "shd") return ConditionSlot::shd;
  if (s == "can_only") return ConditionSlot::can_only;
  return std::nullopt;
}

TodFlowGraph::TodFlowGraph(ActVocabulary vocabulary)
    : vocab_(std::move(vocabulary)), acts_(vocab_.size()) {}

namespace {

void check_bound(const DnfCondition& cond, std::size_t n, const std::string& what) {
  if (cond.index_bound() > n) {
    throw VocabularyError(what + " references act " + std::to_string(cond.index_bound() - 1) +
                          " but the vocabulary has " + std::to_string(n) + " acts");
  }
}

void check_size(const TodFlowGraph& graph, const CompletionVector& c) {
  if (c.size() != graph.size()) {
    throw VocabularyError("completion vector has " + std::to_string(c.size()) +
                          " entries but the graph vocabulary has " + std::to_string(graph.size()));
  }
}

}  // namespace

void TodFlowGraph::set_conditions(ActIndex act, ActConditions conditions) {
  if (act >= acts_.size()) {
    throw VocabularyError("act index " + std::to_string(act) + " is outside the vocabulary");
  }
  const std::string& label = vocab_.label(act);
  check_bound(conditions.can_shdnt, size(), "can_shdnt of '" + label + "'");
  check_bound(conditions.shd, size(), "shd of '" + label + "'");
  if (conditions.can_only) check_bound(*conditions.can_only, size(), "can_only of '" + label + "'");
  acts_[act] = std::move(conditions);
}

TodFlowGraph TodFlowGraph::restricted_to(const ActionSet& keep) const {
  TodFlowGraph out = *this;
  for (ActIndex i = 0; i < out.acts_.size(); ++i) {
    if (!keep.contains(i)) out.acts_[i] = ActConditions{};
  }
  return out;
}

TodFlowGraph TodFlowGraph::with_vocabulary(const ActVocabulary& target) const {
  if (target == vocab_) return *this;
  std::vector<std::optional<ActIndex>> map(size());
  for (ActIndex i = 0; i < size(); ++i) map[i] = target.find(vocab_.label(i));
  auto remap = [&](const DnfCondition& cond, const std::string& owner) {
    std::vector<Clause> clauses = cond.clauses();
    for (auto& cl : clauses) {
      for (auto& lit : cl) {
        if (!map[lit.act]) {
          throw VocabularyError("condition of '" + owner + "' references '" + vocab_.label(lit.act) +
                                    "', which the target vocabulary lacks",
                                vocab_.label(lit.act));
        }
        lit.act = *map[lit.act];
      }
    }
    return DnfCondition(std::move(clauses));
  };
  TodFlowGraph out(target);
  out.metadata_ = metadata_;
  for (ActIndex i = 0; i < size(); ++i) {
    if (!map[i]) continue;
    const ActConditions& c = acts_[i];
    ActConditions n;
    n.can_shdnt = remap(c.can_shdnt, vocab_.label(i));
    n.shd = remap(c.shd, vocab_.label(i));
    if (c.can_only) n.can_only = remap(*c.can_only, vocab_.label(i));
    out.acts_[*map[i]] = std::move(n);
  }
  return out;
}

ActionSet allowed_acts(const TodFlowGraph& graph, const CompletionVector& c) {
  check_size(graph, c);
  std::vector<ActIndex> out;
  for (ActIndex i = 0; i < graph.size(); ++i) {
    if (graph.conditions(i).can_shdnt.evaluate(c)) out.push_back(i);
  }
  return ActionSet(std::move(out));
}

ActionSet should_acts(const TodFlowGraph& graph, const CompletionVector& c) {
  check_size(graph, c);
  std::vector<ActIndex> out;
  for (ActIndex i = 0; i < graph.size(); ++i) {
    if (graph.conditions(i).shd.evaluate(c)) out.push_back(i);
  }
  return ActionSet(std::move(out));
}

TodFlowGraph apply_edit(const TodFlowGraph& graph, const GraphEdit& edit) {
  if (edit.act >= graph.size()) {
    throw EditError("edit targets act " + std::to_string(edit.act) + " but the graph has " +
                    std::to_string(graph.size()) + " acts");
  }
  const std::string& label = graph.vocabulary().label(edit.act);
  for (const auto& lit : edit.clause) {
    if (lit.act >= graph.size()) {
      throw EditError("clause literal references act " + std::to_string(lit.act) +
                      " outside the vocabulary");
    }
  }
  if (edit.condition.index_bound() > graph.size()) {
    throw EditError("condition references an act outside the vocabulary");
  }

  ActConditions cond = graph.conditions(edit.act);
  DnfCondition* slot = nullptr;
  switch (edit.target) {
    case ConditionSlot::can_shdnt: slot = &cond.can_shdnt; break;
    case ConditionSlot::shd: slot = &cond.shd; break;
    case ConditionSlot::can_only:
      // Editing an absent baseline slot starts from its neutral value.
      if (!cond.can_only) cond.can_only = DnfCondition::always();
      slot = &*cond.can_only;
      break;
  }

  switch (edit.op) {
    case GraphEdit::Op::set_condition:
      *slot = edit.condition;
      break;
    case GraphEdit::Op::add_clause: {
      Clause cl = edit.clause;
      if (!canonicalize_clause(cl)) {
        throw EditError("clause " + DnfCondition::clause_to_string(cl, &graph.vocabulary()) +
                        " contradicts itself");
      }
      *slot = slot->with_clause(std::move(cl));
      break;
    }
    case GraphEdit::Op::remove_clause: {
      bool removed = false;
      *slot = slot->without_clause(edit.clause, &removed);
      if (!removed) {
        throw EditError("clause " + DnfCondition::clause_to_string(edit.clause, &graph.vocabulary()) +
                        " is not part of " + std::string(to_string(edit.target)) + " of '" + label +
                        "'");
      }
      break;
    }
  }
  TodFlowGraph out = graph;
  out.set_conditions(edit.act, std::move(cond));
  return out;
}

TodFlowGraph apply_edits(const TodFlowGraph& graph, std::span<const GraphEdit> edits) {
  TodFlowGraph out = graph;
  for (const auto& e : edits) out = apply_edit(out, e);
  return out;
}

namespace {

Literal parse_literal(const nlohmann::json& j, const ActVocabulary& vocab, const std::string& where) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    bool neg = false;
    if (!s.empty() && s.front() == '!') {
      neg = true;
      s.erase(0, 1);
    }
    auto idx = vocab.find(ActVocabulary::normalize(s));
    if (!idx) throw EditError(where + ": unknown act '" + s + "'");
    return Literal{*idx, neg};
  }
  if (j.is_object() && j.contains("i") && j["i"].is_number_unsigned()) {
    const auto i = j["i"].get<std::size_t>();
    if (i >= vocab.size()) throw EditError(where + ": literal index " + std::to_string(i) + " out of range");
    const bool neg = j.contains("neg") && j["neg"].is_boolean() && j["neg"].get<bool>();
    return Literal{i, neg};
  }
  throw EditError(where + ": a literal must be a label string or {\"i\": int, \"neg\": bool}");
}

Clause parse_clause(const nlohmann::json& j, const ActVocabulary& vocab, const std::string& where) {
  if (!j.is_array()) throw EditError(where + ": a clause must be an array of literals");
  Clause out;
  for (const auto& lit : j) out.push_back(parse_literal(lit, vocab, where));
  return out;
}

}  // namespace

std::vector<GraphEdit> parse_edit_script(const nlohmann::json& script, const ActVocabulary& vocab) {
  const nlohmann::json* list = &script;
  if (script.is_object()) {
    auto it = script.find("edits");
    if (it == script.end()) throw EditError("edit script has no 'edits' list");
    list = &*it;
  }
  if (!list->is_array()) throw EditError("'edits' must be an array");
  std::vector<GraphEdit> out;
  for (std::size_t k = 0; k < list->size(); ++k) {
    const auto& e = (*list)[k];
    const std::string where = "edit " + std::to_string(k);
    if (!e.is_object()) throw EditError(where + ": must be an object");
    GraphEdit edit;
    const std::string op = e.value("op", "");
    if (op == "set_condition") {
      edit.op = GraphEdit::Op::set_condition;
    } else if (op == "add_clause") {
      edit.op = GraphEdit::Op::add_clause;
    } else if (op == "remove_clause") {
      edit.op = GraphEdit::Op::remove_clause;
    } else {
      throw EditError(where + ": unknown op '" + op + "'");
    }
    auto act = e.find("act");
    if (act == e.end()) throw EditError(where + ": missing 'act'");
    if (act->is_string()) {
      auto idx = vocab.find(ActVocabulary::normalize(act->get<std::string>()));
      if (!idx) throw EditError(where + ": unknown act '" + act->get<std::string>() + "'");
      edit.act = *idx;
    } else if (act->is_number_unsigned()) {
      edit.act = act->get<std::size_t>();
      if (edit.act >= vocab.size()) throw EditError(where + ": act index out of range");
    } else {
      throw EditError(where + ": 'act' must be a label or an index");
    }
    auto target = parse_condition_slot(e.value("target", "can_shdnt"));
    if (!target) throw EditError(where + ": unknown target '" + e.value("target", "") + "'");
    edit.target = *target;

    if (edit.op == GraphEdit::Op::set_condition) {
      auto c = e.find("condition");
      if (c == e.end()) throw EditError(where + ": missing 'condition'");
      if (c->is_boolean()) {
        edit.condition = c->get<bool>() ? DnfCondition::always() : DnfCondition::never();
      } else if (c->is_array()) {
        std::vector<Clause> clauses;
        for (const auto& cl : *c) clauses.push_back(parse_clause(cl, vocab, where));
        edit.condition = DnfCondition(std::move(clauses));
      } else {
        throw EditError(where + ": 'condition' must be a clause list or a boolean");
      }
    } else {
      auto c = e.find("clause");
      if (c == e.end()) throw EditError(where + ": missing 'clause'");
      edit.clause = parse_clause(*c, vocab, where);
    }
    out.push_back(std::move(edit));
  }
  return out;
}

}  // namespace todflow
