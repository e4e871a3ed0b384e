#include <map>
#include <regex>
#include <sstream>

#include "todflow/errors.hpp"
#include "todflow/graph.hpp"

namespace todflow {

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  out += '"';
  return out;
}

std::string unquote(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) ++i;
    out += s[i];
  }
  return out;
}

struct SlotStyle {
  const char* prefix;
  const char* color;  // nullptr for default black
};

constexpr SlotStyle kCan{"can", nullptr};
constexpr SlotStyle kShd{"shd", "blue"};
constexpr SlotStyle kOnly{"only", "gray"};

std::string attrs(const SlotStyle& st, bool dashed) {
  std::string a;
  if (st.color) a += std::string("color=") + st.color;
  if (dashed) a += std::string(a.empty() ? "" : ", ") + "style=dashed";
  return a.empty() ? "" : " [" + a + "]";
}

void emit_condition(std::ostream& out, ActIndex act, const DnfCondition& cond, const SlotStyle& st,
                    const DotOptions& opt) {
  const std::string target = "a" + std::to_string(act);
  const std::string color = st.color ? std::string(", color=") + st.color : "";
  if (cond.is_false()) {
    const std::string node = std::string(st.prefix) + std::to_string(act) + "_false";
    out << "  " << node << " [shape=circle" << color << ", label=\"F\"];\n";
    out << "  " << node << " -> " << target << attrs(st, false) << ";\n";
    return;
  }
  for (std::size_t k = 0; k < cond.clauses().size(); ++k) {
    const Clause& clause = cond.clauses()[k];
    const std::string node = std::string(st.prefix) + std::to_string(act) + "_" + std::to_string(k);
    out << "  " << node << " [shape=circle" << color << ", label=\"" << (clause.empty() ? "T" : "&")
        << "\"];\n";
    for (const auto& lit : clause) {
      if (lit.negated && !opt.include_negative_edges) continue;
      out << "  a" << lit.act << " -> " << node << attrs(st, lit.negated) << ";\n";
    }
    out << "  " << node << " -> " << target << attrs(st, false) << ";\n";
  }
}

}  // namespace

std::string to_dot(const TodFlowGraph& graph, const DotOptions& options) {
  std::ostringstream out;
  out << "digraph todflow {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box];\n";
  for (ActIndex i = 0; i < graph.size(); ++i) {
    out << "  a" << i << " [label=" << quote(graph.vocabulary().label(i)) << "];\n";
  }
  for (ActIndex i = 0; i < graph.size(); ++i) {
    if (options.acts && !options.acts->contains(i)) continue;
    const auto& c = graph.conditions(i);
    if (!c.can_shdnt.is_true()) emit_condition(out, i, c.can_shdnt, kCan, options);
    if (options.include_shd && !c.shd.is_false()) emit_condition(out, i, c.shd, kShd, options);
    if (c.can_only) emit_condition(out, i, *c.can_only, kOnly, options);
  }
  out << "}\n";
  return out.str();
}

TodFlowGraph from_dot(std::string_view text) {
  static const std::regex act_node(R"re(^\s*a(\d+) \[label="((?:[^"\\]|\\.)*)"\];\s*$)re");
  static const std::regex and_node(
      R"re(^\s*(can|shd|only)(\d+)_(\d+|false) \[shape=circle(?:, color=\w+)?, label="(&|T|F)"\];\s*$)re");
  static const std::regex lit_edge(
      R"re(^\s*a(\d+) -> (can|shd|only)(\d+)_(\d+) ?(?:\[([^\]]*)\])?;\s*$)re");
  static const std::regex out_edge(R"re(^\s*(can|shd|only)(\d+)_(\d+|false) -> a(\d+).*;\s*$)re");

  std::map<std::size_t, std::string> labels;
  // (slot, act) -> clause id -> literals; clause id -1 marks a False node.
  std::map<std::pair<std::string, std::size_t>, std::map<long, Clause>> slots;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool opened = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::smatch m;
    const std::string where = "/line/" + std::to_string(lineno);
    if (line.find("digraph") != std::string::npos) {
      opened = true;
      continue;
    }
    if (line.find_first_not_of(" \t}") == std::string::npos) continue;
    if (line.find("rankdir") != std::string::npos || line.find("node [") != std::string::npos) continue;
    if (std::regex_match(line, m, act_node)) {
      labels[std::stoul(m[1])] = unquote(m[2]);
    } else if (std::regex_match(line, m, and_node)) {
      const long id = m[3] == "false" ? -1 : std::stol(m[3]);
      slots[{m[1], std::stoul(m[2])}][id];
    } else if (std::regex_match(line, m, lit_edge)) {
      const bool neg = m[5].matched && m[5].str().find("dashed") != std::string::npos;
      slots[{m[2], std::stoul(m[3])}][std::stol(m[4])].push_back(
          Literal{static_cast<ActIndex>(std::stoul(m[1])), neg});
    } else if (std::regex_match(line, m, out_edge)) {
      if (m[2] != m[4]) throw GraphFormatError("condition node feeds the wrong act", where);
    } else {
      throw GraphFormatError("unrecognized DOT statement: " + line, where);
    }
  }
  if (!opened) throw GraphFormatError("not a digraph document", "/line/1");

  ActVocabulary vocab;
  for (const auto& [idx, label] : labels) {
    if (idx != vocab.size()) throw GraphFormatError("act nodes are not numbered densely", "/a" + std::to_string(idx));
    vocab.add(label);
  }
  TodFlowGraph graph(vocab);
  std::vector<ActConditions> conds(vocab.size());
  for (auto& [key, clauses] : slots) {
    const auto& [slot, act] = key;
    if (act >= vocab.size()) throw GraphFormatError("condition for unknown act", "/" + slot + std::to_string(act));
    DnfCondition cond;
    if (!clauses.count(-1)) {
      std::vector<Clause> list;
      for (auto& [id, cl] : clauses) list.push_back(std::move(cl));
      cond = DnfCondition(std::move(list));
    }
    if (cond.index_bound() > vocab.size()) {
      throw GraphFormatError("literal from unknown act", "/" + slot + std::to_string(act));
    }
    if (slot == "can") {
      conds[act].can_shdnt = std::move(cond);
    } else if (slot == "shd") {
      conds[act].shd = std::move(cond);
    } else {
      conds[act].can_only = std::move(cond);
    }
  }
  for (ActIndex i = 0; i < conds.size(); ++i) graph.set_conditions(i, std::move(conds[i]));
  return graph;
}

}  // namespace todflow
