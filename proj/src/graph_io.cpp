#include <fstream>
#include <set>
#include <sstream>

#include "todflow/errors.hpp"
#include "todflow/graph.hpp"

namespace todflow {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string escape_pointer(const std::string& token) {
  std::string out;
  for (char ch : token) {
    if (ch == '~') {
      out += "~0";
    } else if (ch == '/') {
      out += "~1";
    } else {
      out += ch;
    }
  }
  return out;
}

DnfCondition condition_from_json(const json& j, std::size_t n, const std::string& ptr) {
  if (!j.is_array()) throw GraphFormatError("condition must be a list of clauses", ptr);
  std::vector<Clause> clauses;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string cptr = ptr + "/" + std::to_string(k);
    const json& cl = j[k];
    if (!cl.is_array()) throw GraphFormatError("clause must be a list of literals", cptr);
    Clause clause;
    for (std::size_t m = 0; m < cl.size(); ++m) {
      const std::string lptr = cptr + "/" + std::to_string(m);
      const json& lit = cl[m];
      if (!lit.is_object()) throw GraphFormatError("literal must be an object", lptr);
      auto i = lit.find("i");
      if (i == lit.end() || !i->is_number_integer()) {
        throw GraphFormatError("literal needs an integer 'i'", lptr + "/i");
      }
      const auto idx = i->get<long long>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
        throw GraphFormatError("literal index " + std::to_string(idx) + " is outside the " +
                                   std::to_string(n) + "-act vocabulary",
                               lptr + "/i");
      }
      bool neg = false;
      if (auto ng = lit.find("neg"); ng != lit.end()) {
        if (!ng->is_boolean()) throw GraphFormatError("'neg' must be a boolean", lptr + "/neg");
        neg = ng->get<bool>();
      }
      clause.push_back(Literal{static_cast<ActIndex>(idx), neg});
    }
    clauses.push_back(std::move(clause));
  }
  return DnfCondition(std::move(clauses));
}

}  // namespace

ordered_json condition_to_json(const DnfCondition& cond) {
  auto out = ordered_json::array();
  for (const auto& clause : cond.clauses()) {
    auto cl = ordered_json::array();
    for (const auto& lit : clause) {
      ordered_json l;
      l["i"] = lit.act;
      l["neg"] = lit.negated;
      cl.push_back(std::move(l));
    }
    out.push_back(std::move(cl));
  }
  return out;
}

ordered_json graph_to_json(const TodFlowGraph& graph) {
  ordered_json doc;
  doc["version"] = 1;
  doc["domain"] = graph.metadata().domain_id;
  doc["vocabulary"] = graph.vocabulary().labels();
  ordered_json acts = ordered_json::object();
  for (ActIndex i = 0; i < graph.size(); ++i) {
    const auto& c = graph.conditions(i);
    ordered_json entry;
    entry["can_shdnt"] = condition_to_json(c.can_shdnt);
    entry["shd"] = condition_to_json(c.shd);
    if (c.can_only) entry["can_only"] = condition_to_json(*c.can_only);
    acts[graph.vocabulary().label(i)] = std::move(entry);
  }
  doc["acts"] = std::move(acts);
  const auto& m = graph.metadata();
  ordered_json meta;
  meta["domain_id"] = m.domain_id;
  meta["objective_kind"] = m.objective_kind;
  meta["learn_config"] = m.learn_config;
  meta["corpus_fingerprint"] = m.corpus_fingerprint;
  meta["targets"] = m.targets;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) meta[it.key()] = it.value();
  doc["metadata"] = std::move(meta);
  return doc;
}

TodFlowGraph graph_from_json(const json& doc) {
  if (!doc.is_object()) throw GraphFormatError("graph document must be an object", "");
  auto version = doc.find("version");
  if (version == doc.end()) throw GraphFormatError("missing 'version'", "/version");
  if (!version->is_number_integer() || version->get<long long>() != 1) {
    throw GraphFormatError("unsupported graph version", "/version");
  }
  auto domain = doc.find("domain");
  if (domain == doc.end() || !domain->is_string()) {
    throw GraphFormatError("'domain' must be a string", "/domain");
  }
  auto vocab_j = doc.find("vocabulary");
  if (vocab_j == doc.end() || !vocab_j->is_array()) {
    throw GraphFormatError("'vocabulary' must be a list of labels", "/vocabulary");
  }
  ActVocabulary vocab;
  for (std::size_t k = 0; k < vocab_j->size(); ++k) {
    const json& l = (*vocab_j)[k];
    const std::string ptr = "/vocabulary/" + std::to_string(k);
    if (!l.is_string()) throw GraphFormatError("label must be a string", ptr);
    const std::string norm = ActVocabulary::normalize(l.get<std::string>());
    if (norm.empty()) throw GraphFormatError("empty label", ptr);
    if (vocab.find(norm)) throw GraphFormatError("duplicate label '" + norm + "'", ptr);
    vocab.add(norm);
  }

  TodFlowGraph graph(vocab);
  auto acts = doc.find("acts");
  if (acts == doc.end() || !acts->is_object()) {
    throw GraphFormatError("'acts' must be an object keyed by label", "/acts");
  }
  for (auto it = acts->begin(); it != acts->end(); ++it) {
    const std::string ptr = "/acts/" + escape_pointer(it.key());
    auto idx = vocab.find(ActVocabulary::normalize(it.key()));
    if (!idx) throw GraphFormatError("act '" + it.key() + "' is not in the vocabulary", ptr);
    const json& entry = it.value();
    if (!entry.is_object()) throw GraphFormatError("act entry must be an object", ptr);
    ActConditions c;
    if (auto f = entry.find("can_shdnt"); f != entry.end()) {
      c.can_shdnt = condition_from_json(*f, vocab.size(), ptr + "/can_shdnt");
    }
    if (auto f = entry.find("shd"); f != entry.end()) {
      c.shd = condition_from_json(*f, vocab.size(), ptr + "/shd");
    }
    if (auto f = entry.find("can_only"); f != entry.end() && !f->is_null()) {
      c.can_only = condition_from_json(*f, vocab.size(), ptr + "/can_only");
    }
    graph.set_conditions(*idx, std::move(c));
  }

  GraphMetadata& m = graph.metadata();
  m.domain_id = domain->get<std::string>();
  if (auto meta = doc.find("metadata"); meta != doc.end() && !meta->is_null()) {
    if (!meta->is_object()) throw GraphFormatError("'metadata' must be an object", "/metadata");
    static const std::set<std::string> known = {"domain_id", "objective_kind", "learn_config",
                                                "corpus_fingerprint", "targets"};
    auto str = [&](const char* key, std::string& dst) {
      auto f = meta->find(key);
      if (f == meta->end() || f->is_null()) return;
      if (!f->is_string()) {
        throw GraphFormatError("'" + std::string(key) + "' must be a string",
                               "/metadata/" + std::string(key));
      }
      dst = f->get<std::string>();
    };
    str("domain_id", m.domain_id);
    str("objective_kind", m.objective_kind);
    str("corpus_fingerprint", m.corpus_fingerprint);
    str("targets", m.targets);
    if (auto f = meta->find("learn_config"); f != meta->end()) {
      m.learn_config = ordered_json::parse(f->dump());
    }
    for (auto it = meta->begin(); it != meta->end(); ++it) {
      if (!known.count(it.key())) m.extra[it.key()] = ordered_json::parse(it.value().dump());
    }
  }
  return graph;
}

std::string serialize(const TodFlowGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

TodFlowGraph deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GraphFormatError(std::string("malformed graph JSON: ") + e.what(), "");
  }
  return graph_from_json(doc);
}

TodFlowGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open graph file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void save_graph(const std::filesystem::path& path, const TodFlowGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write graph file '" + path.string() + "'");
  out << serialize(graph);
}

}  // namespace todflow
