#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "todflow/condition.hpp"
#include "todflow/errors.hpp"
#include "todflow/eval.hpp"
#include "todflow/graph.hpp"
#include "todflow/ingest.hpp"
#include "todflow/providers.hpp"
#include "todflow/rng.hpp"

namespace todflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

/// Writes to the file, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text(path, text);
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

TargetSpeaker target_arg(const std::string& s, const char* flag) {
  auto t = parse_target(s);
  if (!t) throw UsageError(std::string(flag) + " must be user, system or both");
  return *t;
}

void add_corpus_options(CLI::App& cmd, CorpusArgs& c) {
  cmd.add_option("--data", c.data, "Trajectory corpus (JSONL or SGD JSON)");
  cmd.add_option("--format", c.format, "jsonl or sgd (detected when omitted)");
  cmd.add_option("--rewrite", c.rewrite, "Label rewrite table (JSON)");
  cmd.add_option("--split", c.split, "Which part of the corpus to use: all, train or test");
  cmd.add_option("--split-ratio", c.split_ratio, "Fraction of each domain that goes to train");
  cmd.add_option("--split-seed", c.split_seed, "Seed of the train/test split");
}

void check_corpus_args(const CorpusArgs& c) {
  require(c.data, "--data");
  if (!c.format.empty() && !parse_corpus_format(c.format)) throw UsageError("--format must be jsonl or sgd");
  if (c.split != "all" && c.split != "train" && c.split != "test") {
    throw UsageError("--split must be all, train or test");
  }
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw UsageError("--split-ratio must lie in (0, 1)");
}

std::vector<Trajectory> load_corpus(const CorpusArgs& c) {
  CorpusFile file{c.data, c.format.empty() ? std::nullopt : parse_corpus_format(c.format)};
  auto trajs = parse_trajectories(file);
  if (!c.rewrite.empty()) {
    const auto table = LabelRewrite::from_json(read_json_file(c.rewrite));
    for (auto& t : trajs) table.apply(t);
  }
  if (c.split == "all") return trajs;
  auto split = split_trajectories(trajs, c.split_seed, c.split_ratio);
  return c.split == "train" ? std::move(split.train) : std::move(split.test);
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

ordered_json labels_json(const ActVocabulary& vocab, const ActionSet& acts) {
  return to_labels(vocab, acts);
}

}  // namespace

// ---- config merging --------------------------------------------------------

void merge_config(CLI::App& cmd, const std::string& path) {
  const json cfg = read_json_file(path);
  if (!cfg.is_object()) throw UsageError(path + ": configuration must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    std::string name = it.key();
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw UsageError(path + ": 'config' cannot nest");
    CLI::Option* opt = cmd.get_option_no_throw("--" + name);
    if (!opt) throw UsageError(path + ": unknown key '" + it.key() + "'");
    if (opt->count() > 0) continue;  // explicit flags win
    const json& v = it.value();
    auto as_text = [&](const json& x) -> std::string {
      if (x.is_string()) return x.get<std::string>();
      if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
      if (x.is_number()) return x.dump();
      throw UsageError(path + ": key '" + it.key() + "' must be a string, number or boolean");
    };
    if (v.is_array()) {
      for (const auto& x : v) opt->add_result(as_text(x));
    } else {
      opt->add_result(as_text(v));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": key '" + it.key() + "': " + e.what());
    }
  }
}

// ---- infer -----------------------------------------------------------------

void add_infer(CLI::App& app, InferArgs& a) {
  auto* cmd = app.add_subcommand("infer", "Infer a TOD-Flow graph from trajectories");
  cmd->add_option("--config", a.config, "JSON file with defaults for these flags");
  add_corpus_options(*cmd, a.corpus);
  cmd->add_option("--method", a.method, "todflow, bc or can-reg");
  cmd->add_option("--target", a.target, "Whose acts to fit: user, system or both");
  cmd->add_option("--alpha", a.learn.alpha, "Weight of the not-executed-where-disallowed term");
  cmd->add_option("--max-depth", a.learn.max_depth);
  cmd->add_option("--min-leaf-examples", a.learn.min_leaf_examples);
  cmd->add_option("--shd-leaf-purity", a.learn.shd_leaf_purity);
  cmd->add_option("--shd-neg-weight", a.learn.shd_neg_weight);
  cmd->add_option("--complexity-penalty", a.learn.complexity_penalty, "Literal cost of can-reg");
  cmd->add_option("--split-significance", a.learn.split_significance, "0 disables the split test");
  cmd->add_option("--seed", a.learn.seed);
  cmd->add_option("--jobs", a.jobs, "Worker threads");
  cmd->add_option("--out", a.out, "Graph JSON to write");
  cmd->add_option("--report", a.report, "Per-act fit report JSON to write");
}

int run_infer(const InferArgs& a) {
  check_corpus_args(a.corpus);
  require(a.out, "--out");
  const auto method = parse_objective_kind(a.method);
  if (!method) throw UsageError("--method must be todflow, bc or can-reg");
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  a.learn.validate();
  InferOptions opt;
  opt.method = *method;
  opt.learn = a.learn;
  opt.target = target_arg(a.target, "--target");
  opt.jobs = a.jobs;

  const auto trajs = load_corpus(a.corpus);
  if (trajs.empty()) throw EmptyCorpus("no trajectories in '" + a.corpus.data + "'");
  opt.domain_id = trajs.front().domain_id;
  const ActVocabulary vocab = vocabulary_from_trajectories(trajs);
  const InferResult result = infer_graph(trajs, vocab, opt);
  save_graph(a.out, result.graph);

  if (!a.report.empty()) {
    auto reports = ordered_json::array();
    for (const auto& r : result.reports) {
      ordered_json j;
      j["act"] = vocab.label(r.act);
      j["slot"] = to_string(r.slot);
      j["objective"] = to_string(r.kind);
      j["train"] = {{"tp", r.train.tp}, {"fp", r.train.fp}, {"fn", r.train.fn}, {"tn", r.train.tn}};
      j["literals"] = r.literals;
      j["tree_nodes"] = r.tree_nodes;
      j["warnings"] = r.warnings;
      reports.push_back(std::move(j));
    }
    write_text(a.report, reports.dump(2) + "\n");
  }
  for (const auto& r : result.reports) {
    for (const auto& w : r.warnings) spdlog::warn("{} ({}): {}", vocab.label(r.act), to_string(r.slot), w);
  }
  return 0;
}

// ---- condition -------------------------------------------------------------

void add_condition(CLI::App& app, ConditionArgs& a) {
  auto* cmd = app.add_subcommand("condition", "Condition and rank provider candidates with a graph");
  cmd->add_option("--config", a.config, "JSON file with defaults for these flags");
  cmd->add_option("--graph", a.graph, "Graph JSON");
  add_corpus_options(*cmd, a.corpus);
  cmd->add_option("--speaker", a.speaker, "Decision points to predict: user, system or both");
  cmd->add_option("--provider", a.provider, "oracle, replay or external");
  cmd->add_option("--replay", a.replay, "Candidate file of the replay provider");
  cmd->add_option("--provider-cmd", a.provider_cmd, "Command line of the external provider");
  cmd->add_option("--timeout-ms", a.timeout_ms, "Per-request deadline of the external provider");
  cmd->add_option("--dropout-p", a.dropout_p, "Oracle: chance of dropping each true act");
  cmd->add_option("--spurious-p", a.spurious_p, "Oracle: expected spurious acts per candidate");
  cmd->add_option("--strategy", a.strategy, "greedy, compliance, majority, violation or uniform");
  cmd->add_option("--k", a.k, "Candidates per turn");
  cmd->add_option("--seed", a.seed, "Seed of the oracle and the uniform strategy");
  cmd->add_option("--out", a.out, "Predictions JSONL (stdout when omitted)");
}

namespace {

ordered_json audit_json(const TodFlowGraph& g, const CompletionVector& c, const Selection& sel) {
  const auto& vocab = g.vocabulary();
  ordered_json audit;
  audit["added"] = ordered_json::array();
  audit["removed"] = ordered_json::array();
  if (sel.conditioned.empty()) return audit;
  const auto& cc = sel.conditioned[sel.chosen];
  for (ActIndex a : cc.added) {
    const auto& shd = g.conditions(a).shd;
    const int k = shd.first_satisfied(c);
    ordered_json e;
    e["act"] = vocab.label(a);
    e["rule"] = "shd";
    e["clause"] = k < 0 ? std::string() : DnfCondition::clause_to_string(shd.clauses()[static_cast<std::size_t>(k)], &vocab);
    audit["added"].push_back(std::move(e));
  }
  for (ActIndex a : cc.removed) {
    ordered_json e;
    e["act"] = vocab.label(a);
    e["rule"] = "can_shdnt";
    // Nothing fired; the whole unsatisfied condition is the reason.
    e["condition"] = g.conditions(a).can_shdnt.to_string(&vocab);
    audit["removed"].push_back(std::move(e));
  }
  return audit;
}

}  // namespace

int run_condition(const ConditionArgs& a) {
  require(a.graph, "--graph");
  check_corpus_args(a.corpus);
  const TargetSpeaker speaker = target_arg(a.speaker, "--speaker");
  const auto kind = parse_strategy(a.strategy);
  if (!kind) throw UsageError("--strategy must be greedy, compliance, majority, violation or uniform");
  if (a.k < 1) throw UsageError("--k must be at least 1");
  if (a.provider != "oracle" && a.provider != "replay" && a.provider != "external") {
    throw UsageError("--provider must be oracle, replay or external");
  }
  if (a.provider == "replay") require(a.replay, "--replay");
  if (a.provider == "external") require(a.provider_cmd, "--provider-cmd");
  if (a.timeout_ms < 1) throw UsageError("--timeout-ms must be positive");
  NoisyOracleConfig oc;
  oc.dropout_p = a.dropout_p;
  oc.spurious_p = a.spurious_p;
  oc.seed = a.seed;
  oc.validate();

  const TodFlowGraph graph = load_graph(a.graph);
  const ActVocabulary& vocab = graph.vocabulary();
  const auto trajs = load_corpus(a.corpus);

  std::unique_ptr<CandidateProvider> provider;
  if (a.provider == "oracle") {
    const auto roles = act_roles(trajs, vocab);
    std::vector<ActIndex> universe;
    for (ActIndex i = 0; i < roles.size(); ++i) {
      if (roles[i] && *roles[i] != Speaker::db && speaker_matches(*roles[i], speaker)) universe.push_back(i);
    }
    provider = std::make_unique<NoisyOracleProvider>(trajs, vocab, ActionSet(std::move(universe)), oc);
  } else if (a.provider == "replay") {
    provider = std::make_unique<ReplayProvider>(a.replay, vocab);
  } else {
    provider = std::make_unique<ExternalProvider>(split_words(a.provider_cmd), vocab,
                                                  std::chrono::milliseconds(a.timeout_ms));
  }

  // A graph fitted for both speakers must only add or remove acts of the
  // speaker whose turn is being predicted.
  const auto roles = act_roles(trajs, vocab);
  std::map<Speaker, TodFlowGraph> per_speaker;
  for (Speaker s : {Speaker::user, Speaker::system}) {
    std::vector<ActIndex> own;
    for (ActIndex i = 0; i < roles.size(); ++i) {
      if (roles[i] == s) own.push_back(i);
    }
    per_speaker.emplace(s, graph.restricted_to(ActionSet(std::move(own))));
  }

  std::string out;
  for (const auto& traj : trajs) {
    const std::uint64_t traj_seed = derive_seed(a.seed, fnv1a(traj.id));
    for (const auto& p : decision_points(traj, vocab, speaker, UnknownLabels::skip)) {
      ProviderRequest req;
      req.domain_id = traj.domain_id;
      req.trajectory_id = traj.id;
      req.turn_index = p.turn_index;
      req.history.assign(traj.turns.begin(), traj.turns.begin() + static_cast<std::ptrdiff_t>(p.turn_index));
      req.completion = p.completion;
      req.k = a.k;
      ProviderReply reply;
      try {
        reply = provider->request(req);
      } catch (const Error& e) {
        throw Error("trajectory '" + traj.id + "' turn " + std::to_string(p.turn_index) + ": " + e.what());
      }
      for (const auto& w : reply.warnings) spdlog::warn("{} turn {}: {}", traj.id, p.turn_index, w);
      if (reply.candidates.empty()) {
        throw NoCandidates("trajectory '" + traj.id + "' turn " + std::to_string(p.turn_index) +
                           ": provider returned no candidates");
      }
      const RankingStrategy strat{*kind, derive_seed(traj_seed, p.turn_index)};
      const TodFlowGraph& g = per_speaker.at(p.speaker);
      const Selection sel = rank_and_select(g, p.completion, reply.candidates, strat);

      ordered_json line;
      line["traj"] = traj.id;
      line["turn"] = p.turn_index;
      line["domain"] = traj.domain_id;
      line["speaker"] = to_string(p.speaker);
      line["strategy"] = to_string(*kind);
      line["predicted"] = labels_json(vocab, sel.acts);
      line["gold"] = labels_json(vocab, p.gold);
      line["chosen_rank"] = reply.candidates[sel.chosen].provider_rank;
      line["candidates"] = reply.candidates.size();
      line["audit"] = audit_json(g, p.completion, sel);
      out += line.dump() + "\n";
    }
  }
  emit(a.out, out);
  return 0;
}

// ---- eval ------------------------------------------------------------------

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Score predictions, or compare a graph with a reference graph");
  cmd->add_option("--config", a.config, "JSON file with defaults for these flags");
  cmd->add_option("--pred", a.pred, "Predictions JSONL (as written by condition)");
  cmd->add_option("--gold", a.gold, "Reference trajectories");
  cmd->add_option("--format", a.format, "Format of --gold: jsonl or sgd");
  cmd->add_option("--speaker", a.speaker, "Decision points to score: user, system or both");
  cmd->add_option("--graph", a.graph, "Inferred graph to score against --truth");
  cmd->add_option("--truth", a.truth, "Reference graph");
  cmd->add_option("--max-turns", a.max_turns,
                  "Reachable contexts from simulating the reference graph for this many records");
  cmd->add_option("--contexts-from", a.contexts_from,
                  "Reachable contexts taken from the decision points of this corpus");
  cmd->add_option("--seed", a.seed, "Seed of the sampled table for large vocabularies");
  cmd->add_option("--out", a.out, "Report JSON (stdout when omitted)");
}

namespace {

int eval_predictions(const EvalArgs& a) {
  const TargetSpeaker speaker = target_arg(a.speaker, "--speaker");
  if (!a.format.empty() && !parse_corpus_format(a.format)) throw UsageError("--format must be jsonl or sgd");
  const auto gold_trajs = parse_trajectories(
      CorpusFile{a.gold, a.format.empty() ? std::nullopt : parse_corpus_format(a.format)});
  const ActVocabulary vocab = vocabulary_from_trajectories(gold_trajs);

  struct Gold {
    std::string domain;
    ActionSet acts;
  };
  std::map<std::pair<std::string, std::size_t>, Gold> gold;
  for (const auto& t : gold_trajs) {
    for (const auto& p : decision_points(t, vocab, speaker)) gold[{t.id, p.turn_index}] = {t.domain_id, p.gold};
  }

  std::ifstream in(a.pred);
  if (!in) throw FileNotFound("cannot open predictions file '" + a.pred + "'");
  std::vector<std::string> domain_order;
  std::map<std::string, std::vector<TurnScore>> by_domain;
  std::set<std::pair<std::string, std::size_t>> seen;
  std::size_t unknown_labels = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(a.pred + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("traj") || !j["traj"].is_string()) {
      throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": missing 'traj'", "traj");
    }
    if (!j.contains("turn") || !j["turn"].is_number_unsigned()) {
      throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": missing 'turn'", "turn");
    }
    if (!j.contains("predicted") || !j["predicted"].is_array()) {
      throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": missing 'predicted'", "predicted");
    }
    const auto key = std::make_pair(j["traj"].get<std::string>(), j["turn"].get<std::size_t>());
    auto g = gold.find(key);
    if (g == gold.end()) {
      throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": no reference decision point for '" +
                            key.first + "' turn " + std::to_string(key.second),
                        "turn");
    }
    if (!seen.insert(key).second) {
      throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": duplicate prediction", "turn");
    }
    std::vector<std::string> labels;
    for (const auto& l : j["predicted"]) {
      if (!l.is_string()) throw SchemaError(a.pred + ":" + std::to_string(lineno) + ": labels must be strings", "predicted");
      labels.push_back(ActVocabulary::normalize(l.get<std::string>()));
      if (!vocab.find(labels.back())) ++unknown_labels;
    }
    // Labels the reference never uses can only be wrong: keep them as
    // false positives by giving them indices past the vocabulary.
    std::vector<ActIndex> idx;
    std::size_t extra = vocab.size();
    for (const auto& l : labels) {
      auto i = vocab.find(l);
      idx.push_back(i ? *i : extra++);
    }
    if (!by_domain.count(g->second.domain)) domain_order.push_back(g->second.domain);
    by_domain[g->second.domain].push_back(f1_turn(ActionSet(std::move(idx)), g->second.acts));
  }
  if (seen.empty()) throw NoTurns("no predictions to score in '" + a.pred + "'");

  ordered_json report;
  auto domains = ordered_json::array();
  std::vector<double> means;
  std::vector<TurnScore> all;
  for (const auto& d : domain_order) {
    const auto& s = by_domain[d];
    ordered_json e;
    e["domain"] = d;
    e["turns"] = s.size();
    e["macro_f1"] = score_domain(std::span<const TurnScore>(s));
    e["micro_f1"] = micro_f1(s);
    means.push_back(e["macro_f1"].get<double>());
    all.insert(all.end(), s.begin(), s.end());
    domains.push_back(std::move(e));
  }
  report["domains"] = std::move(domains);
  report["macro_f1"] = aggregate_domains(means);
  report["micro_f1"] = micro_f1(all);
  report["scored_turns"] = seen.size();
  std::set<std::string> predicted_trajs;
  for (const auto& k : seen) predicted_trajs.insert(k.first);
  std::size_t unscored = 0;
  for (const auto& [k, g] : gold) unscored += predicted_trajs.count(k.first) && !seen.count(k);
  report["unscored_turns"] = unscored;
  report["unknown_predicted_labels"] = unknown_labels;
  emit(a.out, report.dump(2) + "\n");
  return 0;
}

int eval_recovery(const EvalArgs& a) {
  const TodFlowGraph inferred = load_graph(a.graph);
  const TodFlowGraph truth = load_graph(a.truth);
  RecoveryOptions opt;
  opt.seed = a.seed;
  if (!a.contexts_from.empty() && a.max_turns > 0) {
    throw UsageError("--contexts-from and --max-turns are mutually exclusive");
  }
  if (a.max_turns > 0) {
    opt = synth_recovery_options(truth, a.max_turns, target_arg(a.speaker, "--speaker"));
    opt.seed = a.seed;
  } else if (!a.contexts_from.empty()) {
    const TargetSpeaker speaker = target_arg(a.speaker, "--speaker");
    const auto trajs = parse_trajectories(CorpusFile{a.contexts_from, std::nullopt});
    const auto roles = act_roles(trajs, truth.vocabulary());
    std::vector<ActIndex> acts;
    opt.act_contexts.resize(truth.size());
    std::set<CompletionVector> ctx[2];
    for (Speaker s : {Speaker::user, Speaker::system}) {
      if (!speaker_matches(s, speaker)) continue;
      const TargetSpeaker t = s == Speaker::user ? TargetSpeaker::user : TargetSpeaker::system;
      for (const auto& traj : trajs) {
        for (const auto& p : decision_points(traj, truth.vocabulary(), t, UnknownLabels::skip)) {
          ctx[s == Speaker::user ? 0 : 1].insert(p.completion);
        }
      }
    }
    for (ActIndex i = 0; i < truth.size(); ++i) {
      if (!roles[i] || *roles[i] == Speaker::db || !speaker_matches(*roles[i], speaker)) continue;
      acts.push_back(i);
      const auto& c = ctx[*roles[i] == Speaker::user ? 0 : 1];
      opt.act_contexts[i].assign(c.begin(), c.end());
    }
    opt.acts = ActionSet(std::move(acts));
  }
  const RecoveryReport report = graph_recovery_score(inferred, truth, opt);
  emit(a.out, to_json(report, truth.vocabulary()).dump(2) + "\n");
  return 0;
}

}  // namespace

int run_eval(const EvalArgs& a) {
  const bool preds = !a.pred.empty() || !a.gold.empty();
  const bool graphs = !a.graph.empty() || !a.truth.empty();
  if (preds == graphs) throw UsageError("give either --pred and --gold, or --graph and --truth");
  if (preds) {
    require(a.pred, "--pred");
    require(a.gold, "--gold");
    return eval_predictions(a);
  }
  require(a.graph, "--graph");
  require(a.truth, "--truth");
  return eval_recovery(a);
}

// ---- export ----------------------------------------------------------------

void add_export(CLI::App& app, ExportArgs& a) {
  auto* cmd = app.add_subcommand("export", "Write a graph as Graphviz DOT");
  cmd->add_option("graph", a.graph, "Graph JSON");
  cmd->add_option("--dot", a.dot, "DOT file (stdout when omitted)");
  cmd->add_flag("--no-shd", a.no_shd, "Leave out Shd conditions");
  cmd->add_flag("--no-negative-edges", a.no_negative_edges, "Leave out negated literals");
  cmd->add_option("--acts", a.acts, "Only draw the conditions of these acts");
}

int run_export(const ExportArgs& a) {
  require(a.graph, "graph");
  const TodFlowGraph g = load_graph(a.graph);
  DotOptions opt;
  opt.include_shd = !a.no_shd;
  opt.include_negative_edges = !a.no_negative_edges;
  if (!a.acts.empty()) {
    std::vector<ActIndex> acts;
    for (const auto& l : a.acts) {
      auto i = g.vocabulary().find(ActVocabulary::normalize(l));
      if (!i) throw UsageError("--acts: unknown act '" + l + "'");
      acts.push_back(*i);
    }
    opt.acts = ActionSet(std::move(acts));
  }
  emit(a.dot, to_dot(g, opt));
  return 0;
}

// ---- synth -----------------------------------------------------------------

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic domain and its ground-truth graph");
  cmd->add_option("--config", a.config, "JSON file with defaults for these flags");
  cmd->add_option("--n-acts", a.synth.n_acts);
  cmd->add_option("--max-clause-literals", a.synth.max_clause_literals);
  cmd->add_option("--clauses-per-condition", a.synth.clauses_per_condition);
  cmd->add_option("--shd-fraction", a.synth.shd_fraction);
  cmd->add_option("--n-trajectories", a.synth.n_trajectories);
  cmd->add_option("--max-turns", a.synth.max_turns);
  cmd->add_option("--annotation-noise-p", a.synth.annotation_noise_p);
  cmd->add_option("--seed", a.synth.seed);
  cmd->add_option("--preset", a.synth.preset, "fig3 for the rental-car schema");
  cmd->add_option("--out", a.out, "Output directory");
}

int run_synth(const SynthArgs& a) {
  require(a.out, "--out");
  a.synth.validate();
  const SynthDomain d = make_synth_domain(a.synth);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw Error("cannot create '" + a.out + "': " + ec.message());
  const fs::path dir(a.out);
  write_text((dir / "trajectories.jsonl").string(), trajectories_to_jsonl(d.trajectories));
  save_graph(dir / "truth_graph.json", d.truth_graph);
  ordered_json meta;
  meta["config"] = to_json(a.synth);
  meta["trajectories"] = d.trajectories.size();
  meta["dead_ends"] = std::count(d.dead_end.begin(), d.dead_end.end(), true);
  meta["act_occurrences"] = d.act_occurrences;
  meta["perturbations"] = d.perturbations;
  write_text((dir / "synth.json").string(), meta.dump(2) + "\n");
  return 0;
}

// ---- edit ------------------------------------------------------------------

void add_edit(CLI::App& app, EditArgs& a) {
  auto* cmd = app.add_subcommand("edit", "Apply an edit script to a graph");
  cmd->add_option("--graph", a.graph, "Graph JSON");
  cmd->add_option("--script", a.script, "Edit script JSON");
  cmd->add_option("--out", a.out, "Edited graph JSON");
}

int run_edit(const EditArgs& a) {
  require(a.graph, "--graph");
  require(a.script, "--script");
  require(a.out, "--out");
  const TodFlowGraph g = load_graph(a.graph);
  const auto edits = parse_edit_script(read_json_file(a.script), g.vocabulary());
  save_graph(a.out, apply_edits(g, edits));
  return 0;
}

// ---- bench -----------------------------------------------------------------

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* cmd = app.add_subcommand("bench", "Run the graph-method by ranking-strategy benchmark");
  cmd->add_option("--config", a.config, "Benchmark configuration JSON");
  cmd->add_option("--out", a.out, "Report JSON (stdout when omitted)");
  cmd->add_option("--table", a.table, "Also write the plain-text table here ('-' for stdout)");
  cmd->add_option("--seeds", a.seeds, "Override the seeds of the configuration");
  cmd->add_option("--jobs", a.jobs, "Worker threads (overrides the configuration)");
  cmd->add_flag("--timing", a.timing, "Include the runtime in the report");
}

int run_bench(const BenchArgs& a) {
  require(a.config, "--config");
  BenchmarkConfig cfg = benchmark_config_from_json(read_json_file(a.config));
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (a.jobs > 0) cfg.jobs = a.jobs;
  // Relative corpus paths are taken relative to the configuration file.
  const fs::path base = fs::path(a.config).parent_path();
  for (auto& c : cfg.corpora) {
    if (c.path.is_relative()) c.path = base / c.path;
  }
  if (cfg.provider.kind == ProviderSpec::Kind::replay && cfg.provider.replay.is_relative()) {
    cfg.provider.replay = base / cfg.provider.replay;
  }
  cfg.validate();
  const BenchmarkReport report = run_benchmark(cfg);
  emit(a.out, to_json(report, a.timing).dump(2) + "\n");
  if (!a.table.empty()) emit(a.table, format_table(report));
  spdlog::info("benchmark finished in {:.2f} s", report.runtime_seconds);
  return 0;
}

}  // namespace todflow::cli
