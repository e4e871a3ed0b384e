#include "todflow/learn.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <set>
#include <mutex>
#include <thread>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"
#include "todflow/tree.hpp"

namespace todflow {

void LearnConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw UsageError("invalid learn configuration: " + field + " " + rule);
  };
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha", "must be positive");
  if (max_depth < 1) fail("max_depth", "must be at least 1");
  if (min_leaf_examples < 1) fail("min_leaf_examples", "must be at least 1");
  if (!(shd_leaf_purity > 0.5 && shd_leaf_purity <= 1.0)) fail("shd_leaf_purity", "must be in (0.5, 1]");
  if (!(shd_neg_weight > 0.0) || !std::isfinite(shd_neg_weight)) fail("shd_neg_weight", "must be positive");
  if (!(complexity_penalty >= 0.0) || !std::isfinite(complexity_penalty)) {
    fail("complexity_penalty", "must be non-negative");
  }
  if (!(split_significance >= 0.0 && split_significance <= 1.0)) {
    fail("split_significance", "must be in [0, 1]");
  }
}

nlohmann::ordered_json to_json(const LearnConfig& cfg) {
  nlohmann::ordered_json j;
  j["alpha"] = cfg.alpha;
  j["max_depth"] = cfg.max_depth;
  j["min_leaf_examples"] = cfg.min_leaf_examples;
  j["shd_leaf_purity"] = cfg.shd_leaf_purity;
  j["shd_neg_weight"] = cfg.shd_neg_weight;
  j["complexity_penalty"] = cfg.complexity_penalty;
  j["split_significance"] = cfg.split_significance;
  j["seed"] = cfg.seed;
  return j;
}

LearnConfig learn_config_from_json(const nlohmann::json& j, LearnConfig cfg) {
  if (!j.is_object()) throw UsageError("learn configuration must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "alpha") {
        cfg.alpha = v.get<double>();
      } else if (k == "max_depth") {
        cfg.max_depth = v.get<std::size_t>();
      } else if (k == "min_leaf_examples") {
        cfg.min_leaf_examples = v.get<std::size_t>();
      } else if (k == "shd_leaf_purity") {
        cfg.shd_leaf_purity = v.get<double>();
      } else if (k == "shd_neg_weight") {
        cfg.shd_neg_weight = v.get<double>();
      } else if (k == "complexity_penalty") {
        cfg.complexity_penalty = v.get<double>();
      } else if (k == "split_significance") {
        cfg.split_significance = v.get<double>();
      } else if (k == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else {
        throw UsageError("unknown learn configuration key '" + k + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw UsageError("learn configuration key '" + k + "' has the wrong type");
    }
  }
  return cfg;
}

std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::todflow: return "todflow";
    case ObjectiveKind::bc: return "bc";
    case ObjectiveKind::can_reg: return "can-reg";
  }
  return "todflow";
}

std::optional<ObjectiveKind> parse_objective_kind(std::string_view s) {
  if (s == "todflow") return ObjectiveKind::todflow;
  if (s == "bc") return ObjectiveKind::bc;
  if (s == "can-reg") return ObjectiveKind::can_reg;
  return std::nullopt;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> ObjectiveTerms::shd_precision() const { return ratio(tp, tp + fp); }
std::optional<double> ObjectiveTerms::can_recall() const { return ratio(tp, tp + fn); }
std::optional<double> ObjectiveTerms::shdnt_specificity() const { return ratio(tn, tn + fp); }
std::optional<double> ObjectiveTerms::bc_accuracy() const { return ratio(tp + tn, total()); }

std::optional<double> ObjectiveTerms::can_shdnt(double alpha) const {
  if (total() == 0) return std::nullopt;
  return can_recall().value_or(1.0) + alpha * shdnt_specificity().value_or(1.0);
}

ObjectiveTerms evaluate_objectives(const DnfCondition& condition, const ExampleDataset& data,
                                   ActIndex act) {
  ObjectiveTerms t;
  for (const auto& ex : data.examples) {
    const bool f = condition.evaluate(ex.completion);
    const bool a = ex.action.contains(act);
    if (f && a) {
      ++t.tp;
    } else if (f) {
      ++t.fp;
    } else if (a) {
      ++t.fn;
    } else {
      ++t.tn;
    }
  }
  return t;
}

double regularized_can_score(const ObjectiveTerms& terms, std::size_t literals, double penalty) {
  return terms.can_recall().value_or(1.0) - penalty * static_cast<double>(literals);
}

namespace {

struct ActView {
  std::vector<const BitVector*> rows;
  std::vector<std::uint8_t> labels;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

ActView view_for(const ExampleDataset& data, ActIndex act) {
  if (data.examples.empty()) throw EmptyCorpus("no examples to fit act " + std::to_string(act));
  if (act >= data.vocabulary.size()) {
    throw VocabularyError("act index " + std::to_string(act) + " is outside the vocabulary");
  }
  ActView v;
  v.rows.reserve(data.examples.size());
  v.labels.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    v.rows.push_back(&ex.completion);
    const bool pos = ex.action.contains(act);
    v.labels.push_back(pos ? 1 : 0);
    (pos ? v.n_pos : v.n_neg)++;
  }
  return v;
}

TreeOptions tree_options(const LearnConfig& cfg, ActIndex act) {
  TreeOptions o;
  o.max_depth = cfg.max_depth;
  o.min_leaf_examples = cfg.min_leaf_examples;
  o.split_significance = cfg.split_significance;
  o.seed = derive_seed(cfg.seed, act);
  return o;
}

void describe_tree(const DecisionTree& tree, FitReport& r) {
  r.tree_nodes = tree.nodes().size();
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) r.leaf_purities.push_back(n.purity());
  }
}

FitResult finish(DnfCondition cond, FitReport report, const ExampleDataset& data,
                 const ExampleDataset* heldout) {
  report.train = evaluate_objectives(cond, data, report.act);
  if (heldout && !heldout->examples.empty()) {
    report.heldout = evaluate_objectives(cond, *heldout, report.act);
  }
  report.literals = cond.literal_count();
  return FitResult{std::move(cond), std::move(report)};
}

FitReport new_report(ActIndex act, ObjectiveKind kind, ConditionSlot slot) {
  FitReport r;
  r.act = act;
  r.kind = kind;
  r.slot = slot;
  return r;
}

const char* kNoPositives = "act is never executed in the training data";

}  // namespace

FitResult fit_shd(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                  const ExampleDataset* heldout) {
  const ActView v = view_for(data, act);
  FitReport report = new_report(act, ObjectiveKind::todflow, ConditionSlot::shd);
  if (v.n_pos == 0) {
    report.warnings.emplace_back(kNoPositives);
    return finish(DnfCondition::never(), std::move(report), data, heldout);
  }
  TreeOptions o = tree_options(cfg, act);
  o.pos_weight = 1.0;
  o.neg_weight = cfg.shd_neg_weight;
  const DecisionTree tree = DecisionTree::fit(v.rows, v.labels, data.vocabulary.size(), o);
  describe_tree(tree, report);
  DnfCondition cond = tree_to_dnf(tree, leaf_rule::purity_at_least(cfg.shd_leaf_purity)).simplified();
  return finish(std::move(cond), std::move(report), data, heldout);
}

FitResult fit_can_shdnt(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                        const ExampleDataset* heldout) {
  const ActView v = view_for(data, act);
  FitReport report = new_report(act, ObjectiveKind::todflow, ConditionSlot::can_shdnt);
  if (v.n_pos == 0) {
    report.warnings.emplace_back(kNoPositives);
    return finish(DnfCondition::never(), std::move(report), data, heldout);
  }
  if (v.n_neg == 0) return finish(DnfCondition::always(), std::move(report), data, heldout);

  TreeOptions o = tree_options(cfg, act);
  o.pos_weight = 1.0;
  o.neg_weight = cfg.alpha;
  const DecisionTree tree = DecisionTree::fit(v.rows, v.labels, data.vocabulary.size(), o);
  describe_tree(tree, report);
  DnfCondition cond = tree_to_dnf(tree, leaf_rule::weighted_majority()).simplified();

  // Per-example weights optimize counts, not the conditional rates of the
  // objective; on very skewed classes a constant can score higher.
  const double learned = *evaluate_objectives(cond, data, act).can_shdnt(cfg.alpha);
  const double always = 1.0;
  const double never = cfg.alpha;
  if (always > learned && always >= never) {
    report.warnings.emplace_back("learned condition scored below constant True; using True");
    cond = DnfCondition::always();
  } else if (never > learned) {
    report.warnings.emplace_back("learned condition scored below constant False; using False");
    cond = DnfCondition::never();
  }
  return finish(std::move(cond), std::move(report), data, heldout);
}

FitResult fit_bc(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                 const ExampleDataset* heldout) {
  const ActView v = view_for(data, act);
  FitReport report = new_report(act, ObjectiveKind::bc, ConditionSlot::can_shdnt);
  if (v.n_pos == 0) {
    report.warnings.emplace_back(kNoPositives);
    return finish(DnfCondition::never(), std::move(report), data, heldout);
  }
  const DecisionTree tree =
      DecisionTree::fit(v.rows, v.labels, data.vocabulary.size(), tree_options(cfg, act));
  describe_tree(tree, report);
  DnfCondition cond = tree_to_dnf(tree, leaf_rule::weighted_majority()).simplified();
  return finish(std::move(cond), std::move(report), data, heldout);
}

namespace {

// Reachable leaves of a (possibly pruned) node array.
void reachable_leaves(const std::vector<TreeNode>& nodes, int id, std::vector<int>& leaves,
                      std::vector<int>& frontier) {
  const TreeNode& n = nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) {
    leaves.push_back(id);
    return;
  }
  const TreeNode& l = nodes[static_cast<std::size_t>(n.children[0])];
  const TreeNode& r = nodes[static_cast<std::size_t>(n.children[1])];
  if (l.is_leaf() && r.is_leaf()) frontier.push_back(id);
  reachable_leaves(nodes, n.children[0], leaves, frontier);
  reachable_leaves(nodes, n.children[1], leaves, frontier);
}

struct PruneScore {
  double score;
  std::size_t literals;
};

PruneScore score_pruning(const std::vector<TreeNode>& nodes, std::size_t n_features,
                         std::size_t n_pos, double penalty) {
  std::vector<int> leaves;
  std::vector<int> frontier;
  reachable_leaves(nodes, 0, leaves, frontier);
  std::size_t covered = 0;
  for (int id : leaves) {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    if (n.n_pos > 0) covered += n.n_pos;
  }
  const DnfCondition cond =
      tree_to_dnf(DecisionTree::from_nodes(nodes, n_features), leaf_rule::any_positive());
  const std::size_t literals = cond.literal_count();
  const double recall = static_cast<double>(covered) / static_cast<double>(n_pos);
  return PruneScore{recall - penalty * static_cast<double>(literals), literals};
}

}  // namespace

FitResult fit_can_regularized(const ExampleDataset& data, ActIndex act, const LearnConfig& cfg,
                              const ExampleDataset* heldout) {
  const ActView v = view_for(data, act);
  FitReport report = new_report(act, ObjectiveKind::can_reg, ConditionSlot::can_only);
  if (v.n_pos == 0) {
    report.warnings.emplace_back(kNoPositives);
    return finish(DnfCondition::never(), std::move(report), data, heldout);
  }
  const std::size_t nf = data.vocabulary.size();
  const DecisionTree grown = DecisionTree::fit(v.rows, v.labels, nf, tree_options(cfg, act));
  describe_tree(grown, report);

  // Greedy bottom-up pruning: collapse the frontier node whose removal
  // scores best, as long as the score does not drop.
  std::vector<TreeNode> nodes = grown.nodes();
  PruneScore current = score_pruning(nodes, nf, v.n_pos, cfg.complexity_penalty);
  for (;;) {
    std::vector<int> leaves;
    std::vector<int> frontier;
    reachable_leaves(nodes, 0, leaves, frontier);
    int best_id = -1;
    PruneScore best{};
    for (int id : frontier) {
      auto trial = nodes;
      trial[static_cast<std::size_t>(id)].feature = -1;
      const PruneScore s = score_pruning(trial, nf, v.n_pos, cfg.complexity_penalty);
      if (best_id < 0 || s.score > best.score + 1e-12 ||
          (std::abs(s.score - best.score) <= 1e-12 && s.literals < best.literals)) {
        best_id = id;
        best = s;
      }
    }
    if (best_id < 0 || best.score < current.score - 1e-12 || best.literals > current.literals) break;
    nodes[static_cast<std::size_t>(best_id)].feature = -1;
    current = best;
  }
  DnfCondition cond =
      tree_to_dnf(DecisionTree::from_nodes(std::move(nodes), nf), leaf_rule::any_positive());
  return finish(std::move(cond), std::move(report), data, heldout);
}

std::vector<std::optional<Speaker>> act_roles(std::span<const Trajectory> trajectories,
                                              const ActVocabulary& vocab) {
  std::vector<std::size_t> user(vocab.size(), 0);
  std::vector<std::size_t> system(vocab.size(), 0);
  for (const auto& traj : trajectories) {
    for (const auto& turn : traj.turns) {
      if (turn.speaker == Speaker::db) continue;
      for (const auto& label : turn.acts) {
        if (auto i = vocab.find(label)) (turn.speaker == Speaker::user ? user : system)[*i]++;
      }
    }
  }
  std::vector<std::optional<Speaker>> roles(vocab.size());
  for (ActIndex i = 0; i < vocab.size(); ++i) {
    if (user[i] || system[i]) {
      roles[i] = system[i] > user[i] ? Speaker::system : Speaker::user;
      continue;
    }
    // Never performed: fall back on the conventional label prefix.
    std::string head = vocab.label(i).substr(0, vocab.label(i).find(' '));
    std::transform(head.begin(), head.end(), head.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (head == "user") roles[i] = Speaker::user;
    if (head == "system") roles[i] = Speaker::system;
  }
  return roles;
}

namespace {

ExampleDataset examples_for(std::span<const Trajectory> trajectories, const ActVocabulary& vocab,
                            TargetSpeaker target, Split split) {
  ExampleDataset ds;
  ds.vocabulary = vocab;
  ds.split = split;
  for (const auto& traj : trajectories) {
    for (auto& p : decision_points(traj, vocab, target, UnknownLabels::skip)) {
      ds.examples.push_back(GraphExample{std::move(p.completion), std::move(p.gold), p.turn_index, traj.id});
    }
  }
  return ds;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

InferResult infer_graph(std::span<const Trajectory> train, const ActVocabulary& vocab,
                        const InferOptions& options, std::span<const Trajectory> heldout) {
  options.learn.validate();
  if (train.empty()) throw EmptyCorpus("no training trajectories");

  const ExampleDataset all = build_examples(train, vocab, options.target, Split::train);
  if (all.examples.empty()) {
    throw EmptyCorpus("the training trajectories contain no turns of the target speaker");
  }
  const auto roles = act_roles(train, vocab);

  // One dataset per speaker whose acts get fitted.
  std::optional<ExampleDataset> by_speaker[2];
  std::optional<ExampleDataset> held_by_speaker[2];
  auto slot_of = [](Speaker s) { return s == Speaker::user ? 0 : 1; };
  for (Speaker s : {Speaker::user, Speaker::system}) {
    if (!speaker_matches(s, options.target)) continue;
    const TargetSpeaker t = s == Speaker::user ? TargetSpeaker::user : TargetSpeaker::system;
    by_speaker[slot_of(s)] = examples_for(train, vocab, t, Split::train);
    if (!heldout.empty()) held_by_speaker[slot_of(s)] = examples_for(heldout, vocab, t, Split::test);
  }

  struct Task {
    ActIndex act;
    int speaker;
    bool shd;
  };
  std::vector<Task> tasks;
  for (ActIndex i = 0; i < vocab.size(); ++i) {
    if (!roles[i] || !by_speaker[slot_of(*roles[i])]) continue;
    if (by_speaker[slot_of(*roles[i])]->examples.empty()) continue;
    tasks.push_back(Task{i, slot_of(*roles[i]), false});
    if (options.method == ObjectiveKind::todflow) tasks.push_back(Task{i, slot_of(*roles[i]), true});
  }

  std::vector<FitResult> results(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t k) {
    const Task& t = tasks[k];
    const ExampleDataset& ds = *by_speaker[t.speaker];
    const ExampleDataset* held = held_by_speaker[t.speaker] ? &*held_by_speaker[t.speaker] : nullptr;
    switch (options.method) {
      case ObjectiveKind::todflow:
        results[k] = t.shd ? fit_shd(ds, t.act, options.learn, held)
                           : fit_can_shdnt(ds, t.act, options.learn, held);
        break;
      case ObjectiveKind::bc:
        results[k] = fit_bc(ds, t.act, options.learn, held);
        break;
      case ObjectiveKind::can_reg:
        results[k] = fit_can_regularized(ds, t.act, options.learn, held);
        break;
    }
  });

  InferResult out{TodFlowGraph(vocab), {}};
  std::vector<ActConditions> conds(vocab.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    ActConditions& c = conds[tasks[k].act];
    if (tasks[k].shd) {
      c.shd = results[k].condition;
    } else if (options.method == ObjectiveKind::can_reg) {
      c.can_shdnt = results[k].condition;
      c.can_only = results[k].condition;
    } else {
      c.can_shdnt = results[k].condition;
    }
    out.reports.push_back(std::move(results[k].report));
  }
  for (ActIndex i = 0; i < vocab.size(); ++i) out.graph.set_conditions(i, std::move(conds[i]));

  GraphMetadata& m = out.graph.metadata();
  m.domain_id = options.domain_id.empty() && !train.empty() ? train.front().domain_id : options.domain_id;
  m.objective_kind = std::string(to_string(options.method));
  m.learn_config = to_json(options.learn);
  m.corpus_fingerprint = fingerprint(all);
  m.targets = std::string(to_string(options.target));
  return out;
}

}  // namespace todflow
