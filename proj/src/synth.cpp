#include "todflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"

namespace todflow {

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError("invalid synth configuration: " + msg); };
  if (!preset.empty() && preset != "fig3") fail("unknown preset '" + preset + "'");
  if (preset.empty()) {
    if (n_acts < 2) fail("n_acts must be at least 2");
    if (n_acts > 62) fail("n_acts must be at most 62");
    if (max_clause_literals < 1 || max_clause_literals > n_acts - 1) {
      fail("max_clause_literals must be in [1, n_acts - 1]");
    }
    if (clauses_per_condition < 1) fail("clauses_per_condition must be at least 1");
  }
  if (!(shd_fraction >= 0.0 && shd_fraction <= 1.0)) fail("shd_fraction must be in [0, 1]");
  if (!(annotation_noise_p >= 0.0 && annotation_noise_p <= 1.0)) {
    fail("annotation_noise_p must be in [0, 1]");
  }
  if (max_turns < 1) fail("max_turns must be at least 1");
}

nlohmann::ordered_json to_json(const SynthConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_acts"] = cfg.n_acts;
  j["max_clause_literals"] = cfg.max_clause_literals;
  j["clauses_per_condition"] = cfg.clauses_per_condition;
  j["shd_fraction"] = cfg.shd_fraction;
  j["n_trajectories"] = cfg.n_trajectories;
  j["max_turns"] = cfg.max_turns;
  j["annotation_noise_p"] = cfg.annotation_noise_p;
  j["seed"] = cfg.seed;
  if (!cfg.preset.empty()) j["preset"] = cfg.preset;
  return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig cfg) {
  if (!j.is_object()) throw UsageError("synth configuration must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "n_acts") {
        cfg.n_acts = v.get<std::size_t>();
      } else if (k == "max_clause_literals") {
        cfg.max_clause_literals = v.get<std::size_t>();
      } else if (k == "clauses_per_condition") {
        cfg.clauses_per_condition = v.get<std::size_t>();
      } else if (k == "shd_fraction") {
        cfg.shd_fraction = v.get<double>();
      } else if (k == "n_trajectories") {
        cfg.n_trajectories = v.get<std::size_t>();
      } else if (k == "max_turns") {
        cfg.max_turns = v.get<std::size_t>();
      } else if (k == "annotation_noise_p") {
        cfg.annotation_noise_p = v.get<double>();
      } else if (k == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else if (k == "preset") {
        cfg.preset = v.get<std::string>();
      } else {
        throw UsageError("unknown synth configuration key '" + k + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw UsageError("synth configuration key '" + k + "' has the wrong type");
    }
  }
  return cfg;
}

std::vector<Speaker> synth_roles(const ActVocabulary& vocab) {
  std::vector<Speaker> roles;
  for (const auto& label : vocab.labels()) {
    if (label.rfind("USER ", 0) == 0) {
      roles.push_back(Speaker::user);
    } else if (label.rfind("DB ", 0) == 0) {
      roles.push_back(Speaker::db);
    } else {
      roles.push_back(Speaker::system);
    }
  }
  return roles;
}

namespace {

struct RoleSplit {
  std::size_t user;
  std::size_t system;
  std::size_t db;
};

RoleSplit split_roles(std::size_t n) {
  const std::size_t db = n >= 6 ? 1 : 0;
  const std::size_t user = (n - db) / 2;
  return RoleSplit{user, n - db - user, db};
}

ActVocabulary synth_vocabulary(std::size_t n) {
  const RoleSplit r = split_roles(n);
  ActVocabulary v;
  for (std::size_t i = 0; i < r.user; ++i) v.add("USER act" + std::to_string(i));
  for (std::size_t i = 0; i < r.system; ++i) v.add("SYSTEM act" + std::to_string(i));
  for (std::size_t i = 0; i < r.db; ++i) v.add("DB result" + std::to_string(i));
  return v;
}

ActionSet acts_of(const std::vector<Speaker>& roles, Speaker s) {
  std::vector<ActIndex> out;
  for (ActIndex i = 0; i < roles.size(); ++i) {
    if (roles[i] == s) out.push_back(i);
  }
  return ActionSet(std::move(out));
}

ActionSet allowed_among(const TodFlowGraph& g, const CompletionVector& c, const ActionSet& acts) {
  std::vector<ActIndex> out;
  for (ActIndex a : acts) {
    if (g.conditions(a).can_shdnt.evaluate(c)) out.push_back(a);
  }
  return ActionSet(std::move(out));
}

ActionSet should_among(const TodFlowGraph& g, const CompletionVector& c, const ActionSet& acts) {
  std::vector<ActIndex> out;
  for (ActIndex a : acts) {
    if (g.conditions(a).shd.evaluate(c)) out.push_back(a);
  }
  return ActionSet(std::move(out));
}

// Every DB result the simulator may append after a system record at c.
// nullopt stands for "none".
std::vector<std::optional<ActIndex>> db_outcomes(const TodFlowGraph& g, const CompletionVector& c,
                                                 const ActionSet& db_acts) {
  std::vector<std::optional<ActIndex>> out;
  for (ActIndex d : allowed_among(g, c, db_acts)) {
    out.emplace_back(d);
    if (g.conditions(d).shd.evaluate(c)) return out;
  }
  out.emplace_back(std::nullopt);
  return out;
}

struct Explorer {
  std::set<CompletionVector> contexts[2];
  std::vector<bool> allowed_somewhere;
};

// Breadth-first search over (completion, next speaker) within the record
// budget. Each state is expanded at its smallest record count.
Explorer explore(const TodFlowGraph& g, std::size_t max_turns) {
  const auto roles = synth_roles(g.vocabulary());
  const ActionSet role_acts[2] = {acts_of(roles, Speaker::user), acts_of(roles, Speaker::system)};
  const ActionSet db_acts = acts_of(roles, Speaker::db);
  Explorer ex;
  ex.allowed_somewhere.assign(g.size(), false);

  std::set<std::pair<CompletionVector, int>> seen;
  std::vector<std::pair<CompletionVector, int>> frontier{{CompletionVector(g.size()), 0}};
  seen.insert(frontier.front());
  for (std::size_t depth = 0; depth < max_turns && !frontier.empty(); ++depth) {
    std::vector<std::pair<CompletionVector, int>> next;
    auto push = [&](CompletionVector c, int role) {
      auto key = std::make_pair(std::move(c), role);
      if (seen.insert(key).second) next.push_back(std::move(key));
    };
    for (const auto& [c, role] : frontier) {
      const ActionSet allowed = allowed_among(g, c, role_acts[role]);
      if (allowed.empty()) continue;
      ex.contexts[role].insert(c);
      for (ActIndex a : allowed) ex.allowed_somewhere[a] = true;
      const ActionSet forced = should_among(g, c, allowed);
      const ActionSet optional = allowed.minus(forced);
      const std::size_t n_opt = optional.size();
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n_opt); ++mask) {
        if (mask == 0 && forced.empty()) continue;
        CompletionVector c2 = c;
        for (ActIndex a : forced) c2.set(a);
        for (std::size_t b = 0; b < n_opt; ++b) {
          if ((mask >> b) & 1U) c2.set(optional.values()[b]);
        }
        // A record that completes nothing new ends the dialogue.
        if (role == 0) {
          if (c2 != c) push(std::move(c2), 1);
          continue;
        }
        for (const auto& d : db_outcomes(g, c2, db_acts)) {
          CompletionVector c3 = c2;
          if (d) c3.set(*d);
          if (c3 != c) push(std::move(c3), 0);
        }
      }
    }
    frontier = std::move(next);
  }
  return ex;
}

Literal pick_positive(Rng& rng, const std::vector<ActIndex>& earlier, const Clause& used) {
  std::vector<ActIndex> options;
  for (ActIndex a : earlier) {
    if (std::none_of(used.begin(), used.end(), [&](const Literal& l) { return l.act == a; })) {
      options.push_back(a);
    }
  }
  if (options.empty()) return Literal{earlier.front(), false};
  return Literal{options[rng.below(options.size())], false};
}

TodFlowGraph random_graph(const SynthConfig& cfg, Rng& rng) {
  const ActVocabulary vocab = synth_vocabulary(cfg.n_acts);
  const auto roles = synth_roles(vocab);
  const std::size_t n = vocab.size();

  // Random order of user/system acts led by a user act, DB results placed
  // somewhere after the first system act.
  std::vector<ActIndex> order;
  std::vector<ActIndex> db;
  for (ActIndex i = 0; i < n; ++i) (roles[i] == Speaker::db ? db : order).push_back(i);
  rng.shuffle(order.begin(), order.end());
  auto first_user = std::find_if(order.begin(), order.end(),
                                 [&](ActIndex a) { return roles[a] == Speaker::user; });
  std::iter_swap(order.begin(), first_user);
  for (ActIndex d : db) {
    auto first_sys = std::find_if(order.begin(), order.end(),
                                  [&](ActIndex a) { return roles[a] == Speaker::system; });
    const auto lo = static_cast<std::size_t>(first_sys - order.begin()) + 1;
    const std::size_t pos = lo + rng.below(order.size() - lo + 1);
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(pos), d);
  }

  TodFlowGraph g(vocab);
  std::vector<ActConditions> conds(n);
  std::vector<ActIndex> earlier;
  for (ActIndex act : order) {
    ActConditions& c = conds[act];
    const Literal not_self{act, true};
    if (earlier.empty()) {
      c.can_shdnt = DnfCondition::literal(act, true);
    } else if (roles[act] == Speaker::db) {
      std::vector<ActIndex> sys;
      for (ActIndex a : earlier) {
        if (roles[a] == Speaker::system) sys.push_back(a);
      }
      c.can_shdnt = DnfCondition::all_of({Literal{sys[rng.below(sys.size())], false}, not_self});
      c.shd = c.can_shdnt;
    } else {
      std::vector<Clause> clauses;
      for (std::size_t k = 0; k < cfg.clauses_per_condition; ++k) {
        const std::size_t len = 1 + rng.below(cfg.max_clause_literals);
        Clause clause{pick_positive(rng, earlier, {})};
        bool has_self = false;
        for (std::size_t tries = 0; clause.size() < len && tries < 8 * len; ++tries) {
          const double u = rng.uniform();
          if (!has_self && u < 0.4) {
            clause.push_back(not_self);
            has_self = true;
          } else if (u < 0.7) {
            const Literal lit = pick_positive(rng, earlier, clause);
            if (std::none_of(clause.begin(), clause.end(), [&](const Literal& l) { return l.act == lit.act; })) {
              clause.push_back(lit);
            }
          } else {
            const ActIndex other = rng.below(n);
            if (other == act) continue;
            if (std::any_of(clause.begin(), clause.end(), [&](const Literal& l) { return l.act == other; })) {
              continue;
            }
            clause.push_back(Literal{other, true});
          }
        }
        clauses.push_back(std::move(clause));
      }
      c.can_shdnt = DnfCondition(std::move(clauses));
    }
    earlier.push_back(act);
  }

  // Shd for a fraction of the user/system acts: an earlier act's completion
  // obliges the act once.
  std::vector<ActIndex> candidates;
  for (ActIndex i = 0; i < n; ++i) {
    if (roles[i] != Speaker::db) candidates.push_back(i);
  }
  rng.shuffle(candidates.begin(), candidates.end());
  const auto n_shd = static_cast<std::size_t>(
      std::llround(cfg.shd_fraction * static_cast<double>(candidates.size())));
  for (std::size_t k = 0; k < n_shd && k < candidates.size(); ++k) {
    const ActIndex act = candidates[k];
    const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), act) - order.begin());
    if (pos == 0) {
      conds[act].shd = DnfCondition::literal(act, true);
    } else {
      const ActIndex trigger = order[rng.below(pos)];
      conds[act].shd = DnfCondition::all_of({Literal{trigger, false}, Literal{act, true}});
    }
  }
  for (ActIndex i = 0; i < n; ++i) g.set_conditions(i, std::move(conds[i]));
  return g;
}

void stamp(TodFlowGraph& g, const std::string& domain, const nlohmann::ordered_json& cfg) {
  g.metadata().domain_id = domain;
  g.metadata().objective_kind = "truth";
  g.metadata().targets = "both";
  g.metadata().extra["synth_config"] = cfg;
}

std::string domain_name(const SynthConfig& cfg) {
  return cfg.preset.empty() ? "synth-" + std::to_string(cfg.seed) : cfg.preset;
}

}  // namespace

TodFlowGraph gen_ground_truth_graph(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.preset == "fig3") return fig3_graph();
  const std::uint64_t base = derive_seed(cfg.seed, fnv1a("truth-graph"));
  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(attempt)));
    TodFlowGraph g = random_graph(cfg, rng);
    const Explorer ex = explore(g, cfg.max_turns);
    const auto roles = synth_roles(g.vocabulary());
    bool ok = true;
    for (ActIndex i = 0; i < g.size(); ++i) {
      if (roles[i] != Speaker::db && !ex.allowed_somewhere[i]) ok = false;
    }
    if (!ok) continue;
    stamp(g, domain_name(cfg), to_json(cfg));
    return g;
  }
  throw SynthError("no ground-truth graph with every act reachable after " +
                   std::to_string(kAttempts) + " attempts");
}

TodFlowGraph fig3_graph() {
  static const char* slots[4] = {"pickup_location", "pickup_date", "pickup_time", "dropoff_date"};
  ActVocabulary v;
  const ActIndex intent = v.add("USER inform_intent GetCarsAvailable");
  ActIndex inform[4];
  ActIndex request[4];
  for (int s = 0; s < 4; ++s) inform[s] = v.add(std::string("USER inform ") + slots[s]);
  for (int s = 0; s < 4; ++s) request[s] = v.add(std::string("SYSTEM request ") + slots[s]);
  const ActIndex query = v.add("SYSTEM query GetCarsAvailable");
  const ActIndex result = v.add("DB query_success");

  TodFlowGraph g(v);
  auto pos = [](ActIndex a) { return Literal{a, false}; };
  auto neg = [](ActIndex a) { return Literal{a, true}; };

  ActConditions ci;
  ci.can_shdnt = DnfCondition::all_of({neg(intent)});
  ci.shd = ci.can_shdnt;
  g.set_conditions(intent, ci);

  Clause all_informed;
  for (int s = 0; s < 4; ++s) {
    ActConditions cu;
    cu.can_shdnt = DnfCondition::all_of({pos(intent), neg(inform[s])});
    cu.shd = DnfCondition::all_of({pos(request[s]), neg(inform[s])});
    g.set_conditions(inform[s], cu);

    ActConditions cs;
    cs.can_shdnt = DnfCondition::all_of({pos(intent), neg(inform[s]), neg(request[s])});
    g.set_conditions(request[s], cs);
    all_informed.push_back(pos(inform[s]));
  }
  all_informed.push_back(neg(query));
  ActConditions cq;
  cq.can_shdnt = DnfCondition::all_of(all_informed);
  cq.shd = cq.can_shdnt;
  g.set_conditions(query, cq);

  ActConditions cr;
  cr.can_shdnt = DnfCondition::all_of({pos(query), neg(result)});
  cr.shd = cr.can_shdnt;
  g.set_conditions(result, cr);

  stamp(g, "fig3", nlohmann::ordered_json{{"preset", "fig3"}});
  return g;
}

SynthDomain simulate_dialogues(const TodFlowGraph& truth, const SynthConfig& cfg) {
  cfg.validate();
  const auto roles = synth_roles(truth.vocabulary());
  const ActionSet role_acts[2] = {acts_of(roles, Speaker::user), acts_of(roles, Speaker::system)};
  const ActionSet db_acts = acts_of(roles, Speaker::db);
  const ActVocabulary& vocab = truth.vocabulary();
  const std::string domain =
      truth.metadata().domain_id.empty() ? domain_name(cfg) : truth.metadata().domain_id;
  const std::uint64_t base = derive_seed(cfg.seed, fnv1a("dialogues"));

  SynthDomain out;
  out.truth_graph = truth;
  for (std::size_t i = 0; i < cfg.n_trajectories; ++i) {
    const std::uint64_t traj_seed = derive_seed(base, i);
    Rng act_rng(derive_seed(traj_seed, 1));
    Rng noise_rng(derive_seed(traj_seed, 2));

    Trajectory latent;
    latent.id = domain + "-" + std::to_string(i);
    latent.domain_id = domain;
    Trajectory recorded = latent;
    CompletionVector c(truth.size());
    bool dead = false;

    for (std::size_t t = 0; t < cfg.max_turns; ++t) {
      const int role = static_cast<int>(t % 2);
      const ActionSet allowed = allowed_among(truth, c, role_acts[role]);
      if (allowed.empty()) {
        dead = true;
        break;
      }
      const ActionSet forced = should_among(truth, c, allowed);
      ActionSet executed = forced;
      for (ActIndex a : allowed.minus(forced)) {
        if (act_rng.bernoulli(0.5)) executed.insert(a);
      }
      if (executed.empty()) executed.insert(allowed.values()[act_rng.below(allowed.size())]);
      const CompletionVector before = c;
      for (ActIndex a : executed) c.set(a);

      TurnRecord rec;
      rec.speaker = role == 0 ? Speaker::user : Speaker::system;
      rec.acts = to_labels(vocab, executed);
      latent.turns.push_back(rec);

      TurnRecord noisy = rec;
      noisy.acts.clear();
      for (ActIndex a : executed) {
        ++out.act_occurrences;
        ActIndex keep = a;
        if (noise_rng.bernoulli(cfg.annotation_noise_p)) {
          ++out.perturbations;
          const ActionSet pool = role_acts[role].minus(ActionSet{a});
          if (pool.empty() || noise_rng.bernoulli(0.5)) continue;
          keep = pool.values()[noise_rng.below(pool.size())];
        }
        const std::string& label = vocab.label(keep);
        if (std::find(noisy.acts.begin(), noisy.acts.end(), label) == noisy.acts.end()) {
          noisy.acts.push_back(label);
        }
      }
      recorded.turns.push_back(std::move(noisy));

      if (role == 1) {
        for (ActIndex d : allowed_among(truth, c, db_acts)) {
          if (truth.conditions(d).shd.evaluate(c) || act_rng.bernoulli(0.5)) {
            c.set(d);
            TurnRecord db;
            db.speaker = Speaker::db;
            db.db_result = vocab.label(d);
            latent.turns.push_back(db);
            recorded.turns.push_back(std::move(db));
            break;
          }
        }
      }
      if (c == before) break;
    }
    out.latent.push_back(std::move(latent));
    out.trajectories.push_back(std::move(recorded));
    out.dead_end.push_back(dead);
  }
  return out;
}

SynthDomain make_synth_domain(const SynthConfig& cfg) {
  return simulate_dialogues(gen_ground_truth_graph(cfg), cfg);
}

std::vector<CompletionVector> reachable_contexts(const TodFlowGraph& truth, Speaker speaker,
                                                 std::size_t max_turns) {
  if (speaker == Speaker::db) return {};
  const Explorer ex = explore(truth, max_turns);
  const auto& set = ex.contexts[speaker == Speaker::user ? 0 : 1];
  return {set.begin(), set.end()};
}

}  // namespace todflow
