#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "todflow/errors.hpp"
#include "todflow/eval.hpp"
#include "todflow/rng.hpp"

namespace todflow {

namespace {

constexpr double kFailureBudget = 0.01;

bool known_method(const std::string& m) { return m == "none" || parse_objective_kind(m).has_value(); }

std::string_view provider_kind_name(ProviderSpec::Kind k) {
  switch (k) {
    case ProviderSpec::Kind::oracle: return "oracle";
    case ProviderSpec::Kind::replay: return "replay";
    case ProviderSpec::Kind::external: return "external";
  }
  return "oracle";
}

nlohmann::ordered_json provider_json(const ProviderSpec& p) {
  nlohmann::ordered_json j;
  j["kind"] = provider_kind_name(p.kind);
  switch (p.kind) {
    case ProviderSpec::Kind::oracle:
      j["dropout_p"] = p.oracle.dropout_p;
      j["spurious_p"] = p.oracle.spurious_p;
      j["rank_by_likelihood"] = p.oracle.rank_by_likelihood;
      break;
    case ProviderSpec::Kind::replay:
      j["path"] = p.replay.string();
      break;
    case ProviderSpec::Kind::external:
      j["command"] = p.command;
      j["timeout_ms"] = p.timeout.count();
      break;
  }
  return j;
}

ProviderSpec provider_from_json(const nlohmann::json& j, ProviderSpec p) {
  if (!j.is_object()) throw UsageError("'provider' must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "kind") {
        const auto s = v.get<std::string>();
        if (s == "oracle") {
          p.kind = ProviderSpec::Kind::oracle;
        } else if (s == "replay") {
          p.kind = ProviderSpec::Kind::replay;
        } else if (s == "external") {
          p.kind = ProviderSpec::Kind::external;
        } else {
          throw UsageError("unknown provider kind '" + s + "'");
        }
      } else if (k == "dropout_p") {
        p.oracle.dropout_p = v.get<double>();
      } else if (k == "spurious_p") {
        p.oracle.spurious_p = v.get<double>();
      } else if (k == "rank_by_likelihood") {
        p.oracle.rank_by_likelihood = v.get<bool>();
      } else if (k == "path") {
        p.replay = v.get<std::string>();
      } else if (k == "command") {
        p.command = v.get<std::vector<std::string>>();
      } else if (k == "timeout_ms") {
        p.timeout = std::chrono::milliseconds(v.get<std::int64_t>());
      } else {
        throw UsageError("unknown provider key '" + k + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw UsageError("provider key '" + k + "' has the wrong type");
    }
  }
  return p;
}

}  // namespace

void BenchmarkConfig::validate() const {
  if (synth.empty() && corpora.empty()) throw UsageError("benchmark needs at least one synth config or corpus");
  for (const auto& s : synth) s.validate();
  if (methods.empty()) throw UsageError("benchmark needs at least one method");
  for (const auto& m : methods) {
    if (!known_method(m)) throw UsageError("unknown method '" + m + "'");
  }
  if (strategies.empty()) throw UsageError("benchmark needs at least one strategy");
  if (seeds.empty()) throw UsageError("benchmark needs at least one seed");
  if (k < 1) throw UsageError("k must be at least 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw UsageError("split_ratio must lie in (0, 1)");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  learn.validate();
  provider.oracle.validate();
  if (provider.kind == ProviderSpec::Kind::external && provider.command.empty()) {
    throw UsageError("external provider needs a command");
  }
  if (provider.kind == ProviderSpec::Kind::replay && provider.replay.empty()) {
    throw UsageError("replay provider needs a path");
  }
}

nlohmann::ordered_json to_json(const BenchmarkConfig& cfg) {
  nlohmann::ordered_json j;
  auto synth = nlohmann::ordered_json::array();
  for (const auto& s : cfg.synth) synth.push_back(to_json(s));
  j["synth"] = std::move(synth);
  auto corpora = nlohmann::ordered_json::array();
  for (const auto& c : cfg.corpora) {
    nlohmann::ordered_json e;
    e["path"] = c.path.string();
    if (c.format) e["format"] = *c.format == CorpusFormat::sgd ? "sgd" : "jsonl";
    corpora.push_back(std::move(e));
  }
  j["corpora"] = std::move(corpora);
  j["methods"] = cfg.methods;
  auto strategies = nlohmann::ordered_json::array();
  for (auto s : cfg.strategies) strategies.push_back(to_string(s));
  j["strategies"] = std::move(strategies);
  j["seeds"] = cfg.seeds;
  j["provider"] = provider_json(cfg.provider);
  j["k"] = cfg.k;
  j["learn"] = to_json(cfg.learn);
  j["split_ratio"] = cfg.split_ratio;
  j["target"] = to_string(cfg.target);
  j["jobs"] = cfg.jobs;
  return j;
}

BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j, BenchmarkConfig cfg) {
  if (!j.is_object()) throw UsageError("benchmark configuration must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "synth") {
        cfg.synth.clear();
        if (v.is_object()) {
          cfg.synth.push_back(synth_config_from_json(v));
        } else {
          for (const auto& s : v) cfg.synth.push_back(synth_config_from_json(s));
        }
      } else if (k == "corpora") {
        cfg.corpora.clear();
        for (const auto& c : v) {
          CorpusFile f;
          if (c.is_string()) {
            f.path = c.get<std::string>();
          } else {
            f.path = c.at("path").get<std::string>();
            if (c.contains("format")) {
              f.format = parse_corpus_format(c["format"].get<std::string>());
              if (!f.format) throw UsageError("unknown corpus format " + c["format"].dump());
            }
          }
          cfg.corpora.push_back(std::move(f));
        }
      } else if (k == "methods") {
        cfg.methods = v.get<std::vector<std::string>>();
      } else if (k == "strategies") {
        cfg.strategies.clear();
        for (const auto& s : v) {
          auto kind = parse_strategy(s.get<std::string>());
          if (!kind) throw UsageError("unknown strategy " + s.dump());
          cfg.strategies.push_back(*kind);
        }
      } else if (k == "seeds") {
        cfg.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (k == "provider") {
        cfg.provider = provider_from_json(v, cfg.provider);
      } else if (k == "k") {
        cfg.k = v.get<std::size_t>();
      } else if (k == "learn") {
        cfg.learn = learn_config_from_json(v, cfg.learn);
      } else if (k == "split_ratio") {
        cfg.split_ratio = v.get<double>();
      } else if (k == "target") {
        auto t = parse_target(v.get<std::string>());
        if (!t) throw UsageError("unknown target " + v.dump());
        cfg.target = *t;
      } else if (k == "jobs") {
        cfg.jobs = v.get<std::size_t>();
      } else {
        throw UsageError("unknown benchmark configuration key '" + k + "'");
      }
    } catch (const nlohmann::json::exception&) {
      throw UsageError("benchmark configuration key '" + k + "' has the wrong type");
    }
  }
  return cfg;
}

double BenchmarkReport::cell_mean(const std::string& method, RankingStrategy::Kind strategy,
                                  std::optional<std::uint64_t> seed, bool micro) const {
  // Mean over domains within each seed, then over seeds.
  std::map<std::uint64_t, std::vector<double>> per_seed;
  for (const auto& run : runs) {
    if (seed && run.seed != *seed) continue;
    for (const auto& cell : run.cells) {
      if (cell.method == method && cell.strategy == strategy) {
        per_seed[run.seed].push_back(micro ? cell.micro_f1 : cell.macro_f1);
      }
    }
  }
  std::vector<double> means;
  for (const auto& [s, v] : per_seed) means.push_back(aggregate_domains(v));
  return aggregate_domains(means);
}

std::vector<std::string> BenchmarkReport::regressions() const {
  std::vector<std::string> out;
  for (const auto& run : runs) {
    for (const auto& cell : run.cells) {
      if (!cell.regression) continue;
      out.push_back("seed " + std::to_string(run.seed) + " " + run.domain + " " + cell.method + "/" +
                    std::string(to_string(cell.strategy)));
    }
  }
  return out;
}

namespace {

struct Domain {
  std::string id;
  std::vector<Trajectory> trajectories;
  ActVocabulary vocab;
  std::optional<TodFlowGraph> truth;
  std::size_t max_turns = 0;
};

struct RunJob {
  std::uint64_t seed = 0;
  /// Index into the synth list, or synth.size() + domain index of corpora.
  std::size_t source = 0;
};

std::vector<Domain> corpus_domains(const std::vector<CorpusFile>& corpora) {
  std::vector<Domain> out;
  for (const auto& f : corpora) {
    auto trajs = parse_trajectories(f);
    std::vector<std::string> order;
    std::map<std::string, std::vector<Trajectory>> by_domain;
    for (auto& t : trajs) {
      if (!by_domain.count(t.domain_id)) order.push_back(t.domain_id);
      by_domain[t.domain_id].push_back(std::move(t));
    }
    for (const auto& id : order) {
      Domain d;
      d.id = id;
      d.trajectories = std::move(by_domain[id]);
      d.vocab = vocabulary_from_trajectories(d.trajectories);
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::unique_ptr<CandidateProvider> make_provider(const ProviderSpec& spec, const Domain& d,
                                                 std::span<const Trajectory> test, TargetSpeaker target,
                                                 std::uint64_t seed) {
  switch (spec.kind) {
    case ProviderSpec::Kind::oracle: {
      const auto roles = act_roles(d.trajectories, d.vocab);
      std::vector<ActIndex> universe;
      for (ActIndex i = 0; i < roles.size(); ++i) {
        if (roles[i] && *roles[i] != Speaker::db && speaker_matches(*roles[i], target)) universe.push_back(i);
      }
      NoisyOracleConfig oc = spec.oracle;
      oc.seed = derive_seed(seed, fnv1a("oracle"));
      return std::make_unique<NoisyOracleProvider>(test, d.vocab, ActionSet(std::move(universe)), oc);
    }
    case ProviderSpec::Kind::replay:
      return std::make_unique<ReplayProvider>(spec.replay, d.vocab);
    case ProviderSpec::Kind::external:
      return std::make_unique<ExternalProvider>(spec.command, d.vocab, spec.timeout);
  }
  return nullptr;
}

DomainRun run_one(const BenchmarkConfig& cfg, const Domain& d, std::uint64_t seed, std::size_t jobs) {
  DomainRun run;
  run.seed = seed;
  run.domain = d.id;
  const auto split = split_trajectories(d.trajectories, derive_seed(seed, fnv1a("split")), cfg.split_ratio);
  run.train_trajectories = split.train.size();
  run.test_trajectories = split.test.size();
  if (split.train.empty() || split.test.empty()) {
    throw BenchmarkError("domain '" + d.id + "' has too few trajectories to split");
  }

  std::vector<TodFlowGraph> graphs;
  for (const auto& m : cfg.methods) {
    if (m == "none") {
      graphs.emplace_back(d.vocab);
      continue;
    }
    InferOptions opt;
    opt.method = *parse_objective_kind(m);
    opt.learn = cfg.learn;
    opt.learn.seed = seed;
    opt.target = cfg.target;
    opt.jobs = jobs;
    opt.domain_id = d.id;
    graphs.push_back(infer_graph(split.train, d.vocab, opt).graph);
    if (d.truth) {
      const auto ropt = synth_recovery_options(*d.truth, d.max_turns, cfg.target);
      run.recovery[m] = graph_recovery_score(graphs.back(), *d.truth, ropt).reachable_rate;
    }
  }

  auto provider = make_provider(cfg.provider, d, split.test, cfg.target, seed);

  // Each decision point is conditioned only on the acts of its speaker.
  const auto roles = act_roles(d.trajectories, d.vocab);
  std::vector<std::map<Speaker, TodFlowGraph>> speaker_graphs;
  for (const auto& g : graphs) {
    std::map<Speaker, TodFlowGraph> m;
    for (Speaker s : {Speaker::user, Speaker::system}) {
      std::vector<ActIndex> own;
      for (ActIndex i = 0; i < roles.size(); ++i) {
        if (roles[i] == s) own.push_back(i);
      }
      m.emplace(s, g.restricted_to(ActionSet(std::move(own))));
    }
    speaker_graphs.push_back(std::move(m));
  }

  const std::size_t n_cells = cfg.methods.size() * cfg.strategies.size();
  std::vector<std::vector<TurnScore>> scores(n_cells);
  std::size_t failures = 0;
  std::size_t total = 0;
  for (const auto& traj : split.test) {
    const auto points = decision_points(traj, d.vocab, cfg.target, UnknownLabels::skip);
    total += points.size();
  }
  for (const auto& traj : split.test) {
    const auto points = decision_points(traj, d.vocab, cfg.target, UnknownLabels::skip);
    const std::uint64_t traj_seed = derive_seed(seed, fnv1a(traj.id));
    for (const auto& p : points) {
      ProviderRequest req;
      req.domain_id = d.id;
      req.trajectory_id = traj.id;
      req.turn_index = p.turn_index;
      req.history.assign(traj.turns.begin(), traj.turns.begin() + static_cast<std::ptrdiff_t>(p.turn_index));
      req.completion = p.completion;
      req.k = cfg.k;
      ProviderReply reply;
      try {
        reply = provider->request(req);
        if (reply.candidates.empty()) throw NoCandidates("provider returned no candidates");
      } catch (const Error& e) {
        ++failures;
        spdlog::warn("skipping {} turn {}: {}", traj.id, p.turn_index, e.what());
        if (static_cast<double>(failures) > kFailureBudget * static_cast<double>(total)) {
          throw BenchmarkError("provider failed on " + std::to_string(failures) + " of " +
                               std::to_string(total) + " turns in domain '" + d.id + "' (last: " +
                               e.what() + ")");
        }
        continue;
      }
      ++run.turns;
      std::size_t cell = 0;
      for (const auto& by_speaker : speaker_graphs) {
        const TodFlowGraph& graph = by_speaker.at(p.speaker);
        for (auto kind : cfg.strategies) {
          RankingStrategy strat{kind, derive_seed(traj_seed, p.turn_index)};
          const auto sel = rank_and_select(graph, p.completion, reply.candidates, strat);
          scores[cell++].push_back(f1_turn(sel.acts, p.gold));
        }
      }
    }
  }
  run.skipped_turns = failures;
  if (run.turns == 0) throw BenchmarkError("domain '" + d.id + "' has no scored test turns");

  std::size_t cell = 0;
  for (const auto& m : cfg.methods) {
    for (auto kind : cfg.strategies) {
      CellResult r;
      r.method = m;
      r.strategy = kind;
      r.macro_f1 = score_domain(std::span<const TurnScore>(scores[cell]));
      r.micro_f1 = micro_f1(scores[cell]);
      run.cells.push_back(std::move(r));
      ++cell;
    }
  }
  // Baseline for the regression flag: no graph, greedy. Computed directly
  // when the configuration does not include that cell.
  std::optional<double> baseline;
  for (const auto& c : run.cells) {
    if (c.method == "none" && c.strategy == RankingStrategy::Kind::greedy) baseline = c.macro_f1;
  }
  if (!baseline) {
    // Greedy ignores the graph, so any method's greedy cell is the baseline.
    for (const auto& c : run.cells) {
      if (c.strategy == RankingStrategy::Kind::greedy) baseline = c.macro_f1;
    }
  }
  if (baseline) {
    for (auto& c : run.cells) c.regression = c.macro_f1 < *baseline;
  }
  return run;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<Domain> corpora = corpus_domains(cfg.corpora);
  std::vector<RunJob> jobs;
  for (auto seed : cfg.seeds) {
    for (std::size_t s = 0; s < cfg.synth.size() + corpora.size(); ++s) jobs.push_back({seed, s});
  }

  std::vector<DomainRun> runs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const std::size_t workers = std::min(cfg.jobs, jobs.size());
  const std::size_t inner_jobs = std::max<std::size_t>(1, cfg.jobs / std::max<std::size_t>(1, workers));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        const auto& job = jobs[j];
        if (job.source < cfg.synth.size()) {
          SynthConfig sc = cfg.synth[job.source];
          sc.seed = job.seed;
          SynthDomain sd = make_synth_domain(sc);
          Domain d;
          d.id = sd.trajectories.empty() ? sd.truth_graph.metadata().domain_id
                                         : sd.trajectories.front().domain_id;
          d.vocab = sd.truth_graph.vocabulary();
          d.trajectories = std::move(sd.trajectories);
          d.truth = std::move(sd.truth_graph);
          d.max_turns = sc.max_turns;
          runs[j] = run_one(cfg, d, job.seed, inner_jobs);
        } else {
          runs[j] = run_one(cfg, corpora[job.source - cfg.synth.size()], job.seed, inner_jobs);
        }
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BenchmarkReport report;
  report.config = cfg;
  report.runs = std::move(runs);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::ordered_json to_json(const BenchmarkReport& report, bool include_runtime) {
  nlohmann::ordered_json j;
  auto cfg = to_json(report.config);
  // Worker count does not change results; keep it out so reports compare equal.
  cfg.erase("jobs");
  j["config"] = std::move(cfg);
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : report.runs) {
    nlohmann::ordered_json e;
    e["seed"] = r.seed;
    e["domain"] = r.domain;
    e["train_trajectories"] = r.train_trajectories;
    e["test_trajectories"] = r.test_trajectories;
    e["turns"] = r.turns;
    e["skipped_turns"] = r.skipped_turns;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
      nlohmann::ordered_json ce;
      ce["method"] = c.method;
      ce["strategy"] = to_string(c.strategy);
      ce["macro_f1"] = c.macro_f1;
      ce["micro_f1"] = c.micro_f1;
      ce["regression"] = c.regression;
      cells.push_back(std::move(ce));
    }
    e["cells"] = std::move(cells);
    if (!r.recovery.empty()) {
      nlohmann::ordered_json rec;
      for (const auto& [m, rate] : r.recovery) rec[m] = rate;
      e["recovery"] = std::move(rec);
    }
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);

  auto summary = nlohmann::ordered_json::array();
  for (const auto& m : report.config.methods) {
    for (auto s : report.config.strategies) {
      nlohmann::ordered_json e;
      e["method"] = m;
      e["strategy"] = to_string(s);
      nlohmann::ordered_json per_seed;
      for (auto seed : report.config.seeds) per_seed[std::to_string(seed)] = report.cell_mean(m, s, seed);
      e["per_seed"] = std::move(per_seed);
      e["macro_f1"] = report.cell_mean(m, s);
      e["micro_f1"] = report.cell_mean(m, s, std::nullopt, true);
      summary.push_back(std::move(e));
    }
  }
  j["summary"] = std::move(summary);
  j["regressions"] = report.regressions();
  if (include_runtime) j["runtime_seconds"] = report.runtime_seconds;
  return j;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace

std::string format_table(const BenchmarkReport& report) {
  const auto& cfg = report.config;
  std::size_t w0 = 8;
  for (const auto& m : cfg.methods) w0 = std::max(w0, m.size() + 2);
  constexpr std::size_t kCol = 12;

  std::vector<std::optional<std::uint64_t>> blocks;
  for (auto s : cfg.seeds) blocks.emplace_back(s);
  if (cfg.seeds.size() > 1) blocks.emplace_back(std::nullopt);

  std::string out;
  for (const auto& block : blocks) {
    out += block ? "seed " + std::to_string(*block) : std::string("mean over seeds");
    out += " (F1 %, macro over turns, mean over domains)\n";
    std::string head = pad("method", w0);
    for (auto s : cfg.strategies) head += lpad(std::string(to_string(s)), kCol);
    const bool has_recovery = std::any_of(report.runs.begin(), report.runs.end(),
                                          [](const DomainRun& r) { return !r.recovery.empty(); });
    if (has_recovery) head += lpad("recovery", kCol);
    out += head + "\n" + std::string(head.size(), '-') + "\n";
    for (const auto& m : cfg.methods) {
      std::string row = pad(m, w0);
      for (auto s : cfg.strategies) row += lpad(pct(report.cell_mean(m, s, block)), kCol);
      if (has_recovery) {
        std::vector<double> rates;
        for (const auto& r : report.runs) {
          if (block && r.seed != *block) continue;
          if (auto it = r.recovery.find(m); it != r.recovery.end()) rates.push_back(it->second);
        }
        row += lpad(rates.empty() ? "-" : pct(aggregate_domains(rates)), kCol);
      }
      out += row + "\n";
    }
    out += "\n";
  }
  const auto regs = report.regressions();
  if (!regs.empty()) {
    out += "below no-graph greedy:\n";
    for (const auto& r : regs) out += "  " + r + "\n";
  }
  return out;
}

}  // namespace todflow
