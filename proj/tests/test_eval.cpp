#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "todflow/errors.hpp"
#include "todflow/eval.hpp"

using namespace todflow;

TEST_SUITE("eval") {

TEST_CASE("turn F1 examples") {
  const ActIndex a = 0, b = 1, c = 2;
  const auto s = f1_turn({a, b}, {b, c});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);
  CHECK(f1_turn({}, {}).f1 == 1.0);
  CHECK(f1_turn({a}, {}).f1 == 0.0);
  CHECK(f1_turn({}, {a}).f1 == 0.0);
  CHECK(f1_turn({a}, {b}).f1 == 0.0);
}

TEST_CASE("turn F1 is symmetric") {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    ActionSet p, g;
    for (ActIndex i = 0; i < 6; ++i) {
      if (rng.bernoulli(0.4)) p.insert(i);
      if (rng.bernoulli(0.4)) g.insert(i);
    }
    const auto x = f1_turn(p, g);
    const auto y = f1_turn(g, p);
    CHECK(x.f1 == doctest::Approx(y.f1));
    CHECK(x.precision == doctest::Approx(y.recall));
    // harmonic-mean oracle
    const double tp = double(p.intersected(g).size());
    if (!p.empty() && !g.empty()) {
      const double expected = tp == 0 ? 0.0 : 2 * tp / double(p.size() + g.size());
      CHECK(x.f1 == doctest::Approx(expected));
    }
  }
}

TEST_CASE("domain and cross-domain means") {
  const std::vector<double> turns = {1.0, 0.0};
  CHECK(score_domain(std::span<const double>(turns)) == 0.5);
  const std::vector<double> domains = {0.8, 0.4};
  CHECK(aggregate_domains(domains) == doctest::Approx(0.6));
  const std::vector<double> one = {0.37};
  CHECK(aggregate_domains(one) == 0.37);
  CHECK_THROWS_AS(score_domain(std::span<const double>()), NoTurns);
  CHECK_THROWS_AS(aggregate_domains({}), NoTurns);

  const std::vector<TurnScore> ts = {f1_turn({0, 1}, {1}), f1_turn({2}, {2, 3, 4})};
  // tp 2, predicted 3, gold 4
  CHECK(micro_f1(ts) == doctest::Approx(4.0 / 7.0));
  CHECK(score_domain(std::span<const TurnScore>(ts)) == doctest::Approx((2.0 / 3.0 + 0.5) / 2));
}

TEST_CASE("recovery of a graph against itself") {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    const auto g = test::random_graph(rng, 1 + rng.below(8));
    const auto r = graph_recovery_score(g, g);
    CHECK(r.reachable_rate == 1.0);
    CHECK(r.full_rate == 1.0);
    CHECK(r.full_rate_both == 1.0);
    for (const auto& a : r.acts) CHECK(a.can_shdnt_diff.empty());
  }
}

TEST_CASE("constant true against a conjunction lists the missing edges") {
  const auto vocab = test::letters(3);
  TodFlowGraph truth(vocab);
  ActConditions ac;
  ac.can_shdnt = DnfCondition::all_of({Literal{0, false}, Literal{1, false}});
  truth.set_conditions(2, ac);
  const TodFlowGraph inferred(vocab);
  RecoveryOptions opt;
  opt.acts = ActionSet{2};
  const auto r = graph_recovery_score(inferred, truth, opt);
  REQUIRE(r.acts.size() == 1);
  CHECK_FALSE(r.acts[0].can_shdnt_full);
  CHECK(r.reachable_rate == 0.0);
  const auto& d = r.acts[0].can_shdnt_diff;
  CHECK(d.missing_literals == std::vector<Literal>{{0, false}, {1, false}});
  CHECK(d.redundant_literals.empty());
  REQUIRE(d.missing_clauses.size() == 1);
  REQUIRE(d.redundant_clauses.size() == 1);
  CHECK(d.redundant_clauses[0].empty());
}

TEST_CASE("reachable equivalence can hold while the full table differs") {
  // truth: A. inferred: A & !B. They differ only where A and B are both done,
  // which never happens in the supplied contexts.
  const auto vocab = test::letters(3);
  TodFlowGraph truth(vocab), inferred(vocab);
  ActConditions t, i;
  t.can_shdnt = DnfCondition::literal(0);
  i.can_shdnt = DnfCondition::all_of({Literal{0, false}, Literal{1, true}});
  truth.set_conditions(2, t);
  inferred.set_conditions(2, i);
  RecoveryOptions opt;
  opt.acts = ActionSet{2};
  opt.contexts = {test::completion(3, {}), test::completion(3, {0}), test::completion(3, {1})};
  const auto r = graph_recovery_score(inferred, truth, opt);
  CHECK(r.reachable_rate == 1.0);
  CHECK(r.full_rate == 0.0);
  CHECK(r.acts[0].contexts == 3);
  CHECK(r.acts[0].can_shdnt_diff.redundant_literals == std::vector<Literal>{{1, true}});
  CHECK_FALSE(r.sampled);
}

TEST_CASE("large vocabularies are sampled") {
  const auto vocab = test::letters(18);
  TodFlowGraph g(vocab);
  RecoveryOptions opt;
  opt.samples = 2000;
  const auto r = graph_recovery_score(g, g, opt);
  CHECK(r.sampled);
  CHECK(r.full_rate == 1.0);
  const auto j = to_json(r, vocab);
  CHECK(j["sampled"] == true);
  CHECK(j["acts"].size() == 18);
}

TEST_CASE("benchmark config JSON") {
  BenchmarkConfig cfg;
  cfg.synth.push_back(SynthConfig{});
  cfg.seeds = {3, 4};
  cfg.k = 5;
  cfg.provider.oracle.dropout_p = 0.1;
  const auto back = benchmark_config_from_json(to_json(cfg));
  CHECK(back.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(back.k == 5);
  CHECK(back.provider.oracle.dropout_p == 0.1);
  CHECK(back.synth.size() == 1);
  CHECK_THROWS_AS(benchmark_config_from_json(nlohmann::json{{"sedes", {1}}}), UsageError);
  BenchmarkConfig empty;
  CHECK_THROWS_AS(empty.validate(), UsageError);
}

namespace {
BenchmarkConfig small_bench() {
  BenchmarkConfig cfg;
  SynthConfig sc;
  sc.n_trajectories = 150;
  cfg.synth.push_back(sc);
  cfg.seeds = {0, 1};
  return cfg;
}
}  // namespace

TEST_CASE("noiseless provider reaches the ceiling") {
  auto cfg = small_bench();
  cfg.provider.oracle.dropout_p = 0.0;
  cfg.provider.oracle.spurious_p = 0.0;
  const auto rep = run_benchmark(cfg);
  bool bc_below = false;
  for (const auto& run : rep.runs) {
    for (const auto& cell : run.cells) {
      // A BC condition fires only where the act is executed more often than
      // not, so it can strip acts the simulator explores with probability 1/2.
      if (cell.method == "bc" && cell.strategy != RankingStrategy::Kind::greedy) {
        bc_below = bc_below || cell.macro_f1 < 1.0;
        continue;
      }
      CHECK_MESSAGE(cell.macro_f1 == 1.0, cell.method << "/" << to_string(cell.strategy) << " seed " << run.seed);
    }
  }
  CHECK(bc_below);
}

TEST_CASE("benchmark reports are reproducible") {
  auto cfg = small_bench();
  const auto a = to_json(run_benchmark(cfg)).dump();
  cfg.jobs = 3;
  const auto b = to_json(run_benchmark(cfg)).dump();
  CHECK(a == b);
}

TEST_CASE("regression flags follow the no-graph greedy cell") {
  auto cfg = small_bench();
  cfg.provider.oracle.dropout_p = 0.05;
  const auto rep = run_benchmark(cfg);
  std::size_t flagged = 0;
  for (const auto& run : rep.runs) {
    const auto base = std::find_if(run.cells.begin(), run.cells.end(), [](const CellResult& c) {
      return c.method == "none" && c.strategy == RankingStrategy::Kind::greedy;
    });
    REQUIRE(base != run.cells.end());
    for (const auto& c : run.cells) {
      CHECK(c.regression == (c.macro_f1 < base->macro_f1));
      flagged += c.regression;
    }
  }
  CHECK(rep.regressions().size() == flagged);
  CHECK(format_table(rep).find("todflow") != std::string::npos);
}

TEST_CASE("a provider that always fails aborts the run") {
  auto cfg = small_bench();
  cfg.seeds = {0};
  cfg.provider.kind = ProviderSpec::Kind::external;
  cfg.provider.command = {TODFLOW_STUB_PROVIDER, "die"};
  CHECK_THROWS_AS(run_benchmark(cfg), BenchmarkError);
}

}  // TEST_SUITE
