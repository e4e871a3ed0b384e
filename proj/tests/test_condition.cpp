#include <doctest.h>

#include <set>

#include "support.hpp"
#include "todflow/condition.hpp"
#include "todflow/errors.hpp"

using namespace todflow;

namespace {

// Graph where each act's can_shdnt/shd is a constant, so allowed and should
// sets can be dictated directly.
TodFlowGraph constant_graph(std::size_t n, const ActionSet& allowed, const ActionSet& should) {
  TodFlowGraph g(test::letters(n));
  for (ActIndex i = 0; i < n; ++i) {
    ActConditions ac;
    ac.can_shdnt = allowed.contains(i) ? DnfCondition::always() : DnfCondition::never();
    ac.shd = should.contains(i) ? DnfCondition::always() : DnfCondition::never();
    g.set_conditions(i, ac);
  }
  return g;
}

Candidate cand(ActionSet acts, std::size_t rank) { return Candidate{std::move(acts), rank, std::nullopt}; }

}  // namespace

TEST_SUITE("condition") {

constexpr ActIndex greet = 0, inform = 1, farewell = 2, X = 3;

TEST_CASE("shd adds, can filters") {
  const auto g = constant_graph(4, {greet, inform}, {greet});
  const auto c = CompletionVector(4);
  const auto r = condition_candidate(g, c, cand({inform}, 0));
  CHECK(r.final_acts == ActionSet{greet, inform});
  CHECK(r.added == ActionSet{greet});
  CHECK(r.removed.empty());

  const auto g2 = constant_graph(4, {inform}, {});
  const auto r2 = condition_candidate(g2, c, cand({farewell}, 0));
  CHECK(r2.final_acts.empty());
  CHECK(r2.removed == ActionSet{farewell});
}

TEST_CASE("a fired shd act that is not allowed is added and then removed") {
  const auto g = constant_graph(4, {greet, inform}, {X});
  const auto r = condition_candidate(g, CompletionVector(4), cand({inform}, 0));
  CHECK(r.added.contains(X));
  CHECK(r.removed.contains(X));
  CHECK_FALSE(r.final_acts.contains(X));
  CHECK(r.final_acts == ActionSet{inform});
}

TEST_CASE("conditioned sets stay between should-and-allowed and allowed") {
  Rng rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    const auto g = test::random_graph(rng, n);
    const std::uint64_t m = rng.next() & ((std::uint64_t{1} << n) - 1);
    const auto c = BitVector::from_mask(n, m);
    ActionSet acts;
    for (ActIndex i = 0; i < n; ++i) {
      if (rng.bernoulli(0.4)) acts.insert(i);
    }
    const auto r = condition_candidate(g, c, cand(acts, 0));
    ActionSet allowed, should;
    for (ActIndex i = 0; i < n; ++i) {
      if (test::eval_oracle(g.conditions(i).can_shdnt.clauses(), m)) allowed.insert(i);
      if (test::eval_oracle(g.conditions(i).shd.clauses(), m)) should.insert(i);
    }
    REQUIRE(r.final_acts.minus(allowed).empty());
    REQUIRE(should.intersected(allowed).minus(r.final_acts).empty());
  }
}

TEST_CASE("vocabulary mismatch") {
  const auto g = constant_graph(3, {0}, {});
  CHECK_THROWS_AS(condition_candidate(g, CompletionVector(5), cand({0}, 0)), VocabularyError);
  CHECK_THROWS_AS(condition_candidate(g, CompletionVector(3), cand({7}, 0)), VocabularyError);
}

TEST_CASE("compliance picks the largest conditioned set") {
  const auto g = constant_graph(4, {0, 1, 2, 3}, {});
  const std::vector<Candidate> cs = {cand({0, 1, 2}, 0), cand({3}, 1), cand({1, 2}, 2)};
  const std::vector<Candidate> shuffled = {cand({3}, 0), cand({1, 2}, 1), cand({0, 1, 2}, 2)};
  const RankingStrategy s{RankingStrategy::Kind::compliance, 0};
  CHECK(rank_and_select(g, CompletionVector(4), cs, s).acts == ActionSet{0, 1, 2});
  const auto sel = rank_and_select(g, CompletionVector(4), shuffled, s);
  CHECK(sel.acts == ActionSet{0, 1, 2});
  CHECK(sel.chosen == 2);
  CHECK(sel.conditioned.size() == 3);

  // ties go to the lowest provider rank
  const std::vector<Candidate> tie = {cand({0}, 0), cand({1}, 1)};
  CHECK(rank_and_select(g, CompletionVector(4), tie, s).acts == ActionSet{0});
}

TEST_CASE("majority picks the most frequent conditioned set") {
  const auto g = constant_graph(4, {0, 1, 2}, {});
  std::vector<Candidate> cs;
  for (std::size_t r = 0; r < 10; ++r) {
    // seven candidates condition to {0, 1}: four are already {0, 1} and
    // three carry act 3, which is filtered out
    if (r < 4) cs.push_back(cand({0, 1}, r));
    else if (r < 7) cs.push_back(cand({0, 1, 3}, r));
    else cs.push_back(cand({2}, r));
  }
  std::swap(cs[0], cs[9]);
  for (std::size_t r = 0; r < cs.size(); ++r) cs[r].provider_rank = r;
  const auto sel = rank_and_select(g, CompletionVector(4), cs, {RankingStrategy::Kind::majority, 0});
  CHECK(sel.acts == ActionSet{0, 1});
}

TEST_CASE("violation picks the candidate with the fewest edits") {
  // A: one removal. B: two additions.
  const auto g = constant_graph(5, {0, 1, 2}, {1, 2});
  const std::vector<Candidate> cs = {cand({0}, 0), cand({1, 2, 4}, 1)};
  // cand 0 {0}: added {1,2}, removed {} -> 2; cand 1 {1,2,4}: added {}, removed {4} -> 1
  const auto sel = rank_and_select(g, CompletionVector(5), cs, {RankingStrategy::Kind::violation, 0});
  CHECK(sel.chosen == 1);
  CHECK(sel.acts == ActionSet{1, 2});
}

TEST_CASE("greedy passes rank zero through untouched") {
  const auto g = constant_graph(3, {}, {0});
  const std::vector<Candidate> cs = {cand({2}, 1), cand({1}, 0)};
  const auto sel = rank_and_select(g, CompletionVector(3), cs, {RankingStrategy::Kind::greedy, 0});
  CHECK(sel.acts == ActionSet{1});
  CHECK(sel.conditioned.empty());
}

TEST_CASE("uniform is reproducible for a seed") {
  const auto g = constant_graph(6, {0, 1, 2, 3, 4, 5}, {});
  std::vector<Candidate> cs;
  for (std::size_t r = 0; r < 6; ++r) cs.push_back(cand({r}, r));
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const RankingStrategy s{RankingStrategy::Kind::uniform, seed};
    const auto a = rank_and_select(g, CompletionVector(6), cs, s);
    const auto b = rank_and_select(g, CompletionVector(6), cs, s);
    CHECK(a.chosen == b.chosen);
    seen.insert(a.chosen);
  }
  CHECK(seen.size() > 3);
}

TEST_CASE("empty candidate list") {
  const auto g = constant_graph(2, {0}, {});
  CHECK_THROWS_AS(rank_and_select(g, CompletionVector(2), {}, RankingStrategy{}), NoCandidates);
  CHECK_THROWS_AS(select_response(g, CompletionVector(2), {}), NoCandidates);
}

TEST_CASE("strategy names") {
  for (auto k : {RankingStrategy::Kind::greedy, RankingStrategy::Kind::compliance, RankingStrategy::Kind::majority,
                 RankingStrategy::Kind::violation, RankingStrategy::Kind::uniform}) {
    CHECK(parse_strategy(to_string(k)) == k);
  }
  CHECK_FALSE(parse_strategy("best"));
}

TEST_CASE("violation rate") {
  const ActVocabulary v({"SYSTEM inform phone", "SYSTEM reqmore", "SYSTEM goodbye"});
  TodFlowGraph g(v);
  ActConditions phone;
  phone.can_shdnt = DnfCondition::never();
  g.set_conditions(0, phone);
  ActConditions reqmore;
  reqmore.shd = DnfCondition::always();
  g.set_conditions(1, reqmore);
  const CompletionVector c(3);

  CHECK(violation_rate(g, c, ResponseCandidate{"phone", ActionSet{0}, 0}) == 1.0);
  CHECK(violation_rate(g, c, ResponseCandidate{"more?", ActionSet{1}, 1}) == 0.0);
  CHECK(violation_rate(g, c, ResponseCandidate{"bye", ActionSet{2}, 1}) == doctest::Approx(0.5));

  const TodFlowGraph plain(v);
  CHECK(violation_rate(plain, c, ResponseCandidate{"", ActionSet{2}, 0}) == 0.0);
  CHECK(violation_rate(plain, c, ResponseCandidate{"", ActionSet{}, 0}) == 0.0);
}

TEST_CASE("select_response argmin with rank tie break") {
  const ActVocabulary v({"P", "Q", "R", "S"});
  TodFlowGraph g(v);
  ActConditions never;
  never.can_shdnt = DnfCondition::never();
  g.set_conditions(0, never);
  const CompletionVector c(4);
  // rates: {P, Q} 0.5, {Q} 0.0, {P, Q, R, S} 0.25
  const std::vector<ResponseCandidate> rs = {
      {"a", ActionSet{0, 1}, 0}, {"b", ActionSet{1}, 1}, {"c", ActionSet{0, 1, 2, 3}, 2}};
  CHECK(select_response(g, c, rs) == 1);
  const std::vector<ResponseCandidate> tie = {{"a", ActionSet{1}, 1}, {"b", ActionSet{2}, 0}};
  CHECK(select_response(g, c, tie) == 1);
}

}  // TEST_SUITE
