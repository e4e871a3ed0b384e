#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "todflow/errors.hpp"
#include "todflow/ingest.hpp"

using namespace todflow;
using nlohmann::json;

namespace {

TurnRecord rec(Speaker s, std::vector<std::string> acts, std::optional<std::string> db = {}) {
  TurnRecord r;
  r.speaker = s;
  r.acts = std::move(acts);
  r.db_result = std::move(db);
  return r;
}

Trajectory traj(std::string id, std::vector<TurnRecord> turns, std::string domain = "d") {
  Trajectory t;
  t.id = std::move(id);
  t.domain_id = std::move(domain);
  t.turns = std::move(turns);
  return t;
}

json sgd_dialogue(int results) {
  json d = {{"dialogue_id", "1_00001"}, {"services", {"RentalCars_1"}}};
  json user_turn = {{"speaker", "USER"},
                    {"utterance", "I need a car"},
                    {"frames",
                     {{{"service", "RentalCars_1"},
                       {"actions",
                        {{{"act", "INFORM_INTENT"}, {"slot", "intent"}, {"values", {"GetCarsAvailable"}}},
                         {{"act", "INFORM"}, {"slot", "city"}, {"values", {"SF"}}}}}}}}};
  json results_arr = json::array();
  for (int i = 0; i < results; ++i) results_arr.push_back({{"car", std::to_string(i)}});
  json system_turn = {{"speaker", "SYSTEM"},
                      {"utterance", "Found some"},
                      {"frames",
                       {{{"service", "RentalCars_1"},
                         {"actions", {{{"act", "OFFER"}, {"slot", "car_name"}, {"values", {"x"}}}}},
                         {"service_call", {{"method", "FindCar"}, {"parameters", json::object()}}},
                         {"service_results", results_arr}}}}};
  d["turns"] = {user_turn, system_turn};
  return d;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("two-turn JSONL dialogue") {
  std::istringstream in(
      R"({"id": "t1", "domain": "cars", "turns": [{"speaker": "user", "acts": ["USER inform city"], "utterance": "SF", "extra": 1}, {"speaker": "system", "acts": ["SYSTEM request date"]}]})"
      "\n\n");
  const auto trajs = parse_jsonl(in);
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].id == "t1");
  CHECK(trajs[0].domain_id == "cars");
  REQUIRE(trajs[0].turns.size() == 2);
  CHECK(trajs[0].turns[0].speaker == Speaker::user);
  CHECK(trajs[0].turns[0].utterance == "SF");
  CHECK(trajs[0].turns[1].acts == std::vector<std::string>{"SYSTEM request date"});
}

TEST_CASE("JSONL errors") {
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_jsonl(empty), ParseError);

  std::istringstream bad("{\"domain\": \"d\", \"turns\": [{\"speaker\": \"user\", \"acts\": []}]}\n{not json}\n");
  try {
    parse_jsonl(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream no_domain(R"({"turns": [{"speaker": "user", "acts": []}]})");
  try {
    parse_jsonl(no_domain);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "domain");
  }

  std::istringstream no_acts(R"({"domain": "d", "turns": [{"speaker": "user"}]})");
  try {
    parse_jsonl(no_acts);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "acts");
  }

  CHECK_THROWS_AS(parse_trajectories(CorpusFile{"/nonexistent/corpus.jsonl", {}}), FileNotFound);
}

TEST_CASE("JSONL round trip") {
  const std::vector<Trajectory> in = {
      traj("a", {rec(Speaker::user, {"A"}), rec(Speaker::db, {}, "ok"), rec(Speaker::system, {"B", "C"})}),
      traj("b", {rec(Speaker::user, {"C"})}, "other")};
  std::istringstream text(trajectories_to_jsonl(in));
  CHECK(parse_jsonl(text) == in);
}

TEST_CASE("SGD service call inserts a query turn and a db turn") {
  const auto t = sgd_adapt(sgd_dialogue(3));
  CHECK(t.id == "1_00001");
  CHECK(t.domain_id == "RentalCars_1");
  REQUIRE(t.turns.size() == 4);
  CHECK(t.turns[0].acts == std::vector<std::string>{"USER inform_intent GetCarsAvailable", "USER inform city"});
  CHECK(t.turns[1].speaker == Speaker::system);
  CHECK(t.turns[1].acts == std::vector<std::string>{"SYSTEM query FindCar"});
  CHECK(t.turns[2].speaker == Speaker::db);
  CHECK(t.turns[2].db_result == "query_success");
  CHECK(t.turns[3].acts == std::vector<std::string>{"SYSTEM offer car_name"});

  CHECK(sgd_adapt(sgd_dialogue(0)).turns[2].db_result == "query_failure");

  auto plain = sgd_dialogue(1);
  plain["turns"][1]["frames"][0].erase("service_call");
  CHECK(sgd_adapt(plain).turns.size() == 2);

  auto unannotated = sgd_dialogue(1);
  unannotated["turns"][0].erase("frames");
  CHECK_THROWS_AS(sgd_adapt(unannotated), SchemaError);

  std::istringstream arr(json::array({sgd_dialogue(2)}).dump());
  const auto parsed = parse_sgd(arr);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0] == sgd_adapt(sgd_dialogue(2)));
}

TEST_CASE("completion vectors accumulate and system sees same-turn user acts") {
  const auto t = traj("x", {rec(Speaker::user, {"A"}), rec(Speaker::system, {"B"})});
  const auto vocab = vocabulary_from_trajectories(std::span(&t, 1));
  const auto ds = build_examples(std::span(&t, 1), vocab, TargetSpeaker::system);
  REQUIRE(ds.examples.size() == 1);
  CHECK(ds.examples[0].completion == test::completion(2, {vocab.at("A")}));
  CHECK(ds.examples[0].action == ActionSet{vocab.at("B")});

  const auto u = traj("y", {rec(Speaker::user, {"A"}), rec(Speaker::db, {}, "query_success"),
                            rec(Speaker::system, {"B"}), rec(Speaker::user, {"C"})});
  const auto v2 = vocabulary_from_trajectories(std::span(&u, 1));
  const auto both = build_examples(std::span(&u, 1), v2, TargetSpeaker::both);
  REQUIRE(both.examples.size() == 3);
  CHECK(both.examples[2].completion ==
        test::completion(4, {v2.at("A"), v2.at("query_success"), v2.at("B")}));
  CHECK(both.examples[0].completion.none());
}

TEST_CASE("one example per turn and conservation of act counts") {
  Rng rng(3);
  std::vector<Trajectory> corpus;
  std::size_t acts_total = 0;
  for (int k = 0; k < 3; ++k) {
    std::vector<TurnRecord> turns;
    for (int t = 0; t < 10; ++t) {
      const Speaker s = t % 2 ? Speaker::system : Speaker::user;
      std::vector<std::string> acts;
      for (char ch : std::string("PQRS")) {
        if (rng.bernoulli(0.4)) acts.push_back(std::string(s == Speaker::user ? "USER " : "SYSTEM ") + ch);
      }
      acts_total += acts.size();
      turns.push_back(rec(s, acts));
    }
    corpus.push_back(traj("t" + std::to_string(k), turns));
  }
  const auto vocab = vocabulary_from_trajectories(corpus);
  const auto ds = build_examples(corpus, vocab, TargetSpeaker::both);
  CHECK(ds.examples.size() == 30);
  std::size_t sum = 0;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    sum += ds.examples[i].action.size();
    if (i > 0 && ds.examples[i].trajectory_id == ds.examples[i - 1].trajectory_id) {
      CHECK(ds.examples[i - 1].completion.is_subset_of(ds.examples[i].completion));
    }
  }
  CHECK(sum == acts_total);
  CHECK(fingerprint(ds) == fingerprint(build_examples(corpus, vocab, TargetSpeaker::both)));
}

TEST_CASE("unknown label names the label") {
  const auto t = traj("x", {rec(Speaker::user, {"A"}), rec(Speaker::system, {"Z"})});
  const ActVocabulary vocab(std::vector<std::string>{"A"});
  try {
    build_examples(std::span(&t, 1), vocab, TargetSpeaker::system);
    FAIL("expected VocabularyError");
  } catch (const VocabularyError& e) {
    CHECK(e.label() == "Z");
  }
  const auto points = decision_points(t, vocab, TargetSpeaker::system, UnknownLabels::skip);
  REQUIRE(points.size() == 1);
  CHECK(points[0].gold.empty());
}

TEST_CASE("split is per domain, seeded and order preserving") {
  std::vector<Trajectory> corpus;
  for (int i = 0; i < 40; ++i) {
    corpus.push_back(traj("d1-" + std::to_string(i), {rec(Speaker::user, {"A"})}, "d1"));
    corpus.push_back(traj("d2-" + std::to_string(i), {rec(Speaker::user, {"A"})}, "d2"));
  }
  const auto s = split_trajectories(corpus, 9, 0.9);
  CHECK(s.train.size() == 72);
  CHECK(s.test.size() == 8);
  std::size_t d1_test = 0;
  for (const auto& t : s.test) d1_test += t.domain_id == "d1";
  CHECK(d1_test == 4);
  const auto again = split_trajectories(corpus, 9, 0.9);
  CHECK(again.test == s.test);
  const auto other = split_trajectories(corpus, 10, 0.9);
  CHECK(other.test != s.test);
  // input order kept on each side
  for (std::size_t i = 1; i < s.train.size(); ++i) {
    const auto pos = [&](const Trajectory& t) {
      return std::find(corpus.begin(), corpus.end(), t) - corpus.begin();
    };
    CHECK(pos(s.train[i - 1]) < pos(s.train[i]));
  }
}

TEST_CASE("label rewrite table") {
  const auto rw = LabelRewrite::from_json(
      json{{"SYSTEM Booking-Inform *", {"SYSTEM OfferBook", "SYSTEM inform *"}}, {"USER thanks", {"USER thank_you"}}});
  CHECK(rw.apply(std::string("SYSTEM Booking-Inform day")) ==
        std::vector<std::string>{"SYSTEM OfferBook", "SYSTEM inform day"});
  CHECK(rw.apply(std::string("USER thanks")) == std::vector<std::string>{"USER thank_you"});
  CHECK(rw.apply(std::string("USER bye")) == std::vector<std::string>{"USER bye"});

  auto t = traj("x", {rec(Speaker::system, {"SYSTEM Booking-Inform day", "SYSTEM OfferBook"})});
  rw.apply(t);
  CHECK(t.turns[0].acts == std::vector<std::string>{"SYSTEM OfferBook", "SYSTEM inform day"});
}

}  // TEST_SUITE
