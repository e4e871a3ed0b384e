#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "todflow/errors.hpp"
#include "todflow/providers.hpp"

using namespace todflow;
using nlohmann::json;

namespace {

ActVocabulary abc() { return ActVocabulary({"A", "B", "C", "D"}); }

ProviderRequest req(std::string traj, std::size_t turn, std::size_t k,
                    ProviderMode mode = ProviderMode::acts) {
  ProviderRequest r;
  r.domain_id = "d";
  r.trajectory_id = std::move(traj);
  r.turn_index = turn;
  r.k = k;
  r.mode = mode;
  r.completion = CompletionVector(4);
  return r;
}

std::string replay_text() {
  json cands = json::array();
  for (int i = 0; i < 10; ++i) {
    cands.push_back({{"acts", {std::string(1, static_cast<char>('A' + i % 4))}}, {"text", "r" + std::to_string(i)}});
  }
  return json{{"traj", "t1"}, {"turn", 3}, {"candidates", cands}}.dump() + "\n";
}

}  // namespace

TEST_SUITE("providers") {

TEST_CASE("replay returns stored candidates in order") {
  std::istringstream in(replay_text());
  ReplayProvider p(in, abc());
  const auto all = p.request(req("t1", 3, 10));
  REQUIRE(all.candidates.size() == 10);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(all.candidates[r].provider_rank == r);
    CHECK(all.candidates[r].acts == ActionSet{r % 4});
  }
  const auto five = p.request(req("t1", 3, 5));
  CHECK(five.candidates.size() == 5);
  CHECK(five.candidates[4].acts == ActionSet{0});
  CHECK_THROWS_AS(p.request(req("t1", 4, 10)), MissingCandidates);

  const auto resp = p.request(req("t1", 3, 2, ProviderMode::responses));
  REQUIRE(resp.responses.size() == 2);
  CHECK(resp.responses[1].text == "r1");
  CHECK(resp.responses[1].acts == ActionSet{1});
}

TEST_CASE("replay file errors") {
  std::istringstream bad("{\"traj\": \"t\"}\n");
  CHECK_THROWS_AS(ReplayProvider(bad, abc()), SchemaError);
  CHECK_THROWS_AS(ReplayProvider("/nonexistent/replay.jsonl", abc()), FileNotFound);
}

TEST_CASE("candidate parsing drops unknown labels and validates shape") {
  const auto reply = parse_candidates(json::parse(R"([{"acts": ["A", "ZZZ"], "score": 1.5}])"), abc(), 3,
                                      ProviderMode::acts);
  REQUIRE(reply.candidates.size() == 1);
  CHECK(reply.candidates[0].acts == ActionSet{0});
  CHECK(reply.candidates[0].provider_score == 1.5);
  REQUIRE(reply.warnings.size() == 1);
  CHECK(reply.warnings[0].find("ZZZ") != std::string::npos);

  CHECK_THROWS_AS(parse_candidates(json::parse(R"([{"acts": "A"}])"), abc(), 3, ProviderMode::acts), ProtocolError);
  CHECK_THROWS_AS(parse_candidates(json::parse(R"({"acts": []})"), abc(), 3, ProviderMode::acts), ProtocolError);
  CHECK_THROWS_AS(parse_candidates(json::parse(R"([{"acts": []}, {"acts": []}])"), abc(), 1, ProviderMode::acts),
                  ProtocolError);
}

TEST_CASE("noisy oracle edge settings") {
  const ActionSet gold{1, 3};
  const ActionSet universe{0, 1, 2, 3};
  NoisyOracleConfig exact{0.0, 0.0, 0, false};
  for (const auto& c : NoisyOracleProvider::draw(gold, universe, exact, 5, 10)) CHECK(c.acts == gold);
  NoisyOracleConfig drop_all{1.0, 0.0, 0, false};
  for (const auto& c : NoisyOracleProvider::draw(gold, universe, drop_all, 5, 10)) CHECK(c.acts.empty());
  NoisyOracleConfig bad{1.5, 0.0, 0, false};
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("noisy oracle matches its golden draw") {
  std::ifstream in(std::filesystem::path(TODFLOW_TEST_DATA) / "oracle_golden.json");
  REQUIRE(in);
  const auto golden = json::parse(in);
  NoisyOracleConfig cfg{0.3, 0.2, 0, false};
  const auto draws = NoisyOracleProvider::draw(ActionSet{1, 3, 4}, ActionSet{0, 1, 2, 3, 4, 5, 6, 7}, cfg,
                                               derive_seed(0, fnv1a("golden")), 10);
  json got = json::array();
  for (const auto& c : draws) got.push_back(c.acts.values());
  CHECK(got == golden);
}

TEST_CASE("noisy oracle rates") {
  NoisyOracleConfig cfg{0.3, 0.2, 4, false};
  const ActionSet gold{0, 1, 2, 3, 4};
  ActionSet universe;
  for (ActIndex i = 0; i < 20; ++i) universe.insert(i);
  std::size_t kept = 0, spurious = 0, draws = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    for (const auto& c : NoisyOracleProvider::draw(gold, universe, cfg, s, 10)) {
      kept += c.acts.intersected(gold).size();
      spurious += c.acts.minus(gold).size();
      ++draws;
    }
  }
  CHECK(double(kept) / double(draws * 5) == doctest::Approx(0.7).epsilon(0.02));
  // 15 non-true acts, each inserted with 0.2 / 20
  CHECK(double(spurious) / double(draws) == doctest::Approx(15 * 0.2 / 20).epsilon(0.05));
}

TEST_CASE("noisy oracle provider is keyed by turn, not request order") {
  Trajectory t;
  t.id = "t1";
  t.domain_id = "d";
  t.turns = {TurnRecord{Speaker::user, {"A"}, {}, {}}, TurnRecord{Speaker::system, {"B", "C"}, {}, {}}};
  NoisyOracleProvider p(std::span(&t, 1), abc(), ActionSet{0, 1, 2, 3}, NoisyOracleConfig{0.3, 0.2, 9, false});
  const auto first = p.request(req("t1", 1, 10));
  p.request(req("t1", 0, 10));
  const auto again = p.request(req("t1", 1, 10));
  REQUIRE(first.candidates.size() == 10);
  for (std::size_t r = 0; r < 10; ++r) CHECK(first.candidates[r].acts == again.candidates[r].acts);
  CHECK_THROWS_AS(p.request(req("t9", 0, 10)), MissingCandidates);
}

TEST_CASE("wire request encoding") {
  ProviderRequest r = req("t1", 2, 4);
  r.history = {TurnRecord{Speaker::user, {"A"}, std::string("hi"), {}}};
  r.completion.set(0);
  r.completion.set(2);
  const auto j = request_to_json(r, 17, abc());
  CHECK(j["v"] == 1);
  CHECK(j["id"] == 17);
  CHECK(j["domain"] == "d");
  CHECK(j["k"] == 4);
  CHECK(j["mode"] == "acts");
  CHECK(j["completion"] == json({"A", "C"}));
  CHECK(j["history"][0]["speaker"] == "user");
  CHECK(j["history"][0]["acts"] == json({"A"}));
}

TEST_CASE("external provider speaks the line protocol") {
  ExternalProvider p({TODFLOW_STUB_PROVIDER, "echo"}, abc(), std::chrono::seconds(10));
  const auto reply = p.request(req("t", 0, 5));
  REQUIRE(reply.candidates.size() == 2);
  CHECK(reply.candidates[0].acts == ActionSet{0, 1});
  CHECK(reply.candidates[1].acts == ActionSet{2});
  CHECK(reply.candidates[0].provider_score == -0.5);
  CHECK(reply.warnings.size() == 1);
  // the same process serves the next request
  CHECK(p.request(req("t", 1, 1)).candidates.size() == 1);
}

TEST_CASE("external provider sends one request line per call") {
  const auto log = std::filesystem::temp_directory_path() / "todflow_stub_requests.log";
  std::filesystem::remove(log);
  {
    ExternalProvider p({TODFLOW_STUB_PROVIDER, "log", log.string()}, abc(), std::chrono::seconds(10));
    p.request(req("t", 0, 3));
    p.request(req("t", 1, 3));
  }
  std::ifstream in(log);
  std::string line;
  std::vector<json> lines;
  while (std::getline(in, line)) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["id"] != lines[1]["id"]);
  CHECK(lines[1]["k"] == 3);
  std::filesystem::remove(log);
}

TEST_CASE("external provider errors") {
  ExternalProvider dies({TODFLOW_STUB_PROVIDER, "die"}, abc(), std::chrono::seconds(10));
  try {
    dies.request(req("t", 0, 3));
    FAIL("expected ProviderSpawnError");
  } catch (const ProviderSpawnError& e) {
    CHECK(std::string(e.what()).find("giving up") != std::string::npos);
  }

  ExternalProvider missing({"/nonexistent/provider-binary"}, abc(), std::chrono::seconds(5));
  CHECK_THROWS_AS(missing.request(req("t", 0, 3)), ProviderSpawnError);

  ExternalProvider hangs({TODFLOW_STUB_PROVIDER, "hang"}, abc(), std::chrono::milliseconds(300));
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(hangs.request(req("t", 0, 3)), ProviderTimeout);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));

  ExternalProvider badid({TODFLOW_STUB_PROVIDER, "badid"}, abc(), std::chrono::seconds(10));
  CHECK_THROWS_AS(badid.request(req("t", 0, 3)), ProtocolError);

  ExternalProvider garbage({TODFLOW_STUB_PROVIDER, "garbage"}, abc(), std::chrono::seconds(10));
  CHECK_THROWS_AS(garbage.request(req("t", 0, 3)), ProtocolError);
}

}  // TEST_SUITE
