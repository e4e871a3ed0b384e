#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "todflow/graph.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Workdir {
 public:
  Workdir() {
    dir_ = fs::temp_directory_path() / ("todflow_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }
  Workdir(const Workdir&) = delete;
  Workdir& operator=(const Workdir&) = delete;

  fs::path operator/(const std::string& name) const { return dir_ / name; }

  Run run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(TODFLOW_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

 private:
  fs::path dir_;
};

// A small synthetic domain shared by the cases below.
const Workdir& corpus() {
  static const Workdir d;
  static const bool ready = [] {
    const auto r = d.run("synth --n-trajectories 120 --seed 2 --out " + (d / "syn").string());
    REQUIRE(r.code == 0);
    const auto r2 = d.run("infer --data " + (d / "syn/trajectories.jsonl").string() + " --split train --out " +
                          (d / "g.json").string());
    REQUIRE(r2.code == 0);
    return true;
  }();
  (void)ready;
  return d;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a corpus and a truth graph") {
  const auto& w = corpus();
  CHECK(fs::exists(w / "syn/trajectories.jsonl"));
  CHECK(fs::exists(w / "syn/truth_graph.json"));
  CHECK_NOTHROW(todflow::load_graph(w / "syn/truth_graph.json"));
  const auto g = todflow::load_graph(w / "g.json");
  CHECK(g.metadata().objective_kind == "todflow");
}

TEST_CASE("usage and input errors exit with 2") {
  const auto& w = corpus();
  const auto missing = w.run("infer --data /nonexistent/d.jsonl --out " + (w / "x.json").string());
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/d.jsonl") != std::string::npos);
  CHECK(w.run("infer --no-such-flag").code == 2);
  CHECK(w.run("").code == 2);
  CHECK(w.run("infer --data " + (w / "syn/trajectories.jsonl").string() + " --method magic").code == 2);
}

TEST_CASE("runtime errors exit with 1") {
  const auto& w = corpus();
  w.write("broken.json", "{\"version\": 1, \"vocabulary\": 3}");
  const auto r = w.run("export " + (w / "broken.json").string());
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("baseline methods") {
  const auto& w = corpus();
  for (const std::string m : {"bc", "can-reg"}) {
    const auto out = w / ("g_" + m + ".json");
    REQUIRE(w.run("infer --data " + (w / "syn/trajectories.jsonl").string() + " --method " + m + " --out " +
                  out.string()).code == 0);
    CHECK(todflow::load_graph(out).metadata().objective_kind == m);
  }
}

TEST_CASE("config file fills flags that were not given") {
  const auto& w = corpus();
  w.write("infer.json", R"({"alpha": 0.7, "max_depth": 3, "data": ")" + (w / "syn/trajectories.jsonl").string() + "\"}");
  REQUIRE(w.run("infer --config " + (w / "infer.json").string() + " --max-depth 4 --out " + (w / "gc.json").string())
              .code == 0);
  const auto lc = todflow::load_graph(w / "gc.json").metadata().learn_config;
  CHECK(lc["alpha"] == 0.7);
  CHECK(lc["max_depth"] == 4);

  w.write("bad.json", R"({"alhpa": 0.7})");
  CHECK(w.run("infer --config " + (w / "bad.json").string()).code == 2);
}

TEST_CASE("condition output is reproducible and carries an audit") {
  const auto& w = corpus();
  const std::string base = "condition --graph " + (w / "g.json").string() + " --data " +
                           (w / "syn/trajectories.jsonl").string() + " --split test";
  const auto a = w.run(base + " --strategy compliance");
  const auto b = w.run(base + " --strategy compliance");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream lines(a.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    CHECK(j.contains("predicted"));
    CHECK(j.contains("gold"));
    CHECK(j["audit"].contains("added"));
    CHECK(j["audit"].contains("removed"));
    ++n;
  }
  CHECK(n > 0);

  const auto u1 = w.run(base + " --k 10 --strategy uniform --seed 7");
  const auto u2 = w.run(base + " --k 10 --strategy uniform --seed 7");
  CHECK(u1.code == 0);
  CHECK(u1.out == u2.out);
}

TEST_CASE("greedy passes the provider's first candidate through") {
  const auto& w = corpus();
  // Replay file built from the predictions of one run: every turn's stored
  // first candidate must come back unchanged under greedy.
  const auto first = w.run("condition --graph " + (w / "g.json").string() + " --data " +
                           (w / "syn/trajectories.jsonl").string() + " --split test --strategy compliance");
  REQUIRE(first.code == 0);
  std::istringstream lines(first.out);
  std::string line, replay;
  std::vector<json> expected;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    json cands = json::array({{{"acts", j["gold"]}}, {{"acts", json::array()}}});
    replay += json{{"traj", j["traj"]}, {"turn", j["turn"]}, {"candidates", cands}}.dump() + "\n";
    expected.push_back(j["gold"]);
  }
  w.write("replay.jsonl", replay);
  const auto g = w.run("condition --graph " + (w / "g.json").string() + " --data " +
                       (w / "syn/trajectories.jsonl").string() + " --split test --strategy greedy --provider replay --replay " +
                       (w / "replay.jsonl").string());
  REQUIRE(g.code == 0);
  std::istringstream glines(g.out);
  std::size_t i = 0;
  while (std::getline(glines, line)) {
    REQUIRE(i < expected.size());
    CHECK(json::parse(line)["predicted"] == expected[i++]);
  }
  CHECK(i == expected.size());
}

TEST_CASE("external provider from the command line") {
  const auto& w = corpus();
  const auto r = w.run("condition --graph " + (w / "g.json").string() + " --data " +
                       (w / "syn/trajectories.jsonl").string() + " --split test --provider external --provider-cmd '" +
                       std::string(TODFLOW_STUB_PROVIDER) + " echo'");
  CHECK(r.code == 0);
  const auto dead = w.run("condition --graph " + (w / "g.json").string() + " --data " +
                          (w / "syn/trajectories.jsonl").string() + " --split test --provider external --provider-cmd '" +
                          std::string(TODFLOW_STUB_PROVIDER) + " die'");
  CHECK(dead.code == 1);
  CHECK(dead.err.find("turn") != std::string::npos);
}

TEST_CASE("eval scores predictions and graphs") {
  const auto& w = corpus();
  REQUIRE(w.run("condition --graph " + (w / "g.json").string() + " --data " + (w / "syn/trajectories.jsonl").string() +
                " --split test --out " + (w / "pred.jsonl").string())
              .code == 0);
  const auto r = w.run("eval --pred " + (w / "pred.jsonl").string() + " --gold " + (w / "syn/trajectories.jsonl").string());
  REQUIRE(r.code == 0);
  const auto rep = json::parse(r.out);
  CHECK(rep["macro_f1"].get<double>() > 0.0);
  CHECK(rep["macro_f1"].get<double>() <= 1.0);
  CHECK(rep.contains("micro_f1"));

  const auto rec = w.run("eval --graph " + (w / "syn/truth_graph.json").string() + " --truth " +
                         (w / "syn/truth_graph.json").string() + " --max-turns 16");
  REQUIRE(rec.code == 0);
  CHECK(json::parse(rec.out)["reachable_rate"] == 1.0);
}

TEST_CASE("export draws negative edges dashed") {
  const auto& w = corpus();
  REQUIRE(w.run("synth --preset fig3 --n-trajectories 20 --out " + (w / "fig3").string()).code == 0);
  REQUIRE(w.run("export " + (w / "fig3/truth_graph.json").string() + " --dot " + (w / "fig3.dot").string()).code == 0);
  const auto dot = slurp(w / "fig3.dot");
  CHECK(dot.find("style=dashed") != std::string::npos);
  const auto again = w.run("export " + (w / "fig3/truth_graph.json").string());
  CHECK(again.out == dot);
  const auto pos = w.run("export " + (w / "fig3/truth_graph.json").string() + " --no-negative-edges");
  CHECK(pos.out.find("style=dashed") == std::string::npos);
}

TEST_CASE("edit applies a script") {
  const auto& w = corpus();
  const auto g = todflow::load_graph(w / "g.json");
  const auto& v = g.vocabulary();
  w.write("edit.json", json{{"edits", {{{"op", "set_condition"}, {"act", v.label(0)}, {"target", "can_shdnt"}, {"condition", false}}}}}.dump());
  REQUIRE(w.run("edit --graph " + (w / "g.json").string() + " --script " + (w / "edit.json").string() + " --out " +
                (w / "g2.json").string())
              .code == 0);
  CHECK(todflow::load_graph(w / "g2.json").conditions(0).can_shdnt.is_false());
  w.write("bad_edit.json", R"({"edits": [{"op": "remove_clause", "act": "nope", "target": "shd", "clause": []}]})");
  CHECK(w.run("edit --graph " + (w / "g.json").string() + " --script " + (w / "bad_edit.json").string() + " --out " +
              (w / "g3.json").string())
            .code != 0);
}

TEST_CASE("bench is byte-identical across runs") {
  const auto& w = corpus();
  w.write("bench.json", R"({"synth": [{"n_trajectories": 80}], "seeds": [0], "methods": ["none", "todflow"], "strategies": ["greedy", "compliance"]})");
  const auto a = w.run("bench --config " + (w / "bench.json").string() + " --table " + (w / "table.txt").string());
  const auto b = w.run("bench --config " + (w / "bench.json").string() + " --jobs 2");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(json::parse(a.out)["runs"].size() == 1);
  CHECK(slurp(w / "table.txt").find("compliance") != std::string::npos);
}

}  // TEST_SUITE
