#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "warplut/checkpoint.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/netlist.hpp"

using namespace warplut;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "warplut");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json parity4_config(const fs::path& out) {
  return json{
      {"architecture",
       json::parse(R"({"input": {"dim": 4}, "seed": 1, "init": {"scheme": "random", "sigma": 1.0},
         "layers": [{"type": "dense", "nodes": 4, "connections": [[0, 1], [2, 3], [0, 2], [1, 3]]},
                    {"type": "dense", "nodes": 2, "connections": [[0, 1], [2, 3]]},
                    {"type": "dense", "nodes": 2, "connections": [[0, 1], [0, 1]]}],
         "group_sum": {"classes": 2, "tau": 1.0}})")},
      {"train", json::parse(R"({"steps": 3000, "batch_size": 16, "learning_rate": 0.05,
                                "eval_every": 500, "seed": 1, "mode": "gumbel"})")},
      {"dataset", {{"kind", "parity"}, {"k", 4}}},
      {"output_dir", out.string()}};
}

// Trains the parity-4 quickstart once and shares the run directory.
const fs::path& trained_run() {
  static const fs::path dir = [] {
    const auto d = testutil::scratch("cli_parity4");
    write_json(d / "config.json", parity4_config(d / "run"));
    const auto r = cli_run({"train", "--config", (d / "config.json").string()});
    REQUIRE_MESSAGE(r.code == 0, (r.out + r.err));
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("selftest passes and detects a corrupted catalog") {
  const auto ok = cli_run({"selftest"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all checks passed") != std::string::npos);
  const auto bad = cli_run({"selftest", "--corrupt-catalog"});
  CHECK(bad.code != 0);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("parity-4 quickstart trains to a perfect circuit and reruns identically") {
  const auto& dir = trained_run();
  const auto run = dir / "run";
  for (const char* f : {"config.effective.json", "metrics.csv", "metrics.jsonl", "checkpoint.json",
                        "gate_histogram.json", "plot_accuracy.csv"}) {
    CHECK(fs::exists(run / f));
  }
  const auto records = read_metrics_csv(run / "metrics.csv");
  REQUIRE(records.size() == 6);
  CHECK(records.back().val_acc_discrete == 1.0);

  const auto again = cli_run({"train", "--config", (dir / "config.json").string(), "--out",
                              (dir / "run2").string()});
  REQUIRE(again.code == 0);
  CHECK(read_metrics_csv(dir / "run2" / "metrics.csv") == records);

  // The effective config reproduces the run on its own.
  const auto third = cli_run({"train", "--config", (run / "config.effective.json").string(), "--out",
                              (dir / "run3").string()});
  REQUIRE(third.code == 0);
  CHECK(read_metrics_csv(dir / "run3" / "metrics.csv") == records);
}

TEST_CASE("eval reproduces the final metrics") {
  const auto run = trained_run() / "run";
  const auto ck = (run / "checkpoint.json").string();
  REQUIRE(cli_run({"eval", "--checkpoint", ck, "--mode", "discrete"}).code == 0);
  REQUIRE(cli_run({"eval", "--checkpoint", ck, "--mode", "relaxed"}).code == 0);
  const double disc = read_json(run / "eval_discrete.json")["accuracy"];
  const double rel = read_json(run / "eval_relaxed.json")["accuracy"];
  const auto last = read_metrics_csv(run / "metrics.csv").back();
  CHECK(disc == 1.0);
  CHECK(disc == last.val_acc_discrete);
  CHECK(rel == last.val_acc_relaxed);
  CHECK(rel - disc == doctest::Approx(last.gap));
  CHECK(read_json(run / "eval_discrete.json").contains("circuit_stats"));
  CHECK(cli_run({"eval", "--checkpoint", ck, "--mode", "fuzzy"}).code == 2);
}

TEST_CASE("exported netlist agrees with discrete evaluation") {
  const auto run = trained_run() / "run";
  const auto r = cli_run({"export", "--checkpoint", (run / "checkpoint.json").string(), "--format", "json",
                          "--out", (run / "net.json").string()});
  REQUIRE(r.code == 0);
  const Netlist nl = load_netlist_json(run / "net.json");
  const auto data = make_parity_dataset(4);
  const auto pred = predict(nl, netlist_eval(nl, pack_inputs(data.inputs, 4)));
  for (std::size_t i = 0; i < 16; ++i) CHECK(pred[i] == data.labels[i]);
  CHECK(cli_run({"inspect", "--netlist", (run / "net.json").string()}).code == 0);
  const auto text = cli_run({"export", "--checkpoint", (run / "checkpoint.json").string(), "--format",
                             "logic-text", "--out", (run / "net.logic").string()});
  CHECK(text.code == 0);
  CHECK(fs::exists(run / "net.logic"));
}

TEST_CASE("inspect summarises a checkpoint and a config") {
  const auto& dir = trained_run();
  const auto a = cli_run({"inspect", "--checkpoint", (dir / "run" / "checkpoint.json").string()});
  CHECK(a.code == 0);
  CHECK(a.out.find("total: 8 nodes, 32 parameters") != std::string::npos);
  CHECK(cli_run({"inspect", "--config", (dir / "config.json").string()}).code == 0);
  CHECK(cli_run({"inspect"}).code == 2);
}

TEST_CASE("configuration and data errors exit with code 2") {
  const auto dir = testutil::scratch("cli_errors");
  auto cfg = parity4_config(dir / "run");
  cfg["train"]["learning_rat"] = 0.1;
  write_json(dir / "typo.json", cfg);
  const auto typo = cli_run({"train", "--config", (dir / "typo.json").string()});
  CHECK(typo.code == 2);
  CHECK(typo.err.find("learning_rat") != std::string::npos);

  cfg = parity4_config(dir / "run");
  cfg["dataset"] = json{{"kind", "cifar10"}, {"dir", (dir / "no_such_dir").string()}};
  write_json(dir / "nodata.json", cfg);
  const auto nodata = cli_run({"train", "--config", (dir / "nodata.json").string()});
  CHECK(nodata.code == 2);
  CHECK(nodata.err.find("no_such_dir") != std::string::npos);

  CHECK(cli_run({"train", "--config", (dir / "absent.json").string()}).code == 2);
  CHECK(cli_run({"train"}).code == 2);
  CHECK(cli_run({"frobnicate"}).code == 2);
}

TEST_CASE("damaged checkpoints exit with code 3") {
  const auto dir = testutil::scratch("cli_ckpt");
  const auto src = trained_run() / "run";
  fs::copy_file(src / "checkpoint.json", dir / "checkpoint.json");
  fs::copy_file(src / "checkpoint.bin", dir / "checkpoint.bin");
  {
    std::fstream f(dir / "checkpoint.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(5);
    f.put('\x55');
  }
  const auto corrupt = cli_run({"eval", "--checkpoint", (dir / "checkpoint.json").string()});
  CHECK(corrupt.code == 3);
  CHECK_FALSE(corrupt.err.empty());

  fs::copy_file(src / "checkpoint.bin", dir / "checkpoint.bin", fs::copy_options::overwrite_existing);
  auto j = read_json(dir / "checkpoint.json");
  j["version"] = 2;
  write_json(dir / "checkpoint.json", j);
  CHECK(cli_run({"eval", "--checkpoint", (dir / "checkpoint.json").string()}).code == 3);
  CHECK(cli_run({"export", "--checkpoint", (dir / "missing.json").string()}).code == 3);
}

TEST_CASE("a single XOR gate exports as one logic line") {
  const auto dir = testutil::scratch("cli_xor");
  Network net = build_network(parse_architecture(json::parse(R"({
    "input": {"dim": 2}, "layers": [{"type": "dense", "nodes": 1, "connections": [[0, 1]]}],
    "group_sum": {"classes": 1}})")));
  const auto& c = gate_catalog()[kXor].coeffs;
  for (std::size_t s = 0; s < 4; ++s) net.bank(0).params[s] = static_cast<float>(c[s]);
  save_checkpoint(net, dir / "xor.json");
  REQUIRE(cli_run({"export", "--checkpoint", (dir / "xor.json").string(), "--format", "logic-text", "--out",
                   (dir / "xor.logic").string()})
              .code == 0);
  std::ifstream in(dir / "xor.logic");
  std::vector<std::string> gates;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] == 'w') gates.push_back(line);
  }
  REQUIRE(gates.size() == 1);
  CHECK(gates[0] == "w2 = XOR(w0, w1)");
}

TEST_CASE("folding an identity model leaves no gates") {
  const auto dir = testutil::scratch("cli_fold");
  const Network net = build_network(parse_architecture(json::parse(R"({
    "input": {"dim": 8}, "init": {"scheme": "residual", "gamma": 1.0, "sigma": 0.0},
    "layers": [{"type": "dense", "nodes": 8}, {"type": "dense", "nodes": 4}],
    "group_sum": {"classes": 2}})")));
  save_checkpoint(net, dir / "id.json");
  const auto r = cli_run({"export", "--checkpoint", (dir / "id.json").string(), "--format", "json",
                          "--fold-identities", "--out", (dir / "folded.json").string()});
  REQUIRE(r.code == 0);
  CHECK(load_netlist_json(dir / "folded.json").nodes.empty());
  CHECK(r.out.find("folded 12 identity gates") != std::string::npos);
}

TEST_CASE("effective config round trips through the parser") {
  const auto run = trained_run() / "run";
  const json eff = read_json(run / "config.effective.json");
  const cli::RunConfig rc = cli::parse_run_config(eff, run);
  CHECK(cli::to_json(rc) == eff);
  const cli::RunConfig seeded = cli::parse_run_config(eff, run, cli::Overrides{7, 2, "ste", {}});
  CHECK(seeded.train.seed == 7);
  CHECK(seeded.architecture.seed == 7);
  CHECK(seeded.train.threads == 2);
  CHECK(seeded.train.mode == RelaxMode::StraightThrough);
}
