#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/netlist.hpp"
#include "warplut/train.hpp"

using namespace warplut;
using nlohmann::json;

namespace {

Netlist xor_gate() {
  Netlist n;
  n.input_count = 2;
  n.input_names = {"x0", "x1"};
  n.nodes.push_back({TruthTable::from_string("0110"), {0, 1}, 0});
  n.outputs = {{2}};
  n.class_count = 1;
  return n;
}

// Seven XOR gates forming a balanced tree over eight inputs.
Netlist xor_tree8() {
  Netlist n;
  n.input_count = 8;
  for (int i = 0; i < 8; ++i) n.input_names.push_back("x" + std::to_string(i));
  const TruthTable x = TruthTable::from_string("0110");
  for (int i = 0; i < 4; ++i) n.nodes.push_back({x, {2 * i, 2 * i + 1}, i});
  n.nodes.push_back({x, {8, 9}, 4});
  n.nodes.push_back({x, {10, 11}, 5});
  n.nodes.push_back({x, {12, 13}, 6});
  n.outputs = {{14}};
  n.class_count = 1;
  return n;
}

std::vector<std::uint8_t> all_vectors(int k) {
  std::vector<std::uint8_t> v;
  for (std::size_t e = 0; e < (std::size_t{1} << k); ++e) {
    for (int i = 0; i < k; ++i) v.push_back(static_cast<std::uint8_t>((e >> (k - 1 - i)) & 1u));
  }
  return v;
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng() & 1u);
  return v;
}

Network conv_model(std::uint64_t seed) {
  return build_network(parse_architecture(json{
      {"input", {{"channels", 3}, {"height", 6}, {"width", 6}}},
      {"seed", seed},
      {"layers", json::array({json{{"type", "conv"}, {"out_channels", 4}, {"depth", 3}},
                              json{{"type", "dense"}, {"nodes", 40}, {"arity", 3}},
                              json{{"type", "dense"}, {"nodes", 20}}})},
      {"group_sum", {{"classes", 4}}}}));
}

Network dlgn_model(std::uint64_t seed) {
  return build_network(parse_architecture(json{
      {"input", {{"dim", 24}}},
      {"node_kind", "dlgn"},
      {"seed", seed},
      {"layers", json::array({json{{"type", "dense"}, {"nodes", 60}}, json{{"type", "dense"}, {"nodes", 30}}})},
      {"group_sum", {{"classes", 3}}}}));
}

void check_against_hardened_model(const Network& net, std::uint64_t seed) {
  const Netlist nl = harden(net);
  nl.validate();
  const std::size_t n = nl.input_count;
  const std::size_t count = 300;
  const auto bits = random_bits(n * count, seed);
  const auto counts = netlist_eval(nl, pack_inputs(bits, n));
  const HardenedModel hm(net);
  const std::size_t k = static_cast<std::size_t>(nl.class_count);
  for (std::size_t e = 0; e < count; ++e) {
    const auto want = hm.class_counts(std::span(bits).subspan(e * n, n));
    for (std::size_t g = 0; g < k; ++g) REQUIRE(counts[e * k + g] == want[g]);
  }
}

}  // namespace

TEST_CASE("a single XOR gate") {
  const Netlist n = xor_gate();
  const auto counts = netlist_eval(n, pack_inputs(all_vectors(2), 2));
  CHECK(counts == std::vector<std::uint32_t>{0, 1, 1, 0});
  const std::string text = to_logic_text(n);
  CHECK(text.find("w2 = XOR(w0, w1)") != std::string::npos);
  std::istringstream lines(text);
  std::string line;
  int gates = 0;
  while (std::getline(lines, line)) gates += !line.empty() && line[0] == 'w';
  CHECK(gates == 1);
}

TEST_CASE("wider gates print as LUTn with their mask") {
  Netlist n;
  n.input_count = 3;
  n.input_names = {"a", "b", "c"};
  n.nodes.push_back({TruthTable(3, 0x96), {0, 1, 2}, 0});
  n.outputs = {{3}};
  n.class_count = 1;
  CHECK(to_logic_text(n).find("w3 = LUT3(0x96, w0, w1, w2)") != std::string::npos);
  const auto counts = netlist_eval(n, pack_inputs(all_vectors(3), 3));
  for (std::size_t e = 0; e < 8; ++e) CHECK(counts[e] == static_cast<std::uint32_t>(std::popcount(e) & 1));
}

TEST_CASE("parity tree is exhaustively correct and has depth 3") {
  const Netlist n = xor_tree8();
  const auto counts = netlist_eval(n, pack_inputs(all_vectors(8), 8));
  for (std::size_t e = 0; e < 256; ++e) REQUIRE(counts[e] == static_cast<std::uint32_t>(std::popcount(e) & 1));
  const auto s = circuit_stats(n);
  CHECK(s.depth == 3);
  CHECK(s.total_nodes == 7);
  CHECK(s.gate_counts[kXor] == 7);
  CHECK(s.identity_fraction == 0.0);
}

TEST_CASE("json round trip") {
  const Netlist a = harden(conv_model(1));
  const Netlist b = netlist_from_json(netlist_to_json(a));
  CHECK(a == b);
  const auto dir = testutil::scratch("netlist_json");
  export_netlist(a, NetlistFormat::Json, dir / "n.json");
  CHECK(load_netlist_json(dir / "n.json") == a);
  auto doc = netlist_to_json(a);
  doc["schema_version"] = 99;
  CHECK_THROWS(netlist_from_json(doc));
}

TEST_CASE("evaluation is independent of word width, batch order and kernels") {
  const Network net = conv_model(2);
  const Netlist nl = harden(net);
  const std::size_t n = nl.input_count, count = 200;
  const auto bits = random_bits(n * count, 5);
  const auto ref = netlist_eval(nl, pack_inputs(bits, n), &simd::scalar_kernels());
  CHECK(netlist_eval_words<std::uint8_t>(nl, bits) == ref);
  CHECK(netlist_eval_words<std::uint32_t>(nl, bits) == ref);
  CHECK(netlist_eval_words<std::uint64_t>(nl, bits) == ref);
  if (simd::avx2_kernels()) CHECK(netlist_eval(nl, pack_inputs(bits, n), simd::avx2_kernels()) == ref);

  // Reverse the batch; each example's counts move with it.
  std::vector<std::uint8_t> rev;
  for (std::size_t e = count; e-- > 0;) rev.insert(rev.end(), bits.begin() + e * n, bits.begin() + (e + 1) * n);
  const auto back = netlist_eval(nl, pack_inputs(rev, n));
  const std::size_t k = 4;
  for (std::size_t e = 0; e < count; ++e) {
    for (std::size_t g = 0; g < k; ++g) REQUIRE(back[(count - 1 - e) * k + g] == ref[e * k + g]);
  }
}

TEST_CASE("netlist agrees with the hardened model") {
  check_against_hardened_model(conv_model(3), 11);
  check_against_hardened_model(dlgn_model(4), 12);
}

TEST_CASE("hardening is idempotent") {
  Network net = conv_model(5);
  const Netlist a = harden(net);
  CHECK(harden(net) == a);
  snap_to_lattice(net);
  const Netlist b = harden(net);
  CHECK(b.nodes == a.nodes);
  CHECK(b.outputs == a.outputs);
}

TEST_CASE("residual init hardens to identities") {
  Network net = build_network(parse_architecture(json::parse(R"({
    "input": {"dim": 16}, "init": {"scheme": "residual", "gamma": 1.0, "sigma": 0.0},
    "layers": [{"type": "dense", "nodes": 32}, {"type": "dense", "nodes": 16}],
    "group_sum": {"classes": 2}})")));
  const Netlist nl = harden(net);
  for (const auto& node : nl.nodes) REQUIRE(node.table.to_string() == "0011");
  const auto s = circuit_stats(nl);
  CHECK(s.identity_fraction == 1.0);
  CHECK(s.learned_gate_counts[kIdA] == 48);

  const auto folded = fold_identities(nl);
  CHECK(folded.removed == 48);
  CHECK(folded.netlist.nodes.empty());
  const auto bits = random_bits(16 * 100, 6);
  CHECK(netlist_eval(folded.netlist, pack_inputs(bits, 16)) == netlist_eval(nl, pack_inputs(bits, 16)));
}

TEST_CASE("folding keeps behaviour on a mixed circuit") {
  Network net = build_network(parse_architecture(json::parse(R"({
    "input": {"dim": 16}, "seed": 8, "init": {"scheme": "residual", "gamma": 1.0, "sigma": 0.6},
    "layers": [{"type": "dense", "nodes": 40}, {"type": "dense", "nodes": 40}, {"type": "dense", "nodes": 20}],
    "group_sum": {"classes": 2}})")));
  const Netlist nl = harden(net);
  const auto folded = fold_identities(nl);
  CHECK(folded.removed > 0);
  CHECK(folded.netlist.nodes.size() + folded.removed == nl.nodes.size());
  folded.netlist.validate();
  const auto bits = random_bits(16 * 500, 7);
  CHECK(netlist_eval(folded.netlist, pack_inputs(bits, 16)) == netlist_eval(nl, pack_inputs(bits, 16)));
}

TEST_CASE("circuit statistics agree with the training histogram") {
  const Network net = conv_model(6);
  const auto s = circuit_stats(harden(net));
  const auto h = gate_histogram(net);
  CHECK(std::equal(h.begin(), h.end(), s.learned_gate_counts.begin()));
  // 4 channels x 9 conv nodes + 20 two-input dense nodes
  std::uint64_t learned = 0;
  for (auto v : s.learned_gate_counts) learned += v;
  CHECK(learned == 4 * 8 + 20);
  // Pooling ORs per channel and pooled position.
  CHECK(s.structural_nodes == 4 * 3 * 3);
  const json j = to_json(s);
  CHECK(j.contains("depth"));
}

TEST_CASE("validation rejects malformed netlists") {
  Netlist fwd = xor_gate();
  fwd.nodes[0].inputs = {0, 2};
  CHECK_THROWS_AS(fwd.validate(), ShapeError);
  Netlist groups = xor_tree8();
  groups.class_count = 2;
  groups.outputs = {{14}, {13, 12}};
  CHECK_THROWS_AS(groups.validate(), ShapeError);
  Netlist arity = xor_gate();
  arity.nodes[0].inputs = {0};
  CHECK_THROWS_AS(arity.validate(), ShapeError);
}

TEST_CASE("netlist predictions match discrete evaluation") {
  const Network net = dlgn_model(9);
  BinarizedDataset data;
  data.count = 400;
  data.shape = {24, 1, 1};
  data.class_count = 3;
  data.inputs = random_bits(400 * 24, 10);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 400; ++i) data.labels.push_back(static_cast<std::uint8_t>(rng() % 3));
  const Netlist nl = harden(net);
  const auto preds = predict(nl, netlist_eval(nl, pack_inputs(data.inputs, 24)));
  std::size_t hits = 0;
  for (std::size_t e = 0; e < 400; ++e) hits += preds[e] == data.labels[e];
  CHECK(hits / 400.0 == evaluate(net, data, EvalMode::Discrete));
}
