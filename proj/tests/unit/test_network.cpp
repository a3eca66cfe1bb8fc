#include <doctest.h>

#include <random>

#include "warplut/error.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/network.hpp"

using namespace warplut;
using nlohmann::json;

namespace {

json conv_doc(const std::string& kind) {
  return json{{"input", {{"channels", 2}, {"height", 4}, {"width", 4}}},
              {"node_kind", kind},
              {"seed", 21},
              {"layers", json::array({json{{"type", "conv"}, {"out_channels", 4}, {"depth", 2}},
                                      json{{"type", "dense"}, {"nodes", 20}},
                                      json{{"type", "dense"}, {"nodes", 10}, {"arity", 2}}})},
              {"group_sum", {{"classes", 5}, {"tau", 2.0}}}};
}

json mlp_doc(const std::string& kind, int arity) {
  return json{{"input", {{"dim", 10}}},
              {"node_kind", kind},
              {"seed", 22},
              {"layers", json::array({json{{"type", "dense"}, {"nodes", 30}, {"arity", arity}},
                                      json{{"type", "dense"}, {"nodes", 12}, {"arity", arity}}})},
              {"group_sum", {{"classes", 3}}}};
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng() & 1u);
  return v;
}

// Straight-through forward without noise on Boolean inputs is the discrete
// circuit evaluated lane by lane.
void check_ste_equals_hardened(const Network& net, std::mt19937_64& rng) {
  const std::size_t lanes = 40;
  const std::size_t n = net.input_shape().size();
  const auto bits = random_bits(n * lanes, rng);
  Activations in(n, lanes);
  for (std::size_t l = 0; l < lanes; ++l) {
    for (std::size_t f = 0; f < n; ++f) in.at(f, l) = bits[l * n + f];
  }
  ForwardContext ctx;
  ctx.mode = RelaxMode::StraightThrough;
  Workspace ws;
  const Activations& last = forward(net, in, ctx, ws);
  const HardenedModel hm(net);
  const std::size_t k = static_cast<std::size_t>(net.class_count());
  const std::size_t group = last.features() / k;
  for (std::size_t l = 0; l < lanes; ++l) {
    const auto counts = hm.class_counts(std::span(bits).subspan(l * n, n));
    for (std::size_t g = 0; g < k; ++g) {
      double s = 0.0;
      for (std::size_t i = g * group; i < (g + 1) * group; ++i) s += last.at(i, l);
      REQUIRE(s == counts[g]);
    }
  }
}

}  // namespace

TEST_CASE("build_network matches the declared counts") {
  const auto spec = parse_architecture(conv_doc("warp"));
  const Network net = build_network(spec);
  CHECK(net.param_count() == param_count(spec));
  CHECK(net.node_count() == node_count(spec));
  CHECK(net.output_dim() == 10);
  CHECK(net.two_input_node_count() == node_count(spec));
  const Network again = build_network(spec);
  for (std::size_t i = 0; i < net.layers.size(); ++i) CHECK(net.bank(i).params == again.bank(i).params);
}

TEST_CASE("noise-free straight-through forward equals the hardened model") {
  std::mt19937_64 rng(1);
  check_ste_equals_hardened(build_network(parse_architecture(mlp_doc("warp", 2))), rng);
  check_ste_equals_hardened(build_network(parse_architecture(mlp_doc("warp", 4))), rng);
  check_ste_equals_hardened(build_network(parse_architecture(conv_doc("warp"))), rng);
}

TEST_CASE("snap_to_lattice keeps the hardened circuit") {
  for (const std::string kind : {"warp", "dlgn"}) {
    Network net = build_network(parse_architecture(kind == "warp" ? mlp_doc(kind, 3) : mlp_doc(kind, 2)));
    const HardenedModel before(net);
    std::vector<std::vector<std::uint64_t>> tables;
    for (std::size_t i = 0; i < net.layers.size(); ++i) tables.push_back(before.tables(i));
    snap_to_lattice(net);
    const HardenedModel after(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) CHECK(after.tables(i) == tables[i]);
    const NodeBank& b = net.bank(0);
    for (std::size_t j = 0; j < b.count; ++j) {
      const auto p = b.node(j);
      if (kind == "warp") {
        const auto c = walsh_transform(b.hardened_table(j));
        for (std::size_t s = 0; s < c.size(); ++s) REQUIRE(p[s] == static_cast<float>(c[s]));
      } else {
        int hot = 0;
        for (float v : p) hot += v != 0.0f;
        REQUIRE(hot == 1);
      }
    }
  }
}

TEST_CASE("class scores sum groups and divide by tau") {
  const Network net = build_network(parse_architecture(mlp_doc("warp", 2)));
  Activations last(12, 2);
  for (std::size_t f = 0; f < 12; ++f) {
    last.at(f, 0) = 1.0f;
    last.at(f, 1) = f < 4 ? 1.0f : 0.0f;
  }
  const auto s = class_scores(net, last);
  CHECK(s == std::vector<double>{4, 4, 4, 4, 0, 0});
}

TEST_CASE("argmax ties go to the lowest class") {
  CHECK(argmax_class(std::vector<double>{1, 3, 3}) == 1);
  CHECK(argmax_class(std::vector<std::uint32_t>{0, 0, 0}) == 0);
  CHECK(argmax_class(std::vector<std::uint32_t>{2, 5, 5, 1}) == 1);
}

TEST_CASE("input size is checked") {
  const Network net = build_network(parse_architecture(mlp_doc("warp", 2)));
  Activations wrong(9, 1);
  Workspace ws;
  CHECK_THROWS_AS(forward(net, wrong, ForwardContext{}, ws), ShapeError);
  const HardenedModel hm(net);
  const std::vector<std::uint8_t> ex(9, 0);
  CHECK_THROWS_AS(hm.predict(ex), ShapeError);
}

TEST_CASE("network gradients match finite differences") {
  Network net = build_network(parse_architecture(conv_doc("warp")));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0, 1);
  const std::size_t n = net.input_shape().size();
  Activations in(n, 4);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t l = 0; l < 4; ++l) in.at(f, l) = u(rng);
  }
  Activations w(10, 4);
  for (std::size_t f = 0; f < 10; ++f) {
    for (std::size_t l = 0; l < 4; ++l) w.at(f, l) = u(rng) - 0.5f;
  }
  ForwardContext ctx;
  auto loss = [&] {
    Workspace ws;
    const Activations& last = forward(net, in, ctx, ws);
    double s = 0.0;
    for (std::size_t f = 0; f < 10; ++f) {
      for (std::size_t l = 0; l < 4; ++l) s += static_cast<double>(w.at(f, l)) * last.at(f, l);
    }
    return s;
  };
  Workspace ws;
  forward(net, in, ctx, ws);
  Gradients g = make_gradients(net);
  backward(net, in, w, ctx, ws, g);
  const float h = 1e-2f;
  std::mt19937_64 pick(4);
  for (std::size_t layer = 0; layer < net.layers.size(); ++layer) {
    auto& params = net.bank(layer).params;
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t k = pick() % params.size();
      const float saved = params[k];
      params[k] = saved + h;
      const double up = loss();
      params[k] = saved - h;
      const double dn = loss();
      params[k] = saved;
      REQUIRE(g.per_layer[layer][k] == doctest::Approx((up - dn) / (2 * h)).epsilon(2e-2).scale(1e-2));
    }
  }
}
