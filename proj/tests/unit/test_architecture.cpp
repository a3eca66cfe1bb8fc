#include <doctest.h>

#include "warplut/architecture.hpp"
#include "warplut/error.hpp"

using namespace warplut;
using nlohmann::json;

namespace {

json small_mlp() {
  return json::parse(R"({
    "input": {"dim": 12}, "seed": 3,
    "layers": [{"type": "dense", "nodes": 20}, {"type": "dense", "nodes": 10, "arity": 3}],
    "group_sum": {"classes": 2, "tau": 4}
  })");
}

json table2_conv() {
  return json::parse(R"({
    "input": {"channels": 9, "height": 32, "width": 32},
    "init": {"scheme": "residual"},
    "layers": [{"type": "conv", "out_channels": 64, "depth": 3},
               {"type": "dense", "nodes": 16384}, {"type": "dense", "nodes": 8192},
               {"type": "dense", "nodes": 10240}],
    "group_sum": {"classes": 10, "tau": 20}
  })");
}

}  // namespace

TEST_CASE("defaults and per-layer seeds") {
  const auto spec = parse_architecture(small_mlp());
  CHECK(spec.input == Shape3{12, 1, 1});
  REQUIRE(spec.layers.size() == 2);
  const auto& d0 = std::get<DenseSpec>(spec.layers[0]);
  const auto& d1 = std::get<DenseSpec>(spec.layers[1]);
  CHECK(d0.arity == 2);
  CHECK(d0.node_kind == NodeKind::Warp);
  CHECK(d0.init.kind == InitScheme::Kind::Random);
  CHECK(d0.seed != d1.seed);
  CHECK(spec.group_sum.tau == 4.0);
}

TEST_CASE("parameter and node counts") {
  const auto mlp = parse_architecture(small_mlp());
  CHECK(node_count(mlp) == 30);
  CHECK(param_count(mlp) == 20 * 4 + 10 * 8);
  CHECK(layer_output_dims(mlp) == std::vector<std::size_t>{20, 10});

  auto doc = small_mlp();
  doc["node_kind"] = "dlgn";
  doc["layers"][1]["arity"] = 2;
  CHECK(param_count(parse_architecture(doc)) == 30 * 16);

  const auto conv = parse_architecture(table2_conv());
  CHECK(layer_output_dims(conv).front() == 64 * 16 * 16);
  CHECK(node_count(conv) == 64 * 8 + 16384 + 8192 + 10240);
  CHECK(param_count(conv) == 4 * node_count(conv));
}

TEST_CASE("unknown keys are rejected with their location") {
  auto doc = small_mlp();
  doc["layers"][0]["nodez"] = 4;
  try {
    parse_architecture(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nodez") != std::string::npos);
  }
  auto top = small_mlp();
  top["extra"] = 1;
  CHECK_THROWS_AS(parse_architecture(top), ConfigError);
}

TEST_CASE("invalid documents") {
  auto bad_arity = small_mlp();
  bad_arity["layers"][0]["arity"] = 7;
  CHECK_THROWS_AS(parse_architecture(bad_arity), ConfigError);

  auto dlgn3 = small_mlp();
  dlgn3["node_kind"] = "dlgn";
  CHECK_THROWS_AS(parse_architecture(dlgn3), ConfigError);

  auto groups = small_mlp();
  groups["group_sum"]["classes"] = 3;
  CHECK_THROWS_AS(parse_architecture(groups), ConfigError);

  auto kind = small_mlp();
  kind["node_kind"] = "tree";
  CHECK_THROWS_AS(parse_architecture(kind), ConfigError);

  auto wide = small_mlp();
  wide["layers"][0]["nodes"] = 0;
  CHECK_THROWS_AS(parse_architecture(wide), ConfigError);

  auto fan = small_mlp();
  fan["input"]["dim"] = 1;
  CHECK_THROWS_AS(parse_architecture(fan), ConfigError);

  auto odd = table2_conv();
  odd["input"]["height"] = 31;
  CHECK_THROWS_AS(parse_architecture(odd), ConfigError);

  auto sigma = small_mlp();
  sigma["init"] = json{{"scheme", "random"}, {"sigma", -1.0}};
  CHECK_THROWS_AS(parse_architecture(sigma), ConfigError);
}

TEST_CASE("explicit connections are validated") {
  auto doc = json::parse(R"({"input": {"dim": 4},
    "layers": [{"type": "dense", "nodes": 2, "connections": [[0, 1], [2, 3]]}],
    "group_sum": {"classes": 2}})");
  CHECK_NOTHROW(parse_architecture(doc));
  doc["layers"][0]["connections"][1][1] = 4;
  CHECK_THROWS_AS(parse_architecture(doc), ConfigError);
  doc["layers"][0]["connections"] = json::parse("[[0, 1]]");
  CHECK_THROWS_AS(parse_architecture(doc), ConfigError);
}

TEST_CASE("json round trip preserves the architecture and its hash") {
  for (const json& doc : {small_mlp(), table2_conv()}) {
    const auto spec = parse_architecture(doc);
    const auto again = parse_architecture(to_json(spec));
    CHECK(again == spec);
    CHECK(architecture_hash(again) == architecture_hash(spec));
    CHECK(architecture_hash(spec).size() == 16);
  }
  auto other = small_mlp();
  other["seed"] = 4;
  CHECK(architecture_hash(parse_architecture(other)) !=
        architecture_hash(parse_architecture(small_mlp())));
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("", 0) == "cbf29ce484222325");
  CHECK(fnv1a_hex("a", 1) == "af63dc4c8601ec8c");
}

TEST_CASE("init defaults") {
  const auto r = default_init(InitScheme::Kind::Residual, NodeKind::Warp);
  CHECK(r.kind == InitScheme::Kind::Residual);
  CHECK(r.gamma > 0.0);
  CHECK_THROWS_AS(validate(InitScheme::residual(1.0, -0.1)), ConfigError);
}
