#include "warplut/architecture.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "warplut/error.hpp"
#include "warplut/random.hpp"
#include "warplut/truth_table.hpp"

namespace warplut {

using nlohmann::json;

std::string to_string(NodeKind kind) { return kind == NodeKind::Warp ? "warp" : "dlgn"; }

NodeKind parse_node_kind(const std::string& text) {
  if (text == "warp") return NodeKind::Warp;
  if (text == "dlgn") return NodeKind::Dlgn;
  throw ConfigError("unknown node kind '" + text + "' (expected warp or dlgn)");
}

void validate(const InitScheme& scheme) {
  if (!(scheme.sigma >= 0.0)) throw ConfigError("init sigma must be >= 0");
  if (scheme.kind == InitScheme::Kind::Residual && !(scheme.gamma > 0.0)) {
    throw ConfigError("residual init gamma must be > 0");
  }
}

InitScheme default_init(InitScheme::Kind kind, NodeKind node_kind) {
  if (kind == InitScheme::Kind::Random) return InitScheme::random(1.0);
  return node_kind == NodeKind::Warp ? InitScheme::residual(1.0, 0.25)
                                     : InitScheme::residual(5.0, 1.0);
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || item.key() == key;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

namespace {

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

struct PartialInit {
  std::optional<InitScheme::Kind> kind;
  std::optional<double> gamma;
  std::optional<double> sigma;
};

PartialInit parse_init(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"scheme", "gamma", "sigma"}, where);
  PartialInit p;
  const auto scheme = get_required<std::string>(j, "scheme", where);
  if (scheme == "random") {
    p.kind = InitScheme::Kind::Random;
  } else if (scheme == "residual") {
    p.kind = InitScheme::Kind::Residual;
  } else {
    throw ConfigError("unknown init scheme '" + scheme + "' in " + where);
  }
  if (j.contains("gamma")) p.gamma = get_required<double>(j, "gamma", where);
  if (j.contains("sigma")) p.sigma = get_required<double>(j, "sigma", where);
  return p;
}

InitScheme resolve_init(const PartialInit& layer, const PartialInit& doc, NodeKind kind) {
  const PartialInit& src = layer.kind ? layer : doc;
  const auto scheme_kind = src.kind.value_or(InitScheme::Kind::Random);
  InitScheme s = default_init(scheme_kind, kind);
  if (src.gamma) s.gamma = *src.gamma;
  if (src.sigma) s.sigma = *src.sigma;
  validate(s);
  return s;
}

json init_to_json(const InitScheme& s) {
  if (s.kind == InitScheme::Kind::Random) return json{{"scheme", "random"}, {"sigma", s.sigma}};
  return json{{"scheme", "residual"}, {"gamma", s.gamma}, {"sigma", s.sigma}};
}

}  // namespace

ArchitectureSpec parse_architecture(const json& doc) {
  reject_unknown_keys(doc, {"input", "node_kind", "init", "seed", "layers", "group_sum"},
                      "architecture");
  ArchitectureSpec spec;

  const json& in = doc.at("input");
  reject_unknown_keys(in, {"dim", "channels", "height", "width"}, "architecture.input");
  if (in.contains("dim")) {
    if (in.contains("channels") || in.contains("height") || in.contains("width")) {
      throw ConfigError("architecture.input: give either dim or channels/height/width");
    }
    spec.input = Shape3{get_required<int>(in, "dim", "input"), 1, 1};
  } else {
    spec.input = Shape3{get_required<int>(in, "channels", "input"),
                        get_required<int>(in, "height", "input"),
                        get_required<int>(in, "width", "input")};
  }

  const NodeKind doc_kind = parse_node_kind(get_or<std::string>(doc, "node_kind", "warp"));
  const PartialInit doc_init =
      doc.contains("init") ? parse_init(doc.at("init"), "architecture.init") : PartialInit{};
  spec.seed = get_or<std::uint64_t>(doc, "seed", 0);

  if (!doc.contains("layers") || !doc.at("layers").is_array()) {
    throw ConfigError("architecture.layers must be an array");
  }
  std::size_t index = 0;
  for (const json& lj : doc.at("layers")) {
    const std::string where = "architecture.layers[" + std::to_string(index) + "]";
    const auto type = get_required<std::string>(lj, "type", where);
    const NodeKind kind = lj.contains("node_kind")
                              ? parse_node_kind(get_required<std::string>(lj, "node_kind", where))
                              : doc_kind;
    const PartialInit layer_init =
        lj.contains("init") ? parse_init(lj.at("init"), where + ".init") : PartialInit{};
    const std::uint64_t seed = get_or<std::uint64_t>(lj, "seed", derive_seed(spec.seed, index));
    if (type == "dense") {
      reject_unknown_keys(lj, {"type", "nodes", "arity", "node_kind", "init", "seed",
                               "dlgn_temperature", "connections"},
                          where);
      DenseSpec d;
      d.nodes = get_required<std::size_t>(lj, "nodes", where);
      d.arity = get_or<int>(lj, "arity", 2);
      d.node_kind = kind;
      d.init = resolve_init(layer_init, doc_init, kind);
      d.seed = seed;
      d.dlgn_temperature = get_or<double>(lj, "dlgn_temperature", 1.0);
      if (lj.contains("connections")) {
        d.connections = get_required<std::vector<std::vector<std::uint32_t>>>(lj, "connections",
                                                                              where);
      }
      spec.layers.emplace_back(std::move(d));
    } else if (type == "conv") {
      reject_unknown_keys(lj, {"type", "out_channels", "depth", "node_kind", "init", "seed",
                               "dlgn_temperature"},
                          where);
      ConvSpec c;
      c.out_channels = get_required<int>(lj, "out_channels", where);
      c.depth = get_or<int>(lj, "depth", 3);
      c.node_kind = kind;
      c.init = resolve_init(layer_init, doc_init, kind);
      c.seed = seed;
      c.dlgn_temperature = get_or<double>(lj, "dlgn_temperature", 1.0);
      spec.layers.emplace_back(c);
    } else {
      throw ConfigError("unknown layer type '" + type + "' in " + where);
    }
    ++index;
  }

  const json& gs = doc.at("group_sum");
  reject_unknown_keys(gs, {"classes", "tau"}, "architecture.group_sum");
  spec.group_sum.classes = get_required<int>(gs, "classes", "group_sum");
  spec.group_sum.tau = get_or<double>(gs, "tau", 1.0);

  validate(spec);
  return spec;
}

ArchitectureSpec load_architecture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open architecture file " + path);
  try {
    return parse_architecture(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("malformed architecture file " + path + ": " + e.what());
  }
}

json to_json(const ArchitectureSpec& spec) {
  json layers = json::array();
  for (const auto& layer : spec.layers) {
    if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      json lj{{"type", "dense"},       {"nodes", d->nodes},
              {"arity", d->arity},     {"node_kind", to_string(d->node_kind)},
              {"init", init_to_json(d->init)}, {"seed", d->seed},
              {"dlgn_temperature", d->dlgn_temperature}};
      if (!d->connections.empty()) lj["connections"] = d->connections;
      layers.push_back(std::move(lj));
    } else {
      const auto& c = std::get<ConvSpec>(layer);
      layers.push_back(json{{"type", "conv"},
                            {"out_channels", c.out_channels},
                            {"depth", c.depth},
                            {"node_kind", to_string(c.node_kind)},
                            {"init", init_to_json(c.init)},
                            {"seed", c.seed},
                            {"dlgn_temperature", c.dlgn_temperature}});
    }
  }
  return json{{"input",
               {{"channels", spec.input.channels},
                {"height", spec.input.height},
                {"width", spec.input.width}}},
              {"seed", spec.seed},
              {"layers", std::move(layers)},
              {"group_sum", {{"classes", spec.group_sum.classes}, {"tau", spec.group_sum.tau}}}};
}

std::vector<std::size_t> layer_output_dims(const ArchitectureSpec& spec) {
  if (spec.input.channels < 1 || spec.input.height < 1 || spec.input.width < 1) {
    throw ConfigError("input dimensions must be positive");
  }
  std::vector<std::size_t> dims;
  Shape3 shape = spec.input;
  bool flat = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string where = "layer " + std::to_string(i);
    if (const auto* d = std::get_if<DenseSpec>(&spec.layers[i])) {
      if (d->nodes == 0) throw ConfigError(where + ": dense layer needs at least one node");
      if (d->node_kind == NodeKind::Dlgn && d->arity != 2) {
        throw ConfigError(where + ": DLGN nodes have exactly 2 inputs");
      }
      if (d->arity < 1 || d->arity > kMaxArity) {
        throw ConfigError(where + ": arity must be in [1, 6]");
      }
      if (shape.size() < static_cast<std::size_t>(d->arity)) {
        throw ConfigError(where + ": input dimension smaller than arity");
      }
      if (!(d->dlgn_temperature > 0.0)) throw ConfigError(where + ": dlgn_temperature must be > 0");
      if (!d->connections.empty()) {
        if (d->connections.size() != d->nodes) {
          throw ConfigError(where + ": connections must list one row per node");
        }
        for (const auto& row : d->connections) {
          if (row.size() != static_cast<std::size_t>(d->arity)) {
            throw ConfigError(where + ": connection row length must equal arity");
          }
          std::set<std::uint32_t> seen(row.begin(), row.end());
          if (seen.size() != row.size()) {
            throw ConfigError(where + ": connection indices within a node must be distinct");
          }
          for (auto idx : row) {
            if (idx >= shape.size()) throw ConfigError(where + ": connection index out of range");
          }
        }
      }
      shape = Shape3{static_cast<int>(d->nodes), 1, 1};
      flat = true;
    } else {
      const auto& c = std::get<ConvSpec>(spec.layers[i]);
      if (flat) throw ConfigError(where + ": conv blocks must precede dense layers");
      if (c.out_channels < 1) throw ConfigError(where + ": out_channels must be positive");
      if (c.depth < 1 || c.depth > 8) throw ConfigError(where + ": depth must be in [1, 8]");
      if (shape.height % 2 != 0 || shape.width % 2 != 0 || shape.height < 2) {
        throw ConfigError(where + ": conv input height/width must be even for 2x2 pooling");
      }
      if (!(c.dlgn_temperature > 0.0)) throw ConfigError(where + ": dlgn_temperature must be > 0");
      shape = Shape3{c.out_channels, shape.height / 2, shape.width / 2};
    }
    dims.push_back(shape.size());
  }
  if (spec.layers.empty()) throw ConfigError("architecture needs at least one layer");
  if (spec.group_sum.classes < 1) throw ConfigError("group_sum.classes must be positive");
  if (!(spec.group_sum.tau > 0.0)) throw ConfigError("group_sum.tau must be positive");
  if (dims.back() % static_cast<std::size_t>(spec.group_sum.classes) != 0) {
    throw ConfigError("last layer width " + std::to_string(dims.back()) +
                      " is not divisible by the class count");
  }
  return dims;
}

void validate(const ArchitectureSpec& spec) { (void)layer_output_dims(spec); }

std::uint64_t node_count(const ArchitectureSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& layer : spec.layers) {
    if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      total += d->nodes;
    } else {
      const auto& c = std::get<ConvSpec>(layer);
      total += static_cast<std::uint64_t>(c.out_channels) << c.depth;
    }
  }
  return total;
}

std::uint64_t param_count(const ArchitectureSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& layer : spec.layers) {
    if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      const std::uint64_t width = d->node_kind == NodeKind::Warp ? (1ull << d->arity) : 16;
      total += d->nodes * width;
    } else {
      const auto& c = std::get<ConvSpec>(layer);
      const std::uint64_t width = c.node_kind == NodeKind::Warp ? 4 : 16;
      total += (static_cast<std::uint64_t>(c.out_channels) << c.depth) * width;
    }
  }
  return total;
}

std::string fnv1a_hex(const void* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string architecture_hash(const ArchitectureSpec& spec) {
  const std::string dump = to_json(spec).dump();
  return fnv1a_hex(dump.data(), dump.size());
}

}  // namespace warplut
