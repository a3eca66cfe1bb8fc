#include "warplut/netlist.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "warplut/error.hpp"
#include "warplut/gate_catalog.hpp"

namespace warplut {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kOr4 = 0xFFFE;

}  // namespace

void Netlist::validate() const {
  if (input_names.size() != input_count) throw ShapeError("netlist: input name count mismatch");
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto& n = nodes[j];
    if (n.inputs.size() != static_cast<std::size_t>(n.table.arity())) {
      throw ShapeError("netlist: node " + std::to_string(j) + " arity does not match its wiring");
    }
    for (std::int32_t w : n.inputs) {
      if (w < kConstZero || w >= wire_of(j)) {
        throw ShapeError("netlist: node " + std::to_string(j) + " reads wire " + std::to_string(w) +
                         " before it is defined");
      }
    }
  }
  if (class_count <= 0 || outputs.size() != static_cast<std::size_t>(class_count)) {
    throw ShapeError("netlist: output groups do not match class count");
  }
  for (const auto& g : outputs) {
    if (g.size() != outputs[0].size()) throw ShapeError("netlist: output groups differ in size");
    for (std::int32_t w : g) {
      if (w < kConstZero || w >= static_cast<std::int32_t>(wire_count())) {
        throw ShapeError("netlist: output references undefined wire " + std::to_string(w));
      }
    }
  }
}

Netlist harden(const Network& net) {
  Netlist nl;
  nl.input_count = net.input_shape().size();
  nl.class_count = net.class_count();
  nl.source_hash = architecture_hash(net.spec);
  nl.input_names.reserve(nl.input_count);
  for (std::size_t i = 0; i < nl.input_count; ++i) nl.input_names.push_back("x" + std::to_string(i));

  std::vector<std::int32_t> cur(nl.input_count);
  for (std::size_t i = 0; i < nl.input_count; ++i) cur[i] = static_cast<std::int32_t>(i);
  std::vector<std::int32_t> next;
  std::int32_t origin_base = 0;

  auto emit = [&](TruthTable t, std::vector<std::int32_t> ins, std::int32_t origin) {
    nl.nodes.push_back(NetlistNode{t, std::move(ins), origin});
    return nl.wire_of(nl.nodes.size() - 1);
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const NodeBank& bank = net.bank(li);
    std::vector<TruthTable> tables(bank.count);
    for (std::size_t j = 0; j < bank.count; ++j) tables[j] = bank.hardened_table(j);

    if (const auto* d = std::get_if<LogicDenseLayer>(&net.layers[li])) {
      next.assign(d->node_count(), 0);
      for (std::size_t j = 0; j < d->node_count(); ++j) {
        const std::uint32_t* idx = d->inputs_of(j);
        std::vector<std::int32_t> ins(static_cast<std::size_t>(bank.arity));
        for (int k = 0; k < bank.arity; ++k) ins[k] = cur[idx[k]];
        next[j] = emit(tables[j], std::move(ins), origin_base + static_cast<std::int32_t>(j));
      }
    } else {
      const auto& b = std::get<ResidualLogicBlock>(net.layers[li]);
      const int h = b.in_shape.height, w = b.in_shape.width, c_in = b.in_shape.channels;
      const int npc = b.nodes_per_channel();
      const Shape3 os = b.out_shape();
      next.assign(os.size(), 0);
      auto pixel = [&](int ch, int r, int c) -> std::int32_t {
        if (r < 0 || r >= h || c < 0 || c >= w) return kConstZero;
        return cur[(static_cast<std::size_t>(ch) * h + r) * w + c];
      };
      std::vector<std::int32_t> merge(static_cast<std::size_t>(h) * w);
      std::vector<std::int32_t> vals(static_cast<std::size_t>(npc));
      for (int o = 0; o < b.out_channels; ++o) {
        const Tap* taps = b.taps.data() + static_cast<std::size_t>(o) * b.taps_per_channel();
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            for (int m = 0; m < npc; ++m) {
              std::int32_t x, y;
              if (m == b.merge_index()) {
                x = vals[b.root_index()];
                y = pixel(o % c_in, r, c);
              } else {
                bool leaf = false;
                const auto [l, rr] = b.children(m, leaf);
                if (leaf) {
                  x = pixel(taps[l].channel, r + taps[l].dr, c + taps[l].dc);
                  y = pixel(taps[rr].channel, r + taps[rr].dr, c + taps[rr].dc);
                } else {
                  x = vals[l];
                  y = vals[rr];
                }
              }
              const std::size_t node = static_cast<std::size_t>(o) * npc + m;
              vals[m] = emit(tables[node], {x, y}, origin_base + static_cast<std::int32_t>(node));
            }
            merge[static_cast<std::size_t>(r) * w + c] = vals[b.merge_index()];
          }
        }
        for (int pr = 0; pr < os.height; ++pr) {
          for (int pc = 0; pc < os.width; ++pc) {
            const std::size_t top = static_cast<std::size_t>(2 * pr) * w + 2 * pc;
            const std::size_t f = (static_cast<std::size_t>(o) * os.height + pr) * os.width + pc;
            next[f] = emit(TruthTable(4, kOr4), {merge[top], merge[top + 1], merge[top + w], merge[top + w + 1]},
                           -1);
          }
        }
      }
    }
    origin_base += static_cast<std::int32_t>(bank.count);
    cur.swap(next);
  }

  const std::size_t k = static_cast<std::size_t>(nl.class_count);
  const std::size_t group = cur.size() / k;
  nl.outputs.assign(k, {});
  for (std::size_t g = 0; g < k; ++g) {
    nl.outputs[g].assign(cur.begin() + static_cast<std::ptrdiff_t>(g * group),
                         cur.begin() + static_cast<std::ptrdiff_t>((g + 1) * group));
  }
  nl.validate();
  return nl;
}

PackedInputs pack_inputs(std::span<const std::uint8_t> examples, std::size_t input_count) {
  if (input_count == 0 || examples.size() % input_count != 0) {
    throw ShapeError("pack_inputs: example bytes not a multiple of the input count");
  }
  PackedInputs p;
  p.examples = examples.size() / input_count;
  p.words = (p.examples + 63) / 64;
  p.bits.assign(input_count * p.words, 0);
  for (std::size_t e = 0; e < p.examples; ++e) {
    const std::uint8_t* ex = examples.data() + e * input_count;
    const std::uint64_t bit = std::uint64_t{1} << (e & 63);
    for (std::size_t i = 0; i < input_count; ++i) {
      if (ex[i]) p.bits[i * p.words + (e >> 6)] |= bit;
    }
  }
  return p;
}

namespace detail {

std::vector<std::uint8_t> minterms_of(const TruthTable& t, bool& complement) {
  const std::size_t ones = static_cast<std::size_t>(std::popcount(t.mask()));
  complement = ones * 2 > t.size();
  std::vector<std::uint8_t> out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t.bit(k) != complement) out.push_back(static_cast<std::uint8_t>(k));
  }
  return out;
}

}  // namespace detail

std::vector<std::uint32_t> netlist_eval(const Netlist& net, const PackedInputs& inputs,
                                        const simd::Kernels* kernels) {
  const simd::Kernels& kern = kernels ? *kernels : simd::active_kernels();
  if (inputs.bits.size() != net.input_count * inputs.words) {
    throw ShapeError("netlist_eval: packed inputs cover " +
                     std::to_string(inputs.words ? inputs.bits.size() / inputs.words : 0) +
                     " wires, netlist has " + std::to_string(net.input_count));
  }
  const std::size_t k = static_cast<std::size_t>(net.class_count);
  std::vector<std::uint32_t> counts(inputs.examples * k, 0);
  if (inputs.examples == 0) return counts;

  struct Program {
    bool complement;
    std::vector<std::uint8_t> minterms;
  };
  std::vector<Program> programs(net.nodes.size());
  for (std::size_t j = 0; j < net.nodes.size(); ++j) {
    programs[j].minterms = detail::minterms_of(net.nodes[j].table, programs[j].complement);
  }

  // Blocks of words keep the wire buffer small for large netlists.
  constexpr std::size_t kBlock = 16;
  const std::size_t n_in = net.input_count;
  std::vector<std::uint64_t> wires(net.nodes.size() * kBlock);
  const std::vector<std::uint64_t> zeros(kBlock, 0);
  std::array<const std::uint64_t*, kMaxArity> ins{};

  for (std::size_t w0 = 0; w0 < inputs.words; w0 += kBlock) {
    const std::size_t nw = std::min(kBlock, inputs.words - w0);
    auto ptr = [&](std::int32_t wire) -> const std::uint64_t* {
      if (wire < 0) return zeros.data();
      const auto u = static_cast<std::size_t>(wire);
      return u < n_in ? inputs.wire(u) + w0 : wires.data() + (u - n_in) * kBlock;
    };
    for (std::size_t j = 0; j < net.nodes.size(); ++j) {
      const NetlistNode& node = net.nodes[j];
      for (std::size_t i = 0; i < node.inputs.size(); ++i) ins[i] = ptr(node.inputs[i]);
      const simd::MintermProgram prog{node.table.arity(), programs[j].complement,
                                      programs[j].minterms.data(),
                                      static_cast<int>(programs[j].minterms.size())};
      kern.eval_minterms(ins.data(), prog, wires.data() + j * kBlock, nw);
    }
    for (std::size_t g = 0; g < k; ++g) {
      for (std::int32_t wire : net.outputs[g]) {
        const std::uint64_t* bits = ptr(wire);
        for (std::size_t w = 0; w < nw; ++w) {
          std::uint64_t word = bits[w];
          const std::size_t base = (w0 + w) * 64;
          while (word) {
            const int b = std::countr_zero(word);
            const std::size_t e = base + static_cast<std::size_t>(b);
            if (e < inputs.examples) ++counts[e * k + g];
            word &= word - 1;
          }
        }
      }
    }
  }
  return counts;
}

std::vector<int> predict(const Netlist& net, std::span<const std::uint32_t> counts) {
  const std::size_t k = static_cast<std::size_t>(net.class_count);
  std::vector<int> out(counts.size() / k);
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = argmax_class(counts.subspan(e * k, k));
  return out;
}

namespace {

std::string hex_table(const TruthTable& t) {
  const std::size_t digits = std::max<std::size_t>(1, t.size() / 4);
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%0*llX", static_cast<int>(digits),
                static_cast<unsigned long long>(t.mask()));
  return buf;
}

TruthTable parse_hex_table(const std::string& text, int arity) {
  if (text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    throw ShapeError("netlist: table '" + text + "' is not a hex constant");
  }
  std::uint64_t v = 0;
  const auto* first = text.data() + 2;
  const auto* last = text.data() + text.size();
  const auto [p, ec] = std::from_chars(first, last, v, 16);
  if (ec != std::errc() || p != last) throw ShapeError("netlist: bad table constant '" + text + "'");
  check_arity(arity);
  if (arity < 6 && (v >> (std::size_t{1} << arity)) != 0) {
    throw ShapeError("netlist: table '" + text + "' too wide for arity " + std::to_string(arity));
  }
  return TruthTable(arity, v);
}

std::string wire_name(std::int32_t w) { return w < 0 ? "0" : "w" + std::to_string(w); }

}  // namespace

json netlist_to_json(const Netlist& net) {
  json nodes = json::array();
  for (const auto& n : net.nodes) {
    nodes.push_back({{"arity", n.table.arity()},
                     {"table", hex_table(n.table)},
                     {"inputs", n.inputs},
                     {"origin", n.origin}});
  }
  return json{{"format", "warplut-netlist"},
              {"schema_version", 1},
              {"class_count", net.class_count},
              {"source_architecture_hash", net.source_hash},
              {"inputs", {{"count", net.input_count}, {"names", net.input_names}}},
              {"nodes", nodes},
              {"outputs", net.outputs}};
}

Netlist netlist_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string()) != "warplut-netlist") {
      throw ShapeError("not a warplut netlist document");
    }
    if (doc.at("schema_version").get<int>() != 1) {
      throw ShapeError("unsupported netlist schema version " + doc.at("schema_version").dump());
    }
    Netlist nl;
    nl.class_count = doc.at("class_count").get<int>();
    nl.source_hash = doc.at("source_architecture_hash").get<std::string>();
    nl.input_count = doc.at("inputs").at("count").get<std::size_t>();
    nl.input_names = doc.at("inputs").at("names").get<std::vector<std::string>>();
    for (const auto& n : doc.at("nodes")) {
      const int arity = n.at("arity").get<int>();
      nl.nodes.push_back(NetlistNode{parse_hex_table(n.at("table").get<std::string>(), arity),
                                     n.at("inputs").get<std::vector<std::int32_t>>(),
                                     n.at("origin").get<std::int32_t>()});
    }
    nl.outputs = doc.at("outputs").get<std::vector<std::vector<std::int32_t>>>();
    nl.validate();
    return nl;
  } catch (const json::exception& e) {
    throw ShapeError(std::string("malformed netlist JSON: ") + e.what());
  }
}

NetlistFormat parse_netlist_format(const std::string& text) {
  if (text == "json") return NetlistFormat::Json;
  if (text == "logic-text" || text == "text") return NetlistFormat::LogicText;
  throw ConfigError("unknown netlist format '" + text + "' (json, logic-text)");
}

std::string to_logic_text(const Netlist& net) {
  std::string out;
  const auto& catalog = gate_catalog();
  for (std::size_t j = 0; j < net.nodes.size(); ++j) {
    const auto& n = net.nodes[j];
    out += wire_name(net.wire_of(j)) + " = ";
    if (n.table.arity() == 2) {
      out += std::string(catalog[static_cast<std::size_t>(classify_gate(n.table))].mnemonic) + "(";
    } else {
      out += "LUT" + std::to_string(n.table.arity()) + "(" + hex_table(n.table) + ", ";
    }
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (i) out += ", ";
      out += wire_name(n.inputs[i]);
    }
    out += ")\n";
  }
  for (std::size_t g = 0; g < net.outputs.size(); ++g) {
    out += "# class " + std::to_string(g) + ":";
    for (std::int32_t w : net.outputs[g]) out += " " + wire_name(w);
    out += "\n";
  }
  return out;
}

void export_netlist(const Netlist& net, NetlistFormat format, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error("cannot write netlist " + file.string());
  if (format == NetlistFormat::Json) {
    out << netlist_to_json(net).dump() << '\n';
  } else {
    out << to_logic_text(net);
  }
  if (!out) throw Error("failed writing netlist " + file.string());
}

Netlist load_netlist_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open netlist " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ShapeError("netlist " + file.string() + " is not valid JSON: " + e.what());
  }
  return netlist_from_json(doc);
}

CircuitStats circuit_stats(const Netlist& net) {
  CircuitStats s;
  s.total_nodes = net.nodes.size();
  std::vector<std::int32_t> seen_origin;
  std::vector<int> depth(net.wire_count(), 0);
  for (std::size_t j = 0; j < net.nodes.size(); ++j) {
    const auto& n = net.nodes[j];
    int d = 0;
    for (std::int32_t w : n.inputs) {
      if (w >= 0) d = std::max(d, depth[static_cast<std::size_t>(w)]);
    }
    depth[net.input_count + j] = d + 1;
    if (n.origin < 0) ++s.structural_nodes;
    if (n.table.arity() != 2) continue;
    const int id = classify_gate(n.table);
    ++s.gate_counts[id];
    ++s.two_input_nodes;
    if (n.origin >= 0) {
      const auto o = static_cast<std::size_t>(n.origin);
      if (o >= seen_origin.size()) seen_origin.resize(o + 1, -1);
      if (seen_origin[o] < 0) {
        seen_origin[o] = id;
        ++s.learned_gate_counts[id];
      }
    }
  }
  if (s.two_input_nodes) {
    s.identity_fraction = static_cast<double>(s.gate_counts[kIdA] + s.gate_counts[kIdB]) /
                          static_cast<double>(s.two_input_nodes);
  }
  for (const auto& g : net.outputs) {
    for (std::int32_t w : g) {
      if (w >= 0) s.depth = std::max(s.depth, depth[static_cast<std::size_t>(w)]);
    }
  }
  return s;
}

json to_json(const CircuitStats& s) {
  json hist = json::object(), learned = json::object();
  for (const auto& e : gate_catalog()) {
    hist[std::string(e.mnemonic)] = s.gate_counts[e.id];
    learned[std::string(e.mnemonic)] = s.learned_gate_counts[e.id];
  }
  return json{{"gate_counts", hist},
              {"learned_gate_counts", learned},
              {"two_input_nodes", s.two_input_nodes},
              {"identity_fraction", s.identity_fraction},
              {"total_nodes", s.total_nodes},
              {"structural_nodes", s.structural_nodes},
              {"depth", s.depth}};
}

FoldResult fold_identities(const Netlist& net) {
  FoldResult r;
  Netlist& out = r.netlist;
  out.input_count = net.input_count;
  out.input_names = net.input_names;
  out.class_count = net.class_count;
  out.source_hash = net.source_hash;
  // Old wire id -> new wire id.
  std::vector<std::int32_t> remap(net.wire_count());
  for (std::size_t i = 0; i < net.input_count; ++i) remap[i] = static_cast<std::int32_t>(i);
  auto map = [&](std::int32_t w) { return w < 0 ? w : remap[static_cast<std::size_t>(w)]; };
  for (std::size_t j = 0; j < net.nodes.size(); ++j) {
    const auto& n = net.nodes[j];
    if (n.table.arity() == 2) {
      const int id = classify_gate(n.table);
      if (id == kIdA || id == kIdB) {
        remap[net.input_count + j] = map(n.inputs[id == kIdA ? 0 : 1]);
        ++r.removed;
        continue;
      }
    }
    NetlistNode copy = n;
    for (auto& w : copy.inputs) w = map(w);
    out.nodes.push_back(std::move(copy));
    remap[net.input_count + j] = out.wire_of(out.nodes.size() - 1);
  }
  out.outputs = net.outputs;
  for (auto& g : out.outputs) {
    for (auto& w : g) w = map(w);
  }
  out.validate();
  return r;
}

}  // namespace warplut
