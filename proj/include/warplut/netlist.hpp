#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "warplut/error.hpp"
#include "warplut/network.hpp"
#include "warplut/simd/kernels.hpp"
#include "warplut/truth_table.hpp"

namespace warplut {

// Wire ids: 0..input_count-1 are primary inputs, node i drives wire
// input_count + i, and kConstZero reads constant 0 (conv padding).
inline constexpr std::int32_t kConstZero = -1;

struct NetlistNode {
  TruthTable table;
  std::vector<std::int32_t> inputs;
  // Learned node this gate instantiates (global index over all layer banks),
  // or -1 for structural gates such as the pooling ORs.
  std::int32_t origin = -1;
  friend bool operator==(const NetlistNode&, const NetlistNode&) = default;
};

struct Netlist {
  std::size_t input_count = 0;
  std::vector<std::string> input_names;
  std::vector<NetlistNode> nodes;
  std::vector<std::vector<std::int32_t>> outputs;  // one wire group per class
  int class_count = 0;
  std::string source_hash;

  std::size_t wire_count() const noexcept { return input_count + nodes.size(); }
  std::int32_t wire_of(std::size_t node) const noexcept {
    return static_cast<std::int32_t>(input_count + node);
  }
  // Throws ShapeError unless topologically ordered with equal group sizes.
  void validate() const;
  friend bool operator==(const Netlist&, const Netlist&) = default;
};

// Every node replaced by its hardened table; conv trees unrolled per spatial
// position, pooling as 4-input OR gates, GroupSum as output wire groups.
Netlist harden(const Network& net);

// One bit per example, `words` 64-bit words per input wire.
struct PackedInputs {
  std::size_t examples = 0;
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;  // input_count x words

  const std::uint64_t* wire(std::size_t i) const noexcept { return bits.data() + i * words; }
};

// examples is example-major, input_count bytes (0/1) each.
PackedInputs pack_inputs(std::span<const std::uint8_t> examples, std::size_t input_count);

// Per-example class counts (examples x class_count, row-major).
std::vector<std::uint32_t> netlist_eval(const Netlist& net, const PackedInputs& inputs,
                                        const simd::Kernels* kernels = nullptr);

// Same evaluation with examples packed into words of type Word, without the
// SIMD kernels. Used to check independence from the word width.
template <class Word>
std::vector<std::uint32_t> netlist_eval_words(const Netlist& net,
                                              std::span<const std::uint8_t> examples);

std::vector<int> predict(const Netlist& net, std::span<const std::uint32_t> counts);

nlohmann::json netlist_to_json(const Netlist& net);
Netlist netlist_from_json(const nlohmann::json& doc);

enum class NetlistFormat { Json, LogicText };
NetlistFormat parse_netlist_format(const std::string& text);

// Logic text: one `w<id> = OP(args)` line per gate (catalog mnemonics for two
// inputs, LUTn(0x..) otherwise, `0` for the constant wire), then one
// `# class g: w.. w..` comment line per class.
std::string to_logic_text(const Netlist& net);
void export_netlist(const Netlist& net, NetlistFormat format, const std::filesystem::path& file);
Netlist load_netlist_json(const std::filesystem::path& file);

struct CircuitStats {
  std::array<std::uint64_t, 16> gate_counts{};          // 2-input gate instances
  std::array<std::uint64_t, 16> learned_gate_counts{};  // distinct learned 2-input nodes
  std::uint64_t two_input_nodes = 0;
  double identity_fraction = 0.0;
  std::uint64_t total_nodes = 0;
  std::uint64_t structural_nodes = 0;
  int depth = 0;
};

CircuitStats circuit_stats(const Netlist& net);
nlohmann::json to_json(const CircuitStats& stats);

// Removes ID(A)/ID(B) gates by rewiring their readers to the selected input.
struct FoldResult {
  Netlist netlist;
  std::size_t removed = 0;
};
FoldResult fold_identities(const Netlist& net);

// ---------------------------------------------------------------------------

namespace detail {
std::vector<std::uint8_t> minterms_of(const TruthTable& t, bool& complement);
}

template <class Word>
std::vector<std::uint32_t> netlist_eval_words(const Netlist& net,
                                              std::span<const std::uint8_t> examples) {
  constexpr std::size_t kBits = sizeof(Word) * 8;
  const std::size_t n_in = net.input_count;
  if (n_in == 0 || examples.size() % n_in != 0) {
    throw ShapeError("netlist_eval_words: example bytes not a multiple of the input count");
  }
  const std::size_t count = examples.size() / n_in;
  const std::size_t words = (count + kBits - 1) / kBits;
  const std::size_t k = static_cast<std::size_t>(net.class_count);
  std::vector<Word> wires(net.wire_count() * words, Word{0});
  for (std::size_t e = 0; e < count; ++e) {
    for (std::size_t i = 0; i < n_in; ++i) {
      if (examples[e * n_in + i]) wires[i * words + e / kBits] |= static_cast<Word>(Word{1} << (e % kBits));
    }
  }
  auto read = [&](std::int32_t w, std::size_t word) -> Word {
    return w < 0 ? Word{0} : wires[static_cast<std::size_t>(w) * words + word];
  };
  for (std::size_t j = 0; j < net.nodes.size(); ++j) {
    const NetlistNode& node = net.nodes[j];
    bool complement = false;
    const auto mins = detail::minterms_of(node.table, complement);
    const int n = node.table.arity();
    Word* out = wires.data() + (n_in + j) * words;
    for (std::size_t w = 0; w < words; ++w) {
      Word acc = 0;
      for (std::uint8_t corner : mins) {
        Word term = static_cast<Word>(~Word{0});
        for (int i = 0; i < n; ++i) {
          const Word x = read(node.inputs[i], w);
          term &= ((corner >> (n - 1 - i)) & 1u) ? x : static_cast<Word>(~x);
        }
        acc |= term;
      }
      out[w] = complement ? static_cast<Word>(~acc) : acc;
    }
  }
  std::vector<std::uint32_t> counts(count * k, 0);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::int32_t wire : net.outputs[g]) {
      for (std::size_t e = 0; e < count; ++e) {
        counts[e * k + g] += static_cast<std::uint32_t>((read(wire, e / kBits) >> (e % kBits)) & 1u);
      }
    }
  }
  return counts;
}

}  // namespace warplut
