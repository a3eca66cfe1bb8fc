#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "warplut/architecture.hpp"
#include "warplut/layers.hpp"

namespace warplut {

using Layer = std::variant<LogicDenseLayer, ResidualLogicBlock>;

class Network {
 public:
  ArchitectureSpec spec;
  std::vector<Layer> layers;
  GroupSumLayer readout;

  const Shape3& input_shape() const noexcept { return spec.input; }
  std::size_t output_dim() const;
  int class_count() const noexcept { return readout.class_count; }

  NodeBank& bank(std::size_t layer);
  const NodeBank& bank(std::size_t layer) const;

  std::uint64_t param_count() const;
  std::uint64_t node_count() const;
  // Nodes with two inputs, the ones the gate histogram classifies.
  std::uint64_t two_input_node_count() const;
};

// Wires and initializes every layer from the per-layer seeds.
Network build_network(const ArchitectureSpec& spec);

std::uint64_t param_count(const Network& net);

struct Gradients {
  std::vector<std::vector<float>> per_layer;
  void zero();
};
Gradients make_gradients(const Network& net);

struct Workspace {
  std::vector<std::variant<DenseCache, ConvCache>> caches;
  std::vector<Activations> grads;
};

// Runs every layer and returns the last layer's activations.
const Activations& forward(const Network& net, const Activations& input, const ForwardContext& ctx,
                           Workspace& ws);

// Back-propagates grad_last (d loss / d last activations) and accumulates into
// grads. Requires the Workspace of the matching forward call.
void backward(const Network& net, const Activations& input, const Activations& grad_last,
              const ForwardContext& ctx, Workspace& ws, Gradients& grads);

// Class scores (lanes x classes, row-major) from the last activations.
std::vector<double> class_scores(const Network& net, const Activations& last);

// Lowest index wins ties.
int argmax_class(std::span<const double> scores);
int argmax_class(std::span<const std::uint32_t> counts);

// Snapshot of the discrete network: every node replaced by its hardened
// table. Evaluates one example at a time on bytes; it is the reference the
// bit-parallel netlist evaluator is checked against.
class HardenedModel {
 public:
  explicit HardenedModel(const Network& net);

  std::vector<std::uint32_t> class_counts(std::span<const std::uint8_t> example) const;
  int predict(std::span<const std::uint8_t> example) const;

  const Network& network() const noexcept { return *net_; }
  const std::vector<std::uint64_t>& tables(std::size_t layer) const { return tables_[layer]; }

 private:
  const Network* net_;
  std::vector<std::vector<std::uint64_t>> tables_;
};

// Replaces every parameter by the exact representative of its hardened gate:
// lattice Walsh coefficients for WARP, a one-hot logit vector for DLGN.
void snap_to_lattice(Network& net);

}  // namespace warplut
