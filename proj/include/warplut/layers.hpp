#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "warplut/architecture.hpp"
#include "warplut/relaxed_lut.hpp"
#include "warplut/simd/kernels.hpp"
#include "warplut/tensor.hpp"
#include "warplut/truth_table.hpp"

namespace warplut {

// Parameters of `count` nodes of one kind, stored row-major.
struct NodeBank {
  NodeKind kind = NodeKind::Warp;
  int arity = 2;
  std::size_t count = 0;
  double dlgn_temperature = 1.0;
  std::vector<float> params;

  NodeBank() = default;
  NodeBank(NodeKind kind, int arity, std::size_t count, double dlgn_temperature = 1.0);

  std::size_t width() const noexcept {
    return kind == NodeKind::Warp ? (std::size_t{1} << arity) : 16;
  }
  std::span<float> node(std::size_t j) noexcept { return {params.data() + j * width(), width()}; }
  std::span<const float> node(std::size_t j) const noexcept {
    return {params.data() + j * width(), width()};
  }

  // nearest_truth_table for WARP nodes, the argmax catalog gate for DLGN.
  TruthTable hardened_table(std::size_t j) const;
};

struct LogicDenseLayer {
  std::size_t in_dim = 0;
  NodeBank bank;
  std::vector<std::uint32_t> connections;  // count x arity

  std::size_t node_count() const noexcept { return bank.count; }
  const std::uint32_t* inputs_of(std::size_t j) const noexcept {
    return connections.data() + j * static_cast<std::size_t>(bank.arity);
  }
};

// One leaf of a convolutional tree: an input channel and an offset inside the
// 3x3 receptive field.
struct Tap {
  std::uint16_t channel = 0;
  std::int8_t dr = 0;
  std::int8_t dc = 0;
  friend bool operator==(const Tap&, const Tap&) = default;
};

// Per output channel: a complete binary tree of 2-input nodes over 2^depth
// taps, shared across spatial positions, and a merge node combining the tree
// output with the centre pixel of channel (o mod in_channels). A 2x2 max (OR)
// pool halves the spatial size.
//
// Node order within a channel: tree levels from the leaves up (root at
// 2^depth - 2), then the merge node at 2^depth - 1.
struct ResidualLogicBlock {
  Shape3 in_shape;
  int out_channels = 0;
  int depth = 3;
  NodeBank bank;           // out_channels * nodes_per_channel()
  std::vector<Tap> taps;   // out_channels * taps_per_channel()

  int nodes_per_channel() const noexcept { return 1 << depth; }
  int taps_per_channel() const noexcept { return 1 << depth; }
  int root_index() const noexcept { return (1 << depth) - 2; }
  int merge_index() const noexcept { return (1 << depth) - 1; }
  Shape3 out_shape() const noexcept {
    return {out_channels, in_shape.height / 2, in_shape.width / 2};
  }
  // Children of tree node m (m < root_index() + 1). Leaves return tap indices
  // and set is_leaf.
  std::pair<int, int> children(int m, bool& is_leaf) const noexcept;
};

struct GroupSumLayer {
  int class_count = 10;
  double tau_group = 1.0;
};

// `arity` distinct indices below in_dim per node, uniform, deterministic given
// the generator state.
std::vector<std::uint32_t> make_connections(std::size_t in_dim, std::size_t node_count, int arity,
                                            std::mt19937_64& rng);

std::vector<Tap> make_taps(const Shape3& in_shape, int out_channels, int depth,
                           std::mt19937_64& rng);

// Random: every parameter ~ N(0, sigma^2). Residual: the same noise plus gamma
// on the identity of input 0 (the c_{x1} coefficient for WARP, the ID(A)
// logit for DLGN).
void init_layer(NodeBank& bank, const InitScheme& scheme, std::mt19937_64& rng);

struct ForwardContext {
  RelaxMode mode = RelaxMode::Deterministic;
  RelaxParams relax;
  // Noise key for this forward pass; per-node substreams derive from it.
  std::uint64_t noise_seed = 0;
  int threads = 1;
  const simd::Kernels* kernels = nullptr;

  const simd::Kernels& simd() const { return kernels ? *kernels : simd::active_kernels(); }
  bool noisy() const noexcept {
    return mode == RelaxMode::GumbelSigmoid ||
           (mode == RelaxMode::StraightThrough && relax.gumbel_enabled);
  }
};

struct DenseCache {
  Activations out;
  Activations soft;
};

// Forward over the batch in `in` (features x lanes). layer_key separates noise
// streams of different layers.
void dense_forward(const LogicDenseLayer& layer, const Activations& in, const ForwardContext& ctx,
                   std::uint64_t layer_key, DenseCache& cache);

// Adds parameter gradients into grad_params; writes input gradients into
// grad_in when non-null (overwriting it).
void dense_backward(const LogicDenseLayer& layer, const Activations& in, const DenseCache& cache,
                    const Activations& grad_out, const ForwardContext& ctx,
                    std::span<float> grad_params, Activations* grad_in);

struct ConvCache {
  Activations nodes;   // (channel, position, node) x lanes
  Activations soft;
  Activations out;     // pooled (channel, row, col) x lanes
  std::vector<std::uint8_t> argmax;  // out.features() x lanes
};

void conv_forward(const ResidualLogicBlock& block, const Activations& in,
                  const ForwardContext& ctx, std::uint64_t layer_key, ConvCache& cache);

void conv_backward(const ResidualLogicBlock& block, const Activations& in, const ConvCache& cache,
                   const Activations& grad_out, const ForwardContext& ctx,
                   std::span<float> grad_params, Activations* grad_in);

// out[g] = sum of scores_in over group g, divided by tau_group. Groups are
// contiguous blocks of m / class_count entries.
std::vector<double> group_sum(std::span<const double> scores_in, const GroupSumLayer& layer);

}  // namespace warplut
