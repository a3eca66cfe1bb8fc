#include "warplut/network.hpp"

#include <algorithm>
#include <string>

#include "warplut/error.hpp"
#include "warplut/gate_catalog.hpp"

namespace warplut {

std::size_t Network::output_dim() const {
  const Layer& last = layers.back();
  if (const auto* d = std::get_if<LogicDenseLayer>(&last)) return d->node_count();
  return std::get<ResidualLogicBlock>(last).out_shape().size();
}

NodeBank& Network::bank(std::size_t layer) {
  return std::visit([](auto& l) -> NodeBank& { return l.bank; }, layers.at(layer));
}

const NodeBank& Network::bank(std::size_t layer) const {
  return std::visit([](const auto& l) -> const NodeBank& { return l.bank; }, layers.at(layer));
}

std::uint64_t Network::param_count() const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) total += bank(i).params.size();
  return total;
}

std::uint64_t Network::node_count() const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) total += bank(i).count;
  return total;
}

std::uint64_t Network::two_input_node_count() const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (bank(i).arity == 2) total += bank(i).count;
  }
  return total;
}

std::uint64_t param_count(const Network& net) { return net.param_count(); }

Network build_network(const ArchitectureSpec& spec) {
  validate(spec);
  Network net;
  net.spec = spec;
  net.readout = GroupSumLayer{spec.group_sum.classes, spec.group_sum.tau};
  Shape3 shape = spec.input;
  for (const auto& ls : spec.layers) {
    if (const auto* d = std::get_if<DenseSpec>(&ls)) {
      std::mt19937_64 rng(d->seed);
      LogicDenseLayer layer;
      layer.in_dim = shape.size();
      layer.bank = NodeBank(d->node_kind, d->arity, d->nodes, d->dlgn_temperature);
      if (d->connections.empty()) {
        layer.connections = make_connections(layer.in_dim, d->nodes, d->arity, rng);
      } else {
        for (const auto& row : d->connections) {
          layer.connections.insert(layer.connections.end(), row.begin(), row.end());
        }
      }
      init_layer(layer.bank, d->init, rng);
      shape = Shape3{static_cast<int>(d->nodes), 1, 1};
      net.layers.emplace_back(std::move(layer));
    } else {
      const auto& c = std::get<ConvSpec>(ls);
      std::mt19937_64 rng(c.seed);
      ResidualLogicBlock block;
      block.in_shape = shape;
      block.out_channels = c.out_channels;
      block.depth = c.depth;
      block.bank = NodeBank(c.node_kind, 2, static_cast<std::size_t>(c.out_channels) << c.depth,
                            c.dlgn_temperature);
      block.taps = make_taps(shape, c.out_channels, c.depth, rng);
      init_layer(block.bank, c.init, rng);
      shape = block.out_shape();
      net.layers.emplace_back(std::move(block));
    }
  }
  return net;
}

void Gradients::zero() {
  for (auto& g : per_layer) std::fill(g.begin(), g.end(), 0.0f);
}

Gradients make_gradients(const Network& net) {
  Gradients g;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    g.per_layer.emplace_back(net.bank(i).params.size(), 0.0f);
  }
  return g;
}

const Activations& forward(const Network& net, const Activations& input, const ForwardContext& ctx,
                           Workspace& ws) {
  if (input.features() != net.input_shape().size()) {
    throw ShapeError("network expects " + std::to_string(net.input_shape().size()) +
                     " input features, got " + std::to_string(input.features()));
  }
  ws.caches.resize(net.layers.size());
  const Activations* cur = &input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* d = std::get_if<LogicDenseLayer>(&net.layers[i])) {
      if (!std::holds_alternative<DenseCache>(ws.caches[i])) ws.caches[i] = DenseCache{};
      auto& cache = std::get<DenseCache>(ws.caches[i]);
      dense_forward(*d, *cur, ctx, i, cache);
      cur = &cache.out;
    } else {
      if (!std::holds_alternative<ConvCache>(ws.caches[i])) ws.caches[i] = ConvCache{};
      auto& cache = std::get<ConvCache>(ws.caches[i]);
      conv_forward(std::get<ResidualLogicBlock>(net.layers[i]), *cur, ctx, i, cache);
      cur = &cache.out;
    }
  }
  return *cur;
}

namespace {

const Activations& cached_output(const Workspace& ws, std::size_t i) {
  return std::visit([](const auto& c) -> const Activations& { return c.out; }, ws.caches[i]);
}

}  // namespace

void backward(const Network& net, const Activations& input, const Activations& grad_last,
              const ForwardContext& ctx, Workspace& ws, Gradients& grads) {
  if (ws.caches.size() != net.layers.size()) {
    throw MissingCacheError("backward called without a matching forward pass");
  }
  ws.grads.resize(net.layers.size());
  const Activations* gout = &grad_last;
  for (std::size_t ri = net.layers.size(); ri-- > 0;) {
    const Activations& in = ri == 0 ? input : cached_output(ws, ri - 1);
    Activations* gin = ri == 0 ? nullptr : &ws.grads[ri - 1];
    if (const auto* d = std::get_if<LogicDenseLayer>(&net.layers[ri])) {
      dense_backward(*d, in, std::get<DenseCache>(ws.caches[ri]), *gout, ctx, grads.per_layer[ri],
                     gin);
    } else {
      conv_backward(std::get<ResidualLogicBlock>(net.layers[ri]), in,
                    std::get<ConvCache>(ws.caches[ri]), *gout, ctx, grads.per_layer[ri], gin);
    }
    gout = gin;
  }
}

std::vector<double> class_scores(const Network& net, const Activations& last) {
  const std::size_t k = static_cast<std::size_t>(net.class_count());
  if (last.features() % k != 0) throw ShapeError("class_scores: width not divisible by classes");
  const std::size_t group = last.features() / k;
  const std::size_t lanes = last.lanes();
  std::vector<double> scores(lanes * k, 0.0);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t f = g * group; f < (g + 1) * group; ++f) {
      const float* row = last.row(f);
      for (std::size_t b = 0; b < lanes; ++b) scores[b * k + g] += row[b];
    }
  }
  const double inv_tau = 1.0 / net.readout.tau_group;
  for (double& s : scores) s *= inv_tau;
  return scores;
}

int argmax_class(std::span<const double> scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

int argmax_class(std::span<const std::uint32_t> counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

HardenedModel::HardenedModel(const Network& net) : net_(&net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const NodeBank& bank = net.bank(i);
    std::vector<std::uint64_t> t(bank.count);
    for (std::size_t j = 0; j < bank.count; ++j) t[j] = bank.hardened_table(j).mask();
    tables_.push_back(std::move(t));
  }
}

namespace {

inline std::uint8_t lookup(std::uint64_t table, std::size_t corner) {
  return static_cast<std::uint8_t>((table >> corner) & 1u);
}

}  // namespace

std::vector<std::uint32_t> HardenedModel::class_counts(std::span<const std::uint8_t> example) const {
  const Network& net = *net_;
  if (example.size() != net.input_shape().size()) {
    throw ShapeError("example has " + std::to_string(example.size()) + " features, expected " +
                     std::to_string(net.input_shape().size()));
  }
  std::vector<std::uint8_t> cur(example.begin(), example.end());
  std::vector<std::uint8_t> next;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& tables = tables_[li];
    if (const auto* d = std::get_if<LogicDenseLayer>(&net.layers[li])) {
      const int n = d->bank.arity;
      next.assign(d->node_count(), 0);
      for (std::size_t j = 0; j < d->node_count(); ++j) {
        const std::uint32_t* idx = d->inputs_of(j);
        std::size_t corner = 0;
        for (int k = 0; k < n; ++k) corner = (corner << 1) | (cur[idx[k]] & 1u);
        next[j] = lookup(tables[j], corner);
      }
    } else {
      const auto& b = std::get<ResidualLogicBlock>(net.layers[li]);
      const int h = b.in_shape.height, w = b.in_shape.width, c_in = b.in_shape.channels;
      const int npc = b.nodes_per_channel();
      const Shape3 os = b.out_shape();
      next.assign(os.size(), 0);
      std::vector<std::uint8_t> vals(static_cast<std::size_t>(npc));
      auto pixel = [&](int ch, int r, int c) -> std::uint8_t {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0;
        return cur[(static_cast<std::size_t>(ch) * h + r) * w + c];
      };
      for (int o = 0; o < b.out_channels; ++o) {
        const Tap* taps = b.taps.data() + static_cast<std::size_t>(o) * b.taps_per_channel();
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            for (int m = 0; m < npc; ++m) {
              std::uint8_t x, y;
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
              vals[m] = lookup(tables[static_cast<std::size_t>(o) * npc + m], (x << 1) | y);
            }
            if (vals[b.merge_index()]) {
              const std::size_t f = (static_cast<std::size_t>(o) * os.height + r / 2) * os.width + c / 2;
              next[f] = 1;
            }
          }
        }
      }
    }
    cur.swap(next);
  }
  const std::size_t k = static_cast<std::size_t>(net.class_count());
  const std::size_t group = cur.size() / k;
  std::vector<std::uint32_t> counts(k, 0);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t i = g * group; i < (g + 1) * group; ++i) counts[g] += cur[i];
  }
  return counts;
}

int HardenedModel::predict(std::span<const std::uint8_t> example) const {
  const auto counts = class_counts(example);
  return argmax_class(counts);
}

void snap_to_lattice(Network& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    NodeBank& bank = net.bank(i);
    for (std::size_t j = 0; j < bank.count; ++j) {
      const TruthTable t = bank.hardened_table(j);
      auto p = bank.node(j);
      if (bank.kind == NodeKind::Warp) {
        const WalshCoeffs c = walsh_transform(t);
        for (std::size_t s = 0; s < p.size(); ++s) p[s] = static_cast<float>(c[s]);
      } else {
        const int id = classify_gate(t);
        std::fill(p.begin(), p.end(), 0.0f);
        p[id] = 1.0f;
      }
    }
  }
}

}  // namespace warplut
