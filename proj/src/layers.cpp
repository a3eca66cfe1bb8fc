#include "warplut/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <thread>

#include "warplut/dlgn.hpp"
#include "warplut/error.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/random.hpp"

namespace warplut {

NodeBank::NodeBank(NodeKind kind_, int arity_, std::size_t count_, double dlgn_temperature_)
    : kind(kind_), arity(arity_), count(count_), dlgn_temperature(dlgn_temperature_) {
  check_arity(arity);
  if (kind == NodeKind::Dlgn && arity != 2) throw ShapeError("DLGN nodes have exactly 2 inputs");
  params.assign(count * width(), 0.0f);
}

TruthTable NodeBank::hardened_table(std::size_t j) const {
  if (kind == NodeKind::Dlgn) return gate_catalog()[dlgn_harden(node(j))].table;
  return nearest_truth_table(node(j), arity);
}

std::pair<int, int> ResidualLogicBlock::children(int m, bool& is_leaf) const noexcept {
  const int leaves = 1 << (depth - 1);
  if (m < leaves) {
    is_leaf = true;
    return {2 * m, 2 * m + 1};
  }
  is_leaf = false;
  // Level l (l >= 1) starts at 2^depth - 2^(depth-l) and its children are the
  // previous level's consecutive pairs.
  int start = 0;
  int width = leaves;
  while (m >= start + width) {
    start += width;
    width >>= 1;
  }
  const int prev_start = start - 2 * width;
  const int offset = m - start;
  return {prev_start + 2 * offset, prev_start + 2 * offset + 1};
}

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

template <class Fn>
void parallel_lanes(std::size_t lanes, int threads, Fn&& fn) {
  const std::size_t chunks = (lanes + Activations::kLaneAlign - 1) / Activations::kLaneAlign;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), chunks));
  if (workers == 1) {
    fn(std::size_t{0}, lanes, std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  auto range = [&](std::size_t t) {
    const std::size_t b = chunks * t / workers * Activations::kLaneAlign;
    const std::size_t e = std::min(lanes, chunks * (t + 1) / workers * Activations::kLaneAlign);
    return std::pair{b, e};
  };
  for (std::size_t t = 1; t < workers; ++t) {
    pool.emplace_back([&, t] {
      auto [b, e] = range(t);
      fn(b, e, t);
    });
  }
  auto [b, e] = range(0);
  fn(b, e, std::size_t{0});
}

std::size_t worker_count(std::size_t lanes, int threads) {
  const std::size_t chunks = (lanes + Activations::kLaneAlign - 1) / Activations::kLaneAlign;
  return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), chunks));
}

struct Scratch {
  std::vector<float> noise;
  explicit Scratch(std::size_t lanes) : noise(lanes) {}
};

struct DlgnNode {
  std::array<double, 16> probs{};
  std::array<float, 4> q{};
};

DlgnNode dlgn_node(const NodeBank& bank, std::size_t j) {
  const auto params = bank.node(j);
  std::array<double, 16> logits{};
  std::copy(params.begin(), params.end(), logits.begin());
  DlgnNode d;
  d.probs = dlgn_probabilities(logits, bank.dlgn_temperature);
  const auto& catalog = gate_catalog();
  std::array<double, 4> q{};
  for (int g = 0; g < 16; ++g) {
    for (int k = 0; k < 4; ++k) {
      if (catalog[g].table.bit(k)) q[k] += d.probs[g];
    }
  }
  for (int k = 0; k < 4; ++k) d.q[k] = static_cast<float>(q[k]);
  return d;
}

float clamp01(float x) { return x < 0.0f ? 0.0f : (x > 1.0f ? 1.0f : x); }

// Evaluates node j of `bank` on lanes [begin, end).
void forward_node(const NodeBank& bank, std::size_t j, const float* const* ins, float* out,
                  float* soft, std::size_t begin, std::size_t end, const ForwardContext& ctx,
                  std::uint64_t noise_key, Scratch& scratch) {
  const std::size_t lanes = end - begin;
  if (lanes == 0) return;

  if (bank.kind == NodeKind::Dlgn) {
    const DlgnNode d = dlgn_node(bank, j);
    const float* a = ins[0];
    const float* b = ins[1];
    for (std::size_t i = begin; i < end; ++i) {
      const float x = clamp01(a[i]);
      const float y = clamp01(b[i]);
      const float v = d.q[0] * (1 - x) * (1 - y) + d.q[1] * (1 - x) * y + d.q[2] * x * (1 - y) +
                      d.q[3] * x * y;
      out[i] = v;
      soft[i] = v;
    }
    return;
  }

  const float* noise = nullptr;
  if (ctx.noisy()) {
    const CounterStream stream(noise_key);
    for (std::size_t i = begin; i < end; ++i) {
      scratch.noise[i] = static_cast<float>(logistic_from_uniform(bits_to_open01(stream.at(i))));
    }
    noise = scratch.noise.data();
  }
  const bool hard = ctx.mode == RelaxMode::StraightThrough;
  const float inv_tau = static_cast<float>(1.0 / ctx.relax.tau_relax);

  if (bank.arity == 2) {
    simd::Warp2ForwardArgs args{bank.node(j).data(),
                                ins[0] + begin,
                                ins[1] + begin,
                                noise ? noise + begin : nullptr,
                                inv_tau,
                                hard,
                                ctx.relax.ste_noisy_backward,
                                out + begin,
                                soft + begin,
                                lanes};
    ctx.simd().warp2_forward(args);
    return;
  }

  const int n = bank.arity;
  const float* coeffs = bank.node(j).data();
  std::array<float, kMaxArity> sx{};
  std::array<float, std::size_t{1} << kMaxArity> prod{};
  for (std::size_t i = begin; i < end; ++i) {
    for (int k = 0; k < n; ++k) sx[k] = b_tilde(ins[k][i]);
    const float l = walsh_polynomial(coeffs, sx.data(), n, prod.data());
    const float ln = noise ? l + noise[i] : l;
    if (hard) {
      out[i] = ln >= 0.0f ? 1.0f : 0.0f;
      soft[i] = sigmoid((ctx.relax.ste_noisy_backward ? ln : l) * inv_tau);
    } else {
      const float s = sigmoid(ln * inv_tau);
      out[i] = s;
      soft[i] = s;
    }
  }
}

// Accumulates node j's parameter gradient into grad and its input gradients
// into gins[k] (skipped where null) on lanes [begin, end).
void backward_node(const NodeBank& bank, std::size_t j, const float* const* ins, const float* soft,
                   const float* gout, float* const* gins, std::size_t begin, std::size_t end,
                   const ForwardContext& ctx, float* grad) {
  const std::size_t lanes = end - begin;
  if (lanes == 0) return;

  if (bank.kind == NodeKind::Dlgn) {
    const DlgnNode d = dlgn_node(bank, j);
    const auto& q = d.q;
    std::array<double, 4> dq{};
    const float* a = ins[0];
    const float* b = ins[1];
    for (std::size_t i = begin; i < end; ++i) {
      const float x = clamp01(a[i]);
      const float y = clamp01(b[i]);
      const float g = gout[i];
      dq[0] += g * (1 - x) * (1 - y);
      dq[1] += g * (1 - x) * y;
      dq[2] += g * x * (1 - y);
      dq[3] += g * x * y;
      if (gins[0]) gins[0][i] += g * ((q[2] - q[0]) * (1 - y) + (q[3] - q[1]) * y);
      if (gins[1]) gins[1][i] += g * ((q[1] - q[0]) * (1 - x) + (q[3] - q[2]) * x);
    }
    std::array<double, 16> dlogits{};
    dlgn_corner_grad_to_logits(d.probs.data(), dq.data(), 1.0 / bank.dlgn_temperature,
                               dlogits.data());
    for (int g = 0; g < 16; ++g) grad[g] += static_cast<float>(dlogits[g]);
    return;
  }

  const float inv_tau = static_cast<float>(1.0 / ctx.relax.tau_relax);
  if (bank.arity == 2) {
    simd::Warp2BackwardArgs args{bank.node(j).data(),
                                 ins[0] + begin,
                                 ins[1] + begin,
                                 soft + begin,
                                 gout + begin,
                                 inv_tau,
                                 grad,
                                 gins[0] ? gins[0] + begin : nullptr,
                                 gins[1] ? gins[1] + begin : nullptr,
                                 lanes};
    ctx.simd().warp2_backward(args);
    return;
  }

  const int n = bank.arity;
  const std::size_t width = bank.width();
  const float* coeffs = bank.node(j).data();
  std::array<float, kMaxArity> sx{};
  std::array<float, kMaxArity> dsx{};
  std::array<float, std::size_t{1} << kMaxArity> prod{};
  for (std::size_t i = begin; i < end; ++i) {
    for (int k = 0; k < n; ++k) sx[k] = b_tilde(ins[k][i]);
    (void)walsh_polynomial(coeffs, sx.data(), n, prod.data());
    const float s = soft[i];
    const float ds = gout[i] * s * (1.0f - s) * inv_tau;
    for (std::size_t t = 0; t < width; ++t) grad[t] += ds * prod[t];
    walsh_polynomial_input_grad(coeffs, prod.data(), n, dsx.data());
    for (int k = 0; k < n; ++k) {
      if (gins[k]) gins[k][i] += 2.0f * ds * dsx[k];
    }
  }
}

void check_batch(const Activations& in, std::size_t expected, const char* what) {
  if (in.features() != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " input features, got " + std::to_string(in.features()));
  }
}

// Sums per-thread parameter gradients in thread order.
void reduce_grads(std::vector<std::vector<float>>& partial, std::span<float> grad_params) {
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < p.size(); ++i) grad_params[i] += p[i];
  }
}

}  // namespace

std::vector<std::uint32_t> make_connections(std::size_t in_dim, std::size_t node_count, int arity,
                                            std::mt19937_64& rng) {
  check_arity(arity);
  if (in_dim < static_cast<std::size_t>(arity)) {
    throw ShapeError("cannot wire " + std::to_string(arity) + " distinct inputs from a layer of " +
                     std::to_string(in_dim));
  }
  std::vector<std::uint32_t> conn(node_count * static_cast<std::size_t>(arity));
  for (std::size_t j = 0; j < node_count; ++j) {
    std::uint32_t* row = conn.data() + j * arity;
    for (int k = 0; k < arity; ++k) {
      std::uint32_t pick;
      do {
        pick = static_cast<std::uint32_t>(uniform_index(rng, in_dim));
      } while (std::find(row, row + k, pick) != row + k);
      row[k] = pick;
    }
  }
  return conn;
}

std::vector<Tap> make_taps(const Shape3& in_shape, int out_channels, int depth,
                           std::mt19937_64& rng) {
  const int per_channel = 1 << depth;
  std::vector<Tap> taps(static_cast<std::size_t>(out_channels) * per_channel);
  auto draw = [&] {
    Tap t;
    t.channel = static_cast<std::uint16_t>(uniform_index(rng, in_shape.channels));
    t.dr = static_cast<std::int8_t>(static_cast<int>(uniform_index(rng, 3)) - 1);
    t.dc = static_cast<std::int8_t>(static_cast<int>(uniform_index(rng, 3)) - 1);
    return t;
  };
  for (std::size_t i = 0; i < taps.size(); i += 2) {
    taps[i] = draw();
    do {
      taps[i + 1] = draw();
    } while (taps[i + 1] == taps[i]);
  }
  return taps;
}

void init_layer(NodeBank& bank, const InitScheme& scheme, std::mt19937_64& rng) {
  validate(scheme);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (float& p : bank.params) p = static_cast<float>(scheme.sigma * normal(rng));
  if (scheme.kind == InitScheme::Kind::Residual) {
    // Coefficient index 1 is the subset {input 0}.
    const std::size_t identity = bank.kind == NodeKind::Warp ? 1 : static_cast<std::size_t>(kIdA);
    for (std::size_t j = 0; j < bank.count; ++j) {
      bank.node(j)[identity] += static_cast<float>(scheme.gamma);
    }
  }
}

void dense_forward(const LogicDenseLayer& layer, const Activations& in, const ForwardContext& ctx,
                   std::uint64_t layer_key, DenseCache& cache) {
  check_batch(in, layer.in_dim, "dense_forward");
  validate(ctx.relax);
  const std::size_t lanes = in.lanes();
  const std::size_t nodes = layer.node_count();
  const int n = layer.bank.arity;
  if (cache.out.features() != nodes || cache.out.lanes() != lanes) {
    cache.out.resize(nodes, lanes);
    cache.soft.resize(nodes, lanes);
  }
  parallel_lanes(lanes, ctx.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    Scratch scratch(lanes);
    std::array<const float*, kMaxArity> ins{};
    for (std::size_t j = 0; j < nodes; ++j) {
      const std::uint32_t* idx = layer.inputs_of(j);
      for (int k = 0; k < n; ++k) ins[k] = in.row(idx[k]);
      forward_node(layer.bank, j, ins.data(), cache.out.row(j), cache.soft.row(j), begin, end, ctx,
                   derive_seed(ctx.noise_seed, layer_key, j), scratch);
    }
  });
}

void dense_backward(const LogicDenseLayer& layer, const Activations& in, const DenseCache& cache,
                    const Activations& grad_out, const ForwardContext& ctx,
                    std::span<float> grad_params, Activations* grad_in) {
  check_batch(in, layer.in_dim, "dense_backward");
  if (cache.out.features() != layer.node_count() || cache.out.lanes() != in.lanes()) {
    throw MissingCacheError("dense_backward: forward cache does not match this batch");
  }
  check_batch(grad_out, layer.node_count(), "dense_backward(grad_out)");
  if (grad_params.size() != layer.bank.params.size()) {
    throw ShapeError("dense_backward: gradient buffer size mismatch");
  }
  const std::size_t lanes = in.lanes();
  if (grad_in) {
    if (grad_in->features() != layer.in_dim || grad_in->lanes() != lanes) {
      grad_in->resize(layer.in_dim, lanes);
    } else {
      grad_in->fill(0.0f);
    }
  }
  const std::size_t workers = worker_count(lanes, ctx.threads);
  std::vector<std::vector<float>> partial(workers > 1 ? workers : 0,
                                          std::vector<float>(grad_params.size(), 0.0f));
  const int n = layer.bank.arity;
  const std::size_t width = layer.bank.width();
  parallel_lanes(lanes, ctx.threads, [&](std::size_t begin, std::size_t end, std::size_t t) {
    float* grads = workers > 1 ? partial[t].data() : grad_params.data();
    std::array<const float*, kMaxArity> ins{};
    std::array<float*, kMaxArity> gins{};
    for (std::size_t j = 0; j < layer.node_count(); ++j) {
      const std::uint32_t* idx = layer.inputs_of(j);
      for (int k = 0; k < n; ++k) {
        ins[k] = in.row(idx[k]);
        gins[k] = grad_in ? grad_in->row(idx[k]) : nullptr;
      }
      backward_node(layer.bank, j, ins.data(), cache.soft.row(j), grad_out.row(j), gins.data(),
                    begin, end, ctx, grads + j * width);
    }
  });
  reduce_grads(partial, grad_params);
}

namespace {

struct ConvGeometry {
  int in_c, h, w, out_c, npc, tpc;
  std::size_t hw() const { return static_cast<std::size_t>(h) * w; }
  std::size_t node_row(int o, std::size_t p, int m) const {
    return (static_cast<std::size_t>(o) * hw() + p) * npc + m;
  }
  // Input row for a tap at position (r, c), or -1 outside the image.
  std::ptrdiff_t input_row(int ch, int r, int c) const {
    if (r < 0 || r >= h || c < 0 || c >= w) return -1;
    return (static_cast<std::ptrdiff_t>(ch) * h + r) * w + c;
  }
};

ConvGeometry geometry(const ResidualLogicBlock& b) {
  return {b.in_shape.channels, b.in_shape.height, b.in_shape.width, b.out_channels,
          b.nodes_per_channel(), b.taps_per_channel()};
}

}  // namespace

void conv_forward(const ResidualLogicBlock& block, const Activations& in,
                  const ForwardContext& ctx, std::uint64_t layer_key, ConvCache& cache) {
  check_batch(in, block.in_shape.size(), "conv_forward");
  validate(ctx.relax);
  const ConvGeometry g = geometry(block);
  const std::size_t lanes = in.lanes();
  const Shape3 out_shape = block.out_shape();
  const std::size_t node_rows = static_cast<std::size_t>(g.out_c) * g.hw() * g.npc;
  if (cache.nodes.features() != node_rows || cache.nodes.lanes() != lanes) {
    cache.nodes.resize(node_rows, lanes);
    cache.soft.resize(node_rows, lanes);
    cache.out.resize(out_shape.size(), lanes);
  }
  cache.argmax.assign(out_shape.size() * cache.out.stride(), 0);
  const Activations zeros(1, lanes);

  parallel_lanes(lanes, ctx.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    Scratch scratch(lanes);
    for (int o = 0; o < g.out_c; ++o) {
      const Tap* taps = block.taps.data() + static_cast<std::size_t>(o) * g.tpc;
      for (int r = 0; r < g.h; ++r) {
        for (int c = 0; c < g.w; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * g.w + c;
          for (int m = 0; m < g.npc; ++m) {
            std::array<const float*, 2> ins{};
            if (m == block.merge_index()) {
              ins[0] = cache.nodes.row(g.node_row(o, p, block.root_index()));
              ins[1] = in.row(static_cast<std::size_t>(g.input_row(o % g.in_c, r, c)));
            } else {
              bool leaf = false;
              const auto [x, y] = block.children(m, leaf);
              for (int k = 0; k < 2; ++k) {
                const int child = k == 0 ? x : y;
                if (leaf) {
                  const Tap& t = taps[child];
                  const auto row = g.input_row(t.channel, r + t.dr, c + t.dc);
                  ins[k] = row < 0 ? zeros.row(0) : in.row(static_cast<std::size_t>(row));
                } else {
                  ins[k] = cache.nodes.row(g.node_row(o, p, child));
                }
              }
            }
            const std::size_t node_id = static_cast<std::size_t>(o) * g.npc + m;
            const std::size_t row = g.node_row(o, p, m);
            forward_node(block.bank, node_id, ins.data(), cache.nodes.row(row),
                         cache.soft.row(row), begin, end, ctx,
                         derive_seed(ctx.noise_seed, layer_key, row), scratch);
          }
        }
      }
      for (int r = 0; r < out_shape.height; ++r) {
        for (int c = 0; c < out_shape.width; ++c) {
          auto pre = [&](int dr, int dc) {
            const std::size_t p = static_cast<std::size_t>(2 * r + dr) * g.w + (2 * c + dc);
            return cache.nodes.row(g.node_row(o, p, block.merge_index())) + begin;
          };
          const std::size_t f =
              (static_cast<std::size_t>(o) * out_shape.height + r) * out_shape.width + c;
          ctx.simd().max4(pre(0, 0), pre(0, 1), pre(1, 0), pre(1, 1), cache.out.row(f) + begin,
                          cache.argmax.data() + f * cache.out.stride() + begin, end - begin);
        }
      }
    }
  });
}

void conv_backward(const ResidualLogicBlock& block, const Activations& in, const ConvCache& cache,
                   const Activations& grad_out, const ForwardContext& ctx,
                   std::span<float> grad_params, Activations* grad_in) {
  check_batch(in, block.in_shape.size(), "conv_backward");
  const ConvGeometry g = geometry(block);
  const Shape3 out_shape = block.out_shape();
  const std::size_t lanes = in.lanes();
  if (cache.out.features() != out_shape.size() || cache.out.lanes() != lanes) {
    throw MissingCacheError("conv_backward: forward cache does not match this batch");
  }
  check_batch(grad_out, out_shape.size(), "conv_backward(grad_out)");
  if (grad_params.size() != block.bank.params.size()) {
    throw ShapeError("conv_backward: gradient buffer size mismatch");
  }
  if (grad_in) {
    if (grad_in->features() != in.features() || grad_in->lanes() != lanes) {
      grad_in->resize(in.features(), lanes);
    } else {
      grad_in->fill(0.0f);
    }
  }
  Activations gnodes(cache.nodes.features(), lanes);
  const Activations zeros(1, lanes);
  const std::size_t workers = worker_count(lanes, ctx.threads);
  std::vector<std::vector<float>> partial(workers > 1 ? workers : 0,
                                          std::vector<float>(grad_params.size(), 0.0f));
  const std::size_t width = block.bank.width();

  parallel_lanes(lanes, ctx.threads, [&](std::size_t begin, std::size_t end, std::size_t t) {
    float* grads = workers > 1 ? partial[t].data() : grad_params.data();
    for (int o = 0; o < g.out_c; ++o) {
      // Route pooled gradients to the winning pre-pool position.
      for (int r = 0; r < out_shape.height; ++r) {
        for (int c = 0; c < out_shape.width; ++c) {
          const std::size_t f =
              (static_cast<std::size_t>(o) * out_shape.height + r) * out_shape.width + c;
          const std::uint8_t* arg = cache.argmax.data() + f * cache.out.stride();
          const float* go = grad_out.row(f);
          for (std::size_t i = begin; i < end; ++i) {
            const int dr = arg[i] >> 1;
            const int dc = arg[i] & 1;
            const std::size_t p = static_cast<std::size_t>(2 * r + dr) * g.w + (2 * c + dc);
            gnodes.at(g.node_row(o, p, block.merge_index()), i) += go[i];
          }
        }
      }
      const Tap* taps = block.taps.data() + static_cast<std::size_t>(o) * g.tpc;
      for (int r = 0; r < g.h; ++r) {
        for (int c = 0; c < g.w; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * g.w + c;
          for (int m = g.npc - 1; m >= 0; --m) {
            std::array<const float*, 2> ins{};
            std::array<float*, 2> gins{};
            if (m == block.merge_index()) {
              const std::size_t root = g.node_row(o, p, block.root_index());
              const auto res = static_cast<std::size_t>(g.input_row(o % g.in_c, r, c));
              ins = {cache.nodes.row(root), in.row(res)};
              gins = {gnodes.row(root), grad_in ? grad_in->row(res) : nullptr};
            } else {
              bool leaf = false;
              const auto [x, y] = block.children(m, leaf);
              for (int k = 0; k < 2; ++k) {
                const int child = k == 0 ? x : y;
                if (leaf) {
                  const Tap& tp = taps[child];
                  const auto row = g.input_row(tp.channel, r + tp.dr, c + tp.dc);
                  if (row < 0) {
                    ins[k] = zeros.row(0);
                    gins[k] = nullptr;
                  } else {
                    ins[k] = in.row(static_cast<std::size_t>(row));
                    gins[k] = grad_in ? grad_in->row(static_cast<std::size_t>(row)) : nullptr;
                  }
                } else {
                  const std::size_t row = g.node_row(o, p, child);
                  ins[k] = cache.nodes.row(row);
                  gins[k] = gnodes.row(row);
                }
              }
            }
            const std::size_t node_id = static_cast<std::size_t>(o) * g.npc + m;
            const std::size_t row = g.node_row(o, p, m);
            backward_node(block.bank, node_id, ins.data(), cache.soft.row(row), gnodes.row(row),
                          gins.data(), begin, end, ctx, grads + node_id * width);
          }
        }
      }
    }
  });
  reduce_grads(partial, grad_params);
}

std::vector<double> group_sum(std::span<const double> scores_in, const GroupSumLayer& layer) {
  const std::size_t k = static_cast<std::size_t>(layer.class_count);
  if (k == 0 || scores_in.size() % k != 0) {
    throw ShapeError("group_sum: input length " + std::to_string(scores_in.size()) +
                     " not divisible by class count " + std::to_string(k));
  }
  const std::size_t group = scores_in.size() / k;
  std::vector<double> out(k, 0.0);
  for (std::size_t g = 0; g < k; ++g) {
    double acc = 0.0;
    for (std::size_t i = g * group; i < (g + 1) * group; ++i) acc += scores_in[i];
    out[g] = acc / layer.tau_group;
  }
  return out;
}

}  // namespace warplut
