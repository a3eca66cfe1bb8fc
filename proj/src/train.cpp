#include "warplut/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "warplut/gate_catalog.hpp"
#include "warplut/random.hpp"

namespace warplut {

using nlohmann::json;

Optimizer::Optimizer(const Network& net, OptimizerConfig config) : config_(config) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::size_t n = net.bank(i).params.size();
    m_.emplace_back(n, 0.0f);
    if (config_.kind == OptimizerConfig::Kind::Adam) v_.emplace_back(n, 0.0f);
  }
}

void Optimizer::step(Network& net, const Gradients& grads, double lr) {
  ++t_;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::span<float> p = net.bank(i).params;
    std::span<const float> g = grads.per_layer[i];
    if (config_.kind == OptimizerConfig::Kind::Adam) {
      adam_update<float>(p, g, m_[i], v_[i], t_, lr, config_.adam);
    } else {
      sgd_update<float>(p, g, m_[i], lr, config_.momentum);
    }
  }
}

std::string to_string(RelaxMode mode) {
  switch (mode) {
    case RelaxMode::Deterministic: return "deterministic";
    case RelaxMode::GumbelSigmoid: return "gumbel";
    case RelaxMode::StraightThrough: return "ste";
  }
  return "?";
}

RelaxMode parse_relax_mode(const std::string& text) {
  if (text == "deterministic") return RelaxMode::Deterministic;
  if (text == "gumbel" || text == "gumbel_sigmoid") return RelaxMode::GumbelSigmoid;
  if (text == "ste" || text == "straight_through") return RelaxMode::StraightThrough;
  throw ConfigError("unknown relax mode '" + text + "' (deterministic, gumbel, ste)");
}

void validate(const TrainConfig& c) {
  if (c.steps <= 0) throw ConfigError("steps must be positive");
  if (c.eval_every <= 0) throw ConfigError("eval_every must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  validate(c.relax);
  if (c.tau_relax_end && !(*c.tau_relax_end > 0.0)) throw ConfigError("tau_relax_end must be positive");
  if (c.tau_group && !(*c.tau_group > 0.0)) throw ConfigError("tau_group must be positive");
  const auto& a = c.optimizer.adam;
  if (!(a.beta1 >= 0 && a.beta1 < 1 && a.beta2 >= 0 && a.beta2 < 1 && a.eps > 0)) {
    throw ConfigError("Adam needs beta1, beta2 in [0, 1) and eps > 0");
  }
  if (!(c.optimizer.momentum >= 0 && c.optimizer.momentum < 1)) {
    throw ConfigError("SGD momentum must be in [0, 1)");
  }
}

TrainConfig parse_train_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  reject_unknown_keys(doc,
                      {"steps", "batch_size", "learning_rate", "optimizer", "eval_every", "seed",
                       "mode", "tau_relax", "tau_relax_end", "gumbel_noise", "ste_noisy_backward",
                       "tau_group", "threads", "eval_limit"},
                      "train");
  TrainConfig c;
  try {
    c.steps = doc.value("steps", c.steps);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.eval_every = doc.value("eval_every", c.eval_every);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("mode")) c.mode = parse_relax_mode(doc["mode"].get<std::string>());
    c.relax.tau_relax = doc.value("tau_relax", c.relax.tau_relax);
    if (doc.contains("tau_relax_end")) c.tau_relax_end = doc["tau_relax_end"].get<double>();
    c.relax.gumbel_enabled = doc.value("gumbel_noise", c.relax.gumbel_enabled);
    c.relax.ste_noisy_backward = doc.value("ste_noisy_backward", c.relax.ste_noisy_backward);
    if (doc.contains("tau_group")) c.tau_group = doc["tau_group"].get<double>();
    c.threads = doc.value("threads", c.threads);
    c.eval_limit = doc.value("eval_limit", c.eval_limit);
    if (doc.contains("optimizer")) {
      const json& o = doc["optimizer"];
      reject_unknown_keys(o, {"kind", "beta1", "beta2", "eps", "momentum"}, "train.optimizer");
      const std::string kind = o.value("kind", std::string("adam"));
      if (kind == "adam") {
        c.optimizer.kind = OptimizerConfig::Kind::Adam;
      } else if (kind == "sgd") {
        c.optimizer.kind = OptimizerConfig::Kind::Sgd;
      } else {
        throw ConfigError("unknown optimizer '" + kind + "' (adam, sgd)");
      }
      c.optimizer.adam.beta1 = o.value("beta1", c.optimizer.adam.beta1);
      c.optimizer.adam.beta2 = o.value("beta2", c.optimizer.adam.beta2);
      c.optimizer.adam.eps = o.value("eps", c.optimizer.adam.eps);
      c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

json to_json(const TrainConfig& c) {
  json o;
  o["kind"] = c.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd";
  o["beta1"] = c.optimizer.adam.beta1;
  o["beta2"] = c.optimizer.adam.beta2;
  o["eps"] = c.optimizer.adam.eps;
  o["momentum"] = c.optimizer.momentum;
  json j{{"steps", c.steps},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"optimizer", o},
         {"eval_every", c.eval_every},
         {"seed", c.seed},
         {"mode", to_string(c.mode)},
         {"tau_relax", c.relax.tau_relax},
         {"gumbel_noise", c.relax.gumbel_enabled},
         {"ste_noisy_backward", c.relax.ste_noisy_backward},
         {"threads", c.threads},
         {"eval_limit", c.eval_limit}};
  if (c.tau_relax_end) j["tau_relax_end"] = *c.tau_relax_end;
  if (c.tau_group) j["tau_group"] = *c.tau_group;
  return j;
}

double cross_entropy_loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          std::size_t k, std::span<double> grad) {
  const std::size_t batch = labels.size();
  if (k == 0 || scores.size() != batch * k) throw ShapeError("cross_entropy_loss: score shape mismatch");
  if (!grad.empty() && grad.size() != scores.size()) throw ShapeError("cross_entropy_loss: grad shape");
  if (batch == 0) return 0.0;
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= k) {
      throw ShapeError("label " + std::to_string(labels[b]) + " out of range for " +
                       std::to_string(k) + " classes");
    }
    const double* s = scores.data() + b * k;
    const double mx = *std::max_element(s, s + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(s[c] - mx);
    const double lse = mx + std::log(z);
    total += lse - s[labels[b]];
    if (!grad.empty()) {
      for (std::size_t c = 0; c < k; ++c) {
        grad[b * k + c] = (std::exp(s[c] - lse) - (c == labels[b] ? 1.0 : 0.0)) * inv_b;
      }
    }
  }
  return total * inv_b;
}

Activations make_batch(const BinarizedDataset& data, std::span<const std::size_t> indices) {
  const std::size_t f = data.features();
  Activations a(f, indices.size());
  for (std::size_t lane = 0; lane < indices.size(); ++lane) {
    const std::uint8_t* ex = data.inputs.data() + indices[lane] * f;
    for (std::size_t i = 0; i < f; ++i) a.at(i, lane) = ex[i];
  }
  return a;
}

Trainer::Trainer(Network& n, const TrainConfig& c)
    : net(n), config(c), optimizer(n, c.optimizer), grads(make_gradients(n)) {
  validate(config);
  if (config.tau_group) net.readout.tau_group = *config.tau_group;
}

double Trainer::current_tau() const {
  if (!config.tau_relax_end) return config.relax.tau_relax;
  const double frac = config.steps > 1 ? static_cast<double>(step) / static_cast<double>(config.steps - 1) : 1.0;
  const double t0 = config.relax.tau_relax, t1 = *config.tau_relax_end;
  return t0 + (t1 - t0) * std::min(1.0, frac);
}

namespace {

std::pair<int, double> largest_param(const Network& net) {
  int layer = -1;
  double best = -1.0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (float p : net.bank(i).params) {
      const double a = std::isfinite(p) ? std::fabs(p) : std::numeric_limits<double>::infinity();
      if (a > best) best = a, layer = static_cast<int>(i);
    }
  }
  return {layer, best};
}

constexpr std::uint64_t kNoiseKey = 0x6e6f697365ULL;
constexpr std::uint64_t kBatchKey = 0x6261746368ULL;

}  // namespace

double train_step(Trainer& t, const Activations& batch, std::span<const std::uint8_t> labels) {
  Network& net = t.net;
  if (batch.lanes() != labels.size()) throw ShapeError("train_step: batch and label count differ");
  ForwardContext ctx;
  ctx.mode = t.config.mode;
  ctx.relax = t.config.relax;
  ctx.relax.tau_relax = t.current_tau();
  ctx.noise_seed = derive_seed(t.config.seed ^ t.config.relax.rng_seed, kNoiseKey,
                               static_cast<std::uint64_t>(t.step));
  ctx.threads = t.config.threads;

  const Activations& last = forward(net, batch, ctx, t.workspace);
  const std::size_t k = static_cast<std::size_t>(net.class_count());
  const auto scores = class_scores(net, last);
  std::vector<double> dscores(scores.size());
  const double loss = cross_entropy_loss(scores, labels, k, dscores);
  if (!std::isfinite(loss)) {
    const auto [layer, mx] = largest_param(net);
    throw DivergenceError("non-finite loss at step " + std::to_string(t.step) + " (largest |param| " +
                              std::to_string(mx) + " in layer " + std::to_string(layer) + ")",
                          t.step, layer, mx);
  }

  t.grad_last.resize(last.features(), last.lanes());
  const std::size_t group = last.features() / k;
  const double inv_tau = 1.0 / net.readout.tau_group;
  for (std::size_t f = 0; f < last.features(); ++f) {
    const std::size_t g = f / group;
    float* row = t.grad_last.row(f);
    for (std::size_t b = 0; b < last.lanes(); ++b) {
      row[b] = static_cast<float>(dscores[b * k + g] * inv_tau);
    }
  }
  t.grads.zero();
  backward(net, batch, t.grad_last, ctx, t.workspace, t.grads);
  t.optimizer.step(net, t.grads, t.config.learning_rate);
  ++t.step;
  return loss;
}

double evaluate(const Network& net, const BinarizedDataset& data, EvalMode mode, int threads,
                std::size_t limit) {
  const std::size_t n = limit ? std::min(limit, data.count) : data.count;
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  threads = std::max(1, threads);
  if (mode == EvalMode::Relaxed) {
    ForwardContext ctx;
    ctx.mode = RelaxMode::Deterministic;
    ctx.threads = threads;
    Workspace ws;
    const std::size_t k = static_cast<std::size_t>(net.class_count());
    constexpr std::size_t kChunk = 1024;
    std::vector<std::size_t> idx;
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
      const std::size_t end = std::min(n, begin + kChunk);
      idx.resize(end - begin);
      std::iota(idx.begin(), idx.end(), begin);
      const Activations batch = make_batch(data, idx);
      const auto scores = class_scores(net, forward(net, batch, ctx, ws));
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const int pred = argmax_class(std::span<const double>(scores.data() + b * k, k));
        correct += pred == data.labels[begin + b];
      }
    }
  } else {
    const HardenedModel hard(net);
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::size_t> hits(workers, 0);
    auto work = [&](std::size_t w) {
      for (std::size_t i = n * w / workers; i < n * (w + 1) / workers; ++i) {
        hits[w] += hard.predict(data.example(i)) == data.labels[i];
      }
    };
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
      work(0);
    }
    correct = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::array<std::uint64_t, 16> gate_histogram(const Network& net) {
  std::array<std::uint64_t, 16> h{};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const NodeBank& bank = net.bank(i);
    if (bank.arity != 2) continue;
    for (std::size_t j = 0; j < bank.count; ++j) ++h[classify_gate(bank.hardened_table(j))];
  }
  return h;
}

std::string metrics_csv_header() {
  std::string h = "step,loss,acc_relaxed,acc_discrete,gap";
  for (const auto& e : gate_catalog()) h += ",gate_" + std::string(e.mnemonic);
  return h;
}

namespace {

// Round-trippable doubles so replay reproduces the in-memory series exactly.
std::string exact(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_csv_row(const MetricsRecord& r) {
  std::string s = std::to_string(r.step) + "," + exact(r.train_loss) + "," + exact(r.val_acc_relaxed) +
                  "," + exact(r.val_acc_discrete) + "," + exact(r.gap);
  for (auto c : r.gate_histogram) s += "," + std::to_string(c);
  return s;
}

json to_json(const MetricsRecord& r) {
  return json{{"step", r.step},
              {"loss", r.train_loss},
              {"acc_relaxed", r.val_acc_relaxed},
              {"acc_discrete", r.val_acc_discrete},
              {"gap", r.gap},
              {"gate_histogram", r.gate_histogram}};
}

MetricsWriter::MetricsWriter(const std::filesystem::path& stem)
    : MetricsWriter(stem.string() + ".csv", stem.string() + ".jsonl") {}

MetricsWriter::MetricsWriter(std::filesystem::path csv, std::filesystem::path jsonl)
    : csv_path_(std::move(csv)), jsonl_path_(std::move(jsonl)) {
  csv_.open(csv_path_, std::ios::trunc);
  jsonl_.open(jsonl_path_, std::ios::trunc);
  if (!csv_ || !jsonl_) throw Error("cannot open metrics files " + csv_path_.string());
  csv_ << metrics_csv_header() << '\n';
  csv_.flush();
}

void MetricsWriter::write(const MetricsRecord& r) {
  csv_ << to_csv_row(r) << '\n';
  csv_.flush();
  jsonl_ << to_json(r).dump() << '\n';
  jsonl_.flush();
  if (!csv_ || !jsonl_) throw Error("failed writing metrics at step " + std::to_string(r.step));
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open metrics file " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != metrics_csv_header()) throw Error("unexpected metrics header in " + file.string());
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 21) throw Error("malformed metrics row in " + file.string());
    MetricsRecord r;
    r.step = std::stoll(cells[0]);
    r.train_loss = std::stod(cells[1]);
    r.val_acc_relaxed = std::stod(cells[2]);
    r.val_acc_discrete = std::stod(cells[3]);
    r.gap = std::stod(cells[4]);
    for (int g = 0; g < 16; ++g) r.gate_histogram[g] = std::stoull(cells[5 + g]);
    out.push_back(r);
  }
  return out;
}

std::vector<MetricsRecord> read_metrics_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open metrics file " + file.string());
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    MetricsRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.train_loss = j.at("loss").get<double>();
    r.val_acc_relaxed = j.at("acc_relaxed").get<double>();
    r.val_acc_discrete = j.at("acc_discrete").get<double>();
    r.gap = j.at("gap").get<double>();
    r.gate_histogram = j.at("gate_histogram").get<std::array<std::uint64_t, 16>>();
    out.push_back(r);
  }
  return out;
}

std::vector<MetricsRecord> run_training(Network& net, const BinarizedDataset& train,
                                        const BinarizedDataset& val, const TrainConfig& config,
                                        MetricsWriter* sink, const ProgressFn& progress) {
  if (train.count == 0) throw DataError("training set is empty");
  if (train.features() != net.input_shape().size() || val.features() != net.input_shape().size()) {
    throw ShapeError("dataset feature count does not match the network input");
  }
  Trainer trainer(net, config);
  std::vector<MetricsRecord> records;

  std::vector<std::size_t> order(train.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, kBatchKey));
  const bool full_batch = config.batch_size >= train.count;
  std::size_t cursor = train.count;
  std::vector<std::size_t> idx;
  std::vector<std::uint8_t> labels;

  Activations full;
  if (full_batch) {
    full = make_batch(train, order);
    labels = train.labels;
  }

  double loss_sum = 0.0;
  std::int64_t loss_n = 0;
  for (std::int64_t s = 1; s <= config.steps; ++s) {
    double loss;
    if (full_batch) {
      loss = train_step(trainer, full, labels);
    } else {
      idx.clear();
      labels.clear();
      while (idx.size() < config.batch_size) {
        if (cursor == train.count) {
          std::shuffle(order.begin(), order.end(), shuffle_rng);
          cursor = 0;
        }
        idx.push_back(order[cursor]);
        labels.push_back(train.labels[order[cursor]]);
        ++cursor;
      }
      loss = train_step(trainer, make_batch(train, idx), labels);
    }
    loss_sum += loss;
    ++loss_n;

    if (s % config.eval_every == 0 || s == config.steps) {
      MetricsRecord r;
      r.step = s;
      r.train_loss = loss_sum / static_cast<double>(loss_n);
      r.val_acc_relaxed = evaluate(net, val, EvalMode::Relaxed, config.threads, config.eval_limit);
      r.val_acc_discrete = evaluate(net, val, EvalMode::Discrete, config.threads, config.eval_limit);
      r.gap = r.val_acc_relaxed - r.val_acc_discrete;
      r.gate_histogram = gate_histogram(net);
      records.push_back(r);
      loss_sum = 0.0;
      loss_n = 0;
      if (sink) {
        try {
          sink->write(r);
        } catch (const Error& e) {
          throw MetricsIoError(e.what(), records);
        }
      }
      if (progress) progress(r);
    }
  }
  return records;
}

}  // namespace warplut
