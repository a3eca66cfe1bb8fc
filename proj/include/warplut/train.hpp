#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "warplut/data.hpp"
#include "warplut/error.hpp"
#include "warplut/network.hpp"

namespace warplut {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerConfig {
  enum class Kind { Adam, Sgd };
  Kind kind = Kind::Adam;
  AdamParams adam;
  double momentum = 0.0;  // SGD only
};

// One bias-corrected Adam step over a flat parameter vector. `t` is the
// 1-based step count.
template <class T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                 std::uint64_t t, double lr, const AdamParams& p) {
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(p.beta1), b2 = static_cast<T>(p.beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(p.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    params[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
  }
}

template <class T>
void sgd_update(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr,
                double momentum) {
  const T mu = static_cast<T>(momentum), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = mu * velocity[i] + grads[i];
    params[i] -= eta * velocity[i];
  }
}

// Optimizer state for every layer of a network.
class Optimizer {
 public:
  Optimizer(const Network& net, OptimizerConfig config);
  void step(Network& net, const Gradients& grads, double lr);
  std::uint64_t steps_taken() const noexcept { return t_; }

 private:
  OptimizerConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

struct TrainConfig {
  std::int64_t steps = 5000;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  OptimizerConfig optimizer;
  std::int64_t eval_every = 500;
  std::uint64_t seed = 0;
  RelaxMode mode = RelaxMode::GumbelSigmoid;
  RelaxParams relax;
  // Linear anneal of relax.tau_relax towards this value over the run; off when empty.
  std::optional<double> tau_relax_end;
  // Overrides the architecture's GroupSum temperature when set.
  std::optional<double> tau_group;
  int threads = 1;
  // Validation examples used per evaluation; 0 means all.
  std::size_t eval_limit = 0;
};

void validate(const TrainConfig& config);
TrainConfig parse_train_config(const nlohmann::json& doc);
nlohmann::json to_json(const TrainConfig& config);
std::string to_string(RelaxMode mode);
RelaxMode parse_relax_mode(const std::string& text);

// Mean over the batch of -log softmax(scores)[label]. scores is row-major
// batch x k. grad (same shape) receives d loss / d scores when non-empty.
double cross_entropy_loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          std::size_t k, std::span<double> grad = {});

// Examples `indices` of `data` as a feature-major batch.
Activations make_batch(const BinarizedDataset& data, std::span<const std::size_t> indices);

// Reusable buffers and optimizer state of one training run.
struct Trainer {
  Trainer(Network& net, const TrainConfig& config);

  Network& net;
  TrainConfig config;
  Optimizer optimizer;
  Workspace workspace;
  Gradients grads;
  Activations grad_last;
  std::int64_t step = 0;

  double current_tau() const;
};

// One forward in the configured mode, one backward, one optimizer update.
// Noise is keyed by (seed, step). Throws DivergenceError on a non-finite loss.
double train_step(Trainer& trainer, const Activations& batch, std::span<const std::uint8_t> labels);

enum class EvalMode { Relaxed, Discrete };

// Relaxed: noise-free continuous forward, argmax of GroupSum. Discrete: the
// hardened snapshot evaluated on bytes. Parameters are never modified.
double evaluate(const Network& net, const BinarizedDataset& data, EvalMode mode, int threads = 1,
                std::size_t limit = 0);

// classify_gate over the hardened 2-input nodes of every layer.
std::array<std::uint64_t, 16> gate_histogram(const Network& net);

struct MetricsRecord {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_acc_relaxed = 0.0;
  double val_acc_discrete = 0.0;
  double gap = 0.0;
  std::array<std::uint64_t, 16> gate_histogram{};
  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

std::string metrics_csv_header();
std::string to_csv_row(const MetricsRecord& r);
nlohmann::json to_json(const MetricsRecord& r);

// Appends records to <stem>.csv and <stem>.jsonl, flushing after each one.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& stem);
  MetricsWriter(std::filesystem::path csv, std::filesystem::path jsonl);
  void write(const MetricsRecord& r);

  const std::filesystem::path& csv_path() const noexcept { return csv_path_; }
  const std::filesystem::path& jsonl_path() const noexcept { return jsonl_path_; }

 private:
  std::filesystem::path csv_path_, jsonl_path_;
  std::ofstream csv_, jsonl_;
};

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& file);
std::vector<MetricsRecord> read_metrics_jsonl(const std::filesystem::path& file);

// Thrown when the metrics sink fails; the records produced so far travel with it.
class MetricsIoError : public Error {
 public:
  MetricsIoError(const std::string& what, std::vector<MetricsRecord> partial)
      : Error(what), partial_(std::move(partial)) {}
  const std::vector<MetricsRecord>& partial() const noexcept { return partial_; }

 private:
  std::vector<MetricsRecord> partial_;
};

using ProgressFn = std::function<void(const MetricsRecord&)>;

// Trains for config.steps, evaluating on `val` every eval_every steps and at
// the final step. Batches come from a seeded per-epoch shuffle of `train`.
std::vector<MetricsRecord> run_training(Network& net, const BinarizedDataset& train,
                                        const BinarizedDataset& val, const TrainConfig& config,
                                        MetricsWriter* sink = nullptr,
                                        const ProgressFn& progress = {});

}  // namespace warplut
