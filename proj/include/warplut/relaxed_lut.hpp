#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "warplut/random.hpp"
#include "warplut/truth_table.hpp"

namespace warplut {

enum class RelaxMode { Deterministic, GumbelSigmoid, StraightThrough };

struct RelaxParams {
  double tau_relax = 1.0;
  // Adds logistic noise to the soft value thresholded by StraightThrough.
  bool gumbel_enabled = false;
  std::uint64_t rng_seed = 0;
  // StraightThrough backward uses the noisy soft value instead of the clean one.
  bool ste_noisy_backward = false;
};

void validate(const RelaxParams& params);

// 2x - 1 after clamping x to [0, 1].
template <class T>
constexpr T b_tilde(T x) noexcept {
  x = x < T(0) ? T(0) : (x > T(1) ? T(1) : x);
  return T(2) * x - T(1);
}

// Overflow-free logistic function.
template <class T>
T sigmoid(T z) noexcept {
  if (z >= T(0)) {
    return T(1) / (T(1) + std::exp(-z));
  }
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// Fills products[S] = prod_{i in S} signed[i] for every subset S and returns
// sum_S coeffs[S] * products[S].
template <class T>
T walsh_polynomial(const T* coeffs, const T* signed_inputs, int arity, T* products) noexcept {
  const std::size_t size = std::size_t{1} << arity;
  products[0] = T(1);
  T acc = coeffs[0];
  for (std::size_t s = 1; s < size; ++s) {
    const int low = __builtin_ctzll(s);
    products[s] = products[s & (s - 1)] * signed_inputs[low];
    acc += coeffs[s] * products[s];
  }
  return acc;
}

// d l / d signed[j] = sum_{S containing j} c_S prod_{i in S \ j} signed[i].
template <class T>
void walsh_polynomial_input_grad(const T* coeffs, const T* products, int arity, T* grad) noexcept {
  const std::size_t size = std::size_t{1} << arity;
  for (int j = 0; j < arity; ++j) grad[j] = T(0);
  for (std::size_t s = 1; s < size; ++s) {
    for (int j = 0; j < arity; ++j) {
      const std::size_t bit = std::size_t{1} << j;
      if (s & bit) grad[j] += coeffs[s] * products[s ^ bit];
    }
  }
}

double relaxed_logit(const WalshCoeffs& coeffs, std::span<const double> x);
double relaxed_eval(const WalshCoeffs& coeffs, std::span<const double> x, const RelaxParams& params);

// Logistic(0,1) sample log(u / (1 - u)); distributed as the difference of two
// independent standard Gumbel variables.
double logistic_from_uniform(double u) noexcept;

template <class Rng>
double gumbel_noise(Rng& rng) {
  return logistic_from_uniform(bits_to_open01(static_cast<std::uint64_t>(rng())));
}

// Draws its own noise from rng.
template <class Rng>
double gumbel_eval(const WalshCoeffs& coeffs, std::span<const double> x, const RelaxParams& params,
                   Rng& rng);
double gumbel_eval_with_noise(const WalshCoeffs& coeffs, std::span<const double> x,
                              const RelaxParams& params, double noise);

// Everything node_backward needs from the forward pass.
struct NodeCache {
  double logit = 0.0;
  double noise = 0.0;
  double soft = 0.5;  // soft value whose derivative drives the backward pass
};

struct NodeForward {
  double value = 0.0;
  NodeCache cache;
};

NodeForward node_forward_with_noise(const WalshCoeffs& coeffs, std::span<const double> x,
                                    RelaxMode mode, const RelaxParams& params, double noise);

template <class Rng>
NodeForward node_forward(const WalshCoeffs& coeffs, std::span<const double> x, RelaxMode mode,
                         const RelaxParams& params, Rng& rng) {
  const bool noisy = mode == RelaxMode::GumbelSigmoid ||
                     (mode == RelaxMode::StraightThrough && params.gumbel_enabled);
  const double noise = noisy ? gumbel_noise(rng) : 0.0;
  return node_forward_with_noise(coeffs, x, mode, params, noise);
}

struct NodeGradients {
  std::vector<double> coeffs;
  std::vector<double> inputs;
};

NodeGradients node_backward(const WalshCoeffs& coeffs, std::span<const double> x,
                            double upstream_grad, RelaxMode mode, const RelaxParams& params,
                            const std::optional<NodeCache>& cache);

template <class Rng>
double gumbel_eval(const WalshCoeffs& coeffs, std::span<const double> x, const RelaxParams& params,
                   Rng& rng) {
  return gumbel_eval_with_noise(coeffs, x, params, gumbel_noise(rng));
}

}  // namespace warplut
