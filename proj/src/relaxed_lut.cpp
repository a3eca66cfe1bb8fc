#include "warplut/relaxed_lut.hpp"

#include <array>
#include <string>

#include "warplut/error.hpp"

namespace warplut {

void validate(const RelaxParams& params) {
  if (!(params.tau_relax > 0.0)) {
    throw ConfigError("tau_relax must be positive, got " + std::to_string(params.tau_relax));
  }
}

namespace {

struct Expansion {
  std::array<double, kMaxArity> signed_inputs{};
  std::array<double, std::size_t{1} << kMaxArity> products{};
  double logit = 0.0;
};

Expansion expand(const WalshCoeffs& coeffs, std::span<const double> x) {
  const int n = coeffs.arity();
  if (x.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("node expects " + std::to_string(n) + " inputs, got " +
                     std::to_string(x.size()));
  }
  Expansion e;
  for (int i = 0; i < n; ++i) e.signed_inputs[i] = b_tilde(x[i]);
  e.logit = walsh_polynomial(coeffs.values().data(), e.signed_inputs.data(), n, e.products.data());
  return e;
}

}  // namespace

double relaxed_logit(const WalshCoeffs& coeffs, std::span<const double> x) {
  return expand(coeffs, x).logit;
}

double relaxed_eval(const WalshCoeffs& coeffs, std::span<const double> x,
                    const RelaxParams& params) {
  validate(params);
  return sigmoid(relaxed_logit(coeffs, x) / params.tau_relax);
}

double logistic_from_uniform(double u) noexcept { return std::log(u) - std::log1p(-u); }

double gumbel_eval_with_noise(const WalshCoeffs& coeffs, std::span<const double> x,
                              const RelaxParams& params, double noise) {
  validate(params);
  return sigmoid((relaxed_logit(coeffs, x) + noise) / params.tau_relax);
}

NodeForward node_forward_with_noise(const WalshCoeffs& coeffs, std::span<const double> x,
                                    RelaxMode mode, const RelaxParams& params, double noise) {
  validate(params);
  const double logit = relaxed_logit(coeffs, x);
  const double tau = params.tau_relax;
  NodeForward out;
  out.cache.logit = logit;
  switch (mode) {
    case RelaxMode::Deterministic:
      out.cache.noise = 0.0;
      out.cache.soft = sigmoid(logit / tau);
      out.value = out.cache.soft;
      break;
    case RelaxMode::GumbelSigmoid:
      out.cache.noise = noise;
      out.cache.soft = sigmoid((logit + noise) / tau);
      out.value = out.cache.soft;
      break;
    case RelaxMode::StraightThrough: {
      const double fwd_noise = params.gumbel_enabled ? noise : 0.0;
      // Compare logits rather than sigmoid outputs: sigma(z) rounds to 0.5
      // for tiny negative z.
      out.value = (logit + fwd_noise) >= 0.0 ? 1.0 : 0.0;
      out.cache.noise = params.ste_noisy_backward ? fwd_noise : 0.0;
      out.cache.soft = sigmoid((logit + out.cache.noise) / tau);
      break;
    }
  }
  return out;
}

NodeGradients node_backward(const WalshCoeffs& coeffs, std::span<const double> x,
                            double upstream_grad, RelaxMode /*mode*/, const RelaxParams& params,
                            const std::optional<NodeCache>& cache) {
  if (!cache) throw MissingCacheError("node_backward called without a forward cache");
  validate(params);
  const int n = coeffs.arity();
  const Expansion e = expand(coeffs, x);
  const double s = cache->soft;
  const double dz = upstream_grad * s * (1.0 - s) / params.tau_relax;

  NodeGradients g;
  g.coeffs.resize(coeffs.size());
  for (std::size_t t = 0; t < coeffs.size(); ++t) g.coeffs[t] = dz * e.products[t];

  std::array<double, kMaxArity> dsigned{};
  walsh_polynomial_input_grad(coeffs.values().data(), e.products.data(), n, dsigned.data());
  g.inputs.resize(n);
  for (int j = 0; j < n; ++j) g.inputs[j] = dz * 2.0 * dsigned[j];
  return g;
}

}  // namespace warplut
