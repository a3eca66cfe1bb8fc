#include "warplut/dlgn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "warplut/error.hpp"

namespace warplut {

namespace {

void check_logits(std::size_t n) {
  if (n != kDlgnParamCount) {
    throw ShapeError("DLGN node expects 16 logits, got " + std::to_string(n));
  }
}

std::array<double, 4> corner_weights(double a, double b) {
  return {(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b};
}

}  // namespace

double relaxed_gate(int gate_id, double a, double b) {
  if (gate_id < 0 || gate_id >= kGateCount) {
    throw ShapeError("gate id out of range: " + std::to_string(gate_id));
  }
  const auto& table = gate_catalog()[gate_id].table;
  const auto w = corner_weights(a, b);
  double out = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (table.bit(k)) out += w[k];
  }
  return out;
}

std::array<double, kDlgnParamCount> dlgn_probabilities(std::span<const double> logits,
                                                       double temperature) {
  check_logits(logits.size());
  if (!(temperature > 0.0)) throw ConfigError("DLGN temperature must be positive");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::array<double, kDlgnParamCount> p{};
  double total = 0.0;
  for (int g = 0; g < kDlgnParamCount; ++g) {
    p[g] = std::exp((logits[g] - peak) / temperature);
    total += p[g];
  }
  for (double& v : p) v /= total;
  return p;
}

std::array<double, 4> dlgn_corner_values(std::span<const double> logits, double temperature) {
  const auto p = dlgn_probabilities(logits, temperature);
  const auto& catalog = gate_catalog();
  std::array<double, 4> q{};
  for (int g = 0; g < kDlgnParamCount; ++g) {
    for (int k = 0; k < 4; ++k) {
      if (catalog[g].table.bit(k)) q[k] += p[g];
    }
  }
  return q;
}

double dlgn_node_forward(std::span<const double> logits, double a, double b, double temperature) {
  const auto q = dlgn_corner_values(logits, temperature);
  const auto w = corner_weights(a, b);
  return q[0] * w[0] + q[1] * w[1] + q[2] * w[2] + q[3] * w[3];
}

int dlgn_harden(std::span<const double> logits) {
  check_logits(logits.size());
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

int dlgn_harden(std::span<const float> logits) {
  check_logits(logits.size());
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

DlgnGradients dlgn_node_backward(std::span<const double> logits, double a, double b,
                                 double temperature, double upstream) {
  const auto p = dlgn_probabilities(logits, temperature);
  const auto q = dlgn_corner_values(logits, temperature);
  const auto w = corner_weights(a, b);
  DlgnGradients g;
  std::array<double, 4> dq{};
  for (int k = 0; k < 4; ++k) dq[k] = upstream * w[k];
  dlgn_corner_grad_to_logits(p.data(), dq.data(), 1.0 / temperature, g.logits.data());
  g.a = upstream * ((q[2] - q[0]) * (1 - b) + (q[3] - q[1]) * b);
  g.b = upstream * ((q[1] - q[0]) * (1 - a) + (q[3] - q[2]) * a);
  return g;
}

}  // namespace warplut
