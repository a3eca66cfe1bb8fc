#pragma once

#include <array>
#include <span>

#include "warplut/gate_catalog.hpp"

namespace warplut {

inline constexpr int kDlgnParamCount = 16;

// Multilinear extension of catalog gate gate_id at (a, b) in [0,1]^2, with
// corner weights (1-a)(1-b), (1-a)b, a(1-b), ab in corner order.
double relaxed_gate(int gate_id, double a, double b);

// Softmax(logits / temperature), numerically stable.
std::array<double, kDlgnParamCount> dlgn_probabilities(std::span<const double> logits,
                                                       double temperature);

// Mixture weights collapsed onto the four corners: q_k = sum_g p_g tt_g[k].
// The node output is then the multilinear interpolation of q.
std::array<double, 4> dlgn_corner_values(std::span<const double> logits, double temperature);

double dlgn_node_forward(std::span<const double> logits, double a, double b, double temperature);

// Argmax over logits, lowest id on ties.
int dlgn_harden(std::span<const double> logits);
int dlgn_harden(std::span<const float> logits);

// Gradient of the node output with respect to logits, a and b.
struct DlgnGradients {
  std::array<double, kDlgnParamCount> logits{};
  double a = 0.0;
  double b = 0.0;
};
DlgnGradients dlgn_node_backward(std::span<const double> logits, double a, double b,
                                 double temperature, double upstream);

// Back-propagates d out / d q_k through the softmax onto the logits.
template <class T>
void dlgn_corner_grad_to_logits(const T* probs, const T* dq, T inv_temperature, T* dlogits) {
  const auto& catalog = gate_catalog();
  T v[kDlgnParamCount];
  T mean = 0;
  for (int g = 0; g < kDlgnParamCount; ++g) {
    T acc = 0;
    for (int k = 0; k < 4; ++k) {
      if (catalog[g].table.bit(k)) acc += dq[k];
    }
    v[g] = acc;
    mean += probs[g] * acc;
  }
  for (int g = 0; g < kDlgnParamCount; ++g) dlogits[g] = probs[g] * (v[g] - mean) * inv_temperature;
}

}  // namespace warplut
