#include "warplut/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "warplut/dlgn.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/netlist.hpp"
#include "warplut/network.hpp"
#include "warplut/relaxed_lut.hpp"
#include "warplut/truth_table.hpp"

namespace warplut {

namespace {

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SelftestResult catalog_round_trip(const GateCatalog& catalog) {
  int ok = 0;
  for (const auto& e : catalog) {
    const WalshCoeffs c = walsh_transform(e.table);
    bool same = true;
    for (std::size_t s = 0; s < 4; ++s) same = same && c[s] == e.coeffs[s];
    ok += same && nearest_truth_table(e.coeffs) == e.table && classify_gate(catalog, e.table) == e.id;
  }
  return {"catalog round trip", ok == 16, std::to_string(ok) + "/16 gates"};
}

SelftestResult transform_round_trip(std::mt19937_64& rng) {
  std::size_t total = 0, ok = 0;
  for (std::uint64_t m = 0; m < 256; ++m) {
    const TruthTable t(3, m);
    ok += nearest_truth_table(walsh_transform(t)) == t;
    ++total;
  }
  for (int n = 4; n <= kMaxArity; ++n) {
    for (int i = 0; i < 200; ++i) {
      std::uint64_t m = rng();
      if (n < 6) m &= (std::uint64_t{1} << (1u << n)) - 1;
      const TruthTable t(n, m);
      ok += nearest_truth_table(walsh_transform(t)) == t;
      ++total;
    }
  }
  return {"transform round trip", ok == total, std::to_string(ok) + "/" + std::to_string(total) + " tables"};
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}); }

SelftestResult gradient_check(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0), xin(0.05, 0.95), tau(0.1, 5.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<double> cv(std::size_t{1} << n), x(static_cast<std::size_t>(n));
    for (auto& v : cv) v = coef(rng);
    for (auto& v : x) v = xin(rng);
    RelaxParams p;
    p.tau_relax = tau(rng);
    const WalshCoeffs c(n, cv);
    const auto fwd = node_forward_with_noise(c, x, RelaxMode::Deterministic, p, 0.0);
    const auto g = node_backward(c, x, 1.0, RelaxMode::Deterministic, p, fwd.cache);
    for (std::size_t s = 0; s < cv.size(); ++s) {
      auto up = cv, dn = cv;
      up[s] += h;
      dn[s] -= h;
      const double fd = (relaxed_eval(WalshCoeffs(n, up), x, p) - relaxed_eval(WalshCoeffs(n, dn), x, p)) / (2 * h);
      worst = std::max(worst, rel_err(g.coeffs[s], fd));
    }
    for (int j = 0; j < n; ++j) {
      auto up = x, dn = x;
      up[j] += h;
      dn[j] -= h;
      const double fd = (relaxed_eval(c, up, p) - relaxed_eval(c, dn, p)) / (2 * h);
      worst = std::max(worst, rel_err(g.inputs[j], fd));
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::array<double, 16> lg{};
    for (auto& v : lg) v = 2.0 * coef(rng);
    const double a = xin(rng), b = xin(rng), t = tau(rng);
    const auto g = dlgn_node_backward(lg, a, b, t, 1.0);
    for (int k = 0; k < 16; ++k) {
      auto up = lg, dn = lg;
      up[k] += h;
      dn[k] -= h;
      const double fd = (dlgn_node_forward(up, a, b, t) - dlgn_node_forward(dn, a, b, t)) / (2 * h);
      worst = std::max(worst, rel_err(g.logits[k], fd));
    }
    const double fa = (dlgn_node_forward(lg, a + h, b, t) - dlgn_node_forward(lg, a - h, b, t)) / (2 * h);
    const double fb = (dlgn_node_forward(lg, a, b + h, t) - dlgn_node_forward(lg, a, b - h, t)) / (2 * h);
    worst = std::max({worst, rel_err(g.a, fa), rel_err(g.b, fb)});
  }
  return {"gradient check", worst < 1e-4, "max relative error " + fmt_double("%.3e", worst)};
}

SelftestResult gumbel_marginals(std::uint64_t seed) {
  const int samples = 100000;
  double worst = 0.0;
  for (int l = -2; l <= 2; ++l) {
    const WalshCoeffs c(2, {static_cast<double>(l), 0.0, 0.0, 0.0});
    const std::array<double, 2> x{0.5, 0.5};
    RelaxParams p;
    CounterStream rng(derive_seed(seed, static_cast<std::uint64_t>(l + 2)));
    int hits = 0;
    for (int i = 0; i < samples; ++i) hits += gumbel_eval(c, x, p, rng) >= 0.5;
    worst = std::max(worst, std::fabs(hits / static_cast<double>(samples) - sigmoid(static_cast<double>(l))));
  }
  return {"gumbel marginals", worst <= 0.01, "max |P - sigmoid(l)| " + fmt_double("%.4f", worst)};
}

SelftestResult simd_equivalence(std::mt19937_64& rng) {
  const simd::Kernels* fast = simd::avx2_kernels();
  if (!fast) return {"simd equivalence", true, "avx2 unavailable, scalar only"};
  const simd::Kernels& ref = simd::scalar_kernels();
  const std::size_t lanes = 203;
  std::uniform_real_distribution<float> u(0.0f, 1.0f), cu(-2.0f, 2.0f);
  std::vector<float> a(lanes), b(lanes), noise(lanes), go(lanes);
  for (std::size_t i = 0; i < lanes; ++i) a[i] = u(rng), b[i] = u(rng), noise[i] = cu(rng), go[i] = cu(rng);
  const float coeffs[4] = {cu(rng), cu(rng), cu(rng), cu(rng)};
  double worst = 0.0;
  for (int hard = 0; hard < 2; ++hard) {
    std::vector<float> o1(lanes), s1(lanes), o2(lanes), s2(lanes);
    ref.warp2_forward({coeffs, a.data(), b.data(), noise.data(), 0.7f, hard != 0, false, o1.data(), s1.data(), lanes});
    fast->warp2_forward({coeffs, a.data(), b.data(), noise.data(), 0.7f, hard != 0, false, o2.data(), s2.data(), lanes});
    for (std::size_t i = 0; i < lanes; ++i) {
      worst = std::max<double>({worst, std::fabs(o1[i] - o2[i]), std::fabs(s1[i] - s2[i])});
    }
    float g1[4] = {}, g2[4] = {};
    std::vector<float> ga1(lanes), gb1(lanes), ga2(lanes), gb2(lanes);
    ref.warp2_backward({coeffs, a.data(), b.data(), s1.data(), go.data(), 0.7f, g1, ga1.data(), gb1.data(), lanes});
    fast->warp2_backward({coeffs, a.data(), b.data(), s1.data(), go.data(), 0.7f, g2, ga2.data(), gb2.data(), lanes});
    for (int k = 0; k < 4; ++k) worst = std::max<double>(worst, std::fabs(g1[k] - g2[k]) / std::max(1.0f, std::fabs(g1[k])));
    for (std::size_t i = 0; i < lanes; ++i) {
      worst = std::max<double>({worst, std::fabs(ga1[i] - ga2[i]), std::fabs(gb1[i] - gb2[i])});
    }
  }
  return {"simd equivalence", worst < 1e-5, "max deviation " + fmt_double("%.2e", worst)};
}

SelftestResult netlist_equivalence(std::uint64_t seed) {
  ArchitectureSpec spec;
  spec.input = Shape3{2, 4, 4};
  spec.seed = seed;
  ConvSpec conv;
  conv.out_channels = 4;
  conv.depth = 2;
  conv.seed = derive_seed(seed, 1);
  DenseSpec d1;
  d1.nodes = 24;
  d1.arity = 3;
  d1.seed = derive_seed(seed, 2);
  DenseSpec d2;
  d2.nodes = 20;
  d2.seed = derive_seed(seed, 3);
  spec.layers = {conv, d1, d2};
  spec.group_sum = GroupSumSpec{4, 1.0};
  const Network net = build_network(spec);
  const HardenedModel ref(net);
  const Netlist nl = harden(net);

  std::mt19937_64 rng(seed);
  const std::size_t n = 300, f = spec.input.size();
  std::vector<std::uint8_t> ex(n * f);
  for (auto& v : ex) v = static_cast<std::uint8_t>(rng() & 1u);
  const auto counts = netlist_eval(nl, pack_inputs(ex, f));
  std::size_t agree = 0;
  for (std::size_t e = 0; e < n; ++e) {
    const auto want = ref.class_counts(std::span<const std::uint8_t>(ex.data() + e * f, f));
    agree += std::equal(want.begin(), want.end(), counts.begin() + static_cast<std::ptrdiff_t>(e * 4));
  }
  return {"netlist equivalence", agree == n, std::to_string(agree) + "/" + std::to_string(n) + " examples"};
}

}  // namespace

std::vector<SelftestResult> run_selftest(const SelftestOptions& options) {
  std::mt19937_64 rng(options.seed);
  GateCatalog catalog = gate_catalog();
  if (options.corrupt_catalog) {
    catalog[kXor].coeffs.values()[0] = 0.5;
  }
  std::vector<SelftestResult> out;
  out.push_back(catalog_round_trip(catalog));
  out.push_back(transform_round_trip(rng));
  out.push_back(gradient_check(rng));
  out.push_back(gumbel_marginals(options.seed));
  out.push_back(simd_equivalence(rng));
  out.push_back(netlist_equivalence(options.seed));
  return out;
}

}  // namespace warplut
