#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "warplut/checkpoint.hpp"
#include "warplut/error.hpp"
#include "warplut/gate_catalog.hpp"
#include "warplut/netlist.hpp"
#include "warplut/selftest.hpp"
#include "warplut/simd/kernels.hpp"

namespace warplut::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& file, const char* what) {
  std::ifstream in(file);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + " " + file.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

DatasetSpec parse_dataset(const json& d, const fs::path& base) {
  reject_unknown_keys(d, {"kind", "k", "dir", "path", "n_bits", "train_fraction", "split_seed",
                          "train_subset", "val_subset"},
                      "dataset");
  DatasetSpec s;
  s.kind = d.value("kind", s.kind);
  s.parity_k = d.value("k", s.parity_k);
  s.n_bits = d.value("n_bits", s.n_bits);
  s.train_fraction = d.value("train_fraction", s.train_fraction);
  s.split_seed = d.value("split_seed", s.split_seed);
  s.train_subset = d.value("train_subset", s.train_subset);
  s.val_subset = d.value("val_subset", s.val_subset);
  if (s.kind == "cifar10") {
    if (d.contains("dir")) {
      s.dir = resolve(base, d["dir"].get<std::string>());
    } else if (const char* env = std::getenv("WARPLUT_DATA"); env && *env) {
      s.dir = env;
    } else {
      throw ConfigError("cifar10 dataset needs \"dir\" or the WARPLUT_DATA environment variable");
    }
    if (!fs::is_directory(s.dir)) throw DataError("dataset directory not found: " + s.dir.string(), s.dir.string());
  } else if (s.kind == "cache") {
    s.dir = resolve(base, d.at("path").get<std::string>());
    if (!fs::exists(s.dir)) throw DataError("dataset cache not found: " + s.dir.string(), s.dir.string());
  } else if (s.kind != "parity") {
    throw ConfigError("unknown dataset kind '" + s.kind + "' (parity, cifar10, cache)");
  }
  return s;
}

json dataset_to_json(const DatasetSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "parity") {
    j["k"] = s.parity_k;
    return j;
  }
  j[s.kind == "cache" ? "path" : "dir"] = s.dir.string();
  j["n_bits"] = s.n_bits;
  j["train_fraction"] = s.train_fraction;
  j["split_seed"] = s.split_seed;
  j["train_subset"] = s.train_subset;
  j["val_subset"] = s.val_subset;
  return j;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const fs::path& base, const Overrides& ov) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  reject_unknown_keys(doc, {"architecture", "train", "dataset", "output_dir", "node_kind", "init"}, "config");
  RunConfig rc;
  try {
    json arch;
    if (!doc.contains("architecture")) throw ConfigError("config needs an \"architecture\"");
    if (doc["architecture"].is_string()) {
      arch = read_json_file(resolve(base, doc["architecture"].get<std::string>()), "architecture file");
    } else {
      arch = doc["architecture"];
    }
    if (!arch.is_object()) throw ConfigError("architecture must be an object or a file path");
    for (const char* key : {"node_kind", "init"}) {
      if (!doc.contains(key)) continue;
      arch[key] = doc[key];
      if (arch.contains("layers")) {
        for (auto& l : arch["layers"]) l.erase(key);
      }
    }
    if (ov.seed) arch["seed"] = *ov.seed;
    rc.architecture = parse_architecture(arch);
    rc.architecture_doc = to_json(rc.architecture);

    json train = doc.value("train", json::object());
    if (ov.seed) train["seed"] = *ov.seed;
    if (ov.threads) train["threads"] = *ov.threads;
    if (ov.mode) train["mode"] = *ov.mode;
    rc.train = parse_train_config(train);

    rc.dataset = parse_dataset(doc.value("dataset", json{{"kind", "parity"}}), base);
    if (doc.contains("output_dir")) rc.output_dir = resolve(base, doc["output_dir"].get<std::string>());
    if (ov.out) rc.output_dir = *ov.out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const fs::path& file, const Overrides& ov) {
  return parse_run_config(read_json_file(file, "config"), file.parent_path(), ov);
}

json to_json(const RunConfig& c) {
  return json{{"architecture", c.architecture_doc},
              {"train", warplut::to_json(c.train)},
              {"dataset", dataset_to_json(c.dataset)},
              {"output_dir", c.output_dir.string()}};
}

Splits load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "parity") {
    // The whole truth table serves as both training and validation set.
    BinarizedDataset d = make_parity_dataset(spec.parity_k);
    return {d, d};
  }
  BinarizedDataset all;
  if (spec.kind == "cache") {
    all = read_dataset_cache(spec.dir);
  } else {
    const Cifar10 raw = load_cifar10_binary(spec.dir);
    all = thermometer_encode(raw.train, EncoderSpec::uniform(spec.n_bits));
  }
  auto [train, val] = split_train_val(all, spec.train_fraction, spec.split_seed);
  auto trim = [](BinarizedDataset& d, std::size_t n, const char* tag) {
    if (n == 0 || n >= d.count) return;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    d = subset(d, idx, tag);
  };
  trim(train, spec.train_subset, "train");
  trim(val, spec.val_subset, "val");
  return {std::move(train), std::move(val)};
}

namespace {

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + file.string());
}

json histogram_json(const std::array<std::uint64_t, 16>& h) {
  json j = json::object();
  for (const auto& e : gate_catalog()) j[std::string(e.mnemonic)] = h[e.id];
  return j;
}

int cmd_train(const fs::path& config_path, const Overrides& ov, std::ostream& out) {
  RunConfig rc = load_run_config(config_path, ov);
  const Splits data = load_dataset(rc.dataset);
  fs::create_directories(rc.output_dir);
  write_json(rc.output_dir / "config.effective.json", to_json(rc));

  Network net = build_network(rc.architecture);
  fmt::print(out, "training {} nodes / {} parameters, {} steps, mode {}, kernels {}\n", net.node_count(),
             net.param_count(), rc.train.steps, to_string(rc.train.mode), simd::active_kernels().name);
  MetricsWriter sink(rc.output_dir / "metrics");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<MetricsRecord> records;
  try {
    records = run_training(net, data.train, data.val, rc.train, &sink, [&](const MetricsRecord& r) {
      fmt::print(out, "step {:>7}  loss {:.4f}  relaxed {:.4f}  discrete {:.4f}  gap {:+.4f}\n", r.step,
                 r.train_loss, r.val_acc_relaxed, r.val_acc_discrete, r.gap);
      out.flush();
    });
  } catch (const MetricsIoError& e) {
    fmt::print(out, "metrics sink failed after {} records\n", e.partial().size());
    throw;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(net, rc.output_dir / "checkpoint.json",
                  json{{"run_config", to_json(rc)}, {"step", rc.train.steps}});
  write_json(rc.output_dir / "gate_histogram.json", histogram_json(gate_histogram(net)));
  {
    std::ofstream plot(rc.output_dir / "plot_accuracy.csv", std::ios::trunc);
    plot << "step,relaxed,discrete\n";
    for (const auto& r : records) plot << r.step << ',' << r.val_acc_relaxed << ',' << r.val_acc_discrete << '\n';
  }
  const auto& last = records.back();
  fmt::print(out, "done in {:.1f}s: relaxed {:.4f}, discrete {:.4f}, outputs in {}\n", secs,
             last.val_acc_relaxed, last.val_acc_discrete, rc.output_dir.string());
  return kOk;
}

Checkpoint load_ck(const fs::path& p) {
  if (p.empty()) throw ConfigError("--checkpoint is required");
  return load_checkpoint(p);
}

DatasetSpec dataset_for_eval(const Checkpoint& ck, const fs::path& config_path, const Overrides& ov) {
  if (!config_path.empty()) return load_run_config(config_path, ov).dataset;
  if (!ck.extra.contains("run_config")) {
    throw ConfigError("checkpoint carries no dataset; pass --config");
  }
  const json& d = ck.extra["run_config"].at("dataset");
  return parse_dataset(d, {});
}

int cmd_eval(const fs::path& ck_path, const fs::path& config_path, const std::string& mode, const Overrides& ov,
             std::ostream& out) {
  Checkpoint ck = load_ck(ck_path);
  const Splits data = load_dataset(dataset_for_eval(ck, config_path, ov));
  const int threads = ov.threads.value_or(1);
  json result{{"checkpoint", ck_path.string()}, {"examples", data.val.count}};
  if (mode == "relaxed") {
    const double acc = evaluate(ck.net, data.val, EvalMode::Relaxed, threads);
    result["mode"] = "relaxed";
    result["accuracy"] = acc;
  } else if (mode == "discrete") {
    const Netlist nl = harden(ck.net);
    const auto counts = netlist_eval(nl, pack_inputs(data.val.inputs, nl.input_count));
    const auto pred = predict(nl, counts);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.val.labels[i];
    result["mode"] = "discrete";
    result["accuracy"] = data.val.count ? static_cast<double>(hit) / static_cast<double>(data.val.count) : 0.0;
    result["circuit_stats"] = to_json(circuit_stats(nl));
  } else {
    throw ConfigError("eval --mode must be relaxed or discrete");
  }
  fmt::print(out, "{} accuracy {:.6f} on {} examples\n", mode, result["accuracy"].get<double>(), data.val.count);
  const fs::path dir = ov.out.value_or(ck_path.parent_path());
  if (!dir.empty()) fs::create_directories(dir);
  write_json(dir / ("eval_" + mode + ".json"), result);
  return kOk;
}

void print_stats(std::ostream& out, const CircuitStats& s) {
  fmt::print(out, "gates {} (structural {}), 2-input {}, identity fraction {:.4f}, depth {}\n", s.total_nodes,
             s.structural_nodes, s.two_input_nodes, s.identity_fraction, s.depth);
  for (const auto& e : gate_catalog()) {
    if (s.gate_counts[e.id]) fmt::print(out, "  {:<7} {}\n", e.mnemonic, s.gate_counts[e.id]);
  }
}

int cmd_export(const fs::path& ck_path, const std::string& format, bool fold, const Overrides& ov,
               std::ostream& out) {
  Checkpoint ck = load_ck(ck_path);
  const NetlistFormat f = parse_netlist_format(format);
  Netlist nl = harden(ck.net);
  const CircuitStats before = circuit_stats(nl);
  print_stats(out, before);
  if (fold) {
    FoldResult r = fold_identities(nl);
    fmt::print(out, "folded {} identity gates, {} gates remain\n", r.removed, r.netlist.nodes.size());
    nl = std::move(r.netlist);
  }
  fs::path file = ov.out.value_or(ck_path.parent_path() / "netlist");
  if (fs::is_directory(file)) file /= "netlist";
  if (!file.has_extension()) file += f == NetlistFormat::Json ? ".json" : ".logic";
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  export_netlist(nl, f, file);
  fmt::print(out, "wrote {}\n", file.string());
  return kOk;
}

int cmd_inspect(const fs::path& ck_path, const fs::path& config_path, const fs::path& netlist_path,
                std::ostream& out) {
  if (!netlist_path.empty()) {
    print_stats(out, circuit_stats(load_netlist_json(netlist_path)));
    return kOk;
  }
  Network net;
  if (!ck_path.empty()) {
    net = load_ck(ck_path).net;
  } else if (!config_path.empty()) {
    net = build_network(load_run_config(config_path).architecture);
  } else {
    throw ConfigError("inspect needs --checkpoint, --config or --netlist");
  }
  fmt::print(out, "input {}x{}x{}, {} classes, GroupSum tau {}\n", net.input_shape().channels,
             net.input_shape().height, net.input_shape().width, net.class_count(), net.readout.tau_group);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const NodeBank& b = net.bank(i);
    const bool conv = std::holds_alternative<ResidualLogicBlock>(net.layers[i]);
    fmt::print(out, "  layer {} {:<5} {:<4} arity {}  nodes {:>8}  params {:>9}\n", i, conv ? "conv" : "dense",
               to_string(b.kind), b.arity, b.count, b.params.size());
  }
  fmt::print(out, "total: {} nodes, {} parameters\n", net.node_count(), net.param_count());
  const auto h = gate_histogram(net);
  for (const auto& e : gate_catalog()) {
    if (h[e.id]) fmt::print(out, "  {:<7} {}\n", e.mnemonic, h[e.id]);
  }
  return kOk;
}

int cmd_selftest(bool corrupt, std::ostream& out) {
  SelftestOptions opt;
  opt.corrupt_catalog = corrupt;
  const auto results = run_selftest(opt);
  bool all = true;
  for (const auto& r : results) {
    fmt::print(out, "{:<22} {}  {}\n", r.name, r.passed ? "PASS" : "FAIL", r.detail);
    all = all && r.passed;
  }
  fmt::print(out, "{}\n", all ? "all checks passed" : "selftest FAILED");
  return all ? kOk : kRuntime;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"warplut: Walsh-relaxed LUT network training and logic compilation"};
  app.require_subcommand(1);

  std::string config, checkpoint, netlist_file, mode, format = "json", out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool fold = false, corrupt = false;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config, "run config (JSON)")->required();
  auto* seed_opt = train->add_option("--seed", seed, "override the architecture and training seed");
  auto* thr_train = train->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* mode_train = train->add_option("--mode", mode, "relaxation: deterministic | gumbel | ste");
  auto* out_train = train->add_option("--out", out_dir, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its validation split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  eval->add_option("--config", config, "run config supplying the dataset");
  eval->add_option("--mode", mode, "relaxed | discrete")->default_str("discrete");
  auto* thr_eval = eval->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* out_eval = eval->add_option("--out", out_dir, "directory for the result JSON");

  auto* exp = app.add_subcommand("export", "harden a checkpoint into a netlist");
  exp->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  exp->add_option("--format", format, "json | logic-text");
  exp->add_flag("--fold-identities", fold, "remove ID(A)/ID(B) gates by rewiring");
  auto* out_exp = exp->add_option("--out", out_dir, "output file or directory");

  auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint, config or netlist");
  inspect->add_option("--checkpoint", checkpoint, "checkpoint JSON");
  inspect->add_option("--config", config, "run config");
  inspect->add_option("--netlist", netlist_file, "netlist JSON");

  auto* self = app.add_subcommand("selftest", "run the embedded invariant suite");
  self->add_flag("--corrupt-catalog", corrupt, "test hook: check against a corrupted gate catalog")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigOrData;
  }

  Overrides ov;
  if (*seed_opt) ov.seed = seed;
  if (*thr_train || *thr_eval) ov.threads = threads;
  if (*mode_train) ov.mode = mode;
  if (*out_train || *out_eval || *out_exp) ov.out = fs::path(out_dir);

  try {
    if (*train) return cmd_train(config, ov, out);
    if (*eval) return cmd_eval(checkpoint, config, mode.empty() ? "discrete" : mode, ov, out);
    if (*exp) return cmd_export(checkpoint, format, fold, ov, out);
    if (*inspect) return cmd_inspect(checkpoint, config, netlist_file, out);
    if (*self) return cmd_selftest(corrupt, out);
  } catch (const CheckpointError& e) {
    fmt::print(err, "checkpoint error: {}\n", e.what());
    return kCheckpoint;
  } catch (const DataError& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kConfigOrData;
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kConfigOrData;
  } catch (const DivergenceError& e) {
    fmt::print(err, "training diverged at step {} (layer {}, max |param| {}): {}\n", e.step(), e.layer(),
               e.max_abs_param(), e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace warplut::cli
