#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "warplut/architecture.hpp"
#include "warplut/data.hpp"
#include "warplut/train.hpp"

namespace warplut::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kConfigOrData = 2, kCheckpoint = 3 };

struct DatasetSpec {
  std::string kind = "parity";  // parity | cifar10 | cache
  int parity_k = 4;
  std::filesystem::path dir;    // cifar10: batch directory; cache: file
  int n_bits = 3;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::size_t train_subset = 0;  // 0 keeps the whole split
  std::size_t val_subset = 0;
};

struct RunConfig {
  ArchitectureSpec architecture;
  nlohmann::json architecture_doc;
  TrainConfig train;
  DatasetSpec dataset;
  std::filesystem::path output_dir = "runs/default";
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> mode;
  std::optional<std::filesystem::path> out;
};

// Relative paths resolve against the config file's directory. A cifar10
// dataset without "dir" falls back to $WARPLUT_DATA.
RunConfig load_run_config(const std::filesystem::path& file, const Overrides& overrides = {});
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base,
                           const Overrides& overrides = {});
nlohmann::json to_json(const RunConfig& config);

struct Splits {
  BinarizedDataset train;
  BinarizedDataset val;
};
Splits load_dataset(const DatasetSpec& spec);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace warplut::cli
