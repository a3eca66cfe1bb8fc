#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "warplut/network.hpp"

namespace warplut {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is <name>.json (architecture, per-layer layout, blob size and
// hash) next to <name>.bin (every parameter as little-endian float32, layers in
// order). Wiring is rebuilt from the resolved per-layer seeds and checked
// against a stored hash.
struct Checkpoint {
  Network net;
  nlohmann::json extra;  // free-form run metadata (train config, step)
};

void save_checkpoint(const Network& net, const std::filesystem::path& json_path,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& json_path);

// FNV-1a over connections and taps.
std::string wiring_hash(const Network& net);

}  // namespace warplut
