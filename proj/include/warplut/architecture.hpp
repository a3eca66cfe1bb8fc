#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace warplut {

enum class NodeKind { Warp, Dlgn };

std::string to_string(NodeKind kind);
NodeKind parse_node_kind(const std::string& text);

struct Shape3 {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct InitScheme {
  enum class Kind { Random, Residual };
  Kind kind = Kind::Random;
  double gamma = 1.0;  // Residual only
  double sigma = 1.0;

  static InitScheme random(double sigma) { return {Kind::Random, 1.0, sigma}; }
  static InitScheme residual(double gamma, double sigma) { return {Kind::Residual, gamma, sigma}; }
  friend bool operator==(const InitScheme&, const InitScheme&) = default;
};

void validate(const InitScheme& scheme);

// Defaults when the document leaves gamma/sigma out.
InitScheme default_init(InitScheme::Kind kind, NodeKind node_kind);

struct DenseSpec {
  std::size_t nodes = 0;
  int arity = 2;
  NodeKind node_kind = NodeKind::Warp;
  InitScheme init;
  std::uint64_t seed = 0;
  double dlgn_temperature = 1.0;
  // Explicit wiring, one row of `arity` input indices per node; random when empty.
  std::vector<std::vector<std::uint32_t>> connections;

  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

struct ConvSpec {
  int out_channels = 0;
  int depth = 3;
  NodeKind node_kind = NodeKind::Warp;
  InitScheme init;
  std::uint64_t seed = 0;
  double dlgn_temperature = 1.0;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

using LayerSpec = std::variant<DenseSpec, ConvSpec>;

struct GroupSumSpec {
  int classes = 10;
  double tau = 1.0;
  friend bool operator==(const GroupSumSpec&, const GroupSumSpec&) = default;
};

// Declarative network description: optional convolutional block(s), implicit
// flatten, dense LUT layers, GroupSum readout.
struct ArchitectureSpec {
  Shape3 input;
  std::uint64_t seed = 0;
  std::vector<LayerSpec> layers;
  GroupSumSpec group_sum;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// Layer-level node_kind/init/seed fall back to document-level values. Unknown
// keys are rejected.
ArchitectureSpec parse_architecture(const nlohmann::json& doc);
ArchitectureSpec load_architecture(const std::string& path);
nlohmann::json to_json(const ArchitectureSpec& spec);

// Output feature count of every layer in order, validating shapes on the way.
std::vector<std::size_t> layer_output_dims(const ArchitectureSpec& spec);
void validate(const ArchitectureSpec& spec);

// Trainable parameters without building the network: 2^arity per WARP node,
// 16 per DLGN node.
std::uint64_t param_count(const ArchitectureSpec& spec);
std::uint64_t node_count(const ArchitectureSpec& spec);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string architecture_hash(const ArchitectureSpec& spec);
std::string fnv1a_hex(const void* data, std::size_t size);

// Strict-key helper shared by the config readers.
void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where);

}  // namespace warplut
