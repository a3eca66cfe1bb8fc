#include "warplut/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "warplut/error.hpp"

namespace warplut {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path blob_path(const fs::path& json_path) {
  fs::path p = json_path;
  p.replace_extension(".bin");
  return p;
}

std::vector<unsigned char> to_le_bytes(const Network& net) {
  std::vector<unsigned char> out;
  out.reserve(net.param_count() * 4);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (float f : net.bank(i).params) {
      const auto u = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(u >> (8 * b)));
    }
  }
  return out;
}

}  // namespace

std::string wiring_hash(const Network& net) {
  std::vector<unsigned char> bytes;
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<LogicDenseLayer>(&layer)) {
      for (std::uint32_t c : d->connections) {
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(c >> (8 * b)));
      }
    } else {
      for (const Tap& t : std::get<ResidualLogicBlock>(layer).taps) {
        bytes.push_back(static_cast<unsigned char>(t.channel & 0xFF));
        bytes.push_back(static_cast<unsigned char>(t.channel >> 8));
        bytes.push_back(static_cast<unsigned char>(t.dr));
        bytes.push_back(static_cast<unsigned char>(t.dc));
      }
    }
    bytes.push_back(0xFF);
  }
  return fnv1a_hex(bytes.data(), bytes.size());
}

void save_checkpoint(const Network& net, const fs::path& json_path, const json& extra) {
  const auto blob = to_le_bytes(net);
  const fs::path bin = blob_path(json_path);
  json layers = json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const NodeBank& b = net.bank(i);
    layers.push_back({{"kind", to_string(b.kind)},
                      {"arity", b.arity},
                      {"nodes", b.count},
                      {"params", b.params.size()}});
  }
  const json doc{{"format", "warplut-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"architecture", to_json(net.spec)},
                 {"architecture_hash", architecture_hash(net.spec)},
                 {"wiring_hash", wiring_hash(net)},
                 {"tau_group", net.readout.tau_group},
                 {"layers", layers},
                 {"blob", {{"file", bin.filename().string()},
                           {"bytes", blob.size()},
                           {"fnv1a", fnv1a_hex(blob.data(), blob.size())}}},
                 {"extra", extra}};
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError("cannot write checkpoint blob " + bin.string());
  }
  std::ofstream out(json_path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw CheckpointError("cannot write checkpoint " + json_path.string());
}

Checkpoint load_checkpoint(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw CheckpointError("cannot open checkpoint " + json_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + json_path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string()) != "warplut-checkpoint") {
    throw CheckpointError(json_path.string() + " is not a warplut checkpoint");
  }
  const int version = doc.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  try {
    ck.net = build_network(parse_architecture(doc.at("architecture")));
    if (doc.at("architecture_hash").get<std::string>() != architecture_hash(ck.net.spec)) {
      throw CheckpointError("checkpoint architecture hash mismatch");
    }
    if (doc.at("wiring_hash").get<std::string>() != wiring_hash(ck.net)) {
      throw CheckpointError("checkpoint wiring does not match its architecture seeds");
    }
    ck.net.readout.tau_group = doc.at("tau_group").get<double>();
    ck.extra = doc.value("extra", json::object());
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + json_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError("checkpoint architecture invalid: " + std::string(e.what()));
  }

  const fs::path bin = json_path.parent_path() / doc.at("blob").at("file").get<std::string>();
  std::ifstream bin_in(bin, std::ios::binary);
  if (!bin_in) throw CheckpointError("cannot open checkpoint blob " + bin.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin_in)), std::istreambuf_iterator<char>());
  const auto expected = doc.at("blob").at("bytes").get<std::uint64_t>();
  if (blob.size() != expected || expected != ck.net.param_count() * 4) {
    throw CheckpointError("checkpoint blob " + bin.string() + " has " + std::to_string(blob.size()) +
                          " bytes, expected " + std::to_string(ck.net.param_count() * 4));
  }
  if (fnv1a_hex(blob.data(), blob.size()) != doc.at("blob").at("fnv1a").get<std::string>()) {
    throw CheckpointError("checkpoint blob " + bin.string() + " is corrupt (hash mismatch)");
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < ck.net.layers.size(); ++i) {
    for (float& f : ck.net.bank(i).params) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(blob[off + b]) << (8 * b);
      f = std::bit_cast<float>(u);
      off += 4;
    }
  }
  return ck;
}

}  // namespace warplut
