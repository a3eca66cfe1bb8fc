#include "warplut/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "warplut/error.hpp"

namespace warplut {

namespace fs = std::filesystem;

RawImages read_cifar_batch(const fs::path& file, std::size_t records) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing CIFAR-10 batch file " + file.string(), file.string(), 0);
  RawImages out;
  out.count = records;
  out.pixels.resize(records * kCifarImageBytes);
  out.labels.resize(records);
  std::array<char, kCifarRecordBytes> rec{};
  for (std::size_t i = 0; i < records; ++i) {
    const std::uint64_t offset = i * kCifarRecordBytes;
    if (!in.read(rec.data(), rec.size())) {
      throw DataError("truncated CIFAR-10 batch file " + file.string() + " at offset " +
                          std::to_string(offset + static_cast<std::uint64_t>(in.gcount())),
                      file.string(), offset + static_cast<std::uint64_t>(in.gcount()));
    }
    const auto label = static_cast<std::uint8_t>(rec[0]);
    if (label > 9) {
      throw DataError("invalid label " + std::to_string(label) + " in " + file.string() +
                          " at offset " + std::to_string(offset),
                      file.string(), offset);
    }
    out.labels[i] = label;
    std::copy(rec.begin() + 1, rec.end(),
              reinterpret_cast<char*>(out.pixels.data() + i * kCifarImageBytes));
  }
  return out;
}

namespace {

void append(RawImages& dst, const RawImages& src) {
  dst.pixels.insert(dst.pixels.end(), src.pixels.begin(), src.pixels.end());
  dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
  dst.count += src.count;
}

void check_file_size(const fs::path& file) {
  std::error_code ec;
  const auto size = fs::file_size(file, ec);
  if (ec) throw DataError("missing CIFAR-10 batch file " + file.string(), file.string(), 0);
  if (size != kCifarFileBytes) {
    throw DataError("CIFAR-10 batch file " + file.string() + " has " + std::to_string(size) +
                        " bytes, expected " + std::to_string(kCifarFileBytes),
                    file.string(), std::min<std::uint64_t>(size, kCifarFileBytes));
  }
}

}  // namespace

Cifar10 load_cifar10_binary(const fs::path& directory, bool verify_balanced) {
  fs::path dir = directory;
  if (!fs::exists(dir / "data_batch_1.bin") && fs::exists(dir / "cifar-10-batches-bin")) {
    dir /= "cifar-10-batches-bin";
  }
  if (!fs::is_directory(dir)) {
    throw DataError("CIFAR-10 directory not found: " + directory.string(), directory.string(), 0);
  }
  Cifar10 data;
  for (int b = 1; b <= 5; ++b) {
    const fs::path f = dir / ("data_batch_" + std::to_string(b) + ".bin");
    check_file_size(f);
    append(data.train, read_cifar_batch(f, kCifarRecordsPerFile));
  }
  const fs::path t = dir / "test_batch.bin";
  check_file_size(t);
  data.test = read_cifar_batch(t, kCifarRecordsPerFile);

  if (verify_balanced) {
    std::array<std::size_t, 10> hist{};
    for (auto l : data.train.labels) ++hist[l];
    for (int c = 0; c < 10; ++c) {
      if (hist[c] != 5000) {
        throw DataError("CIFAR-10 training set has " + std::to_string(hist[c]) +
                            " images of class " + std::to_string(c) + ", expected 5000",
                        dir.string(), 0);
      }
    }
  }
  return data;
}

EncoderSpec EncoderSpec::uniform(int n_bits) {
  EncoderSpec s;
  s.n_bits = n_bits;
  for (int t = 1; t <= n_bits; ++t) s.thresholds.push_back(static_cast<double>(t) / (n_bits + 1));
  validate(s);
  return s;
}

void validate(const EncoderSpec& spec) {
  if (spec.n_bits < 1) throw ConfigError("n_bits must be positive");
  if (spec.thresholds.size() != static_cast<std::size_t>(spec.n_bits)) {
    throw ConfigError("encoder needs exactly n_bits thresholds");
  }
  for (std::size_t i = 0; i < spec.thresholds.size(); ++i) {
    const double t = spec.thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("thresholds must lie in (0, 1)");
    if (i > 0 && !(t > spec.thresholds[i - 1])) {
      throw ConfigError("thresholds must be strictly increasing");
    }
  }
}

BinarizedDataset thermometer_encode(const RawImages& raw, const EncoderSpec& spec,
                                    int class_count) {
  validate(spec);
  const int nb = spec.n_bits;
  BinarizedDataset out;
  out.count = raw.count;
  out.shape = Shape3{raw.shape.channels * nb, raw.shape.height, raw.shape.width};
  out.class_count = class_count;
  out.labels = raw.labels;
  out.inputs.assign(out.count * out.features(), 0);
  const std::size_t plane = static_cast<std::size_t>(raw.shape.height) * raw.shape.width;

  // Per byte value, the bit pattern across thresholds.
  std::vector<std::array<std::uint8_t, 32>> code(256);
  for (int v = 0; v < 256; ++v) {
    const double p = v / 255.0;
    for (int t = 0; t < nb && t < 32; ++t) code[v][t] = p > spec.thresholds[t] ? 1 : 0;
  }
  if (nb > 32) throw ConfigError("n_bits above 32 is not supported");

  for (std::size_t i = 0; i < raw.count; ++i) {
    const std::uint8_t* src = raw.pixels.data() + i * raw.shape.size();
    std::uint8_t* dst = out.inputs.data() + i * out.features();
    for (int c = 0; c < raw.shape.channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const auto& bits = code[src[c * plane + p]];
        for (int t = 0; t < nb; ++t) dst[(static_cast<std::size_t>(c) * nb + t) * plane + p] = bits[t];
      }
    }
  }
  return out;
}

BinarizedDataset subset(const BinarizedDataset& data, std::span<const std::size_t> indices,
                        std::string split) {
  BinarizedDataset out;
  out.count = indices.size();
  out.shape = data.shape;
  out.class_count = data.class_count;
  out.split = std::move(split);
  out.inputs.resize(out.count * data.features());
  out.labels.resize(out.count);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= data.count) throw ShapeError("subset index out of range");
    const auto ex = data.example(indices[i]);
    std::copy(ex.begin(), ex.end(), out.inputs.begin() + i * data.features());
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

std::pair<BinarizedDataset, BinarizedDataset> split_train_val(const BinarizedDataset& data,
                                                              double fraction,
                                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  std::vector<std::size_t> order(data.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.count)));
  const std::span<const std::size_t> all(order);
  return {subset(data, all.first(n_train), "train"), subset(data, all.subspan(n_train), "val")};
}

BinarizedDataset make_parity_dataset(int k) {
  if (k < 1 || k > 16) throw ConfigError("parity width must be in [1, 16]");
  BinarizedDataset out;
  out.count = std::size_t{1} << k;
  out.shape = Shape3{k, 1, 1};
  out.class_count = 2;
  out.inputs.resize(out.count * static_cast<std::size_t>(k));
  out.labels.resize(out.count);
  for (std::size_t v = 0; v < out.count; ++v) {
    for (int i = 0; i < k; ++i) out.inputs[v * k + i] = (v >> (k - 1 - i)) & 1u;
    out.labels[v] = static_cast<std::uint8_t>(std::popcount(v) & 1);
  }
  return out;
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in, const fs::path& file) {
  unsigned char buf[sizeof(T)];
  const auto offset = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError("truncated dataset cache " + file.string(), file.string(), offset);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void write_dataset_cache(const BinarizedDataset& data, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset cache " + file.string(), file.string(), 0);
  out.write("WLUT", 4);
  put<std::uint32_t>(out, kCacheVersion);
  put<std::uint64_t>(out, data.count);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.shape.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.shape.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.shape.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.class_count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.split.size()));
  out.write(data.split.data(), static_cast<std::streamsize>(data.split.size()));
  out.write(reinterpret_cast<const char*>(data.labels.data()),
            static_cast<std::streamsize>(data.labels.size()));
  std::vector<std::uint8_t> packed((data.inputs.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    if (data.inputs[i]) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!out) throw DataError("failed writing dataset cache " + file.string(), file.string(), 0);
}

BinarizedDataset read_dataset_cache(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open dataset cache " + file.string(), file.string(), 0);
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "WLUT") {
    throw DataError("not a WLUT dataset cache: " + file.string(), file.string(), 0);
  }
  const auto version = get<std::uint32_t>(in, file);
  if (version != kCacheVersion) {
    throw DataError("unsupported dataset cache version " + std::to_string(version), file.string(), 4);
  }
  BinarizedDataset d;
  d.count = get<std::uint64_t>(in, file);
  d.shape.channels = static_cast<int>(get<std::uint32_t>(in, file));
  d.shape.height = static_cast<int>(get<std::uint32_t>(in, file));
  d.shape.width = static_cast<int>(get<std::uint32_t>(in, file));
  d.class_count = static_cast<int>(get<std::uint32_t>(in, file));
  const auto split_len = get<std::uint32_t>(in, file);
  d.split.resize(split_len);
  d.labels.resize(d.count);
  const std::size_t total = d.count * d.features();
  std::vector<std::uint8_t> packed((total + 7) / 8);
  if (!in.read(d.split.data(), split_len) ||
      !in.read(reinterpret_cast<char*>(d.labels.data()), static_cast<std::streamsize>(d.count)) ||
      !in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()))) {
    throw DataError("truncated dataset cache " + file.string(), file.string(),
                    static_cast<std::uint64_t>(in.gcount()));
  }
  d.inputs.resize(total);
  for (std::size_t i = 0; i < total; ++i) d.inputs[i] = (packed[i >> 3] >> (i & 7)) & 1u;
  return d;
}

}  // namespace warplut
