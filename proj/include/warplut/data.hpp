#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "warplut/architecture.hpp"

namespace warplut {

inline constexpr std::size_t kCifarImageBytes = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;
inline constexpr std::size_t kCifarFileBytes = kCifarRecordBytes * kCifarRecordsPerFile;

// Raw 8-bit images, channel-major (R plane, G plane, B plane) per record.
struct RawImages {
  std::size_t count = 0;
  Shape3 shape{3, 32, 32};
  std::vector<std::uint8_t> pixels;  // count x shape.size()
  std::vector<std::uint8_t> labels;

  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * shape.size(), shape.size()};
  }
};

struct Cifar10 {
  RawImages train;  // 50,000 images from data_batch_1..5.bin
  RawImages test;   // 10,000 images from test_batch.bin
};

// Reads one CIFAR-10 binary batch file holding `records` records.
RawImages read_cifar_batch(const std::filesystem::path& file, std::size_t records);

// Reads the canonical binary distribution from `directory` (or its
// cifar-10-batches-bin subdirectory). With verify_balanced, the training label
// histogram must be 5,000 per class.
Cifar10 load_cifar10_binary(const std::filesystem::path& directory, bool verify_balanced = true);

struct EncoderSpec {
  int n_bits = 3;
  std::vector<double> thresholds;  // strictly increasing, inside (0, 1)

  // Uniform thresholds t / (n_bits + 1).
  static EncoderSpec uniform(int n_bits);
};

void validate(const EncoderSpec& spec);

// Boolean-valued dataset, example-major.
struct BinarizedDataset {
  std::size_t count = 0;
  Shape3 shape;
  int class_count = 2;
  std::vector<std::uint8_t> inputs;  // count x shape.size(), values 0/1
  std::vector<std::uint8_t> labels;
  std::string split = "all";

  std::size_t features() const noexcept { return shape.size(); }
  std::span<const std::uint8_t> example(std::size_t i) const {
    return {inputs.data() + i * features(), features()};
  }
};

// Channel c, threshold t fires iff pixel / 255 > thresholds[t]; output
// channel index c * n_bits + t.
BinarizedDataset thermometer_encode(const RawImages& raw, const EncoderSpec& spec,
                                    int class_count = 10);

// Seeded shuffle, then the first round(fraction * count) examples train.
std::pair<BinarizedDataset, BinarizedDataset> split_train_val(const BinarizedDataset& data,
                                                              double fraction, std::uint64_t seed);

// Examples by index, preserving order.
BinarizedDataset subset(const BinarizedDataset& data, std::span<const std::size_t> indices,
                        std::string split);

// All 2^k Boolean vectors (input 0 is the MSB of the enumeration index), label
// = parity, two classes.
BinarizedDataset make_parity_dataset(int k);

// Encoded-tensor cache: "WLUT", u32 version, u64 count, u32 channels, height,
// width, class_count, u32 split length + bytes, labels, then bit-packed inputs
// (LSB first), all little-endian.
inline constexpr std::uint32_t kCacheVersion = 1;
void write_dataset_cache(const BinarizedDataset& data, const std::filesystem::path& file);
BinarizedDataset read_dataset_cache(const std::filesystem::path& file);

}  // namespace warplut
