#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace warplut {

// Feature-major batch: one row per feature, one lane per example. Rows are
// padded to a multiple of 8 lanes so every row starts 32-byte aligned.
class Activations {
 public:
  static constexpr std::size_t kLaneAlign = 8;

  Activations() = default;
  Activations(std::size_t features, std::size_t lanes) { resize(features, lanes); }

  void resize(std::size_t features, std::size_t lanes) {
    features_ = features;
    lanes_ = lanes;
    stride_ = (lanes + kLaneAlign - 1) / kLaneAlign * kLaneAlign;
    data_.assign(features_ * stride_, 0.0f);
  }

  std::size_t features() const noexcept { return features_; }
  std::size_t lanes() const noexcept { return lanes_; }
  std::size_t stride() const noexcept { return stride_; }

  float* row(std::size_t f) noexcept { return data_.data() + f * stride_; }
  const float* row(std::size_t f) const noexcept { return data_.data() + f * stride_; }
  float& at(std::size_t f, std::size_t lane) noexcept { return data_[f * stride_ + lane]; }
  float at(std::size_t f, std::size_t lane) const noexcept { return data_[f * stride_ + lane]; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  std::span<float> raw() noexcept { return data_; }
  std::span<const float> raw() const noexcept { return data_; }

 private:
  std::size_t features_ = 0;
  std::size_t lanes_ = 0;
  std::size_t stride_ = 0;
  std::vector<float> data_;
};

}  // namespace warplut
