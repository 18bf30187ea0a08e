#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

#include "kll/random.hpp"

namespace kll {

// Weighted single-item reservoir standing in for the chain of capacity-2
// compactors below the hierarchy. It holds one item with accumulated weight
// v < 2^h and emits items of weight exactly 2^h for the compactor at h+1.
//
// update() folds in an item of weight w:
//  - v+w <  2^h: replace the stored item with probability w/(v+w), keep weight v+w.
//  - v+w == 2^h: same replacement, then emit the stored item and reset to empty.
//  - v+w >  2^h (only reachable with w > 1, from merges or retired levels):
//    keep the lighter of the two items at weight min(v,w); emit the heavier
//    at weight 2^h with probability max(v,w)/2^h, so the expected weight and
//    the expected rank of any query are preserved. Ties keep the stored item.
template <typename T>
class sampler {
 public:
  uint32_t height() const { return height_; }
  uint64_t stored_weight() const { return weight_; }
  const std::optional<T>& stored_item() const { return item_; }
  bool holds_item() const { return item_.has_value(); }

  // The height only ever rises; the stored weight stays below the new window.
  void set_height(uint32_t h) {
    assert(h >= height_);
    height_ = h;
  }

  // Returns the emitted item, if any; its weight is 2^height() by contract.
  std::optional<T> update(const T& item, uint64_t w, rng64& rng) {
    assert(height_ >= 1 && "inactive sampler must be bypassed");
    assert(w >= 1);
    const uint64_t window = uint64_t(1) << height_;
    assert(w < window);
    if (weight_ + w <= window) {
      if (rng.bounded(weight_ + w) < w) item_ = item;
      weight_ += w;
      if (weight_ == window) {
        std::optional<T> out = std::move(item_);
        item_.reset();
        weight_ = 0;
        return out;
      }
      return std::nullopt;
    }
    T heavy = item;
    uint64_t heavy_weight = w;
    if (weight_ > w) {
      heavy = *item_;
      heavy_weight = weight_;
      item_ = item;
      weight_ = w;
    }
    if (rng.bounded(window) < heavy_weight) return heavy;
    return std::nullopt;
  }

  // Reconstruction from serialized state.
  static sampler from_parts(uint32_t height, uint64_t weight, std::optional<T> item) {
    if (height == 0 && (weight != 0 || item.has_value())) {
      throw std::invalid_argument("sampler: inactive sampler cannot hold weight or an item");
    }
    if (height > 0 && weight > (uint64_t(1) << height) - 1) {
      throw std::invalid_argument("sampler: stored weight exceeds 2^h - 1");
    }
    if ((weight == 0) == item.has_value()) {
      throw std::invalid_argument("sampler: stored weight and item presence disagree");
    }
    sampler out;
    out.height_ = height;
    out.weight_ = weight;
    out.item_ = std::move(item);
    return out;
  }

 private:
  uint32_t height_ = 0;  // 0 = inactive
  std::optional<T> item_;
  uint64_t weight_ = 0;
};

}  // namespace kll
