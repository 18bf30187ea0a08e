#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kll/params.hpp"
#include "kll/random.hpp"
#include "kll/sampler.hpp"

namespace kll {

namespace detail {

// Compacts a full buffer in place. The buffer is sorted; on odd sizes one
// item (smallest or largest, per withhold_largest) is withheld and stays in
// the buffer at its current weight. Of the remaining even-length run, either
// the lower- or the upper-parity class (1-based odd or even positions, per
// keep_upper) is returned for emission at doubled weight; the other class is
// dropped. For any query the buffer's rank contribution is unchanged if the
// query's rank within the run is even, otherwise it moves by one item weight
// up or down depending on the parity coin.
template <typename T, typename Compare>
std::vector<T> compact_buffer(std::vector<T>& buffer, bool withhold_largest, bool keep_upper,
                              const Compare& compare) {
  std::stable_sort(buffer.begin(), buffer.end(), compare);
  const size_t size = buffer.size();
  const bool odd = (size % 2) != 0;
  const size_t lo = (odd && !withhold_largest) ? 1 : 0;
  const size_t hi = (odd && withhold_largest) ? size - 1 : size;
  std::vector<T> emitted;
  emitted.reserve((hi - lo) / 2);
  for (size_t i = lo + (keep_upper ? 1 : 0); i < hi; i += 2) {
    emitted.push_back(std::move(buffer[i]));
  }
  if (odd) {
    if (withhold_largest && size > 1) buffer.front() = std::move(buffer.back());
    buffer.resize(1);
  } else {
    buffer.clear();
  }
  return emitted;
}

}  // namespace detail

// Per-height compaction counters, kept for analysis audits.
struct level_stats {
  uint64_t compactions = 0;
  uint64_t min_involved = std::numeric_limits<uint64_t>::max();
};

// Streaming quantile sketch built from a hierarchy of compactors with
// geometrically decaying capacities over a single-item weighted sampler.
//
// Items at height h weigh 2^(h-1). A full buffer is sorted and a random
// parity class is pushed one level up at doubled weight, so the expected
// rank of every query is preserved. Once the hierarchy is deep enough, the
// lowest levels are retired into the sampler, which keeps total storage
// near k/(1-c) items. Sketches with equal parameters can be merged without
// losing the error guarantees.
//
// A sketch is a single-writer object: update/merge need exclusive access,
// queries are const and may run concurrently with each other.
template <typename T, typename Compare = std::less<T>>
class sketch {
 public:
  explicit sketch(const params& p, uint64_t seed, const Compare& compare = Compare())
      : params_(p), compare_(compare), rng_(seed), levels_(1) {
    recompute_capacities();
  }

  // Feeds one unit-weight item.
  void update(const T& item) {
    if (n_ == std::numeric_limits<uint64_t>::max()) throw std::overflow_error("sketch: n overflow");
    ++n_;
    if (sampler_height_ >= 1) {
      feed_sampler(item, 1);
    } else {
      insert(1, item);
    }
  }

  // Merges another sketch into this one. Parameters must match exactly and
  // the other sketch is only read. This sketch's generator drives all coins.
  void merge(const sketch& other) {
    if (!(params_ == other.params_)) throw std::invalid_argument("merge: parameter mismatch");
    if (this == &other) throw std::invalid_argument("merge: cannot merge a sketch into itself");
    if (n_ > std::numeric_limits<uint64_t>::max() - other.n_) throw std::overflow_error("merge: n overflow");
    n_ += other.n_;
    while (height() < other.height()) grow();
    if (other.sampler_.holds_item()) {
      feed_sampler(*other.sampler_.stored_item(), other.sampler_.stored_weight());
    }
    // items enter one at a time so the stored count stays inside the space
    // budget throughout; insert() routes retired heights into the sampler
    for (size_t i = 0; i < other.levels_.size(); ++i) {
      const uint32_t h = other.sampler_height_ + 1 + static_cast<uint32_t>(i);
      for (const auto& item : other.levels_[i]) insert(h, item);
    }
    // capacities may have shrunk under a mid-merge growth; leave no level full
    for (uint32_t h = sampler_height_ + 1; h <= height(); ++h) {
      if (h <= sampler_height_) continue;  // retired by a grow during this sweep
      const size_t idx = h - sampler_height_ - 1;
      if (levels_[idx].size() >= capacities_[idx]) compact_level(idx);
    }
  }

  // Number of stored items with value <= x, each counted at its weight,
  // including the sampler's in-flight item at its accumulated weight.
  uint64_t rank(const T& x) const {
    uint64_t r = 0;
    for (size_t i = 0; i < levels_.size(); ++i) {
      uint64_t count = 0;
      for (const auto& item : levels_[i]) {
        if (!compare_(x, item)) ++count;  // item <= x
      }
      r += count * weight_of(sampler_height_ + 1 + static_cast<uint32_t>(i));
    }
    if (sampler_.holds_item() && !compare_(x, *sampler_.stored_item())) {
      r += sampler_.stored_weight();
    }
    return r;
  }

  // First stored item, in weighted sorted order, whose cumulative weight
  // reaches q*n. The result is always an item that was fed to the sketch.
  T quantile(double q) const {
    if (n_ == 0) throw std::runtime_error("quantile: empty sketch");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q out of [0,1]");
    const auto items = gather_sorted();
    assert(!items.empty());
    const double target = q * static_cast<double>(n_);
    uint64_t cumulative = 0;
    for (const auto& [value, weight] : items) {
      cumulative += weight;
      if (static_cast<double>(cumulative) >= target) return value;
    }
    // after merges the stored weight matches n only in expectation
    return items.back().first;
  }

  // rank() for every query in one pass; queries must be sorted ascending.
  std::vector<uint64_t> cdf(const std::vector<T>& queries) const {
    for (size_t i = 1; i < queries.size(); ++i) {
      if (compare_(queries[i], queries[i - 1])) throw std::invalid_argument("cdf: queries not sorted");
    }
    const auto items = gather_sorted();
    std::vector<uint64_t> out;
    out.reserve(queries.size());
    uint64_t cumulative = 0;
    size_t j = 0;
    for (const auto& x : queries) {
      while (j < items.size() && !compare_(x, items[j].first)) {
        cumulative += items[j].second;
        ++j;
      }
      out.push_back(cumulative);
    }
    return out;
  }

  uint64_t n() const { return n_; }
  bool empty() const { return n_ == 0; }
  const params& config() const { return params_; }

  // Current top height H; at least 1.
  uint32_t height() const { return sampler_height_ + static_cast<uint32_t>(levels_.size()); }
  uint32_t sampler_height() const { return sampler_height_; }
  uint32_t capacity_at(uint32_t h) const { return capacity(params_, height(), h); }

  size_t stored_count() const { return stored_items_ + (sampler_.holds_item() ? 1 : 0); }
  size_t stored_high_water() const { return high_water_; }

  // Total stored weight; equals n exactly in pure streaming, in expectation
  // after merges.
  uint64_t stored_weight() const {
    uint64_t total = sampler_.stored_weight();
    for (size_t i = 0; i < levels_.size(); ++i) {
      total += levels_[i].size() * weight_of(sampler_height_ + 1 + static_cast<uint32_t>(i));
    }
    return total;
  }

  // Read access for codecs, diagnostics and audits.
  size_t level_count() const { return levels_.size(); }
  const std::vector<T>& level(size_t idx) const { return levels_[idx]; }
  uint32_t level_height(size_t idx) const { return sampler_height_ + 1 + static_cast<uint32_t>(idx); }
  const sampler<T>& sampler_state() const { return sampler_; }
  // Indexed by height-1; heights that never compacted have zero counts.
  const std::vector<level_stats>& compaction_stats() const { return stats_; }

  // Reconstruction from serialized state. The levels list the buffers for
  // heights sampler_height+1 .. H in ascending order; sampler_height must be
  // consistent with the derived H. The generator state is not part of the
  // serialized form, so a fresh seed is required.
  static sketch from_parts(const params& p, uint64_t seed, uint64_t n, uint32_t smp_height,
                           uint64_t smp_weight, std::optional<T> smp_item,
                           std::vector<std::vector<T>> level_buffers,
                           const Compare& compare = Compare()) {
    if (level_buffers.empty()) throw std::invalid_argument("sketch: at least one level is required");
    sketch out(p, seed, compare);
    const uint32_t h_top = smp_height + static_cast<uint32_t>(level_buffers.size());
    if (h_top > 63) throw std::invalid_argument("sketch: height out of range");
    if (smp_height != sampler_target_height(p, h_top)) {
      throw std::invalid_argument("sketch: sampler height inconsistent with the top height");
    }
    out.sampler_ = sampler<T>::from_parts(smp_height, smp_weight, std::move(smp_item));
    out.sampler_height_ = smp_height;
    out.levels_ = std::move(level_buffers);
    out.n_ = n;
    out.stored_items_ = 0;
    for (const auto& buffer : out.levels_) out.stored_items_ += buffer.size();
    out.recompute_capacities();
    out.high_water_ = out.stored_count();
    return out;
  }

 private:
  static uint64_t weight_of(uint32_t h) {
    assert(h >= 1 && h <= 64);
    return uint64_t(1) << (h - 1);
  }

  void note_count() {
    const size_t count = stored_items_ + (sampler_.holds_item() ? 1 : 0);
    if (count > high_water_) high_water_ = count;
  }

  void recompute_capacities() {
    const uint32_t h_top = height();
    capacities_.resize(levels_.size());
    for (size_t i = 0; i < levels_.size(); ++i) {
      capacities_[i] = capacity(params_, h_top, sampler_height_ + 1 + static_cast<uint32_t>(i));
    }
  }

  // Routes an item to the buffer at height h, or into the sampler at the
  // item's weight if h has been retired. Compacts the level when its buffer
  // reaches capacity.
  void insert(uint32_t h, T item) {
    if (h <= sampler_height_) {
      feed_sampler(std::move(item), weight_of(h));
      return;
    }
    const size_t idx = h - sampler_height_ - 1;
    levels_[idx].push_back(std::move(item));
    ++stored_items_;
    note_count();
    if (levels_[idx].size() >= capacities_[idx]) compact_level(idx);
  }

  void compact_level(size_t idx) {
    const uint32_t h = sampler_height_ + 1 + static_cast<uint32_t>(idx);
    const size_t involved = levels_[idx].size();
    assert(involved >= 2);
    if (stats_.size() < h) stats_.resize(h);
    auto& st = stats_[h - 1];
    st.compactions += 1;
    st.min_involved = std::min<uint64_t>(st.min_involved, involved);
    // draw order is fixed for determinism: withhold-end coin first (odd sizes
    // only), then the parity coin
    const bool withhold_largest = (involved % 2 != 0) && rng_.coin();
    const bool keep_upper = rng_.coin();
    std::vector<T> emitted = detail::compact_buffer(levels_[idx], withhold_largest, keep_upper, compare_);
    stored_items_ -= involved - levels_[idx].size();
    // the buffer residual is final before anything can retire this level
    if (idx + 1 == levels_.size()) grow();
    for (auto& item : emitted) insert(h + 1, std::move(item));
  }

  // Adds a new top level. If that moves the sampler target up, the lowest
  // levels are retired and their buffers feed the sampler at their weights.
  void grow() {
    if (height() >= 63) throw std::overflow_error("sketch: height overflow");
    levels_.emplace_back();
    const uint32_t target = sampler_target_height(params_, height());
    if (target > sampler_height_) {
      const size_t retired = target - sampler_height_;
      assert(retired < levels_.size());
      std::vector<std::pair<uint32_t, std::vector<T>>> pending;
      pending.reserve(retired);
      for (size_t i = 0; i < retired; ++i) {
        pending.emplace_back(sampler_height_ + 1 + static_cast<uint32_t>(i), std::move(levels_[i]));
      }
      levels_.erase(levels_.begin(), levels_.begin() + static_cast<std::ptrdiff_t>(retired));
      sampler_height_ = target;
      sampler_.set_height(target);
      for (const auto& [h, items] : pending) {
        (void)h;
        stored_items_ -= items.size();
      }
      recompute_capacities();
      for (auto& [h, items] : pending) {
        for (auto& item : items) feed_sampler(std::move(item), weight_of(h));
      }
    } else {
      recompute_capacities();
    }
  }

  void feed_sampler(T item, uint64_t weight) {
    auto emitted = sampler_.update(item, weight, rng_);
    note_count();
    if (emitted) insert(sampler_height_ + 1, std::move(*emitted));
  }

  std::vector<std::pair<T, uint64_t>> gather_sorted() const {
    std::vector<std::pair<T, uint64_t>> items;
    items.reserve(stored_count());
    for (size_t i = 0; i < levels_.size(); ++i) {
      const uint64_t w = weight_of(sampler_height_ + 1 + static_cast<uint32_t>(i));
      for (const auto& item : levels_[i]) items.emplace_back(item, w);
    }
    if (sampler_.holds_item()) items.emplace_back(*sampler_.stored_item(), sampler_.stored_weight());
    std::sort(items.begin(), items.end(),
              [this](const auto& a, const auto& b) { return compare_(a.first, b.first); });
    return items;
  }

  params params_;
  Compare compare_;
  rng64 rng_;
  uint64_t n_ = 0;
  uint32_t sampler_height_ = 0;                 // heights <= this are retired
  sampler<T> sampler_;
  std::vector<std::vector<T>> levels_;          // levels_[i] holds height sampler_height_+1+i
  std::vector<uint32_t> capacities_;            // cached per level for the current H
  std::vector<level_stats> stats_;              // indexed by height-1
  size_t stored_items_ = 0;                     // buffered items, excluding the sampler
  size_t high_water_ = 0;
};

}  // namespace kll
