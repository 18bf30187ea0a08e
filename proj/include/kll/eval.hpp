#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kll/params.hpp"
#include "kll/sketch.hpp"

namespace kll::eval {

enum class distribution {
  random_permutation,   // 1..n shuffled
  sorted_ascending,
  sorted_descending,
  iid_uniform,          // independent uniforms on [0,1)
  adversarial_zoom,     // alternating values converging on the median
};

distribution distribution_from_name(std::string_view name);
std::string_view to_name(distribution dist);

enum class merge_shape { single, left_fold, balanced_tree };

// One experiment trial. Seeds split deterministically off cfg.seed:
// the stream uses derive_seed(seed, 0), a single sketch derive_seed(seed, 1),
// and partition p of a merge plan derive_seed(seed, 2 + p), so single and
// merged runs with the same seed share the stream but not the coins.
struct trial_config {
  uint64_t n = 0;
  distribution dist = distribution::random_permutation;
  params sketch_params;
  uint64_t seed = 0;
  double grid_eps = 0.01;   // grid = ranks i*ceil(eps*n), used when query_count == 0
  uint32_t query_count = 0; // explicit grid size: ranks round(j*n/count)
  merge_shape shape = merge_shape::single;
  uint32_t fanout = 1;      // contiguous stream partitions when merging
};

struct error_profile {
  std::vector<int64_t> signed_errors;  // sketch rank minus exact rank, per grid query
  uint64_t max_abs_error = 0;
  size_t stored_high_water = 0;
  uint32_t height = 0;
  std::vector<level_stats> compactions;  // indexed by height-1
  // Analysis audits, evaluated on every sketch the trial builds. The
  // compaction-count bound is instantiated at height_bound(n,k,c); the
  // observed height is checked against that same bound.
  bool audit_height_ok = true;
  bool audit_compactions_ok = true;
  bool audit_compaction_size_ok = true;
  bool audit_space_ok = true;
  bool audits_pass() const {
    return audit_height_ok && audit_compactions_ok && audit_compaction_size_ok && audit_space_ok;
  }
};

std::vector<double> make_stream(uint64_t n, distribution dist, uint64_t seed);

// count of elements <= x, by binary search
uint64_t exact_rank(const std::vector<double>& sorted_data, double x);

// Evenly spaced rank grids over the sorted input; always at least 2 entries.
std::vector<uint64_t> rank_grid(uint64_t n, double eps);
std::vector<uint64_t> rank_grid_count(uint64_t n, uint32_t count);

error_profile run_trial(const trial_config& cfg);

struct experiment_summary {
  std::vector<error_profile> profiles;    // one per trial, in trial order
  std::vector<uint64_t> trial_seeds;
  double failure_eps = 0.0;
  double failure_rate = 0.0;              // Pr[max error > eps*n]
  uint64_t max_err_p50 = 0;
  uint64_t max_err_p90 = 0;
  uint64_t max_err_p99 = 0;
  std::vector<double> mean_signed_error;  // per grid query
  size_t hwm_max = 0;
  double hwm_mean = 0.0;
  uint32_t height_max = 0;
  uint64_t audit_violations = 0;
};

// Independent-seed trials (seed i = derive_seed(cfg.seed, i)), optionally in
// parallel; threads = 0 picks the hardware concurrency. Aggregation order is
// deterministic regardless of the thread count.
experiment_summary run_experiment(const trial_config& cfg, uint32_t trials, double failure_eps,
                                  uint32_t threads = 0);

struct merge_comparison {
  experiment_summary single;
  experiment_summary merged;
  double ratio_p50 = 0.0;
  double ratio_p99 = 0.0;  // merged p99 / single p99
};

// Paired runs: per trial, one sketch over the whole stream and a merge plan
// over `fanout` contiguous partitions with fresh seeds, on the same stream.
merge_comparison merge_experiment(const trial_config& cfg, uint32_t fanout, uint32_t trials,
                                  double failure_eps, uint32_t threads = 0);

// Report rows. CSV columns:
//   trial,n,k,c,mode,s,fanout,max_err,max_err_over_n,stored_hwm,H,seed
// The summary row reports the 99th-percentile max error under trial="summary".
// JSON mirrors the same fields and carries the full summary statistics.
std::string csv_header();
std::string csv_row(const trial_config& cfg, uint64_t trial_index, uint64_t trial_seed,
                    const error_profile& profile);
std::string csv_summary_row(const trial_config& cfg, const experiment_summary& summary);
std::string render_csv(const trial_config& cfg, const experiment_summary& summary);
std::string render_json(const trial_config& cfg, const experiment_summary& summary);

}  // namespace kll::eval
