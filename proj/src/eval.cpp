#include "kll/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "kll/error_model.hpp"
#include "kll/random.hpp"

namespace kll::eval {

distribution distribution_from_name(std::string_view name) {
  if (name == "random-permutation") return distribution::random_permutation;
  if (name == "sorted-ascending") return distribution::sorted_ascending;
  if (name == "sorted-descending") return distribution::sorted_descending;
  if (name == "iid-uniform") return distribution::iid_uniform;
  if (name == "adversarial-zoom") return distribution::adversarial_zoom;
  throw std::invalid_argument("unknown distribution: " + std::string(name));
}

std::string_view to_name(distribution dist) {
  switch (dist) {
    case distribution::random_permutation: return "random-permutation";
    case distribution::sorted_ascending: return "sorted-ascending";
    case distribution::sorted_descending: return "sorted-descending";
    case distribution::iid_uniform: return "iid-uniform";
    case distribution::adversarial_zoom: return "adversarial-zoom";
  }
  return "unknown";
}

std::vector<double> make_stream(uint64_t n, distribution dist, uint64_t seed) {
  std::vector<double> data;
  data.reserve(n);
  rng64 rng(seed);
  switch (dist) {
    case distribution::random_permutation: {
      for (uint64_t i = 1; i <= n; ++i) data.push_back(static_cast<double>(i));
      for (uint64_t i = n; i > 1; --i) {  // Fisher-Yates with the portable generator
        std::swap(data[i - 1], data[rng.bounded(i)]);
      }
      break;
    }
    case distribution::sorted_ascending:
      for (uint64_t i = 1; i <= n; ++i) data.push_back(static_cast<double>(i));
      break;
    case distribution::sorted_descending:
      for (uint64_t i = n; i >= 1; --i) data.push_back(static_cast<double>(i));
      break;
    case distribution::iid_uniform:
      for (uint64_t i = 0; i < n; ++i) data.push_back(rng.uniform01());
      break;
    case distribution::adversarial_zoom:
      // alternating sides, harmonically tightening around the median value
      for (uint64_t i = 0; i < n; ++i) {
        const double offset = 1.0 / static_cast<double>(i + 2);
        data.push_back(0.5 + ((i % 2 == 0) ? -offset : offset));
      }
      break;
  }
  return data;
}

uint64_t exact_rank(const std::vector<double>& sorted_data, double x) {
  const auto it = std::upper_bound(sorted_data.begin(), sorted_data.end(), x);
  return static_cast<uint64_t>(it - sorted_data.begin());
}

std::vector<uint64_t> rank_grid(uint64_t n, double eps) {
  if (n < 1 || !(eps > 0.0)) throw std::invalid_argument("rank_grid: need n >= 1 and eps > 0");
  const uint64_t step = std::max<uint64_t>(1, static_cast<uint64_t>(std::ceil(eps * static_cast<double>(n))));
  std::vector<uint64_t> ranks;
  for (uint64_t r = step; r <= n; r += step) ranks.push_back(r);
  while (ranks.size() < 2) ranks.push_back(n);
  return ranks;
}

std::vector<uint64_t> rank_grid_count(uint64_t n, uint32_t count) {
  if (n < 1 || count < 2) throw std::invalid_argument("rank_grid_count: need n >= 1 and count >= 2");
  std::vector<uint64_t> ranks;
  ranks.reserve(count);
  for (uint32_t j = 1; j <= count; ++j) {
    const uint64_t r = static_cast<uint64_t>(
        std::llround(static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(count)));
    ranks.push_back(std::max<uint64_t>(1, std::min(n, r)));
  }
  return ranks;
}

namespace {

// Audits one sketch against the analytic bounds; n_total is the weight this
// sketch is accountable for (its own stream plus anything merged in).
void audit_sketch(const sketch<double>& sk, uint64_t n_total, error_profile& profile) {
  const params& p = sk.config();
  const double c = p.c();
  const uint32_t h_bound = height_bound(n_total, p.k, c);
  if (sk.height() > h_bound) profile.audit_height_ok = false;
  const auto& stats = sk.compaction_stats();
  for (size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].compactions == 0) continue;
    const uint32_t h = static_cast<uint32_t>(i) + 1;
    if (static_cast<double>(stats[i].compactions) > compactions_bound(h, h_bound, c)) {
      profile.audit_compactions_ok = false;
    }
    const double needed = static_cast<double>(p.k) * std::pow(c, static_cast<double>(sk.height() - h));
    if (static_cast<double>(stats[i].min_involved) < needed) {
      profile.audit_compaction_size_ok = false;
    }
  }
  const double space_bound =
      static_cast<double>(p.k) / (1.0 - c) + 2.0 * static_cast<double>(sk.height()) + 1.0;
  if (static_cast<double>(sk.stored_high_water()) > space_bound) profile.audit_space_ok = false;
}

}  // namespace

error_profile run_trial(const trial_config& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("run_trial: n must be >= 1");
  const std::vector<double> data = make_stream(cfg.n, cfg.dist, derive_seed(cfg.seed, 0));
  std::vector<double> sorted_data = data;
  std::sort(sorted_data.begin(), sorted_data.end());

  error_profile profile;
  sketch<double> result = [&]() {
    if (cfg.shape == merge_shape::single) {
      sketch<double> sk(cfg.sketch_params, derive_seed(cfg.seed, 1));
      for (const double x : data) sk.update(x);
      return sk;
    }
    if (cfg.fanout < 2) throw std::invalid_argument("run_trial: merge plans need fanout >= 2");
    std::vector<sketch<double>> parts;
    parts.reserve(cfg.fanout);
    const uint64_t block = (cfg.n + cfg.fanout - 1) / cfg.fanout;
    for (uint32_t part = 0; part < cfg.fanout; ++part) {
      sketch<double> sk(cfg.sketch_params, derive_seed(cfg.seed, 2 + part));
      const uint64_t begin = std::min<uint64_t>(cfg.n, part * block);
      const uint64_t end = std::min<uint64_t>(cfg.n, (part + 1) * block);
      for (uint64_t i = begin; i < end; ++i) sk.update(data[i]);
      audit_sketch(sk, sk.n() > 0 ? sk.n() : 1, profile);
      parts.push_back(std::move(sk));
    }
    if (cfg.shape == merge_shape::left_fold) {
      for (uint32_t part = 1; part < cfg.fanout; ++part) parts[0].merge(parts[part]);
    } else {
      for (uint32_t stride = 1; stride < cfg.fanout; stride *= 2) {
        for (uint32_t i = 0; i + stride < cfg.fanout; i += 2 * stride) parts[i].merge(parts[i + stride]);
      }
    }
    return std::move(parts[0]);
  }();
  if (result.n() != cfg.n) throw std::logic_error("run_trial: merged n does not match the stream length");

  const std::vector<uint64_t> grid =
      cfg.query_count >= 2 ? rank_grid_count(cfg.n, cfg.query_count) : rank_grid(cfg.n, cfg.grid_eps);
  profile.signed_errors.reserve(grid.size());
  for (const uint64_t r : grid) {
    const double x = sorted_data[r - 1];
    const int64_t err = static_cast<int64_t>(result.rank(x)) - static_cast<int64_t>(exact_rank(sorted_data, x));
    profile.signed_errors.push_back(err);
    profile.max_abs_error = std::max<uint64_t>(profile.max_abs_error, static_cast<uint64_t>(std::llabs(err)));
  }
  profile.stored_high_water = result.stored_high_water();
  profile.height = result.height();
  profile.compactions = result.compaction_stats();
  audit_sketch(result, cfg.n, profile);
  return profile;
}

namespace {

// inclusive empirical quantile: smallest value covering a p-fraction
uint64_t percentile(std::vector<uint64_t> values, double p) {
  assert(!values.empty());
  std::sort(values.begin(), values.end());
  int64_t index = static_cast<int64_t>(std::ceil(p * static_cast<double>(values.size()))) - 1;
  index = std::clamp<int64_t>(index, 0, static_cast<int64_t>(values.size()) - 1);
  return values[static_cast<size_t>(index)];
}

void run_indexed(uint32_t trials, uint32_t threads, const std::function<void(uint32_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, trials);
  if (threads <= 1) {
    for (uint32_t i = 0; i < trials; ++i) body(i);
    return;
  }
  std::atomic<uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (uint32_t t = 0; t < threads; ++t) {
    workers.emplace_back([&]() {
      for (;;) {
        const uint32_t i = next.fetch_add(1);
        if (i >= trials) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (failure) std::rethrow_exception(failure);
}

experiment_summary summarize(const trial_config& cfg, std::vector<error_profile> profiles,
                             std::vector<uint64_t> seeds, double failure_eps) {
  experiment_summary summary;
  summary.failure_eps = failure_eps;
  const uint32_t trials = static_cast<uint32_t>(profiles.size());
  std::vector<uint64_t> max_errors;
  max_errors.reserve(trials);
  uint64_t failures = 0;
  double hwm_sum = 0.0;
  for (const auto& profile : profiles) {
    max_errors.push_back(profile.max_abs_error);
    if (static_cast<double>(profile.max_abs_error) > failure_eps * static_cast<double>(cfg.n)) ++failures;
    hwm_sum += static_cast<double>(profile.stored_high_water);
    summary.hwm_max = std::max(summary.hwm_max, profile.stored_high_water);
    summary.height_max = std::max(summary.height_max, profile.height);
    if (!profile.audits_pass()) ++summary.audit_violations;
  }
  summary.failure_rate = static_cast<double>(failures) / static_cast<double>(trials);
  summary.hwm_mean = hwm_sum / static_cast<double>(trials);
  summary.max_err_p50 = percentile(max_errors, 0.50);
  summary.max_err_p90 = percentile(max_errors, 0.90);
  summary.max_err_p99 = percentile(max_errors, 0.99);
  const size_t queries = profiles.front().signed_errors.size();
  summary.mean_signed_error.assign(queries, 0.0);
  for (const auto& profile : profiles) {
    for (size_t q = 0; q < queries; ++q) {
      summary.mean_signed_error[q] += static_cast<double>(profile.signed_errors[q]);
    }
  }
  for (double& mean : summary.mean_signed_error) mean /= static_cast<double>(trials);
  summary.profiles = std::move(profiles);
  summary.trial_seeds = std::move(seeds);
  return summary;
}

}  // namespace

experiment_summary run_experiment(const trial_config& cfg, uint32_t trials, double failure_eps,
                                  uint32_t threads) {
  if (trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  std::vector<error_profile> profiles(trials);
  std::vector<uint64_t> seeds(trials);
  run_indexed(trials, threads, [&](uint32_t i) {
    trial_config trial = cfg;
    trial.seed = derive_seed(cfg.seed, i);
    seeds[i] = trial.seed;
    profiles[i] = run_trial(trial);
  });
  return summarize(cfg, std::move(profiles), std::move(seeds), failure_eps);
}

merge_comparison merge_experiment(const trial_config& cfg, uint32_t fanout, uint32_t trials,
                                  double failure_eps, uint32_t threads) {
  if (fanout < 2) throw std::invalid_argument("merge_experiment: fanout must be >= 2");
  std::vector<error_profile> single_profiles(trials);
  std::vector<error_profile> merged_profiles(trials);
  std::vector<uint64_t> seeds(trials);
  run_indexed(trials, threads, [&](uint32_t i) {
    trial_config trial = cfg;
    trial.seed = derive_seed(cfg.seed, i);
    seeds[i] = trial.seed;
    trial.shape = merge_shape::single;
    trial.fanout = 1;
    single_profiles[i] = run_trial(trial);
    trial.shape = merge_shape::left_fold;
    trial.fanout = fanout;
    merged_profiles[i] = run_trial(trial);
  });
  merge_comparison comparison;
  comparison.single = summarize(cfg, std::move(single_profiles), seeds, failure_eps);
  comparison.merged = summarize(cfg, std::move(merged_profiles), std::move(seeds), failure_eps);
  const auto ratio = [](uint64_t merged, uint64_t single) {
    return single == 0 ? (merged == 0 ? 1.0 : std::numeric_limits<double>::infinity())
                       : static_cast<double>(merged) / static_cast<double>(single);
  };
  comparison.ratio_p50 = ratio(comparison.merged.max_err_p50, comparison.single.max_err_p50);
  comparison.ratio_p99 = ratio(comparison.merged.max_err_p99, comparison.single.max_err_p99);
  return comparison;
}

namespace {

std::string c_text(const params& p) {
  return std::to_string(p.c_num) + "/" + std::to_string(p.c_den);
}

std::string mode_text(const params& p) {
  return p.mode == compactor_mode::fixed_top ? "fixedtop" : "exp";
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return std::string(buffer);
}

}  // namespace

std::string csv_header() {
  return "trial,n,k,c,mode,s,fanout,max_err,max_err_over_n,stored_hwm,H,seed";
}

std::string csv_row(const trial_config& cfg, uint64_t trial_index, uint64_t trial_seed,
                    const error_profile& profile) {
  const params& p = cfg.sketch_params;
  std::ostringstream os;
  os << trial_index << ',' << cfg.n << ',' << p.k << ',' << c_text(p) << ',' << mode_text(p) << ','
     << p.s << ',' << cfg.fanout << ',' << profile.max_abs_error << ','
     << format_double(static_cast<double>(profile.max_abs_error) / static_cast<double>(cfg.n)) << ','
     << profile.stored_high_water << ',' << profile.height << ',' << trial_seed;
  return os.str();
}

std::string csv_summary_row(const trial_config& cfg, const experiment_summary& summary) {
  const params& p = cfg.sketch_params;
  std::ostringstream os;
  os << "summary," << cfg.n << ',' << p.k << ',' << c_text(p) << ',' << mode_text(p) << ',' << p.s
     << ',' << cfg.fanout << ',' << summary.max_err_p99 << ','
     << format_double(static_cast<double>(summary.max_err_p99) / static_cast<double>(cfg.n)) << ','
     << summary.hwm_max << ',' << summary.height_max << ',' << cfg.seed;
  return os.str();
}

// one row per trial plus the summary row; the column schema is csv_header()
std::string render_csv(const trial_config& cfg, const experiment_summary& summary) {
  std::ostringstream os;
  for (size_t i = 0; i < summary.profiles.size(); ++i) {
    os << csv_row(cfg, i, summary.trial_seeds[i], summary.profiles[i]) << '\n';
  }
  os << csv_summary_row(cfg, summary) << '\n';
  return os.str();
}

std::string render_json(const trial_config& cfg, const experiment_summary& summary) {
  const params& p = cfg.sketch_params;
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < summary.profiles.size(); ++i) {
    const auto& profile = summary.profiles[i];
    rows.push_back({{"trial", i},
                    {"n", cfg.n},
                    {"k", p.k},
                    {"c", c_text(p)},
                    {"mode", mode_text(p)},
                    {"s", p.s},
                    {"fanout", cfg.fanout},
                    {"max_err", profile.max_abs_error},
                    {"max_err_over_n", static_cast<double>(profile.max_abs_error) / static_cast<double>(cfg.n)},
                    {"stored_hwm", profile.stored_high_water},
                    {"H", profile.height},
                    {"seed", summary.trial_seeds[i]}});
  }
  nlohmann::json doc;
  doc["rows"] = std::move(rows);
  doc["summary"] = {{"trial", "summary"},
                    {"n", cfg.n},
                    {"k", p.k},
                    {"c", c_text(p)},
                    {"mode", mode_text(p)},
                    {"s", p.s},
                    {"fanout", cfg.fanout},
                    {"failure_eps", summary.failure_eps},
                    {"failure_rate", summary.failure_rate},
                    {"max_err_p50", summary.max_err_p50},
                    {"max_err_p90", summary.max_err_p90},
                    {"max_err_p99", summary.max_err_p99},
                    {"mean_signed_error", summary.mean_signed_error},
                    {"stored_hwm_max", summary.hwm_max},
                    {"stored_hwm_mean", summary.hwm_mean},
                    {"H_max", summary.height_max},
                    {"audit_violations", summary.audit_violations},
                    {"seed", cfg.seed}};
  return doc.dump(2) + "\n";
}

}  // namespace kll::eval
