// Command-line front end: build, query, merge, inspect sketches, plan
// parameters from an accuracy target, and run evaluation experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kll/codec.hpp"
#include "kll/error_model.hpp"
#include "kll/eval.hpp"
#include "kll/sketch.hpp"

namespace {

// exit codes are a stable contract
constexpr int k_exit_usage = 1;
constexpr int k_exit_data = 2;
constexpr int k_exit_sketch = 3;

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct sketch_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "2/3" or a decimal like "0.667" (which becomes 667/1000)
std::pair<uint64_t, uint64_t> parse_ratio(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      return {std::stoull(text.substr(0, slash)), std::stoull(text.substr(slash + 1))};
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return {std::stoull(text), 1};
    const std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    const size_t places = text.size() - dot - 1;
    if (places > 18) throw usage_error("--c has too many decimal places");
    uint64_t den = 1;
    for (size_t i = 0; i < places; ++i) den *= 10;
    return {std::stoull(digits), den};
  } catch (const std::invalid_argument&) {
    throw usage_error("could not parse --c value '" + text + "'");
  } catch (const std::out_of_range&) {
    throw usage_error("--c value out of range: '" + text + "'");
  }
}

struct sketch_options {
  uint32_t k = 200;
  std::string c_text = "2/3";
  std::string mode = "exp";
  uint32_t s = 0;

  kll::params to_params() const {
    const auto [num, den] = parse_ratio(c_text);
    try {
      if (mode == "exp") return kll::params(k, num, den);
      if (mode == "fixedtop") {
        return kll::params(k, num, den, kll::compactor_mode::fixed_top, s == 0 ? 1 : s);
      }
    } catch (const std::invalid_argument& e) {
      throw usage_error(e.what());
    }
    throw usage_error("--mode must be exp or fixedtop");
  }
};

void add_sketch_options(CLI::App* cmd, sketch_options& opts) {
  cmd->add_option("--k", opts.k, "top-level capacity (>= 4)");
  cmd->add_option("--c", opts.c_text, "decay ratio in (0.5,1), rational like 2/3 or decimal");
  cmd->add_option("--mode", opts.mode, "exp or fixedtop")->check(CLI::IsMember({"exp", "fixedtop"}));
  cmd->add_option("--s", opts.s, "fixed-capacity top levels (fixedtop mode)");
}

kll::sketch<double> load_sketch(const std::string& path, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw sketch_error("cannot open sketch file: " + path);
  try {
    return kll::deserialize(in, seed);
  } catch (const kll::codec_error& e) {
    throw sketch_error(path + ": " + e.what());
  }
}

void write_sketch(const kll::sketch<double>& sk, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open output file: " + path);
  kll::serialize(sk, out);
  if (!out) throw data_error("failed writing output file: " + path);
}

int cmd_build(const std::string& input, const std::string& out, const sketch_options& opts,
              uint64_t seed) {
  kll::sketch<double> sk(opts.to_params(), seed);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!input.empty() && input != "-") {
    file.open(input);
    if (!file) throw data_error("cannot open input file: " + input);
    in = &file;
  }
  std::string line;
  size_t line_number = 0;
  while (std::getline(*in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;  // blank lines are skipped
    char* end = nullptr;
    const double value = std::strtod(line.c_str(), &end);
    while (end && *end == ' ') ++end;
    if (end == line.c_str() || (end && *end != '\0') || !std::isfinite(value)) {
      throw data_error("line " + std::to_string(line_number) + ": not a finite number: '" + line + "'");
    }
    sk.update(value);
  }
  write_sketch(sk, out);
  std::cerr << "n=" << sk.n() << " H=" << sk.height() << " stored=" << sk.stored_count() << "\n";
  return 0;
}

int cmd_query(const std::string& path, std::optional<double> rank_query,
              std::optional<double> quantile_query, const std::string& cdf_list) {
  const int selected = (rank_query ? 1 : 0) + (quantile_query ? 1 : 0) + (cdf_list.empty() ? 0 : 1);
  if (selected != 1) throw usage_error("query needs exactly one of --rank, --quantile, --cdf");
  const kll::sketch<double> sk = load_sketch(path, 0);
  if (rank_query) {
    if (std::isnan(*rank_query)) throw usage_error("--rank must not be NaN");
    std::cout << sk.rank(*rank_query) << "\n";
    return 0;
  }
  if (quantile_query) {
    if (sk.empty()) throw sketch_error("quantile query on an empty sketch");
    if (!(*quantile_query >= 0.0 && *quantile_query <= 1.0)) {
      throw usage_error("--quantile must lie in [0,1]");
    }
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", sk.quantile(*quantile_query));
    std::cout << buffer << "\n";
    return 0;
  }
  std::vector<double> queries;
  std::stringstream parts(cdf_list);
  std::string part;
  while (std::getline(parts, part, ',')) {
    char* end = nullptr;
    const double value = std::strtod(part.c_str(), &end);
    if (end == part.c_str() || (end && *end != '\0') || std::isnan(value)) {
      throw usage_error("--cdf entry is not a number: '" + part + "'");
    }
    queries.push_back(value);
  }
  if (queries.empty()) throw usage_error("--cdf needs at least one point");
  try {
    for (const uint64_t r : sk.cdf(queries)) std::cout << r << "\n";
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());  // unsorted list
  }
  return 0;
}

int cmd_merge(const std::vector<std::string>& inputs, const std::string& out, uint64_t seed) {
  if (inputs.size() < 2) throw usage_error("merge needs at least two input files");
  kll::sketch<double> merged = load_sketch(inputs[0], seed);
  for (size_t i = 1; i < inputs.size(); ++i) {
    const kll::sketch<double> next = load_sketch(inputs[i], 0);
    try {
      merged.merge(next);
    } catch (const std::invalid_argument& e) {
      throw sketch_error(inputs[i] + ": " + e.what());
    }
  }
  write_sketch(merged, out);
  std::cerr << "n=" << merged.n() << " H=" << merged.height() << " stored=" << merged.stored_count()
            << "\n";
  return 0;
}

int cmd_plan(double eps, double delta, bool all_quantiles, bool fixed_top, double c_prime,
             const std::string& c_text) {
  const auto [num, den] = parse_ratio(c_text);
  double c;
  try {
    c = kll::params(4, num, den).c();
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  uint32_t k;
  try {
    k = all_quantiles ? kll::k_for_all(eps, delta, c) : kll::k_for_single(eps, delta, c);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  std::cout << "k = " << k << "\n";
  if (fixed_top) {
    const uint32_t s = kll::s_for(delta);
    while (!kll::fixed_top_check(eps, k, s, delta, c_prime)) ++k;
    std::cout << "s = " << s << "\n";
    std::cout << "k (after fixed-top check) = " << k << "\n";
    std::cout << "fixed_top_check = " << (kll::fixed_top_check(eps, k, s, delta, c_prime) ? "pass" : "fail")
              << "\n";
  }
  std::cout << "single-quantile bound = " << kll::compactor_fail_bound(eps, k, c, 1, 1) << "\n";
  std::cout << "space estimate (items) <= " << static_cast<uint64_t>(std::ceil(k / (1.0 - c))) << " + 2H + 1\n";
  return 0;
}

int cmd_eval(uint64_t n, uint32_t trials, const sketch_options& opts, uint32_t fanout,
             const std::string& dist, double eps, uint64_t seed, const std::string& format,
             uint32_t threads, const std::string& out) {
  kll::eval::trial_config cfg;
  cfg.n = n;
  cfg.sketch_params = opts.to_params();
  try {
    cfg.dist = kll::eval::distribution_from_name(dist);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  cfg.seed = seed;
  cfg.grid_eps = eps;
  cfg.fanout = std::max(1u, fanout);
  cfg.shape = fanout >= 2 ? kll::eval::merge_shape::left_fold : kll::eval::merge_shape::single;
  const auto summary = kll::eval::run_experiment(cfg, trials, eps, threads);
  const std::string report = format == "json" ? kll::eval::render_json(cfg, summary)
                                              : kll::eval::render_csv(cfg, summary);
  if (out.empty() || out == "-") {
    std::cout << report;
  } else {
    std::ofstream file(out);
    if (!file) throw data_error("cannot open output file: " + out);
    file << report;
  }
  std::cerr << "failure_rate(eps=" << eps << ") = " << summary.failure_rate
            << " p50/p90/p99 max_err = " << summary.max_err_p50 << "/" << summary.max_err_p90 << "/"
            << summary.max_err_p99 << " hwm_max = " << summary.hwm_max
            << " audit_violations = " << summary.audit_violations << "\n";
  return 0;
}

int cmd_inspect(const std::string& path) {
  const kll::sketch<double> sk = load_sketch(path, 0);
  const kll::params& p = sk.config();
  std::cout << "params: k=" << p.k << " c=" << p.c_num << "/" << p.c_den << " mode="
            << (p.mode == kll::compactor_mode::fixed_top ? "fixedtop" : "exp") << " s=" << p.s << "\n";
  std::cout << "n: " << sk.n() << "\n";
  std::cout << "H: " << sk.height() << "\n";
  std::cout << "stored: " << sk.stored_count() << " items, weight " << sk.stored_weight() << "\n";
  const auto& smp = sk.sampler_state();
  std::cout << "sampler: h=" << smp.height() << " v=" << smp.stored_weight();
  if (smp.holds_item()) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", *smp.stored_item());
    std::cout << " item=" << buffer;
  } else {
    std::cout << " item=none";
  }
  std::cout << "\n";
  for (size_t i = 0; i < sk.level_count(); ++i) {
    const uint32_t h = sk.level_height(i);
    std::cout << "level h=" << h << " capacity=" << sk.capacity_at(h) << " count=" << sk.level(i).size()
              << "\n";
  }
  const double c = p.c();
  const double bound = static_cast<double>(p.k) / (1.0 - c) + 2.0 * sk.height() + 1.0;
  const bool ok = static_cast<double>(sk.stored_count()) <= bound;
  std::cout << "space audit: " << sk.stored_count() << " <= " << bound << " -> "
            << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : k_exit_sketch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KLL streaming quantile sketch"};
  app.require_subcommand(1);

  // build
  auto* build = app.add_subcommand("build", "build a sketch from newline-delimited numbers");
  sketch_options build_opts;
  std::string build_in;
  std::string build_out = "sketch.kll";
  uint64_t build_seed = 0;
  add_sketch_options(build, build_opts);
  build->add_option("--in", build_in, "input file (default: stdin)");
  build->add_option("--out", build_out, "output sketch file");
  build->add_option("--seed", build_seed, "generator seed");

  // query
  auto* query = app.add_subcommand("query", "query a sketch file");
  std::string query_file;
  std::optional<double> rank_query;
  std::optional<double> quantile_query;
  std::string cdf_list;
  query->add_option("file", query_file, "sketch file")->required();
  query->add_option("--rank", rank_query, "rank of a value");
  query->add_option("--quantile", quantile_query, "item at a quantile in [0,1]");
  query->add_option("--cdf", cdf_list, "comma-separated ascending values");

  // merge
  auto* merge = app.add_subcommand("merge", "merge sketch files (left fold)");
  std::vector<std::string> merge_inputs;
  std::string merge_out = "merged.kll";
  uint64_t merge_seed = 0;
  merge->add_option("files", merge_inputs, "input sketch files")->required()->expected(-2);
  merge->add_option("--out", merge_out, "output sketch file");
  merge->add_option("--seed", merge_seed, "generator seed for merge coins");

  // plan
  auto* plan = app.add_subcommand("plan", "derive k (and s) from an accuracy target");
  double plan_eps = 0.01;
  double plan_delta = 0.01;
  bool plan_all = false;
  bool plan_fixed_top = false;
  double plan_c_prime = 1.0;
  std::string plan_c = "2/3";
  plan->add_option("--eps", plan_eps, "rank error target")->required();
  plan->add_option("--delta", plan_delta, "failure probability")->required();
  plan->add_flag("--all-quantiles", plan_all, "size for all quantiles simultaneously");
  plan->add_flag("--fixed-top", plan_fixed_top, "plan fixed-top mode");
  plan->add_option("--cprime", plan_c_prime, "constant in the fixed-top condition");
  plan->add_option("--c", plan_c, "decay ratio");

  // eval
  auto* eval = app.add_subcommand("eval", "run Monte Carlo error experiments");
  sketch_options eval_opts;
  uint64_t eval_n = 100000;
  uint32_t eval_trials = 10;
  uint32_t eval_fanout = 1;
  std::string eval_dist = "random-permutation";
  double eval_eps = 0.01;
  uint64_t eval_seed = 0;
  std::string eval_format = "csv";
  uint32_t eval_threads = 0;
  std::string eval_out;
  add_sketch_options(eval, eval_opts);
  eval->add_option("--n", eval_n, "stream length");
  eval->add_option("--trials", eval_trials, "independent trials");
  eval->add_option("--fanout", eval_fanout, "merge fan-in (1 = single sketch)");
  eval->add_option("--dist", eval_dist,
                   "random-permutation|sorted-ascending|sorted-descending|iid-uniform|adversarial-zoom");
  eval->add_option("--eps", eval_eps, "grid resolution and failure threshold");
  eval->add_option("--seed", eval_seed, "master seed");
  eval->add_option("--format", eval_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--threads", eval_threads, "worker threads (0 = hardware)");
  eval->add_option("--out", eval_out, "report file (default: stdout)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print a human-readable dump of a sketch file");
  std::string inspect_file;
  inspect->add_option("file", inspect_file, "sketch file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return k_exit_usage;
  }

  try {
    if (build->parsed()) return cmd_build(build_in, build_out, build_opts, build_seed);
    if (query->parsed()) return cmd_query(query_file, rank_query, quantile_query, cdf_list);
    if (merge->parsed()) return cmd_merge(merge_inputs, merge_out, merge_seed);
    if (plan->parsed()) return cmd_plan(plan_eps, plan_delta, plan_all, plan_fixed_top, plan_c_prime, plan_c);
    if (eval->parsed()) {
      return cmd_eval(eval_n, eval_trials, eval_opts, eval_fanout, eval_dist, eval_eps, eval_seed,
                      eval_format, eval_threads, eval_out);
    }
    if (inspect->parsed()) return cmd_inspect(inspect_file);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_usage;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_data;
  } catch (const sketch_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_sketch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_sketch;
  }
  return k_exit_usage;
}
