#pragma once

// Experiment runner: trial loops over sweeps of the measurement rate, the
// noise variance or the bit rate, median-dB aggregation and CSV output.

#include "qcs/ensemble.hpp"
#include "qcs/loss.hpp"
#include "qcs/prior.hpp"
#include "qcs/quantize.hpp"
#include "qcs/rng.hpp"
#include "qcs/solve.hpp"
#include "qcs/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef QCS_GIT_DESCRIBE
#define QCS_GIT_DESCRIBE "unknown"
#endif

namespace qcs {

enum class SweepKind { MeasurementRate, NoiseVarianceDb, BitRate };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::MeasurementRate: return "measurement-rate";
    case SweepKind::NoiseVarianceDb: return "noise-variance-db";
    case SweepKind::BitRate: return "bit-rate";
  }
  return "?";
}

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "measurement-rate") return SweepKind::MeasurementRate;
  if (s == "noise-variance-db") return SweepKind::NoiseVarianceDb;
  if (s == "bit-rate") return SweepKind::BitRate;
  throw std::invalid_argument("unknown sweep kind: " + s);
}

inline std::string to_string(SignalKind k) { return k == SignalKind::ExactSparse ? "exact" : "approx"; }

inline std::string to_string(CorruptionPolicy p) { return p == CorruptionPolicy::Random ? "random" : "min-margin"; }

/// Algorithm ids understood by the runner.
inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> ids = {"relu-lp", "relu-sg", "relu-ralg", "ht",     "st",
                                               "ht-nodither", "st-nodither", "biht", "bist", "oracle", "zero"};
  return ids;
}

struct ExperimentConfig {
  Index n = 200;
  Index s = 10;
  EnsembleKind ensemble = EnsembleKind::Gaussian;
  SignalKind signal = SignalKind::ExactSparse;
  std::vector<std::string> algorithms{"relu-lp"};

  SweepKind sweep = SweepKind::MeasurementRate;
  // m/n, noise variance in dB, or bit rate B*m/n, depending on `sweep`.
  std::vector<double> values{3.0};
  double rate = 3.0;              // m/n held fixed by the noise sweep
  int bits = 1;                   // quantizer depth outside the bit-rate sweep
  std::vector<int> bit_depths{1, 2, 3, 4, 5};

  Index trials = 500;
  double noise_sigma = 0.0;       // ignored by the noise sweep, which sets it per value
  double corruption_beta = 0.0;
  CorruptionPolicy corruption_policy = CorruptionPolicy::Random;
  double lambda = 1.0;            // one-bit dither range
  double delta_radius = 1.0;      // R in delta = 2R / (2^B - 3)
  double prior_radius = 0.0;      // radius of the l1 ball for relu/st; 0 means sqrt(s)
  std::uint64_t master_seed = 0;
  unsigned threads = 0;           // 0: hardware concurrency
  Index max_iter = 1000;
  // Error in dB is db_factor * log10(||x - x#||). The reference curves use
  // 10; 20 gives the usual amplitude convention.
  double db_factor = 10.0;

  double l1_radius() const { return prior_radius > 0.0 ? prior_radius : std::sqrt(static_cast<double>(s)); }

  std::vector<int> depths() const { return sweep == SweepKind::BitRate ? bit_depths : std::vector<int>{bits}; }

  /// Number of measurements for a sweep value at depth b.
  Index measurements(double value, int b) const {
    double r = rate;
    if (sweep == SweepKind::MeasurementRate) r = value;
    if (sweep == SweepKind::BitRate) r = value / b;
    return static_cast<Index>(std::llround(r * static_cast<double>(n)));
  }

  double sigma_for(double value) const {
    return sweep == SweepKind::NoiseVarianceDb ? std::pow(10.0, value / 20.0) : noise_sigma;
  }

  /// Resolution of the b-bit quantizer; b = 1 uses lambda.
  double dither_range(int b) const {
    if (b == 1) return lambda;
    return 2.0 * delta_radius / (std::ldexp(1.0, b) - 3.0);
  }

  void validate() const {
    if (n < 1 || s < 1 || s > n) throw std::invalid_argument("config: need 1 <= s <= n");
    if (trials < 1) throw std::invalid_argument("config: trials must be at least 1");
    if (max_iter < 1) throw std::invalid_argument("config: max_iter must be at least 1");
    if (algorithms.empty()) throw std::invalid_argument("config: no algorithms");
    for (const auto& a : algorithms)
      if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end())
        throw std::invalid_argument("config: unknown algorithm " + a);
    if (values.empty()) throw std::invalid_argument("config: no sweep values");
    if (sweep != SweepKind::NoiseVarianceDb)
      for (double v : values)
        if (!(v > 0.0)) throw std::invalid_argument("config: sweep values must be positive");
    if (sweep == SweepKind::NoiseVarianceDb && !(rate > 0.0)) throw std::invalid_argument("config: rate must be positive");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("config: noise_sigma must be nonnegative");
    if (!(corruption_beta >= 0.0 && corruption_beta < 1.0)) throw std::invalid_argument("config: corruption_beta must lie in [0, 1)");
    if (!(lambda > 0.0) || !(delta_radius > 0.0)) throw std::invalid_argument("config: lambda and delta_radius must be positive");
    if (!(db_factor > 0.0)) throw std::invalid_argument("config: db_factor must be positive");
    if (!(prior_radius >= 0.0)) throw std::invalid_argument("config: prior_radius must be nonnegative");
    const auto ds = depths();
    if (ds.empty()) throw std::invalid_argument("config: no bit depths");
    for (int b : ds) {
      if (b < 1 || b > 16) throw std::invalid_argument("config: bit depths must lie in [1, 16]");
      if (b > 1 && sweep == SweepKind::NoiseVarianceDb)
        throw std::invalid_argument("config: the noise sweep is one-bit only");
      if (b > 1 && corruption_beta > 0.0) throw std::invalid_argument("config: corruption needs one-bit measurements");
      if (b > 1)
        for (const auto& a : algorithms)
          if (a == "ht-nodither" || a == "st-nodither")
            throw std::invalid_argument("config: " + a + " needs one-bit measurements");
      for (double v : values)
        if (measurements(v, b) < 1) throw std::invalid_argument("config: sweep value gives m < 1");
    }
  }
};

// ---------------------------------------------------------------------------
// JSON config. Unknown keys are rejected so typos do not silently fall back
// to defaults.

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"n", c.n},
          {"s", c.s},
          {"ensemble", to_string(c.ensemble)},
          {"signal", to_string(c.signal)},
          {"algorithms", c.algorithms},
          {"sweep", to_string(c.sweep)},
          {"values", c.values},
          {"rate", c.rate},
          {"bits", c.bits},
          {"bit_depths", c.bit_depths},
          {"trials", c.trials},
          {"noise_sigma", c.noise_sigma},
          {"corruption_beta", c.corruption_beta},
          {"corruption_policy", to_string(c.corruption_policy)},
          {"lambda", c.lambda},
          {"delta_radius", c.delta_radius},
          {"prior_radius", c.prior_radius},
          {"master_seed", c.master_seed},
          {"threads", c.threads},
          {"max_iter", c.max_iter},
          {"db_factor", c.db_factor}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "n") c.n = v.get<Index>();
    else if (key == "s") c.s = v.get<Index>();
    else if (key == "ensemble") c.ensemble = parse_ensemble_kind(v.get<std::string>());
    else if (key == "signal") c.signal = parse_signal_kind(v.get<std::string>());
    else if (key == "algorithms") c.algorithms = v.get<std::vector<std::string>>();
    else if (key == "sweep") c.sweep = parse_sweep_kind(v.get<std::string>());
    else if (key == "values") c.values = v.get<std::vector<double>>();
    else if (key == "rate") c.rate = v.get<double>();
    else if (key == "bits") c.bits = v.get<int>();
    else if (key == "bit_depths") c.bit_depths = v.get<std::vector<int>>();
    else if (key == "trials") c.trials = v.get<Index>();
    else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
    else if (key == "corruption_beta") c.corruption_beta = v.get<double>();
    else if (key == "corruption_policy") c.corruption_policy = parse_corruption_policy(v.get<std::string>());
    else if (key == "lambda") c.lambda = v.get<double>();
    else if (key == "delta_radius") c.delta_radius = v.get<double>();
    else if (key == "prior_radius") c.prior_radius = v.get<double>();
    else if (key == "master_seed") c.master_seed = v.get<std::uint64_t>();
    else if (key == "threads") c.threads = v.get<unsigned>();
    else if (key == "max_iter") c.max_iter = v.get<Index>();
    else if (key == "db_factor") c.db_factor = v.get<double>();
    else throw std::invalid_argument("config: unknown key " + key);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Records

struct TrialRecord {
  double sweep_value = 0.0;
  std::string algorithm;
  Index trial_index = 0;
  double error_l2 = 0.0;
  std::uint64_t seed_used = 0;
  bool failed = false;  // error_l2 then holds the sentinel ||x||
};

struct SweepRow {
  double sweep_value = 0.0;
  std::string algorithm;
  double median_db = 0.0;
  Index trials = 0;
  std::uint64_t master_seed = 0;
  std::string git_describe;
  double mean_db = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> table;
  std::vector<TrialRecord> records;
};

constexpr double kDbFloor = -200.0;

/// factor * log10(v), floored at -200 dB (v = 0 included).
inline double to_db(double v, double factor = 10.0) {
  if (!(v > 0.0)) return kDbFloor;
  return std::max(kDbFloor, factor * std::log10(v));
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Column label of an algorithm at depth b within a bit-rate sweep.
inline std::string algorithm_label(const ExperimentConfig& c, const std::string& algo, int b) {
  return c.sweep == SweepKind::BitRate ? algo + ":B" + std::to_string(b) : algo;
}

// ---------------------------------------------------------------------------
// One trial

/// Seeds of trial t. The signal only depends on (master, t); the instance also
/// on m and the depth, but not on the noise level, so noise sweeps are paired.
inline std::uint64_t signal_seed(std::uint64_t master, Index t) {
  return derive_seed(master, Stream::Signal, {static_cast<std::uint64_t>(t)});
}

inline std::uint64_t instance_seed(std::uint64_t master, Index t, Index m, int b) {
  return derive_seed(master, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(b)});
}

namespace detail {

inline ThresholdVariant threshold_variant(const std::string& algo, bool multibit) {
  if (algo == "biht") return multibit ? ThresholdVariant::QIHT : ThresholdVariant::BIHT;
  return multibit ? ThresholdVariant::QIST : ThresholdVariant::BIST;
}

inline Vector run_algorithm(const std::string& algo, const ExperimentConfig& c, const LossContext& ctx,
                            const Vector& x, const SensingInstance& undithered, const OneBitObservation* raw_bits) {
  const Index n = ctx.dim();
  const PriorSet sparse = PriorSet::s_sparse(c.s);
  const PriorSet ball = PriorSet::l1_ball(c.l1_radius());
  if (algo == "oracle") return x;
  if (algo == "zero") return Vector::Zero(n);
  if (algo == "relu-lp") return solve_relu_lp(ctx, ball).estimate;
  if (algo == "relu-sg" || algo == "relu-ralg") {
    SolverConfig sc;
    sc.max_iter = c.max_iter;
    if (algo == "relu-ralg") {
      sc.method = SubgradientMethod::SpaceDilation;
      sc.max_iter = std::max<Index>(c.max_iter, 20 * n);
    }
    return solve_relu_subgradient(ctx, ball, sc).estimate;
  }
  if (algo == "ht" || algo == "st") {
    const PriorSet& prior = algo == "ht" ? sparse : ball;
    if (ctx.is_multibit()) return back_projection(ctx, prior, BackProjection::DitheredScale, 0.0).estimate;
    return solve_dirksen(ctx, prior, c.lambda).estimate;
  }
  if (algo == "ht-nodither" || algo == "st-nodither") {
    const LossContext raw(undithered, *raw_bits);
    return back_projection(raw, algo == "ht-nodither" ? sparse : ball, BackProjection::UnditheredOneBitScale, 0.0)
        .estimate;
  }
  if (algo == "biht" || algo == "bist") {
    ThresholdOptions opt;
    opt.max_iter = c.max_iter;
    return iterative_threshold(ctx, c.s, threshold_variant(algo, ctx.is_multibit()), opt).estimate;
  }
  throw std::invalid_argument("unknown algorithm " + algo);
}

}  // namespace detail

/// Runs every configured algorithm on trial t of one sweep point and appends
/// one record per algorithm. Solver exceptions become sentinel records.
inline void run_trial(const ExperimentConfig& c, double value, int b, Index t, std::vector<TrialRecord>& out) {
  const Index m = c.measurements(value, b);
  const double sigma = c.sigma_for(value);
  const std::uint64_t seed = instance_seed(c.master_seed, t, m, b);
  const Vector x = gen_signal(c.signal, c.n, c.s, signal_seed(c.master_seed, t)).values;
  const SensingInstance inst = make_instance(c.ensemble, m, c.n, c.dither_range(b), sigma, seed);

  std::optional<LossContext> ctx;
  OneBitObservation raw_bits;
  SensingInstance undithered;
  if (b == 1) {
    OneBitObservation q = one_bit_quantize(inst, x);
    q = corrupt_bits(q, c.corruption_beta, c.corruption_policy, measurement_values(inst, x),
                     derive_seed(seed, Stream::Corruption));
    ctx.emplace(inst, std::move(q));
    const bool need_raw = std::any_of(c.algorithms.begin(), c.algorithms.end(),
                                      [](const std::string& a) { return a == "ht-nodither" || a == "st-nodither"; });
    if (need_raw) {
      // Same matrix, noise and corruption pattern, no dither.
      undithered = inst;
      undithered.dither.setZero();
      raw_bits = one_bit_quantize(undithered, x);
      raw_bits = corrupt_bits(raw_bits, c.corruption_beta, c.corruption_policy, measurement_values(undithered, x),
                              derive_seed(seed, Stream::Corruption));
    }
  } else {
    ctx.emplace(inst, multi_bit_quantize(inst, x, QuantizerConfig::make(c.dither_range(b), b)));
  }

  for (const auto& algo : c.algorithms) {
    TrialRecord r{value, algorithm_label(c, algo, b), t, 0.0, seed, false};
    try {
      const Vector est = detail::run_algorithm(algo, c, *ctx, x, undithered, &raw_bits);
      r.error_l2 = (x - est).norm();
      if (!std::isfinite(r.error_l2)) throw std::runtime_error("non-finite estimate");
    } catch (const std::exception&) {
      r.error_l2 = x.norm();
      r.failed = true;
    }
    out.push_back(std::move(r));
  }
}

/// Aggregates records into one row per (sweep value, algorithm label), in the
/// order in which they first appear.
inline std::vector<SweepRow> aggregate(const std::vector<TrialRecord>& records, std::uint64_t master_seed,
                                       double db_factor = 10.0, const std::string& git = QCS_GIT_DESCRIBE) {
  std::vector<std::pair<double, std::string>> keys;
  for (const auto& r : records) {
    const std::pair<double, std::string> k{r.sweep_value, r.algorithm};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::vector<SweepRow> rows;
  for (const auto& [value, algo] : keys) {
    std::vector<double> errs;
    for (const auto& r : records)
      if (r.sweep_value == value && r.algorithm == algo) errs.push_back(r.error_l2);
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    rows.push_back({value, algo, to_db(median(errs), db_factor), static_cast<Index>(errs.size()), master_seed, git,
                    to_db(mean, db_factor)});
  }
  return rows;
}

/// Runs the configured sweep. Work units are (sweep point, trial) pairs spread
/// over a pool of threads; each unit writes into its own slot, so the output is
/// independent of scheduling.
inline SweepResult run_sweep(const ExperimentConfig& c) {
  c.validate();
  struct Unit {
    double value;
    int bits;
    Index trial;
  };
  std::vector<Unit> units;
  for (double v : c.values)
    for (int b : c.depths())
      for (Index t = 0; t < c.trials; ++t) units.push_back({v, b, t});

  std::vector<std::vector<TrialRecord>> slots(units.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t u = next++; u < units.size(); u = next++)
      run_trial(c, units[u].value, units[u].bits, units[u].trial, slots[u]);
  };
  unsigned threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, units.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  SweepResult res;
  for (auto& s : slots)
    for (auto& r : s) res.records.push_back(std::move(r));
  res.table = aggregate(res.records, c.master_seed, c.db_factor);
  return res;
}

/// Noise sweep: the sweep values are noise variances in dB, sigma^2 = 10^(dB/10).
inline SweepResult noise_sweep(ExperimentConfig c) {
  c.sweep = SweepKind::NoiseVarianceDb;
  return run_sweep(c);
}

/// Bit-rate sweep: per depth B, m = round(rate * n / B).
inline SweepResult bitrate_sweep(ExperimentConfig c) {
  c.sweep = SweepKind::BitRate;
  return run_sweep(c);
}

// ---------------------------------------------------------------------------
// Output. Numbers are written in shortest round-trip form.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

inline const char* kTableHeader = "sweep_value,algorithm,median_db,trials,master_seed,git_describe,mean_db";
inline const char* kTrialHeader = "sweep_value,algorithm,trial_index,error_l2,seed_used,failed";

inline void write_table_csv(std::ostream& os, const std::vector<SweepRow>& table) {
  os << kTableHeader << '\n';
  for (const auto& r : table)
    os << format_double(r.sweep_value) << ',' << r.algorithm << ',' << format_double(r.median_db) << ',' << r.trials
       << ',' << r.master_seed << ',' << r.git_describe << ',' << format_double(r.mean_db) << '\n';
}

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << kTrialHeader << '\n';
  for (const auto& r : records)
    os << format_double(r.sweep_value) << ',' << r.algorithm << ',' << r.trial_index << ',' << format_double(r.error_l2)
       << ',' << r.seed_used << ',' << (r.failed ? 1 : 0) << '\n';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<SweepRow> parse_table_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTableHeader) throw std::invalid_argument("table csv: missing header");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::invalid_argument("table csv: expected 7 fields: " + line);
    rows.push_back({parse_double(f[0]), f[1], parse_double(f[2]), std::stoll(f[3]), std::stoull(f[4]), f[5],
                    parse_double(f[6])});
  }
  return rows;
}

enum class EmitFormat { Csv, PlotData };

inline std::string plot_file_name(const std::string& stem, const std::string& algo) {
  std::string name = algo;
  std::replace(name.begin(), name.end(), ':', '_');
  return stem + "_" + name + ".dat";
}

/// Writes `stem`.csv, or one "value median_db" file per algorithm curve.
/// Returns the paths written.
inline std::vector<std::filesystem::path> emit(const std::vector<SweepRow>& table, EmitFormat format,
                                               const std::filesystem::path& dir, const std::string& stem = "table") {
  if (table.empty()) throw std::invalid_argument("emit: empty table");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    written.push_back(p);
    return os;
  };
  if (format == EmitFormat::Csv) {
    auto os = open(dir / (stem + ".csv"));
    write_table_csv(os, table);
    if (!os) throw std::runtime_error("write failed: " + written.back().string());
    return written;
  }
  std::vector<std::string> algos;
  for (const auto& r : table)
    if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end()) algos.push_back(r.algorithm);
  for (const auto& a : algos) {
    auto os = open(dir / plot_file_name(stem, a));
    os << "# " << a << ": sweep_value median_db\n";
    for (const auto& r : table)
      if (r.algorithm == a) os << format_double(r.sweep_value) << ' ' << format_double(r.median_db) << '\n';
    if (!os) throw std::runtime_error("write failed: " + written.back().string());
  }
  return written;
}

inline std::filesystem::path emit_trials(const std::vector<TrialRecord>& records, const std::filesystem::path& dir,
                                         const std::string& stem = "trials") {
  std::filesystem::create_directories(dir);
  const auto p = dir / (stem + ".csv");
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  write_trials_csv(os, records);
  if (!os) throw std::runtime_error("write failed: " + p.string());
  return p;
}

}  // namespace qcs
