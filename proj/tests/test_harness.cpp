#include "qcs/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace qcs;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 32;
  c.s = 3;
  c.trials = 6;
  c.values = {1.0, 2.0};
  c.algorithms = {"relu-lp", "ht", "bist", "oracle", "zero"};
  c.master_seed = 42;
  c.threads = 1;
  c.max_iter = 200;
  return c;
}

std::string table_csv(const std::vector<SweepRow>& t) {
  std::ostringstream os;
  write_table_csv(os, t);
  return os.str();
}

std::string trials_csv(const std::vector<TrialRecord>& r) {
  std::ostringstream os;
  write_trials_csv(os, r);
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("qcs_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  return d;
}

const SweepRow& row(const SweepResult& r, double value, const std::string& algo) {
  for (const auto& x : r.table)
    if (x.sweep_value == value && x.algorithm == algo) return x;
  throw std::runtime_error("row not found");
}

}  // namespace

TEST(Decibels, FloorAndConvention) {
  EXPECT_EQ(to_db(0.0), kDbFloor);
  EXPECT_EQ(to_db(1e-300), kDbFloor);
  EXPECT_EQ(to_db(1.0), 0.0);
  EXPECT_DOUBLE_EQ(to_db(0.1), -10.0);
  EXPECT_DOUBLE_EQ(to_db(0.1, 20.0), -20.0);
}

TEST(Decibels, MedianOfDbIsDbOfMedian) {
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> d(0.0, 1.0);
  for (int n : {1, 2, 7, 100, 101}) {
    std::vector<double> errs(static_cast<std::size_t>(n)), dbs;
    for (auto& e : errs) {
      e = d(rng);
      dbs.push_back(to_db(e));
    }
    if (n % 2) EXPECT_DOUBLE_EQ(median(dbs), to_db(median(errs)));
    // Even counts average the middle pair, so compare the pair itself.
    std::sort(errs.begin(), errs.end());
    std::sort(dbs.begin(), dbs.end());
    for (std::size_t k = 0; k < errs.size(); ++k) EXPECT_DOUBLE_EQ(dbs[k], to_db(errs[k]));
  }
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Config, MeasurementsAndDepthScales) {
  ExperimentConfig c;
  c.n = 200;
  EXPECT_EQ(c.measurements(3.0, 1), 600);
  c.sweep = SweepKind::BitRate;
  EXPECT_EQ(c.measurements(4.0, 3), 267);
  EXPECT_DOUBLE_EQ(c.dither_range(1), c.lambda);
  EXPECT_DOUBLE_EQ(c.dither_range(2), 2.0);
  EXPECT_DOUBLE_EQ(c.dither_range(3), 0.4);
  c.sweep = SweepKind::NoiseVarianceDb;
  EXPECT_DOUBLE_EQ(c.sigma_for(-20.0), 0.1);
  EXPECT_DOUBLE_EQ(c.sigma_for(0.0), 1.0);
}

TEST(Config, Validation) {
  ExperimentConfig c = small_config();
  c.validate();
  c.trials = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.values = {0.001};
  EXPECT_THROW(c.validate(), std::invalid_argument);  // m rounds to 0
  c = small_config();
  c.algorithms = {"nope"};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.sweep = SweepKind::NoiseVarianceDb;
  c.bits = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.sweep = SweepKind::BitRate;
  c.corruption_beta = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  ExperimentConfig c = small_config();
  c.sweep = SweepKind::BitRate;
  c.bit_depths = {1, 3};
  c.ensemble = EnsembleKind::Rademacher;
  const ExperimentConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(config_from_json(nlohmann::json{{"n", 20}, {"trails", 5}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json{{"ensemble", "cauchy"}}), std::invalid_argument);

  const auto dir = scratch_dir("config");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ \"n\": ";
  EXPECT_THROW(load_config(dir / "bad.json"), std::invalid_argument);
  std::ofstream(dir / "wrong_type.json") << "{ \"n\": \"many\" }";
  EXPECT_THROW(load_config(dir / "wrong_type.json"), std::invalid_argument);
  EXPECT_THROW(load_config(dir / "missing.json"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Sweep, OracleAndZeroEstimators) {
  ExperimentConfig c = small_config();
  c.algorithms = {"oracle", "zero"};
  const SweepResult r = run_sweep(c);
  for (double v : c.values) {
    EXPECT_EQ(row(r, v, "oracle").median_db, kDbFloor);
    EXPECT_NEAR(row(r, v, "zero").median_db, 0.0, 1e-12);
    EXPECT_EQ(row(r, v, "zero").trials, c.trials);
  }
}

TEST(Sweep, RecordsAreComplete) {
  const ExperimentConfig c = small_config();
  const SweepResult r = run_sweep(c);
  EXPECT_EQ(r.records.size(), c.values.size() * c.algorithms.size() * static_cast<std::size_t>(c.trials));
  EXPECT_EQ(r.table.size(), c.values.size() * c.algorithms.size());
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.error_l2, 0.0);
    EXPECT_FALSE(rec.failed);
  }
}

TEST(Sweep, TrialsArePairedAcrossAlgorithms) {
  const ExperimentConfig c = small_config();
  const SweepResult r = run_sweep(c);
  for (const auto& a : r.records)
    for (const auto& b : r.records)
      if (a.sweep_value == b.sweep_value && a.trial_index == b.trial_index) EXPECT_EQ(a.seed_used, b.seed_used);
  // Recomputing trial 3 of one algorithm alone reproduces its record.
  ExperimentConfig solo = c;
  solo.algorithms = {"ht"};
  std::vector<TrialRecord> out;
  run_trial(solo, 2.0, 1, 3, out);
  for (const auto& rec : r.records)
    if (rec.sweep_value == 2.0 && rec.trial_index == 3 && rec.algorithm == "ht") EXPECT_EQ(rec.error_l2, out[0].error_l2);
}

TEST(Sweep, SignalSharedAcrossSweepPoints) {
  // The zero estimator's error is ||x||, which must not depend on m.
  ExperimentConfig c = small_config();
  c.algorithms = {"zero"};
  c.signal = SignalKind::ApproxSparse;
  const SweepResult r = run_sweep(c);
  for (Index t = 0; t < c.trials; ++t) {
    double first = -1.0;
    for (const auto& rec : r.records)
      if (rec.trial_index == t) {
        if (first < 0) first = rec.error_l2;
        EXPECT_EQ(rec.error_l2, first);
      }
  }
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreadCounts) {
  ExperimentConfig c = small_config();
  const SweepResult a = run_sweep(c);
  c.threads = 4;
  const SweepResult b = run_sweep(c);
  EXPECT_EQ(table_csv(a.table), table_csv(b.table));
  EXPECT_EQ(trials_csv(a.records), trials_csv(b.records));
  c.master_seed = 43;
  EXPECT_NE(trials_csv(run_sweep(c).records), trials_csv(a.records));
}

TEST(Sweep, NoiseSweepIsPairedAcrossVariance) {
  ExperimentConfig c = small_config();
  c.algorithms = {"ht"};
  c.values = {-80.0, -60.0};
  c.rate = 2.0;
  const SweepResult r = noise_sweep(c);
  for (Index t = 0; t < c.trials; ++t) {
    std::vector<const TrialRecord*> pair;
    for (const auto& rec : r.records)
      if (rec.trial_index == t) pair.push_back(&rec);
    ASSERT_EQ(pair.size(), 2u);
    EXPECT_EQ(pair[0]->seed_used, pair[1]->seed_used);
    // At -60 dB variance (sigma = 1e-3) hardly any bit flips.
    EXPECT_NEAR(pair[0]->error_l2, pair[1]->error_l2, 0.05);
  }
}

TEST(Sweep, HugeNoiseDestroysRecovery) {
  ExperimentConfig c = small_config();
  c.algorithms = {"relu-lp"};
  c.values = {80.0};
  c.trials = 10;
  const SweepResult r = noise_sweep(c);
  EXPECT_NEAR(r.table[0].median_db, 0.0, 1.0);
}

TEST(Sweep, BitRateLabelsAndLossAtTheSignal) {
  ExperimentConfig c = small_config();
  c.algorithms = {"relu-lp", "zero"};
  c.values = {4.0};
  c.bit_depths = {1, 2, 3};
  c.trials = 3;
  const SweepResult r = bitrate_sweep(c);
  EXPECT_EQ(r.table.size(), 6u);
  EXPECT_NO_THROW(row(r, 4.0, "relu-lp:B3"));
  // The noiseless ReLU loss vanishes at the true signal for every depth.
  for (int b : {2, 3, 4, 5}) {
    const Index m = 40;
    const double delta = c.dither_range(b);
    const Vector x = gen_signal(SignalKind::ExactSparse, 32, 3, 1).values;
    const SensingInstance inst = make_instance(EnsembleKind::Gaussian, m, 32, delta, 0.0, b);
    const LossContext ctx(inst, multi_bit_quantize(inst, x, QuantizerConfig::make(delta, b)));
    EXPECT_EQ(ctx.value(x), 0.0);
  }
}

TEST(Sweep, FailedTrialsRecordTheSentinel) {
  ExperimentConfig c = small_config();
  c.algorithms = {"not-an-algorithm"};
  std::vector<TrialRecord> out;
  run_trial(c, 1.0, 1, 0, out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].failed);
  EXPECT_NEAR(out[0].error_l2, 1.0, 1e-12);  // ||x|| of a unit-norm signal
}

TEST(Emit, CsvRoundTripHeaderOnce) {
  const SweepResult r = run_sweep(small_config());
  const std::string text = table_csv(r.table);
  std::istringstream in(text);
  EXPECT_EQ(parse_table_csv(in), r.table);
  std::size_t headers = 0, pos = 0;
  while ((pos = text.find("sweep_value", pos)) != std::string::npos) ++headers, ++pos;
  EXPECT_EQ(headers, 1u);
  std::istringstream bad("a,b\n");
  EXPECT_THROW(parse_table_csv(bad), std::invalid_argument);
}

TEST(Emit, FilesAreDeterministic) {
  const SweepResult r = run_sweep(small_config());
  const auto d1 = scratch_dir("emit1"), d2 = scratch_dir("emit2");
  const auto f1 = emit(r.table, EmitFormat::Csv, d1);
  const auto f2 = emit(r.table, EmitFormat::Csv, d2);
  ASSERT_EQ(f1.size(), 1u);
  EXPECT_EQ(slurp(f1[0]), slurp(f2[0]));
  const auto plots = emit(r.table, EmitFormat::PlotData, d1);
  EXPECT_EQ(plots.size(), small_config().algorithms.size());
  const std::string ht = slurp(d1 / "table_ht.dat");
  EXPECT_EQ(ht.rfind("# ht", 0), 0u);
  EXPECT_EQ(std::count(ht.begin(), ht.end(), '\n'), 3);
  EXPECT_EQ(slurp(emit_trials(r.records, d1)), slurp(emit_trials(r.records, d2)));
  EXPECT_THROW(emit({}, EmitFormat::Csv, d1), std::invalid_argument);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Emit, ShortestRoundTripNumbers) {
  for (double v : {0.1, -6.13, 1e-300, 123456789.125, -200.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
}
