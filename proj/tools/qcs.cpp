// qcs: command-line front end for sweeps, single recoveries and diagnostics.

#include "qcs/diagnostics.hpp"
#include "qcs/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace qcs;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<Index> trials;
  std::string out_dir = ".";
  std::optional<unsigned> threads;
  std::vector<std::string> algorithms;
  std::vector<double> values;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--trials", f.trials, "trials per sweep point");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
  cmd->add_option("--algorithms", f.algorithms, "comma-separated algorithm ids")->delimiter(',');
  cmd->add_option("--values", f.values, "comma-separated sweep values")->delimiter(',');
}

ExperimentConfig resolve(const CommonFlags& f, SweepKind kind) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  c.sweep = kind;
  if (f.config.empty()) {
    if (kind == SweepKind::NoiseVarianceDb) c.values = {-50, -40, -30, -20, -10, 0};
    if (kind == SweepKind::BitRate) c.values = {1, 2, 3, 4, 5, 6};
    if (kind == SweepKind::MeasurementRate) c.values = {0.5, 1, 2, 3, 4, 5, 6};
  }
  if (f.seed) c.master_seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  if (f.threads) c.threads = *f.threads;
  if (!f.algorithms.empty()) c.algorithms = f.algorithms;
  if (!f.values.empty()) c.values = f.values;
  c.validate();
  return c;
}

void write_outputs(const SweepResult& res, const ExperimentConfig& c, const std::string& dir, const std::string& stem) {
  for (const auto& p : emit(res.table, EmitFormat::Csv, dir, stem)) std::cerr << "wrote " << p.string() << '\n';
  emit(res.table, EmitFormat::PlotData, dir, stem);
  emit_trials(res.records, dir, stem + "_trials");
  std::ofstream cfg(std::filesystem::path(dir) / (stem + "_config.json"));
  cfg << to_json(c).dump(2) << '\n';
  write_table_csv(std::cout, res.table);
}

// Whitespace- or comma-separated numeric matrix, one row per line.
std::vector<std::vector<double>> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) row.push_back(parse_double(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data");
  return rows;
}

Matrix read_matrix(const std::string& path) {
  const auto rows = read_numbers(path);
  Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw std::runtime_error(path + ": ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) a(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return a;
}

Vector read_vector(const std::string& path) {
  std::vector<double> flat;
  for (const auto& r : read_numbers(path)) flat.insert(flat.end(), r.begin(), r.end());
  return Eigen::Map<const Vector>(flat.data(), static_cast<Index>(flat.size()));
}

struct RecoverFlags {
  std::string matrix, observations, dither, out;
  std::string algorithm = "relu-lp";
  int bits = 1;
  double delta = 0.0;
  double lambda = 1.0;
  Index s = 10;
  double radius = 0.0;
  Index max_iter = 1000;
};

int run_recover(const RecoverFlags& f) {
  SensingInstance inst;
  inst.matrix = read_matrix(f.matrix);
  const Index m = inst.rows();
  const Vector obs = read_vector(f.observations);
  if (obs.size() != m) throw DimensionError("observations must have one entry per matrix row");
  inst.dither = f.dither.empty() ? Vector::Zero(m) : read_vector(f.dither);
  inst.noise = Vector::Zero(m);
  const double range = inst.dither.size() ? std::max(inst.dither.cwiseAbs().maxCoeff(), 1e-300) : 1.0;
  inst.dither_range = f.bits == 1 ? std::max(f.lambda, range) : f.delta;

  std::optional<LossContext> ctx;
  if (f.bits == 1) {
    OneBitObservation q{obs.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; }).cast<int>()};
    ctx.emplace(inst, std::move(q));
  } else {
    MultiBitObservation q{obs.array().round().cast<int>(), QuantizerConfig::make(f.delta, f.bits)};
    q.validate();
    ctx.emplace(inst, std::move(q));
  }

  const PriorSet ball = PriorSet::l1_ball(f.radius > 0.0 ? f.radius : std::sqrt(static_cast<double>(f.s)));
  RecoveryOutput out;
  if (f.algorithm == "relu-lp") {
    out = solve_relu_lp(*ctx, ball);
  } else if (f.algorithm == "relu-sg" || f.algorithm == "relu-ralg") {
    SolverConfig sc;
    sc.max_iter = f.max_iter;
    if (f.algorithm == "relu-ralg") sc.method = SubgradientMethod::SpaceDilation;
    out = solve_relu_subgradient(*ctx, ball, sc);
  } else if (f.algorithm == "ht" || f.algorithm == "st") {
    const PriorSet prior = f.algorithm == "ht" ? PriorSet::s_sparse(f.s) : ball;
    out = back_projection(*ctx, prior, BackProjection::DitheredScale, f.lambda);
  } else if (f.algorithm == "biht" || f.algorithm == "bist") {
    const bool hard = f.algorithm == "biht";
    const ThresholdVariant v = ctx->is_multibit() ? (hard ? ThresholdVariant::QIHT : ThresholdVariant::QIST)
                                                  : (hard ? ThresholdVariant::BIHT : ThresholdVariant::BIST);
    out = iterative_threshold(*ctx, f.s, v, ThresholdOptions{f.max_iter, false});
  } else {
    throw std::invalid_argument("recover: unknown algorithm " + f.algorithm);
  }

  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw std::runtime_error("cannot write " + f.out);
  }
  std::ostream& os = f.out.empty() ? std::cout : file;
  for (Index j = 0; j < out.estimate.size(); ++j) os << format_double(out.estimate(j)) << '\n';
  std::cerr << out.solver_id << ": loss " << out.final_loss << ", iterations " << out.iterations
            << (out.consistent ? ", consistent" : "") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized compressed sensing: ReLU-loss recovery and benchmark sweeps"};
  app.require_subcommand(1);

  CommonFlags fm, fn, fb;
  auto* sweep_m = app.add_subcommand("sweep-m", "median error against the measurement rate m/n");
  add_common(sweep_m, fm);
  auto* sweep_noise = app.add_subcommand("sweep-noise", "median error against the noise variance in dB");
  add_common(sweep_noise, fn);
  auto* sweep_bits = app.add_subcommand("sweep-bits", "median error against the bit rate B m/n");
  add_common(sweep_bits, fb);

  RecoverFlags rf;
  auto* recover = app.add_subcommand("recover", "recover one signal from files");
  recover->add_option("--matrix", rf.matrix, "measurement matrix, one row per line")->required();
  recover->add_option("--observations", rf.observations, "signs (one-bit) or levels (multi-bit)")->required();
  recover->add_option("--dither", rf.dither, "dither vector (default zero)");
  recover->add_option("--algorithm", rf.algorithm, "relu-lp, relu-sg, relu-ralg, ht, st, biht, bist");
  recover->add_option("--bits", rf.bits, "quantizer depth")->check(CLI::Range(1, 16));
  recover->add_option("--delta", rf.delta, "quantizer resolution for bits > 1");
  recover->add_option("--lambda", rf.lambda, "one-bit dither range, scales ht/st");
  recover->add_option("--s", rf.s, "sparsity");
  recover->add_option("--radius", rf.radius, "l1 ball radius (default sqrt(s))");
  recover->add_option("--max-iter", rf.max_iter, "iteration budget");
  recover->add_option("--out", rf.out, "estimate file (default stdout)");

  auto* diag = app.add_subcommand("diag", "diagnostics");
  diag->require_subcommand(1);
  ExpectedLossParams ep;
  double dist = 0.5;
  auto* expected = diag->add_subcommand("expected-loss", "Monte-Carlo expected ReLU loss against the closed form");
  expected->add_option("--n", ep.n);
  expected->add_option("--distance", dist, "||x - z||");
  expected->add_option("--sigma", ep.sigma);
  expected->add_option("--lambda", ep.lambda);
  expected->add_option("--trials", ep.trials);
  expected->add_option("--seed", ep.seed);
  expected->add_option("--threads", ep.threads);

  Index wn = 200, ws = 10, wtrials = 10000;
  std::uint64_t wseed = 0;
  auto* width = diag->add_subcommand("width", "Gaussian width of sqrt(s) B_1^n");
  width->add_option("--n", wn);
  width->add_option("--s", ws);
  width->add_option("--trials", wtrials);
  width->add_option("--seed", wseed);

  Index sn = 20, sm = 200;
  double stheta = 0.1, slambda = 1.0;
  std::uint64_t sseed = 0;
  auto* sep = diag->add_subcommand("separation", "well-separating hyperplanes for random x, z on the unit sphere");
  sep->add_option("--n", sn);
  sep->add_option("--m", sm);
  sep->add_option("--theta", stheta);
  sep->add_option("--lambda", slambda);
  sep->add_option("--seed", sseed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep_m) {
      const auto c = resolve(fm, SweepKind::MeasurementRate);
      write_outputs(run_sweep(c), c, fm.out_dir, "sweep_m");
    } else if (*sweep_noise) {
      const auto c = resolve(fn, SweepKind::NoiseVarianceDb);
      write_outputs(noise_sweep(c), c, fn.out_dir, "sweep_noise");
    } else if (*sweep_bits) {
      const auto c = resolve(fb, SweepKind::BitRate);
      write_outputs(bitrate_sweep(c), c, fb.out_dir, "sweep_bits");
    } else if (*recover) {
      return run_recover(rf);
    } else if (*expected) {
      Vector x = Vector::Zero(ep.n), z = Vector::Zero(ep.n);
      x(0) = ep.radius / 2.0;
      z(0) = x(0) - dist;
      const auto e = mc_expected_loss(ep, x, z);
      nlohmann::json j = {{"estimate", e.estimate}, {"closed_form_2lambda", e.closed_form}, {"rel_err", e.rel_err},
                          {"closed_form_4lambda", e.closed_form_4}, {"rel_err_4", e.rel_err_4},
                          {"std_error", e.std_error}};
      std::cout << j.dump(2) << '\n';
    } else if (*width) {
      std::cout << nlohmann::json{{"n", wn}, {"s", ws}, {"width", gaussian_width_l1(wn, ws, wtrials, wseed)}}.dump(2)
                << '\n';
    } else if (*sep) {
      const SensingInstance inst = make_instance(EnsembleKind::Gaussian, sm, sn, slambda, 0.0, sseed);
      Vector x = gen_signal(SignalKind::ExactSparse, sn, sn, derive_seed(sseed, Stream::Signal, {0})).values;
      Vector z = gen_signal(SignalKind::ExactSparse, sn, sn, derive_seed(sseed, Stream::Signal, {1})).values;
      const auto r = well_separated_count_1bit(inst, x, z, stheta);
      std::cout << nlohmann::json{{"m", sm}, {"theta", stheta}, {"count", r.count}, {"fraction", r.fraction},
                                  {"distance", (x - z).norm()}}.dump(2)
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
