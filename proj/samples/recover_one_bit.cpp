// Recovers a 10-sparse unit vector in R^200 from 600 dithered sign bits and
// compares the ReLU program with BIHT and a single back-projection.

#include "qcs/harness.hpp"

#include <cstdio>

int main() {
  using namespace qcs;
  const Index n = 200, s = 10, m = 600;
  const double lambda = 1.0;
  const std::uint64_t seed = 7;

  const Vector x = gen_signal(SignalKind::ExactSparse, n, s, derive_seed(seed, Stream::Signal)).values;
  const SensingInstance inst = make_instance(EnsembleKind::Gaussian, m, n, lambda, 0.0, seed);
  const LossContext ctx(inst, one_bit_quantize(inst, x));
  const PriorSet ball = PriorSet::l1_ball(std::sqrt(static_cast<double>(s)));

  const RecoveryOutput lp = solve_relu_lp(ctx, ball);
  const RecoveryOutput biht = iterative_threshold(ctx, s, ThresholdVariant::BIHT);
  const RecoveryOutput ht = solve_dirksen(ctx, PriorSet::s_sparse(s), lambda);

  std::printf("loss at the true signal: %g\n", ctx.value(x));
  for (const RecoveryOutput* r : {&lp, &biht, &ht})
    std::printf("%-16s error %7.2f dB  loss %.3g  iterations %lld\n", r->solver_id.c_str(),
                to_db((x - r->estimate).norm()), r->final_loss, static_cast<long long>(r->iterations));
}
