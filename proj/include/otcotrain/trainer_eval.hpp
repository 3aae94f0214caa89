#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "otcotrain/dtw_align.hpp"
#include "otcotrain/model.hpp"
#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/sampler.hpp"
#include "otcotrain/synthdata.hpp"

namespace otc {

enum class Method { kOurs, kCotrain, kMmd, kSourceOnly, kTargetOnly };

struct TrainConfig {
  Method method = Method::kOurs;
  double lambda = 0.1;
  int bc_batch = 256;
  int ot_batch = 128;
  double cotrain_ratio = 0.9;  // source fraction of each BC batch
  UotConfig uot;               // epsilon 5e-4, tau 0.01 defaults
  SamplerConfig sampler;       // mode/winsize; batch_size and seed come from here
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  ModelConfig model;
  double lr = 1e-3;
  int steps = 5000;
  int eval_every = 500;
  std::uint64_t seed = 0;
};

struct MetricsRecord {
  long step = 0;
  double bc_loss = 0.0;
  double uot_loss = 0.0;
  double align_err_id = 0.0;
  double align_err_ood = 0.0;
  double action_mse_ood = 0.0;
  double success_rate_id = 0.0;
  double success_rate_ood = 0.0;
};

using MetricsLog = std::vector<MetricsRecord>;

struct TrainResult {
  ModelParams params;
  AdamState opt;
  MetricsLog log;
  int solver_failures = 0;
  // Set when more than 1% of steps lost their alignment term to solver
  // non-convergence; such a run must not be trusted.
  bool failed = false;
};

// Algorithm: per step, a BC batch mixed cotrain_ratio:1-ratio from source and
// target datasets; methods with an alignment term add a paired batch, a
// solve, and the envelope gradient of the transport cost. Evaluation runs at
// step 0, every eval_every steps, and at the final step. Deterministic per
// cfg.seed.
TrainResult train(const TrainConfig& cfg, const Benchmark& bench, const PairWeights& weights);

// One evaluation pass: alignment errors over probes, rollout success rates on
// the target emission model, action error against the expert on
// out-of-distribution probes. bc/align are the caller's latest loss values
// (zero when evaluating a standalone checkpoint).
MetricsRecord evaluate_model(const ModelParams& params, const Benchmark& bench, long step,
                             double bc_loss, double align_loss);

// Mean squared latent gap between paired emissions, split by probe region:
// (in-distribution, out-of-distribution).
std::pair<double, double> eval_alignment(const ModelParams& params, const ProbeSet& probes);

struct RolloutResult {
  std::vector<Vec> states;  // length horizon + 1
  bool success = false;
};

// Closed loop s' = s + policy(encode(emit(s, g)), s) with noise-free
// emissions; success iff the final state is within 0.05 of the goal.
RolloutResult rollout(const ModelParams& params, const EmissionModel& em, const Vec& goal,
                      int horizon);

// Total variance of encoded probe latents (both domains); the no-collapse
// diagnostic used by tests.
double latent_variance(const ModelParams& params, const ProbeSet& probes);

enum class SweepParam { kEpsilon, kTau, kWinsize, kNsrc };

struct SweepSpec {
  SweepParam param = SweepParam::kEpsilon;
  std::vector<double> values;        // winsize/n_src values are integral
  std::vector<std::uint64_t> seeds;  // training seeds per value
};

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsLog log;  // full per-eval history of the run (empty on failure)
  MetricsRecord final_rec;
  int solver_failures = 0;
};

// One-parameter sweep: retrains per (value, seed) on a benchmark regenerated
// from bench_base (n_src sweeps change the dataset, other parameters reuse
// it). Per-row failures are recorded and do not abort the rest of the grid.
std::vector<SweepRow> sweep(const SweepSpec& spec, const BenchConfig& bench_base,
                            const TrainConfig& train_base);

const char* method_name(Method m);
const char* sweep_param_name(SweepParam p);

}
