#include "otcotrain/trainer_eval.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "otcotrain/errors.hpp"

namespace otc {

namespace {

// Stream ids for the independent RNG substreams of a run. BC sampling and
// alignment sampling are separated so that disabling the alignment branch
// leaves the BC trajectory byte-identical.
constexpr std::uint64_t kStreamInit = 12;
constexpr std::uint64_t kStreamBc = 10;
constexpr std::uint64_t kStreamOt = 11;

constexpr double kSuccessRadius = 0.05;
constexpr double kPi = 3.14159265358979323846;

void draw_bc_batch(const Dataset& d_src, const Dataset& d_tgt, int batch, double ratio,
                   CounterRng& rng, BatchColumns& out) {
  const int n_from_src = static_cast<int>(std::floor(ratio * batch));
  for (int e = 0; e < batch; ++e) {
    const Dataset& ds = e < n_from_src ? d_src : d_tgt;
    const int k = static_cast<int>(rng.uniform_int(ds.size()));
    const Trajectory& tr = ds[static_cast<std::size_t>(k)];
    const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(tr.length())));
    out.obs.col(e) = tr.obs[static_cast<std::size_t>(t)];
    out.proprio.col(e) = tr.proprio[static_cast<std::size_t>(t)];
    out.actions.col(e) = tr.actions[static_cast<std::size_t>(t)];
  }
}

}  // namespace

MetricsRecord evaluate_model(const ModelParams& params, const Benchmark& bench, long step,
                             double last_bc, double last_align) {
  MetricsRecord rec;
  rec.step = step;
  rec.bc_loss = last_bc;
  rec.uot_loss = last_align;
  const auto [id_err, ood_err] = eval_alignment(params, bench.probes);
  rec.align_err_id = id_err;
  rec.align_err_ood = ood_err;

  int id_n = 0, id_ok = 0, ood_n = 0, ood_ok = 0;
  double mse = 0.0;
  int mse_n = 0;
  for (const Probe& pb : bench.probes) {
    if (pb.region == Region::kTarget) {
      ++id_n;
      if (rollout(params, bench.em_tgt, pb.goal, bench.cfg.horizon).success) ++id_ok;
    } else if (pb.region == Region::kTargetOod) {
      ++ood_n;
      if (rollout(params, bench.em_tgt, pb.goal, bench.cfg.horizon).success) ++ood_ok;
      const Vec pred = policy_forward(params, encode(params, pb.o_tgt), pb.state);
      const Vec expert = expert_action(pb.state, pb.goal, bench.cfg.expert_gain,
                                       bench.cfg.expert_amax);
      mse += (pred - expert).squaredNorm();
      ++mse_n;
    }
  }
  rec.success_rate_id = id_n > 0 ? static_cast<double>(id_ok) / id_n : 0.0;
  rec.success_rate_ood = ood_n > 0 ? static_cast<double>(ood_ok) / ood_n : 0.0;
  rec.action_mse_ood = mse_n > 0 ? mse / mse_n : 0.0;
  return rec;
}

TrainResult train(const TrainConfig& cfg, const Benchmark& bench, const PairWeights& weights) {
  if (cfg.lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  if (cfg.cotrain_ratio < 0 || cfg.cotrain_ratio > 1)
    throw std::invalid_argument("cotrain_ratio must lie in [0, 1]");
  if (cfg.bc_batch < 1 || cfg.ot_batch < 1)
    throw std::invalid_argument("batch sizes must be >= 1");
  if (cfg.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (cfg.lr <= 0) throw std::invalid_argument("lr must be > 0");
  if (bench.d_src.empty() || bench.d_tgt.empty())
    throw std::invalid_argument("train: empty dataset");
  if (bench.d_src[0].obs[0].size() != cfg.model.d_o)
    throw std::invalid_argument("model d_o does not match dataset observations");

  double ratio = cfg.cotrain_ratio;
  double lambda = cfg.lambda;
  AlignKind align = AlignKind::kNone;
  switch (cfg.method) {
    case Method::kOurs: align = AlignKind::kUot; break;
    case Method::kMmd: align = AlignKind::kMmd; break;
    case Method::kCotrain: lambda = 0.0; break;
    case Method::kSourceOnly: lambda = 0.0; ratio = 1.0; break;
    case Method::kTargetOnly: lambda = 0.0; ratio = 0.0; break;
  }
  if (lambda == 0.0) align = AlignKind::kNone;  // skips sampling and solving entirely
  if (align == AlignKind::kUot &&
      (weights.weights.rows() != static_cast<Eigen::Index>(bench.d_src.size()) ||
       weights.weights.cols() != static_cast<Eigen::Index>(bench.d_tgt.size())))
    throw std::invalid_argument("train: pair weights do not match datasets");

  const CounterRng root(cfg.seed);
  CounterRng init_rng = root.fork(kStreamInit);
  CounterRng bc_rng = root.fork(kStreamBc);
  CounterRng ot_rng = root.fork(kStreamOt);

  TrainResult res;
  res.params = init_params(cfg.model, init_rng);
  AdamState opt = make_adam_state(cfg.model);

  SamplerConfig eff_sampler = cfg.sampler;
  eff_sampler.batch_size = cfg.ot_batch;

  LossConfig losscfg;
  losscfg.lambda = lambda;
  losscfg.alpha1 = cfg.alpha1;
  losscfg.alpha2 = cfg.alpha2;

  BatchColumns bc_batch;
  bc_batch.obs.resize(cfg.model.d_o, cfg.bc_batch);
  bc_batch.proprio.resize(cfg.model.d_x, cfg.bc_batch);
  bc_batch.actions.resize(cfg.model.d_a, cfg.bc_batch);

  const Vec uniform_b = Vec::Constant(cfg.ot_batch, 1.0 / cfg.ot_batch);
  const Marginals ot_marginals{uniform_b, uniform_b};

  double last_bc = 0.0, last_align = 0.0;
  res.log.push_back(evaluate_model(res.params, bench, 0, last_bc, last_align));

  for (int t = 1; t <= cfg.steps; ++t) {
    draw_bc_batch(bench.d_src, bench.d_tgt, cfg.bc_batch, ratio, bc_rng, bc_batch);

    PairedBatch ot_batch;
    Matrix plan;
    losscfg.align = align;
    if (align != AlignKind::kNone) {
      ot_batch = sample_paired_batch(bench.d_src, bench.d_tgt, weights, eff_sampler, ot_rng);
      if (align == AlignKind::kUot) {
        try {
          const Matrix Zs = encode_batch(res.params, ot_batch.src.obs);
          const Matrix Zt = encode_batch(res.params, ot_batch.tgt.obs);
          const CostMatrix C = joint_cost_matrix_cols(Zs, ot_batch.src.proprio, Zt,
                                                      ot_batch.tgt.proprio, cfg.alpha1,
                                                      cfg.alpha2);
          TransportPlan tp = sinkhorn_unbalanced(C, ot_marginals, cfg.uot);
          if (!tp.converged) throw SolverError("unbalanced solve hit max_iter");
          plan = std::move(tp.plan);
        } catch (const SolverError&) {
          ++res.solver_failures;
          losscfg.align = AlignKind::kNone;  // drop the term for this step only
        }
      }
    }

    const auto [loss, grads] = total_loss_and_grads(res.params, bc_batch, ot_batch, plan, losscfg);
    // Cosine decay to zero: without it the policy never settles and the
    // final evaluation reads a random point of the step-size jitter.
    const double lr_t = cfg.lr * 0.5 * (1.0 + std::cos(kPi * (t - 1) / cfg.steps));
    adam_step(res.params, grads, opt, lr_t);
    last_bc = loss.bc;
    last_align = align == AlignKind::kMmd ? loss.mmd : loss.uot;

    if (t % cfg.eval_every == 0 || t == cfg.steps)
      res.log.push_back(evaluate_model(res.params, bench, t, last_bc, last_align));
  }

  res.opt = opt;
  res.failed = res.solver_failures > 0 && res.solver_failures * 100 >= cfg.steps;
  return res;
}

std::pair<double, double> eval_alignment(const ModelParams& params, const ProbeSet& probes) {
  double id_sum = 0.0, ood_sum = 0.0;
  int id_n = 0, ood_n = 0;
  for (const Probe& pb : probes) {
    const double gap = (encode(params, pb.o_src) - encode(params, pb.o_tgt)).squaredNorm();
    if (pb.region == Region::kTargetOod) {
      ood_sum += gap;
      ++ood_n;
    } else {
      id_sum += gap;
      ++id_n;
    }
  }
  if (id_n == 0 || ood_n == 0)
    throw std::invalid_argument("eval_alignment: probes must cover both regions");
  return {id_sum / id_n, ood_sum / ood_n};
}

RolloutResult rollout(const ModelParams& params, const EmissionModel& em, const Vec& goal,
                      int horizon) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (goal.size() != 2 || !goal.allFinite())
    throw std::invalid_argument("rollout: goal must be a finite 2-D point");
  RolloutResult out;
  CounterRng none(0);
  // Reset inside the goal's half of the square, keyed off the goal bits, so
  // out-of-distribution episodes play out entirely in undemonstrated states
  // while repeat evaluations of the same goal stay deterministic.
  std::uint64_t ka, kb;
  std::memcpy(&ka, &goal[0], sizeof ka);
  std::memcpy(&kb, &goal[1], sizeof kb);
  CounterRng start_rng(ka * 0x9E3779B97F4A7C15ull ^ (kb + 0x632BE59BD9B4E019ull));
  Vec s(2);
  const double sx = start_rng.uniform();
  s << (goal[0] < 0.0 ? -sx : sx), start_rng.uniform(-1.0, 1.0);
  out.states.push_back(s);
  for (int t = 0; t < horizon; ++t) {
    const Vec o = emit_obs(em, s, goal, 0.0, none);
    const Vec a = policy_forward(params, encode(params, o), s);
    s += a;
    if (!s.allFinite()) return out;  // diverged; success stays false
    out.states.push_back(s);
  }
  out.success = (s - goal).norm() < kSuccessRadius;
  return out;
}

double latent_variance(const ModelParams& params, const ProbeSet& probes) {
  if (probes.empty()) throw std::invalid_argument("latent_variance: empty probes");
  std::vector<Vec> zs;
  zs.reserve(probes.size() * 2);
  for (const Probe& pb : probes) {
    zs.push_back(encode(params, pb.o_src));
    zs.push_back(encode(params, pb.o_tgt));
  }
  Vec mean = Vec::Zero(zs[0].size());
  for (const Vec& z : zs) mean += z;
  mean /= static_cast<double>(zs.size());
  double var = 0.0;
  for (const Vec& z : zs) var += (z - mean).squaredNorm();
  return var / static_cast<double>(zs.size());
}

std::vector<SweepRow> sweep(const SweepSpec& spec, const BenchConfig& bench_base,
                            const TrainConfig& train_base) {
  if (spec.values.empty() || spec.seeds.empty())
    throw std::invalid_argument("sweep: empty value or seed grid");
  std::vector<SweepRow> rows;
  for (const double value : spec.values) {
    BenchConfig bcfg = bench_base;
    TrainConfig tcfg = train_base;
    switch (spec.param) {
      case SweepParam::kEpsilon: tcfg.uot.epsilon = value; break;
      case SweepParam::kTau: tcfg.uot.tau = value; break;
      case SweepParam::kWinsize: tcfg.sampler.winsize = static_cast<int>(value); break;
      case SweepParam::kNsrc: bcfg.n_src = static_cast<int>(value); break;
    }
    for (const std::uint64_t seed : spec.seeds) {
      SweepRow row;
      row.value = value;
      row.seed = seed;
      try {
        const Benchmark bench = generate(bcfg);
        const PairWeights weights = build_pair_weights(bench.d_src, bench.d_tgt);
        tcfg.seed = seed;
        TrainResult res = train(tcfg, bench, weights);
        row.solver_failures = res.solver_failures;
        if (res.failed) {
          row.error = "more than 1% of steps lost the alignment term";
        } else {
          row.ok = true;
          row.log = res.log;
          row.final_rec = res.log.back();
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kOurs: return "ours";
    case Method::kCotrain: return "cotrain";
    case Method::kMmd: return "mmd";
    case Method::kSourceOnly: return "source_only";
    case Method::kTargetOnly: return "target_only";
  }
  return "ours";
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::kEpsilon: return "epsilon";
    case SweepParam::kTau: return "tau";
    case SweepParam::kWinsize: return "winsize";
    case SweepParam::kNsrc: return "n_src";
  }
  return "epsilon";
}

}
