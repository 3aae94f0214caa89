#include "otcotrain/synthdata.hpp"

#include <cmath>
#include <stdexcept>

#include "otcotrain/errors.hpp"

namespace otc {

namespace {

// Substream ids; per-trajectory forks keep generation independent of the
// dataset sizes, so a larger n_src extends a smaller run sample-for-sample.
constexpr std::uint64_t kStreamEmitSrc = 1;
constexpr std::uint64_t kStreamEmitTgt = 2;
constexpr std::uint64_t kStreamSrcTraj = 1000;
constexpr std::uint64_t kStreamShadow = 500000;
constexpr std::uint64_t kStreamTgtTraj = 2000000;
constexpr std::uint64_t kStreamProbeId = 3000000;
constexpr std::uint64_t kStreamProbeOod = 4000000;

Vec sample_goal(Region region, CounterRng& rng) {
  Vec g(2);
  switch (region) {
    case Region::kSource:
      g << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
      break;
    case Region::kTarget:  // left half, x < 0
      g << -1.0 + rng.uniform(), rng.uniform(-1.0, 1.0);
      break;
    case Region::kTargetOod:  // right half, x > 0
      g << 1.0 - rng.uniform(), rng.uniform(-1.0, 1.0);
      break;
  }
  return g;
}

}  // namespace

Vec expert_action(const Vec& s, const Vec& g, double gain, double a_max) {
  if (s.size() != 2 || g.size() != 2)
    throw std::invalid_argument("expert_action expects 2-D state and goal");
  Vec a = gain * (g - s);
  const double norm = a.norm();
  if (norm > a_max) a *= a_max / norm;
  return a;
}

EmissionModel make_emission_model(const BenchConfig& cfg, Domain domain) {
  CounterRng rng = CounterRng(cfg.seed).fork(domain == Domain::kSrc ? kStreamEmitSrc
                                                                    : kStreamEmitTgt);
  EmissionModel em;
  em.M.resize(cfg.d_o, 4);
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index i = 0; i < cfg.d_o; ++i) em.M(i, j) = rng.normal();
    em.M.col(j) /= em.M.col(j).norm();
  }
  em.b.resize(cfg.d_o);
  for (Eigen::Index i = 0; i < cfg.d_o; ++i)
    em.b[i] = rng.uniform(-cfg.emit_bias_range, cfg.emit_bias_range);
  return em;
}

Vec emit_obs(const EmissionModel& em, const Vec& s, const Vec& g, double noise_std,
             CounterRng& rng) {
  if (s.size() != 2 || g.size() != 2)
    throw std::invalid_argument("emit_obs expects 2-D state and goal");
  Vec sg(4);
  sg << s, g;
  Vec o = em.M * sg + em.b;
  if (noise_std > 0)
    for (Eigen::Index i = 0; i < o.size(); ++i) o[i] += noise_std * rng.normal();
  return o;
}

Vec emit_obs(Domain domain, const Vec& s, const Vec& g, const BenchConfig& cfg, CounterRng& rng) {
  return emit_obs(make_emission_model(cfg, domain), s, g, cfg.noise_std, rng);
}

namespace {

Trajectory roll_expert(const BenchConfig& cfg, Domain domain, Region region, const Vec& goal,
                       const Vec& start, const EmissionModel& em, CounterRng& rng) {
  Trajectory tr;
  tr.domain = domain;
  tr.region = region;
  tr.goal = goal;
  Vec s = start;
  for (int t = 0; t < cfg.horizon; ++t) {
    tr.obs.push_back(emit_obs(em, s, goal, cfg.noise_std, rng));
    tr.proprio.push_back(s);
    Vec a = expert_action(s, goal, cfg.expert_gain, cfg.expert_amax);
    tr.actions.push_back(a);
    s += a;
  }
  if ((s - goal).norm() >= 0.05)
    throw SolverError("expert rollout failed to reach its goal; benchmark config is infeasible");
  return tr;
}

}  // namespace

Benchmark generate(const BenchConfig& cfg) {
  if (cfg.n_src < cfg.n_tgt || cfg.n_tgt < 1)
    throw std::invalid_argument("benchmark requires n_src >= n_tgt >= 1");
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (cfg.noise_std < 0) throw std::invalid_argument("noise_std must be >= 0");
  if (cfg.d_o < 1) throw std::invalid_argument("d_o must be >= 1");
  if (cfg.n_probes < 1) throw std::invalid_argument("n_probes must be >= 1");
  if (cfg.expert_gain <= 0 || cfg.expert_gain >= 2 || cfg.expert_amax <= 0)
    throw std::invalid_argument("expert gain must lie in (0,2) for stable goal convergence");
  if (cfg.emit_bias_range < 0) throw std::invalid_argument("emit_bias_range must be >= 0");

  Benchmark bench;
  bench.cfg = cfg;
  bench.em_src = make_emission_model(cfg, Domain::kSrc);
  bench.em_tgt = make_emission_model(cfg, Domain::kTgt);
  const CounterRng root(cfg.seed);

  bench.d_src.reserve(cfg.n_src);
  for (int i = 0; i < cfg.n_src; ++i) {
    CounterRng tr_rng = root.fork(kStreamSrcTraj + static_cast<std::uint64_t>(i));
    const Vec goal = sample_goal(Region::kSource, tr_rng);
    const Vec start = sample_goal(Region::kSource, tr_rng);
    Trajectory tr =
        roll_expert(cfg, Domain::kSrc, Region::kSource, goal, start, bench.em_src, tr_rng);
    CounterRng sh_rng = root.fork(kStreamShadow + static_cast<std::uint64_t>(i));
    tr.shadow_obs.reserve(tr.proprio.size());
    for (const Vec& s : tr.proprio)
      tr.shadow_obs.push_back(emit_obs(bench.em_tgt, s, goal, cfg.noise_std, sh_rng));
    bench.d_src.push_back(std::move(tr));
  }

  bench.d_tgt.reserve(cfg.n_tgt);
  for (int j = 0; j < cfg.n_tgt; ++j) {
    CounterRng tr_rng = root.fork(kStreamTgtTraj + static_cast<std::uint64_t>(j));
    const Vec goal = sample_goal(Region::kTarget, tr_rng);
    const Vec start = sample_goal(Region::kTarget, tr_rng);
    bench.d_tgt.push_back(
        roll_expert(cfg, Domain::kTgt, Region::kTarget, goal, start, bench.em_tgt, tr_rng));
  }

  CounterRng none(0);  // probes are noise-free; emit_obs never draws from this
  auto add_probe = [&](Region region, std::uint64_t stream) {
    CounterRng pr = root.fork(stream);
    Probe pb;
    pb.region = region;
    pb.goal = sample_goal(region, pr);
    // States and goals share the region bounds, so the state draw reuses the
    // goal sampler; the probe grid then covers the region's (s, g) product.
    pb.state = sample_goal(region, pr);
    pb.o_src = emit_obs(bench.em_src, pb.state, pb.goal, 0.0, none);
    pb.o_tgt = emit_obs(bench.em_tgt, pb.state, pb.goal, 0.0, none);
    bench.probes.push_back(std::move(pb));
  };
  for (int k = 0; k < cfg.n_probes; ++k)
    add_probe(Region::kTarget, kStreamProbeId + static_cast<std::uint64_t>(k));
  for (int k = 0; k < cfg.n_probes; ++k)
    add_probe(Region::kTargetOod, kStreamProbeOod + static_cast<std::uint64_t>(k));
  return bench;
}

}
