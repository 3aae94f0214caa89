#pragma once

#include <cstdint>
#include <vector>

#include "otcotrain/geometry.hpp"
#include "otcotrain/rng.hpp"

namespace otc {

enum class Domain { kSrc, kTgt };
enum class Region { kSource, kTarget, kTargetOod };

struct Trajectory {
  Domain domain = Domain::kSrc;
  Region region = Region::kSource;
  Vec goal;                 // 2-D goal position
  std::vector<Vec> obs;     // emissions, R^{d_o}
  std::vector<Vec> proprio; // agent position, R^2
  std::vector<Vec> actions; // R^2
  // Target-domain emissions of the same underlying states; recorded for
  // source trajectories so oracle-paired sampling has exact correspondences.
  std::vector<Vec> shadow_obs;

  int length() const { return static_cast<int>(proprio.size()); }
};

using Dataset = std::vector<Trajectory>;

struct Probe {
  Region region = Region::kTarget;
  Vec state;
  Vec goal;
  Vec o_src;  // noise-free source emission of (state, goal)
  Vec o_tgt;  // noise-free target emission of the same (state, goal)
};

using ProbeSet = std::vector<Probe>;

struct BenchConfig {
  int n_src = 200;
  int n_tgt = 10;
  int horizon = 40;
  double noise_std = 0.01;
  int d_o = 16;
  int n_probes = 100;        // per region (in-distribution and OOD)
  double expert_gain = 1.0;
  double expert_amax = 0.1;
  double emit_bias_range = 0.5;  // per-domain offset b entries ~ U(-range, range)
  std::uint64_t seed = 0;
};

// Linear observation map o = M (s (+) g) + b (+ noise); columns of M have
// unit norm so observation scale tracks state scale.
struct EmissionModel {
  Matrix M;  // d_o x 4
  Vec b;     // d_o
};

struct Benchmark {
  BenchConfig cfg;
  Dataset d_src;
  Dataset d_tgt;
  ProbeSet probes;
  EmissionModel em_src;
  EmissionModel em_tgt;
};

// Scripted expert: a = k (g - s), clipped to norm a_max. Dynamics s' = s + a.
Vec expert_action(const Vec& s, const Vec& g, double gain, double a_max);

// Domain-specific emission parameters, derived deterministically from the
// config seed.
EmissionModel make_emission_model(const BenchConfig& cfg, Domain domain);

Vec emit_obs(const EmissionModel& em, const Vec& s, const Vec& g, double noise_std,
             CounterRng& rng);

// Convenience form matching the config-level interface.
Vec emit_obs(Domain domain, const Vec& s, const Vec& g, const BenchConfig& cfg, CounterRng& rng);

// Builds the full two-domain benchmark: n_src expert rollouts with goals over
// [-1,1]^2 under source emissions, n_tgt rollouts with goals in the left half
// (x<0) under target emissions, plus noise-free probe pairs in both halves.
// Deterministic per cfg.seed. Throws SolverError if any expert rollout fails
// to reach its goal (never expected; guards benchmark integrity).
Benchmark generate(const BenchConfig& cfg);

}
