#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "otcotrain/dtw_align.hpp"
#include "otcotrain/rng.hpp"
#include "otcotrain/synthdata.hpp"

namespace otc {

enum class SamplerMode { kOurs, kNoSampler, kOracle };

// winsize sentinels: 0 disables the matched window (uniform target step),
// kWinsizeFull behaves as a window covering any trajectory.
constexpr int kWinsizeOff = 0;
constexpr int kWinsizeFull = 1 << 30;

struct SamplerConfig {
  SamplerMode mode = SamplerMode::kOurs;
  int winsize = 10;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

struct BatchColumns {
  Matrix obs;      // d_o x B
  Matrix proprio;  // d_x x B
  Matrix actions;  // d_a x B
};

struct PairProvenance {
  int src_traj = 0;
  int src_t = 0;
  int tgt_traj = 0;
  int tgt_t = 0;
};

struct PairedBatch {
  BatchColumns src;
  BatchColumns tgt;
  std::vector<PairProvenance> provenance;
  // Oracle batches pair each source transition with its own shadow emission;
  // tgt_traj/tgt_t then index the source dataset's shadow records.
  bool oracle_pairing = false;
};

// Draws one trajectory pair (k, l) with probability weights(k,l) / sum.
std::pair<int, int> sample_pair(const PairWeights& weights, CounterRng& rng);

// Smallest t_tgt aligned with t_src on a DTW path.
int match_step(const DtwPath& path, int t_src);

PairedBatch sample_paired_batch(const Dataset& d_src, const Dataset& d_tgt,
                                const PairWeights& weights, const SamplerConfig& cfg,
                                CounterRng& rng);

// Rebuilds a batch from its provenance records.
PairedBatch replay_batch(const Dataset& d_src, const Dataset& d_tgt,
                         const std::vector<PairProvenance>& provenance, bool oracle_pairing);

}
