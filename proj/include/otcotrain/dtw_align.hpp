#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "otcotrain/geometry.hpp"
#include "otcotrain/synthdata.hpp"

namespace otc {

using DtwPath = std::vector<std::pair<int, int>>;

struct DtwResult {
  double distance = 0.0;
  DtwPath path;  // (0,0) .. (|X|-1, |Y|-1), monotone unit steps
};

// Weight table over all trajectory pairs. DTW paths are cached only for
// pairs whose weight clears kPathFloor; colder pairs recompute on demand.
struct PairWeights {
  Matrix weights;     // N_src x N_tgt, entries in (0,1)
  Matrix norm_dists;  // N_src x N_tgt, >= 0
  std::unordered_map<std::int64_t, DtwPath> paths;

  static constexpr double kPathFloor = 1e-6;

  std::int64_t key(int k, int l) const {
    return static_cast<std::int64_t>(k) * weights.cols() + l;
  }
  bool has_path(int k, int l) const { return paths.count(key(k, l)) > 0; }
};

// Classic full DP with Euclidean step cost; backtracking prefers
// diagonal > up > left on ties.
DtwResult dtw(const std::vector<Vec>& X, const std::vector<Vec>& Y);

// DTW over proprio sequences divided by max(|src|, |tgt|).
double normalized_dtw(const Trajectory& xi_src, const Trajectory& xi_tgt);

// w = 1 / (1 + exp(10 (d_bar - 0.01))): strictly decreasing, range (0,1),
// midpoint exactly 0.5 at d_bar = 0.01.
double weight_transform(double d_bar);

PairWeights build_pair_weights(const Dataset& d_src, const Dataset& d_tgt);

// Cached path if retained, otherwise recomputed from the datasets.
DtwPath pair_path(const PairWeights& pw, int k, int l, const Dataset& d_src,
                  const Dataset& d_tgt);

}
