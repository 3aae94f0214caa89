#include "otcotrain/dtw_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace otc {

DtwResult dtw(const std::vector<Vec>& X, const std::vector<Vec>& Y) {
  const int n = static_cast<int>(X.size()), m = static_cast<int>(Y.size());
  if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty sequence");
  for (int i = 1; i < n; ++i)
    if (X[i].size() != X[0].size()) throw std::invalid_argument("dtw: ragged dims in X");
  for (int j = 1; j < m; ++j)
    if (Y[j].size() != Y[0].size()) throw std::invalid_argument("dtw: ragged dims in Y");
  if (X[0].size() != Y[0].size()) throw std::invalid_argument("dtw: dimension mismatch");

  const double inf = std::numeric_limits<double>::infinity();
  Matrix D(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double step = (X[i] - Y[j]).norm();
      double best;
      if (i == 0 && j == 0)
        best = 0.0;
      else {
        best = inf;
        if (i > 0 && j > 0) best = D(i - 1, j - 1);
        if (i > 0) best = std::min(best, D(i - 1, j));
        if (j > 0) best = std::min(best, D(i, j - 1));
      }
      D(i, j) = step + best;
    }

  DtwResult r;
  r.distance = D(n - 1, m - 1);
  int i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = D(i - 1, j - 1), up = D(i - 1, j), left = D(i, j - 1);
      if (diag <= up && diag <= left) {
        --i; --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double normalized_dtw(const Trajectory& xi_src, const Trajectory& xi_tgt) {
  if (xi_src.proprio.empty() || xi_tgt.proprio.empty())
    throw std::invalid_argument("normalized_dtw: empty trajectory");
  const double raw = dtw(xi_src.proprio, xi_tgt.proprio).distance;
  return raw / static_cast<double>(std::max(xi_src.proprio.size(), xi_tgt.proprio.size()));
}

double weight_transform(double d_bar) {
  if (d_bar < 0) throw std::invalid_argument("weight_transform: negative distance");
  return 1.0 / (1.0 + std::exp(10.0 * (d_bar - 0.01)));
}

PairWeights build_pair_weights(const Dataset& d_src, const Dataset& d_tgt) {
  if (d_src.empty() || d_tgt.empty())
    throw std::invalid_argument("build_pair_weights: empty dataset");
  const int n = static_cast<int>(d_src.size()), m = static_cast<int>(d_tgt.size());
  PairWeights pw;
  pw.weights.resize(n, m);
  pw.norm_dists.resize(n, m);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < m; ++l) {
      DtwResult r = dtw(d_src[k].proprio, d_tgt[l].proprio);
      const double d_bar = r.distance / static_cast<double>(std::max(d_src[k].proprio.size(),
                                                                     d_tgt[l].proprio.size()));
      pw.norm_dists(k, l) = d_bar;
      const double w = weight_transform(d_bar);
      pw.weights(k, l) = w;
      if (w >= PairWeights::kPathFloor) pw.paths.emplace(pw.key(k, l), std::move(r.path));
    }
  return pw;
}

DtwPath pair_path(const PairWeights& pw, int k, int l, const Dataset& d_src,
                  const Dataset& d_tgt) {
  auto it = pw.paths.find(pw.key(k, l));
  if (it != pw.paths.end()) return it->second;
  return dtw(d_src[k].proprio, d_tgt[l].proprio).path;
}

}
