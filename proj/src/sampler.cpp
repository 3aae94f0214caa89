#include "otcotrain/sampler.hpp"

#include <algorithm>
#include <stdexcept>

#include "otcotrain/errors.hpp"

namespace otc {

namespace {

std::vector<double> weight_cumsum(const Matrix& w) {
  if (w.size() == 0) throw std::invalid_argument("sample_pair: empty weight table");
  std::vector<double> cum(static_cast<std::size_t>(w.size()));
  double acc = 0.0;
  std::size_t idx = 0;
  for (Eigen::Index k = 0; k < w.rows(); ++k)
    for (Eigen::Index l = 0; l < w.cols(); ++l) {
      const double wv = w(k, l);
      if (wv < 0 || !std::isfinite(wv))
        throw std::invalid_argument("sample_pair: weights must be finite and nonnegative");
      acc += wv;
      cum[idx++] = acc;
    }
  if (acc <= 0.0) throw std::invalid_argument("sample_pair: all weights are zero");
  return cum;
}

std::pair<int, int> draw_from_cum(const std::vector<double>& cum, Eigen::Index cols,
                                  CounterRng& rng) {
  const double x = rng.uniform() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), x);
  const auto flat = static_cast<Eigen::Index>(std::min<std::ptrdiff_t>(
      it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
  return {static_cast<int>(flat / cols), static_cast<int>(flat % cols)};
}

void fill_column(BatchColumns& bc, int col, const Trajectory& tr, int t, bool shadow) {
  bc.obs.col(col) = shadow ? tr.shadow_obs[static_cast<std::size_t>(t)]
                           : tr.obs[static_cast<std::size_t>(t)];
  bc.proprio.col(col) = tr.proprio[static_cast<std::size_t>(t)];
  bc.actions.col(col) = tr.actions[static_cast<std::size_t>(t)];
}

void size_batch(BatchColumns& bc, const Trajectory& proto, int batch) {
  bc.obs.resize(proto.obs[0].size(), batch);
  bc.proprio.resize(proto.proprio[0].size(), batch);
  bc.actions.resize(proto.actions[0].size(), batch);
}

}  // namespace

std::pair<int, int> sample_pair(const PairWeights& weights, CounterRng& rng) {
  const std::vector<double> cum = weight_cumsum(weights.weights);
  return draw_from_cum(cum, weights.weights.cols(), rng);
}

int match_step(const DtwPath& path, int t_src) {
  for (const auto& [i, j] : path)
    if (i == t_src) return j;
  throw std::invalid_argument("match_step: t_src not covered by path");
}

PairedBatch sample_paired_batch(const Dataset& d_src, const Dataset& d_tgt,
                                const PairWeights& weights, const SamplerConfig& cfg,
                                CounterRng& rng) {
  if (d_src.empty() || d_tgt.empty())
    throw std::invalid_argument("sample_paired_batch: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.winsize < 0) throw std::invalid_argument("winsize must be >= 1, off, or full");
  if (cfg.mode == SamplerMode::kOurs &&
      (weights.weights.rows() != static_cast<Eigen::Index>(d_src.size()) ||
       weights.weights.cols() != static_cast<Eigen::Index>(d_tgt.size())))
    throw std::invalid_argument("sample_paired_batch: weight table does not match datasets");
  if (cfg.mode == SamplerMode::kOracle)
    for (const Trajectory& tr : d_src)
      if (tr.shadow_obs.size() != tr.proprio.size())
        throw ConfigError("oracle sampler mode requires shadow observations in the source dataset");

  PairedBatch out;
  out.oracle_pairing = cfg.mode == SamplerMode::kOracle;
  out.provenance.resize(static_cast<std::size_t>(cfg.batch_size));
  size_batch(out.src, d_src[0], cfg.batch_size);
  size_batch(out.tgt, cfg.mode == SamplerMode::kOracle ? d_src[0] : d_tgt[0], cfg.batch_size);

  std::vector<double> cum;
  if (cfg.mode == SamplerMode::kOurs) cum = weight_cumsum(weights.weights);

  for (int e = 0; e < cfg.batch_size; ++e) {
    PairProvenance& pv = out.provenance[static_cast<std::size_t>(e)];
    switch (cfg.mode) {
      case SamplerMode::kOurs: {
        const auto [k, l] = draw_from_cum(cum, weights.weights.cols(), rng);
        const Trajectory& ts = d_src[static_cast<std::size_t>(k)];
        const Trajectory& tt = d_tgt[static_cast<std::size_t>(l)];
        const int t_src = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ts.length())));
        int t_tgt;
        if (cfg.winsize == kWinsizeOff || cfg.winsize >= tt.length()) {
          t_tgt = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(tt.length())));
        } else {
          const DtwPath path = pair_path(weights, k, l, d_src, d_tgt);
          const int base = match_step(path, t_src);
          const int half = cfg.winsize - 1;  // winsize 1 pins t_tgt to the matched step
          const int offset =
              static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(2 * half + 1))) - half;
          t_tgt = std::clamp(base + offset, 0, tt.length() - 1);
        }
        pv = {k, t_src, l, t_tgt};
        fill_column(out.src, e, ts, t_src, false);
        fill_column(out.tgt, e, tt, t_tgt, false);
        break;
      }
      case SamplerMode::kNoSampler: {
        const int k = static_cast<int>(rng.uniform_int(d_src.size()));
        const int t_src = static_cast<int>(
            rng.uniform_int(static_cast<std::uint64_t>(d_src[static_cast<std::size_t>(k)].length())));
        const int l = static_cast<int>(rng.uniform_int(d_tgt.size()));
        const int t_tgt = static_cast<int>(
            rng.uniform_int(static_cast<std::uint64_t>(d_tgt[static_cast<std::size_t>(l)].length())));
        pv = {k, t_src, l, t_tgt};
        fill_column(out.src, e, d_src[static_cast<std::size_t>(k)], t_src, false);
        fill_column(out.tgt, e, d_tgt[static_cast<std::size_t>(l)], t_tgt, false);
        break;
      }
      case SamplerMode::kOracle: {
        const int k = static_cast<int>(rng.uniform_int(d_src.size()));
        const Trajectory& ts = d_src[static_cast<std::size_t>(k)];
        const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ts.length())));
        pv = {k, t, k, t};
        fill_column(out.src, e, ts, t, false);
        fill_column(out.tgt, e, ts, t, true);
        break;
      }
    }
  }
  return out;
}

PairedBatch replay_batch(const Dataset& d_src, const Dataset& d_tgt,
                         const std::vector<PairProvenance>& provenance, bool oracle_pairing) {
  if (provenance.empty()) throw std::invalid_argument("replay_batch: empty provenance");
  PairedBatch out;
  out.oracle_pairing = oracle_pairing;
  out.provenance = provenance;
  const int batch = static_cast<int>(provenance.size());
  size_batch(out.src, d_src[0], batch);
  size_batch(out.tgt, oracle_pairing ? d_src[0] : d_tgt[0], batch);
  for (int e = 0; e < batch; ++e) {
    const PairProvenance& pv = provenance[static_cast<std::size_t>(e)];
    fill_column(out.src, e, d_src[static_cast<std::size_t>(pv.src_traj)], pv.src_t, false);
    if (oracle_pairing)
      fill_column(out.tgt, e, d_src[static_cast<std::size_t>(pv.tgt_traj)], pv.tgt_t, true);
    else
      fill_column(out.tgt, e, d_tgt[static_cast<std::size_t>(pv.tgt_traj)], pv.tgt_t, false);
  }
  return out;
}

}
