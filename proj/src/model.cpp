#include "otcotrain/model.hpp"

#include <cmath>
#include <stdexcept>

namespace otc {

namespace {

void check_dims(const ModelParams& p) {
  const ModelConfig& d = p.dims;
  if (p.W1.rows() != d.hidden || p.W1.cols() != d.d_o || p.b1.size() != d.hidden ||
      p.W2.rows() != d.d_z || p.W2.cols() != d.hidden || p.b2.size() != d.d_z ||
      p.Wp.rows() != d.d_a || p.Wp.cols() != d.d_z + d.d_x || p.bp.size() != d.d_a)
    throw std::invalid_argument("model parameter shapes inconsistent with config dims");
}

Matrix uniform_matrix(Eigen::Index r, Eigen::Index c, double bound, CounterRng& rng) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Vec uniform_vec(Eigen::Index n, double bound, CounterRng& rng) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-bound, bound);
  return v;
}

struct EncodeCache {
  Matrix H;  // tanh activations, hidden x B
  Matrix Z;  // d_z x B
};

EncodeCache encode_cached(const ModelParams& p, const Matrix& obs) {
  EncodeCache c;
  c.H = ((p.W1 * obs).colwise() + p.b1).array().tanh();
  c.Z = (p.W2 * c.H).colwise() + p.b2;
  return c;
}

// Accumulates encoder gradients for dL/dZ at the cached activations.
void encoder_backward(const ModelParams& p, const Matrix& obs, const EncodeCache& cache,
                      const Matrix& dZ, ModelGrads& g) {
  g.W2.noalias() += dZ * cache.H.transpose();
  g.b2 += dZ.rowwise().sum();
  const Matrix dPre = (p.W2.transpose() * dZ).array() * (1.0 - cache.H.array().square());
  g.W1.noalias() += dPre * obs.transpose();
  g.b1 += dPre.rowwise().sum();
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, CounterRng& rng) {
  if (cfg.d_o < 1 || cfg.hidden < 1 || cfg.d_z < 1 || cfg.d_x < 1 || cfg.d_a < 1)
    throw std::invalid_argument("model dims must be positive");
  ModelParams p;
  p.dims = cfg;
  const char* probe_scale = std::getenv("OTC_PROBE_INIT");
  const double ps = probe_scale ? std::atof(probe_scale) : 1.0;
  const double s1 = ps / std::sqrt(static_cast<double>(cfg.d_o));
  const double s2 = ps / std::sqrt(static_cast<double>(cfg.hidden));
  const double sp = 1.0 / std::sqrt(static_cast<double>(cfg.d_z + cfg.d_x));
  p.W1 = uniform_matrix(cfg.hidden, cfg.d_o, s1, rng);
  p.b1 = uniform_vec(cfg.hidden, s1, rng);
  p.W2 = uniform_matrix(cfg.d_z, cfg.hidden, s2, rng);
  p.b2 = uniform_vec(cfg.d_z, s2, rng);
  p.Wp = uniform_matrix(cfg.d_a, cfg.d_z + cfg.d_x, sp, rng);
  p.bp = uniform_vec(cfg.d_a, sp, rng);
  return p;
}

ModelGrads zero_grads(const ModelConfig& cfg) {
  ModelGrads g;
  g.W1 = Matrix::Zero(cfg.hidden, cfg.d_o);
  g.b1 = Vec::Zero(cfg.hidden);
  g.W2 = Matrix::Zero(cfg.d_z, cfg.hidden);
  g.b2 = Vec::Zero(cfg.d_z);
  g.Wp = Matrix::Zero(cfg.d_a, cfg.d_z + cfg.d_x);
  g.bp = Vec::Zero(cfg.d_a);
  return g;
}

Vec encode(const ModelParams& p, const Vec& o) {
  check_dims(p);
  if (o.size() != p.dims.d_o) throw std::invalid_argument("encode: observation dim mismatch");
  return p.W2 * (p.W1 * o + p.b1).array().tanh().matrix() + p.b2;
}

Matrix encode_batch(const ModelParams& p, const Matrix& obs) {
  check_dims(p);
  if (obs.rows() != p.dims.d_o) throw std::invalid_argument("encode: observation dim mismatch");
  return ((p.W2 * ((p.W1 * obs).colwise() + p.b1).array().tanh().matrix()).colwise() + p.b2);
}

Vec policy_forward(const ModelParams& p, const Vec& z, const Vec& x) {
  check_dims(p);
  if (z.size() != p.dims.d_z || x.size() != p.dims.d_x)
    throw std::invalid_argument("policy_forward: input dim mismatch");
  Vec in(p.dims.d_z + p.dims.d_x);
  in << z, x;
  return p.Wp * in + p.bp;
}

double bc_loss(const ModelParams& p, const BatchColumns& batch) {
  check_dims(p);
  const Eigen::Index B = batch.obs.cols();
  if (B == 0) throw std::invalid_argument("bc_loss: empty batch");
  Matrix Z = encode_batch(p, batch.obs);
  Matrix in(p.dims.d_z + p.dims.d_x, B);
  in << Z, batch.proprio;
  const Matrix pred = (p.Wp * in).colwise() + p.bp;
  return (pred - batch.actions).squaredNorm() / static_cast<double>(B);
}

double mmd_loss(const Matrix& Z_src, const Matrix& Z_tgt) {
  if (Z_src.cols() == 0 || Z_tgt.cols() == 0) throw std::invalid_argument("mmd_loss: empty batch");
  if (Z_src.rows() != Z_tgt.rows()) throw std::invalid_argument("mmd_loss: dim mismatch");
  return (Z_src.rowwise().mean() - Z_tgt.rowwise().mean()).squaredNorm();
}

double mmd_loss(const std::vector<Vec>& Z_src, const std::vector<Vec>& Z_tgt) {
  if (Z_src.empty() || Z_tgt.empty()) throw std::invalid_argument("mmd_loss: empty batch");
  Matrix A(Z_src[0].size(), static_cast<Eigen::Index>(Z_src.size()));
  Matrix B(Z_tgt[0].size(), static_cast<Eigen::Index>(Z_tgt.size()));
  for (std::size_t i = 0; i < Z_src.size(); ++i) A.col(static_cast<Eigen::Index>(i)) = Z_src[i];
  for (std::size_t i = 0; i < Z_tgt.size(); ++i) B.col(static_cast<Eigen::Index>(i)) = Z_tgt[i];
  return mmd_loss(A, B);
}

std::pair<LossBreakdown, ModelGrads> total_loss_and_grads(const ModelParams& p,
                                                          const BatchColumns& bc_batch,
                                                          const PairedBatch& ot_batch,
                                                          const Matrix& plan,
                                                          const LossConfig& cfg) {
  check_dims(p);
  if (cfg.lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  const Eigen::Index B = bc_batch.obs.cols();
  if (B == 0) throw std::invalid_argument("total_loss_and_grads: empty BC batch");

  LossBreakdown loss;
  ModelGrads g = zero_grads(p.dims);

  // Behavior cloning: mean ||Wp (z (+) x) + bp - a||^2.
  {
    const EncodeCache cache = encode_cached(p, bc_batch.obs);
    Matrix in(p.dims.d_z + p.dims.d_x, B);
    in << cache.Z, bc_batch.proprio;
    const Matrix resid = ((p.Wp * in).colwise() + p.bp) - bc_batch.actions;
    loss.bc = resid.squaredNorm() / static_cast<double>(B);
    const Matrix dPred = (2.0 / static_cast<double>(B)) * resid;
    g.Wp.noalias() += dPred * in.transpose();
    g.bp += dPred.rowwise().sum();
    const Matrix dZ = p.Wp.leftCols(p.dims.d_z).transpose() * dPred;
    encoder_backward(p, bc_batch.obs, cache, dZ, g);
  }

  if (cfg.align != AlignKind::kNone) {
    const Eigen::Index Bs = ot_batch.src.obs.cols(), Bt = ot_batch.tgt.obs.cols();
    if (Bs == 0 || Bt == 0)
      throw std::invalid_argument("total_loss_and_grads: empty alignment batch");
    const EncodeCache cs = encode_cached(p, ot_batch.src.obs);
    const EncodeCache ct = encode_cached(p, ot_batch.tgt.obs);
    Matrix dZs, dZt;
    if (cfg.align == AlignKind::kUot) {
      if (plan.rows() != Bs || plan.cols() != Bt)
        throw std::invalid_argument("total_loss_and_grads: plan shape does not match OT batch");
      const CostMatrix C = joint_cost_matrix_cols(cs.Z, ot_batch.src.proprio, ct.Z,
                                                  ot_batch.tgt.proprio, cfg.alpha1, cfg.alpha2);
      loss.uot = (plan.array() * C.array()).sum();
      // d<P,C>/dZ with P constant; only the alpha1 latent block carries params.
      const Vec r = plan.rowwise().sum();
      const Vec c = plan.colwise().sum().transpose();
      dZs = 2.0 * cfg.alpha1 * cfg.lambda * (cs.Z * r.asDiagonal() - ct.Z * plan.transpose());
      dZt = 2.0 * cfg.alpha1 * cfg.lambda * (ct.Z * c.asDiagonal() - cs.Z * plan);
    } else {
      const Vec diff = cs.Z.rowwise().mean() - ct.Z.rowwise().mean();
      loss.mmd = diff.squaredNorm();
      dZs = (2.0 * cfg.lambda / static_cast<double>(Bs)) * diff * Eigen::RowVectorXd::Ones(Bs);
      dZt = (-2.0 * cfg.lambda / static_cast<double>(Bt)) * diff * Eigen::RowVectorXd::Ones(Bt);
    }
    encoder_backward(p, ot_batch.src.obs, cs, dZs, g);
    encoder_backward(p, ot_batch.tgt.obs, ct, dZt, g);
  }

  loss.total = loss.bc + cfg.lambda * (cfg.align == AlignKind::kMmd ? loss.mmd : loss.uot);
  return {loss, g};
}

AdamState make_adam_state(const ModelConfig& cfg) {
  AdamState s;
  s.m = zero_grads(cfg);
  s.v = zero_grads(cfg);
  return s;
}

void adam_step(ModelParams& p, const ModelGrads& g, AdamState& s, double lr, double beta1,
               double beta2, double eps) {
  check_dims(p);
  s.step += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    m = beta1 * m + (1.0 - beta1) * grad;
    v = (beta2 * v).array() + (1.0 - beta2) * grad.array().square();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  update(p.W1, g.W1, s.m.W1, s.v.W1);
  update(p.b1, g.b1, s.m.b1, s.v.b1);
  update(p.W2, g.W2, s.m.W2, s.v.W2);
  update(p.b2, g.b2, s.m.b2, s.v.b2);
  update(p.Wp, g.Wp, s.m.Wp, s.v.Wp);
  update(p.bp, g.bp, s.m.bp, s.v.bp);
}

}
