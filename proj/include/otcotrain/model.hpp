#pragma once

#include <utility>
#include <vector>

#include "otcotrain/geometry.hpp"
#include "otcotrain/rng.hpp"
#include "otcotrain/sampler.hpp"

namespace otc {

struct ModelConfig {
  int d_o = 16;
  int hidden = 32;
  int d_z = 8;
  int d_x = 2;
  int d_a = 2;
};

// One-hidden-layer tanh encoder o -> z plus an affine policy (z (+) x) -> a.
struct ModelParams {
  ModelConfig dims;
  Matrix W1;  // hidden x d_o
  Vec b1;     // hidden
  Matrix W2;  // d_z x hidden
  Vec b2;     // d_z
  Matrix Wp;  // d_a x (d_z + d_x)
  Vec bp;     // d_a
};

struct ModelGrads {
  Matrix W1, W2, Wp;
  Vec b1, b2, bp;
};

struct LossBreakdown {
  double bc = 0.0;
  double uot = 0.0;
  double mmd = 0.0;
  double total = 0.0;
};

enum class AlignKind { kNone, kUot, kMmd };

struct LossConfig {
  double lambda = 0.1;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  AlignKind align = AlignKind::kUot;
};

// Uniform init in +-1/sqrt(fan_in) for weights and biases.
ModelParams init_params(const ModelConfig& cfg, CounterRng& rng);

ModelGrads zero_grads(const ModelConfig& cfg);

Vec encode(const ModelParams& params, const Vec& o);
Matrix encode_batch(const ModelParams& params, const Matrix& obs);  // d_o x B -> d_z x B

Vec policy_forward(const ModelParams& params, const Vec& z, const Vec& x);

// Mean squared action error over a batch.
double bc_loss(const ModelParams& params, const BatchColumns& batch);

// Squared distance between mean embeddings (columns are samples).
double mmd_loss(const Matrix& Z_src, const Matrix& Z_tgt);
double mmd_loss(const std::vector<Vec>& Z_src, const std::vector<Vec>& Z_tgt);

// Combined loss and exact parameter gradients. The alignment term treats
// `plan` as a constant (envelope gradient): only the latent half of the
// ground cost backpropagates, through the encoder. With align == kNone the
// ot_batch and plan arguments are ignored and may be empty.
std::pair<LossBreakdown, ModelGrads> total_loss_and_grads(const ModelParams& params,
                                                          const BatchColumns& bc_batch,
                                                          const PairedBatch& ot_batch,
                                                          const Matrix& plan,
                                                          const LossConfig& cfg);

struct AdamState {
  ModelGrads m;
  ModelGrads v;
  long step = 0;
};

AdamState make_adam_state(const ModelConfig& cfg);

// Standard bias-corrected adaptive-moment update, applied in place.
void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}
