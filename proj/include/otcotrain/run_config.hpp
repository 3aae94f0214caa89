#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/sampler.hpp"
#include "otcotrain/synthdata.hpp"
#include "otcotrain/trainer_eval.hpp"

namespace otc {

// Plain-text key=value run configuration ('#' starts a comment, one pair per
// line). Every key is optional and falls back to the defaults below; unknown
// keys are rejected by name. emit_run_config(parse_run_config(text)) is the
// canonical form and round-trips exactly.
struct RunConfig {
  BenchConfig bench;
  bool bench_seed_set = false;

  double alpha1 = 1.0;
  double alpha2 = 1.0;

  UotConfig uot;

  SamplerConfig sampler;
  bool sampler_seed_set = false;

  Method method = Method::kOurs;
  double lambda = 0.1;
  int bc_batch = 256;
  int ot_batch = 128;
  double cotrain_ratio = 0.9;
  double lr = 1e-3;
  int steps = 5000;
  int eval_every = 500;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;

  int model_hidden = 32;
  int model_d_z = 8;

  SweepParam sweep_param = SweepParam::kEpsilon;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;

  TrainConfig train_config() const;
  SweepSpec sweep_spec() const;
};

RunConfig parse_run_config(const std::string& text);  // ConfigError names the bad key
std::string emit_run_config(const RunConfig& cfg);

}
