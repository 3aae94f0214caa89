#include "otcotrain/run_config.hpp"

#include <charconv>
#include <cstdint>
#include <limits>
#include <sstream>

#include "otcotrain/errors.hpp"
#include "otcotrain/serialize.hpp"

namespace otc {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& val) {
  double v = 0.0;
  const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
  if (res.ec != std::errc() || res.ptr != val.data() + val.size())
    throw ConfigError(key + ": expected a number, got '" + val + "'");
  return v;
}

int to_int(const std::string& key, const std::string& val) {
  long long v = 0;
  const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
  if (res.ec != std::errc() || res.ptr != val.data() + val.size() ||
      v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(key + ": expected an integer, got '" + val + "'");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& val) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
  if (res.ec != std::errc() || res.ptr != val.data() + val.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + val + "'");
  return v;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string::npos ? comma : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

Method method_from(const std::string& key, const std::string& val) {
  if (val == "ours") return Method::kOurs;
  if (val == "cotrain") return Method::kCotrain;
  if (val == "mmd") return Method::kMmd;
  if (val == "source_only") return Method::kSourceOnly;
  if (val == "target_only") return Method::kTargetOnly;
  throw ConfigError(key + ": unknown method '" + val + "'");
}

SamplerMode mode_from(const std::string& key, const std::string& val) {
  if (val == "ours") return SamplerMode::kOurs;
  if (val == "no_sampler") return SamplerMode::kNoSampler;
  if (val == "oracle") return SamplerMode::kOracle;
  throw ConfigError(key + ": unknown sampler mode '" + val + "'");
}

const char* mode_name(SamplerMode m) {
  switch (m) {
    case SamplerMode::kOurs: return "ours";
    case SamplerMode::kNoSampler: return "no_sampler";
    case SamplerMode::kOracle: return "oracle";
  }
  return "ours";
}

Stabilization stab_from(const std::string& key, const std::string& val) {
  if (val == "auto") return Stabilization::kAuto;
  if (val == "on") return Stabilization::kOn;
  if (val == "off") return Stabilization::kOff;
  throw ConfigError(key + ": unknown stabilization '" + val + "'");
}

const char* stab_name(Stabilization s) {
  switch (s) {
    case Stabilization::kAuto: return "auto";
    case Stabilization::kOn: return "on";
    case Stabilization::kOff: return "off";
  }
  return "auto";
}

SweepParam sweep_param_from(const std::string& key, const std::string& val) {
  if (val == "epsilon") return SweepParam::kEpsilon;
  if (val == "tau") return SweepParam::kTau;
  if (val == "winsize") return SweepParam::kWinsize;
  if (val == "n_src") return SweepParam::kNsrc;
  throw ConfigError(key + ": unknown sweep parameter '" + val + "'");
}

int winsize_from(const std::string& key, const std::string& val) {
  if (val == "off") return kWinsizeOff;
  if (val == "full") return kWinsizeFull;
  const int w = to_int(key, val);
  if (w < 1) throw ConfigError(key + ": winsize must be 'off', 'full', or a positive integer");
  return w;
}

std::string winsize_name(int w) {
  if (w == kWinsizeOff) return "off";
  if (w == kWinsizeFull) return "full";
  return std::to_string(w);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::string sweep_values_raw;
  bool sweep_values_seen = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line +
                        "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");

    if (key == "bench.n_src") cfg.bench.n_src = to_int(key, val);
    else if (key == "bench.n_tgt") cfg.bench.n_tgt = to_int(key, val);
    else if (key == "bench.horizon") cfg.bench.horizon = to_int(key, val);
    else if (key == "bench.noise_std") cfg.bench.noise_std = to_double(key, val);
    else if (key == "bench.d_o") cfg.bench.d_o = to_int(key, val);
    else if (key == "bench.n_probes") cfg.bench.n_probes = to_int(key, val);
    else if (key == "bench.expert_gain") cfg.bench.expert_gain = to_double(key, val);
    else if (key == "bench.expert_amax") cfg.bench.expert_amax = to_double(key, val);
    else if (key == "bench.seed") { cfg.bench.seed = to_u64(key, val); cfg.bench_seed_set = true; }
    else if (key == "cost.alpha1") cfg.alpha1 = to_double(key, val);
    else if (key == "cost.alpha2") cfg.alpha2 = to_double(key, val);
    else if (key == "uot.epsilon") cfg.uot.epsilon = to_double(key, val);
    else if (key == "uot.tau") cfg.uot.tau = to_double(key, val);
    else if (key == "uot.max_iter") cfg.uot.max_iter = to_int(key, val);
    else if (key == "uot.tol") cfg.uot.tol = to_double(key, val);
    else if (key == "uot.stabilization") cfg.uot.stabilization = stab_from(key, val);
    else if (key == "sampler.mode") cfg.sampler.mode = mode_from(key, val);
    else if (key == "sampler.winsize") cfg.sampler.winsize = winsize_from(key, val);
    else if (key == "sampler.batch_size") cfg.sampler.batch_size = to_int(key, val);
    else if (key == "sampler.seed") {
      cfg.sampler.seed = to_u64(key, val);
      cfg.sampler_seed_set = true;
    }
    else if (key == "train.method") cfg.method = method_from(key, val);
    else if (key == "train.lambda") cfg.lambda = to_double(key, val);
    else if (key == "train.bc_batch") cfg.bc_batch = to_int(key, val);
    else if (key == "train.ot_batch") cfg.ot_batch = to_int(key, val);
    else if (key == "train.cotrain_ratio") cfg.cotrain_ratio = to_double(key, val);
    else if (key == "train.lr") cfg.lr = to_double(key, val);
    else if (key == "train.steps") cfg.steps = to_int(key, val);
    else if (key == "train.eval_every") cfg.eval_every = to_int(key, val);
    else if (key == "train.seed") { cfg.train_seed = to_u64(key, val); cfg.train_seed_set = true; }
    else if (key == "model.hidden") cfg.model_hidden = to_int(key, val);
    else if (key == "model.d_z") cfg.model_d_z = to_int(key, val);
    else if (key == "sweep.param") cfg.sweep_param = sweep_param_from(key, val);
    else if (key == "sweep.values") { sweep_values_raw = val; sweep_values_seen = true; }
    else if (key == "sweep.seeds") {
      cfg.sweep_seeds.clear();
      for (const std::string& tok : split_commas(val))
        cfg.sweep_seeds.push_back(to_u64(key, tok));
    }
    else throw ConfigError("unknown config key: " + key);
  }

  if (sweep_values_seen) {
    cfg.sweep_values.clear();
    for (const std::string& tok : split_commas(sweep_values_raw)) {
      if (cfg.sweep_param == SweepParam::kWinsize)
        cfg.sweep_values.push_back(static_cast<double>(winsize_from("sweep.values", tok)));
      else
        cfg.sweep_values.push_back(to_double("sweep.values", tok));
    }
  }
  return cfg;
}

std::string emit_run_config(const RunConfig& cfg) {
  std::string out;
  auto kv = [&out](const char* key, const std::string& val) {
    out += key;
    out += '=';
    out += val;
    out += '\n';
  };
  kv("bench.n_src", std::to_string(cfg.bench.n_src));
  kv("bench.n_tgt", std::to_string(cfg.bench.n_tgt));
  kv("bench.horizon", std::to_string(cfg.bench.horizon));
  kv("bench.noise_std", format_double(cfg.bench.noise_std));
  kv("bench.d_o", std::to_string(cfg.bench.d_o));
  kv("bench.n_probes", std::to_string(cfg.bench.n_probes));
  kv("bench.expert_gain", format_double(cfg.bench.expert_gain));
  kv("bench.expert_amax", format_double(cfg.bench.expert_amax));
  if (cfg.bench_seed_set) kv("bench.seed", std::to_string(cfg.bench.seed));
  kv("cost.alpha1", format_double(cfg.alpha1));
  kv("cost.alpha2", format_double(cfg.alpha2));
  kv("uot.epsilon", format_double(cfg.uot.epsilon));
  kv("uot.tau", format_double(cfg.uot.tau));
  kv("uot.max_iter", std::to_string(cfg.uot.max_iter));
  kv("uot.tol", format_double(cfg.uot.tol));
  kv("uot.stabilization", stab_name(cfg.uot.stabilization));
  kv("sampler.mode", mode_name(cfg.sampler.mode));
  kv("sampler.winsize", winsize_name(cfg.sampler.winsize));
  kv("sampler.batch_size", std::to_string(cfg.sampler.batch_size));
  if (cfg.sampler_seed_set) kv("sampler.seed", std::to_string(cfg.sampler.seed));
  kv("train.method", method_name(cfg.method));
  kv("train.lambda", format_double(cfg.lambda));
  kv("train.bc_batch", std::to_string(cfg.bc_batch));
  kv("train.ot_batch", std::to_string(cfg.ot_batch));
  kv("train.cotrain_ratio", format_double(cfg.cotrain_ratio));
  kv("train.lr", format_double(cfg.lr));
  kv("train.steps", std::to_string(cfg.steps));
  kv("train.eval_every", std::to_string(cfg.eval_every));
  if (cfg.train_seed_set) kv("train.seed", std::to_string(cfg.train_seed));
  kv("model.hidden", std::to_string(cfg.model_hidden));
  kv("model.d_z", std::to_string(cfg.model_d_z));
  kv("sweep.param", sweep_param_name(cfg.sweep_param));
  if (!cfg.sweep_values.empty()) {
    std::string vals;
    for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
      if (i) vals += ',';
      if (cfg.sweep_param == SweepParam::kWinsize)
        vals += winsize_name(static_cast<int>(cfg.sweep_values[i]));
      else
        vals += format_double(cfg.sweep_values[i]);
    }
    kv("sweep.values", vals);
  }
  if (!cfg.sweep_seeds.empty()) {
    std::string seeds;
    for (std::size_t i = 0; i < cfg.sweep_seeds.size(); ++i) {
      if (i) seeds += ',';
      seeds += std::to_string(cfg.sweep_seeds[i]);
    }
    kv("sweep.seeds", seeds);
  }
  return out;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.method = method;
  t.lambda = lambda;
  t.bc_batch = bc_batch;
  t.ot_batch = ot_batch;
  t.cotrain_ratio = cotrain_ratio;
  t.uot = uot;
  t.sampler = sampler;
  t.alpha1 = alpha1;
  t.alpha2 = alpha2;
  t.model.d_o = bench.d_o;
  t.model.hidden = model_hidden;
  t.model.d_z = model_d_z;
  t.model.d_x = 2;
  t.model.d_a = 2;
  t.lr = lr;
  t.steps = steps;
  t.eval_every = eval_every;
  t.seed = train_seed;
  return t;
}

SweepSpec RunConfig::sweep_spec() const {
  SweepSpec s;
  s.param = sweep_param;
  s.values = sweep_values;
  s.seeds = sweep_seeds;
  return s;
}

}
