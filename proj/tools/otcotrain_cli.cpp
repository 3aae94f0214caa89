#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "otcotrain/dtw_align.hpp"
#include "otcotrain/errors.hpp"
#include "otcotrain/geometry.hpp"
#include "otcotrain/model.hpp"
#include "otcotrain/ot_solvers.hpp"
#include "otcotrain/run_config.hpp"
#include "otcotrain/sampler.hpp"
#include "otcotrain/serialize.hpp"
#include "otcotrain/synthdata.hpp"
#include "otcotrain/trainer_eval.hpp"
#include "otcotrain/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace otc;

struct LoadedConfig {
  std::string raw;  // file bytes, hashed into manifests
  RunConfig cfg;
};

LoadedConfig load_config(const std::string& path) {
  LoadedConfig lc;
  lc.raw = read_text_file(path);
  lc.cfg = parse_run_config(lc.raw);
  return lc;
}

// bench.* keys of two canonical emits must agree before a data directory is
// reused: emission models are re-derived from bench.seed rather than stored.
void check_bench_section(const RunConfig& cfg, const fs::path& data_dir) {
  const std::string prev = read_manifest_config(data_dir);
  if (prev.empty()) return;
  std::map<std::string, std::string> mine, theirs;
  auto collect = [](const std::string& text, std::map<std::string, std::string>& out) {
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.rfind("bench.", 0) != 0) continue;
      const std::size_t eq = line.find('=');
      if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
  };
  collect(emit_run_config(cfg), mine);
  collect(emit_run_config(parse_run_config(prev)), theirs);
  for (const auto& [key, val] : theirs) {
    const auto it = mine.find(key);
    const std::string have = it == mine.end() ? "<unset>" : it->second;
    if (have != val)
      throw ConfigError("data directory was generated with " + key + "=" + val +
                        " but the config says " + key + "=" + have);
  }
  for (const auto& [key, val] : mine)
    if (!theirs.count(key))
      throw ConfigError("data directory was generated without " + key +
                        " but the config sets it to " + val);
}

Benchmark load_benchmark(const RunConfig& cfg, const fs::path& data_dir) {
  Benchmark bench;
  bench.cfg = cfg.bench;
  bench.d_src = read_dataset_jsonl(data_dir / "d_src.jsonl");
  bench.d_tgt = read_dataset_jsonl(data_dir / "d_tgt.jsonl");
  bench.probes = read_probes_jsonl(data_dir / "probes.jsonl");
  bench.em_src = make_emission_model(cfg.bench, Domain::kSrc);
  bench.em_tgt = make_emission_model(cfg.bench, Domain::kTgt);
  return bench;
}

std::string file_hash(const fs::path& p) { return hash_hex(fnv1a64(read_text_file(p))); }

int run_gen_data(const std::string& config_path, const std::string& out_dir) {
  const LoadedConfig lc = load_config(config_path);
  if (!lc.cfg.bench_seed_set) throw ConfigError("bench.seed is required for gen-data");
  const Benchmark bench = generate(lc.cfg.bench);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_dataset_jsonl(out / "d_src.jsonl", bench.d_src);
  write_dataset_jsonl(out / "d_tgt.jsonl", bench.d_tgt);
  write_probes_jsonl(out / "probes.jsonl", bench.probes);

  ManifestInfo mi;
  mi.config_text = emit_run_config(lc.cfg);
  mi.has_seed = true;
  mi.seed = lc.cfg.bench.seed;
  mi.input_hashes["config"] = hash_hex(fnv1a64(lc.raw));
  write_manifest(out, mi);

  std::cout << "wrote " << bench.d_src.size() << " source and " << bench.d_tgt.size()
            << " target trajectories plus " << bench.probes.size() << " probes to " << out.string()
            << "\n";
  return 0;
}

int run_solve(const std::string& cost_path, const std::string& marginals_path,
              const std::string& mode, const UotConfig& ucfg, const std::string& out_plan,
              const std::string& out_summary) {
  const CostMatrix C = read_matrix_csv(cost_path);
  const Marginals mu = read_marginals_csv(marginals_path);
  if (mu.p.size() != C.rows() || mu.q.size() != C.cols())
    throw ConfigError("marginal lengths (" + std::to_string(mu.p.size()) + ", " +
                      std::to_string(mu.q.size()) + ") do not match the cost matrix (" +
                      std::to_string(C.rows()) + "x" + std::to_string(C.cols()) + ")");

  const TransportPlan tp =
      mode == "balanced"
          ? sinkhorn_balanced(C, mu, ucfg.epsilon, ucfg.max_iter, ucfg.tol, ucfg.stabilization)
          : sinkhorn_unbalanced(C, mu, ucfg);

  write_matrix_csv(out_plan, tp.plan);
  json s;
  s["objective"] = tp.objective;
  s["iterations"] = tp.iterations;
  s["row_residual"] = tp.row_residual;
  s["col_residual"] = tp.col_residual;
  s["converged"] = tp.converged;
  write_text_file(out_summary, s.dump() + "\n");
  std::cout << s.dump() << "\n";

  if (!tp.converged) {
    std::cerr << "solver hit max_iter before reaching tol; residuals are in " << out_summary
              << "\n";
    return 3;
  }
  return 0;
}

int run_dtw(const std::string& src_path, const std::string& tgt_path, const std::string& out_dir) {
  const Dataset d_src = read_dataset_jsonl(src_path);
  const Dataset d_tgt = read_dataset_jsonl(tgt_path);
  if (d_src.empty() || d_tgt.empty()) throw ConfigError("dtw: empty dataset");
  const PairWeights pw = build_pair_weights(d_src, d_tgt);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_matrix_csv(out / "weights.csv", pw.weights);
  write_matrix_csv(out / "norm_dists.csv", pw.norm_dists);

  std::string lines;
  for (int k = 0; k < pw.weights.rows(); ++k) {
    for (int l = 0; l < pw.weights.cols(); ++l) {
      if (!pw.has_path(k, l)) continue;
      json j;
      j["src_idx"] = k;
      j["tgt_idx"] = l;
      json path = json::array();
      for (const auto& [i, jj] : pw.paths.at(pw.key(k, l))) path.push_back({i, jj});
      j["path"] = std::move(path);
      lines += j.dump();
      lines += '\n';
    }
  }
  write_text_file(out / "paths.jsonl", lines);

  ManifestInfo mi;
  mi.input_hashes["src"] = file_hash(src_path);
  mi.input_hashes["tgt"] = file_hash(tgt_path);
  write_manifest(out, mi);

  std::cout << "wrote " << pw.weights.rows() << "x" << pw.weights.cols() << " weight table to "
            << out.string() << "\n";
  return 0;
}

int run_sample_debug(const std::string& config_path, const std::string& data_dir,
                     const std::string& out_dir) {
  const LoadedConfig lc = load_config(config_path);
  if (!lc.cfg.sampler_seed_set) throw ConfigError("sampler.seed is required for sample-debug");
  const fs::path data(data_dir);
  const Dataset d_src = read_dataset_jsonl(data / "d_src.jsonl");
  const Dataset d_tgt = read_dataset_jsonl(data / "d_tgt.jsonl");

  PairWeights pw;
  if (lc.cfg.sampler.mode == SamplerMode::kOurs) pw = build_pair_weights(d_src, d_tgt);
  CounterRng rng(lc.cfg.sampler.seed);
  const PairedBatch batch = sample_paired_batch(d_src, d_tgt, pw, lc.cfg.sampler, rng);

  const fs::path out(out_dir);
  fs::create_directories(out);

  std::string prov = "element,src_traj,src_t,tgt_traj,tgt_t\n";
  for (std::size_t e = 0; e < batch.provenance.size(); ++e) {
    const PairProvenance& pr = batch.provenance[e];
    prov += std::to_string(e) + ',' + std::to_string(pr.src_traj) + ',' +
            std::to_string(pr.src_t) + ',' + std::to_string(pr.tgt_traj) + ',' +
            std::to_string(pr.tgt_t) + '\n';
  }
  write_text_file(out / "provenance.csv", prov);

  // Paired proprio distances, binned at 0.1 up to 3.0 with a tail bucket.
  constexpr int kBins = 30;
  constexpr double kWidth = 0.1;
  std::vector<long> counts(kBins, 0);
  for (int e = 0; e < batch.src.proprio.cols(); ++e) {
    const double d = (batch.src.proprio.col(e) - batch.tgt.proprio.col(e)).norm();
    int bin = static_cast<int>(d / kWidth);
    if (bin >= kBins) bin = kBins - 1;
    ++counts[static_cast<std::size_t>(bin)];
  }
  std::string hist = "bin_lo,bin_hi,count\n";
  for (int b = 0; b < kBins; ++b)
    hist += format_double(b * kWidth) + ',' + format_double((b + 1) * kWidth) + ',' +
            std::to_string(counts[static_cast<std::size_t>(b)]) + '\n';
  write_text_file(out / "dist_hist.csv", hist);

  ManifestInfo mi;
  mi.config_text = emit_run_config(lc.cfg);
  mi.has_seed = true;
  mi.seed = lc.cfg.sampler.seed;
  mi.input_hashes["config"] = hash_hex(fnv1a64(lc.raw));
  mi.input_hashes["d_src.jsonl"] = file_hash(data / "d_src.jsonl");
  mi.input_hashes["d_tgt.jsonl"] = file_hash(data / "d_tgt.jsonl");
  write_manifest(out, mi);

  std::cout << "sampled " << batch.provenance.size() << " pairs; outputs in " << out.string()
            << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  const LoadedConfig lc = load_config(config_path);
  if (!lc.cfg.train_seed_set) throw ConfigError("train.seed is required for train");
  if (!lc.cfg.bench_seed_set)
    throw ConfigError("bench.seed is required for train (emission models derive from it)");
  const fs::path data(data_dir);
  check_bench_section(lc.cfg, data);
  const Benchmark bench = load_benchmark(lc.cfg, data);

  const TrainConfig tcfg = lc.cfg.train_config();
  PairWeights weights;
  const bool needs_weights =
      (lc.cfg.method == Method::kOurs || lc.cfg.method == Method::kMmd) && lc.cfg.lambda != 0 &&
      lc.cfg.sampler.mode == SamplerMode::kOurs;
  if (needs_weights) weights = build_pair_weights(bench.d_src, bench.d_tgt);

  const TrainResult res = train(tcfg, bench, weights);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_metrics_csv(out / "metrics.csv", res.log);
  save_checkpoint(out / "checkpoint.json", res.params, res.opt);

  ManifestInfo mi;
  mi.config_text = emit_run_config(lc.cfg);
  mi.has_seed = true;
  mi.seed = lc.cfg.train_seed;
  mi.input_hashes["config"] = hash_hex(fnv1a64(lc.raw));
  mi.input_hashes["d_src.jsonl"] = file_hash(data / "d_src.jsonl");
  mi.input_hashes["d_tgt.jsonl"] = file_hash(data / "d_tgt.jsonl");
  mi.input_hashes["probes.jsonl"] = file_hash(data / "probes.jsonl");
  write_manifest(out, mi);

  const MetricsRecord& fin = res.log.back();
  std::cout << "final step " << fin.step << ": success_id=" << format_double(fin.success_rate_id)
            << " success_ood=" << format_double(fin.success_rate_ood)
            << " align_ood=" << format_double(fin.align_err_ood) << "\n";
  if (res.failed) {
    std::cerr << res.solver_failures
              << " alignment solves failed to converge (over 1% of steps); run is unreliable\n";
    return 3;
  }
  return 0;
}

int run_eval(const std::string& config_path, const std::string& data_dir,
             const std::string& ckpt_path, const std::string& out_dir) {
  const LoadedConfig lc = load_config(config_path);
  if (!lc.cfg.bench_seed_set)
    throw ConfigError("bench.seed is required for eval (emission models derive from it)");
  const fs::path data(data_dir);
  check_bench_section(lc.cfg, data);
  const Benchmark bench = load_benchmark(lc.cfg, data);

  const Checkpoint ck = load_checkpoint(ckpt_path);
  if (ck.params.dims.d_o != lc.cfg.bench.d_o)
    throw ConfigError("checkpoint d_o=" + std::to_string(ck.params.dims.d_o) +
                      " does not match bench.d_o=" + std::to_string(lc.cfg.bench.d_o));

  const MetricsRecord rec = evaluate_model(ck.params, bench, 0, 0.0, 0.0);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_metrics_csv(out / "metrics.csv", MetricsLog{rec});

  ManifestInfo mi;
  mi.config_text = emit_run_config(lc.cfg);
  mi.input_hashes["config"] = hash_hex(fnv1a64(lc.raw));
  mi.input_hashes["checkpoint"] = file_hash(ckpt_path);
  mi.input_hashes["probes.jsonl"] = file_hash(data / "probes.jsonl");
  write_manifest(out, mi);

  std::cout << "success_id=" << format_double(rec.success_rate_id)
            << " success_ood=" << format_double(rec.success_rate_ood)
            << " align_id=" << format_double(rec.align_err_id)
            << " align_ood=" << format_double(rec.align_err_ood) << "\n";
  return 0;
}

std::string sweep_value_name(SweepParam param, double value) {
  if (param == SweepParam::kWinsize) {
    const int w = static_cast<int>(value);
    if (w == kWinsizeOff) return "off";
    if (w == kWinsizeFull) return "full";
    return std::to_string(w);
  }
  if (param == SweepParam::kNsrc) return std::to_string(static_cast<long>(value));
  return format_double(value);
}

int run_sweep(const std::string& config_path, const std::string& out_dir) {
  const LoadedConfig lc = load_config(config_path);
  if (!lc.cfg.bench_seed_set) throw ConfigError("bench.seed is required for sweep");
  if (lc.cfg.sweep_values.empty()) throw ConfigError("sweep.values is required for sweep");
  if (lc.cfg.sweep_seeds.empty()) throw ConfigError("sweep.seeds is required for sweep");

  const SweepSpec spec = lc.cfg.sweep_spec();
  const std::vector<SweepRow> rows = sweep(spec, lc.cfg.bench, lc.cfg.train_config());

  const fs::path out(out_dir);
  fs::create_directories(out / "runs");

  const char* pname = sweep_param_name(spec.param);
  std::string summary =
      "param,value,seed,ok,solver_failures,step,bc_loss,uot_loss,align_err_id,align_err_ood,"
      "action_mse_ood,success_rate_id,success_rate_ood,error\n";
  int n_ok = 0;
  for (const SweepRow& row : rows) {
    const std::string vname = sweep_value_name(spec.param, row.value);
    if (!row.log.empty()) {
      const fs::path run_dir =
          out / "runs" / (std::string(pname) + "=" + vname + "_seed=" + std::to_string(row.seed));
      fs::create_directories(run_dir);
      write_metrics_csv(run_dir / "metrics.csv", row.log);
    }
    std::string err = row.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    const MetricsRecord& r = row.final_rec;
    summary += std::string(pname) + ',' + vname + ',' + std::to_string(row.seed) + ',' +
               (row.ok ? "1" : "0") + ',' + std::to_string(row.solver_failures) + ',' +
               std::to_string(r.step);
    for (const double v : {r.bc_loss, r.uot_loss, r.align_err_id, r.align_err_ood,
                           r.action_mse_ood, r.success_rate_id, r.success_rate_ood}) {
      summary += ',';
      summary += format_double(v);
    }
    summary += ',' + err + '\n';
    if (row.ok) ++n_ok;
  }
  write_text_file(out / "summary.csv", summary);

  ManifestInfo mi;
  mi.config_text = emit_run_config(lc.cfg);
  mi.input_hashes["config"] = hash_hex(fnv1a64(lc.raw));
  write_manifest(out, mi);

  std::cout << n_ok << "/" << rows.size() << " sweep runs succeeded; summary in "
            << (out / "summary.csv").string() << "\n";
  return n_ok > 0 ? 0 : 1;
}

int run_export_embeddings(const std::string& config_path, const std::string& data_dir,
                          const std::string& ckpt_path, const std::string& out_path) {
  const LoadedConfig lc = load_config(config_path);
  const ProbeSet probes = read_probes_jsonl(fs::path(data_dir) / "probes.jsonl");
  if (probes.empty()) throw ConfigError("export-embeddings: no probes in data directory");
  const Checkpoint ck = load_checkpoint(ckpt_path);

  const char* region_tag[] = {"source", "target", "target_ood"};
  std::string csv = "domain,region";
  for (int i = 0; i < ck.params.dims.d_z; ++i) csv += ",z" + std::to_string(i);
  csv += '\n';
  auto add_row = [&](const char* domain, Region region, const Vec& z) {
    csv += domain;
    csv += ',';
    csv += region_tag[static_cast<int>(region)];
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      csv += ',';
      csv += format_double(z[i]);
    }
    csv += '\n';
  };
  for (const Probe& pb : probes) {
    add_row("src", pb.region, encode(ck.params, pb.o_src));
    add_row("tgt", pb.region, encode(ck.params, pb.o_tgt));
  }
  write_text_file(out_path, csv);
  std::cout << "wrote " << 2 * probes.size() << " embeddings to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal-transport co-training toolkit"};
  app.set_version_flag("--version", otc::kVersion);
  app.require_subcommand(1);
  int rc = 0;

  std::string config_path, out_dir, data_dir, ckpt_path;
  std::string cost_path, marginals_path, mode = "unbalanced";
  std::string out_plan = "plan.csv", out_summary = "summary.json", stab = "auto";
  otc::UotConfig ucfg;

  auto* gen = app.add_subcommand("gen-data", "generate the two-domain benchmark datasets");
  gen->add_option("--config", config_path, "run config file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->callback([&] { rc = run_gen_data(config_path, out_dir); });

  auto* solve = app.add_subcommand("solve", "solve one transport problem from CSV inputs");
  solve->add_option("--cost", cost_path, "cost matrix CSV")->required();
  solve->add_option("--marginals", marginals_path, "two-row CSV: p then q")->required();
  solve->add_option("--mode", mode, "balanced|unbalanced")
      ->check(CLI::IsMember({"balanced", "unbalanced"}))
      ->required();
  solve->add_option("--epsilon", ucfg.epsilon, "entropic regularization");
  solve->add_option("--tau", ucfg.tau, "marginal relaxation strength");
  solve->add_option("--max-iter", ucfg.max_iter, "iteration cap");
  solve->add_option("--tol", ucfg.tol, "convergence tolerance");
  solve->add_option("--stabilization", stab, "auto|on|off")
      ->check(CLI::IsMember({"auto", "on", "off"}));
  solve->add_option("--out-plan", out_plan, "plan CSV path");
  solve->add_option("--out-summary", out_summary, "summary JSON path");
  solve->callback([&] {
    ucfg.stabilization = stab == "on"    ? otc::Stabilization::kOn
                         : stab == "off" ? otc::Stabilization::kOff
                                         : otc::Stabilization::kAuto;
    rc = run_solve(cost_path, marginals_path, mode, ucfg, out_plan, out_summary);
  });

  auto* dtw_cmd = app.add_subcommand("dtw", "pairwise DTW weights between two datasets");
  std::string src_path, tgt_path;
  dtw_cmd->add_option("--src", src_path, "source dataset JSONL")->required();
  dtw_cmd->add_option("--tgt", tgt_path, "target dataset JSONL")->required();
  dtw_cmd->add_option("--out", out_dir, "output directory")->required();
  dtw_cmd->callback([&] { rc = run_dtw(src_path, tgt_path, out_dir); });

  auto* sdbg = app.add_subcommand("sample-debug", "dump one paired batch with provenance");
  sdbg->add_option("--config", config_path, "run config file")->required();
  sdbg->add_option("--data", data_dir, "data directory from gen-data")->required();
  sdbg->add_option("--out", out_dir, "output directory")->required();
  sdbg->callback([&] { rc = run_sample_debug(config_path, data_dir, out_dir); });

  auto* train_cmd = app.add_subcommand("train", "train a policy on a generated data directory");
  train_cmd->add_option("--config", config_path, "run config file")->required();
  train_cmd->add_option("--data", data_dir, "data directory from gen-data")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->callback([&] { rc = run_train(config_path, data_dir, out_dir); });

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against a data directory");
  eval_cmd->add_option("--config", config_path, "run config file")->required();
  eval_cmd->add_option("--data", data_dir, "data directory from gen-data")->required();
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  eval_cmd->callback([&] { rc = run_eval(config_path, data_dir, ckpt_path, out_dir); });

  auto* sweep_cmd = app.add_subcommand("sweep", "one-parameter sweep of training runs");
  sweep_cmd->add_option("--config", config_path, "run config file with sweep.* keys")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();
  sweep_cmd->callback([&] { rc = run_sweep(config_path, out_dir); });

  auto* exp = app.add_subcommand("export-embeddings", "encode probe emissions to a CSV of latents");
  exp->add_option("--config", config_path, "run config file")->required();
  exp->add_option("--data", data_dir, "data directory from gen-data")->required();
  exp->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  exp->add_option("--out", out_dir, "output CSV path")->required();
  exp->callback([&] { rc = run_export_embeddings(config_path, data_dir, ckpt_path, out_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const otc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const otc::SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
