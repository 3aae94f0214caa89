#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "otcotrain/serialize.hpp"

// CLI_BINARY_PATH is injected by the build so the test drives the real tool.
#ifndef CLI_BINARY_PATH
#error "CLI_BINARY_PATH must be defined"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("otc_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_BINARY_PATH) + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write(const fs::path& p, const std::string& text) { otc::write_text_file(p, text); }

const std::string kTinyBench =
    "bench.n_src=10\n"
    "bench.n_tgt=3\n"
    "bench.horizon=15\n"
    "bench.n_probes=5\n"
    "bench.seed=7\n";

}  // namespace

TEST_CASE("version flag and subcommand requirement") {
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("no-such-command") == 2);
}

TEST_CASE("solve: balanced single cell") {
  TempDir tmp;
  write(tmp.path / "cost.csv", "0.7\n");
  write(tmp.path / "mu.csv", "1\n1\n");
  const fs::path plan = tmp.path / "plan.csv";
  const fs::path summary = tmp.path / "summary.json";
  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu.csv") + " --mode balanced --epsilon 0.3 --out-plan " + q(plan) +
                " --out-summary " + q(summary)) == 0);
  const otc::Matrix p = otc::read_matrix_csv(plan);
  REQUIRE(p.rows() == 1);
  CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  const json s = json::parse(otc::read_text_file(summary));
  CHECK(s["converged"].get<bool>());
}

TEST_CASE("solve: antidiagonal cost lands near the diagonal") {
  TempDir tmp;
  write(tmp.path / "cost.csv", "0,1\n1,0\n");
  write(tmp.path / "mu.csv", "0.5,0.5\n0.5,0.5\n");
  const fs::path plan = tmp.path / "plan.csv";
  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu.csv") + " --mode balanced --epsilon 0.01 --out-plan " + q(plan) +
                " --out-summary " + q(tmp.path / "s.json")) == 0);
  const otc::Matrix p = otc::read_matrix_csv(plan);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(p(1, 1) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(p(0, 1) < 1e-6);
  CHECK(p(1, 0) < 1e-6);
}

TEST_CASE("solve: unbalanced with tau zero reproduces the closed form") {
  TempDir tmp;
  write(tmp.path / "cost.csv", "0.2,0.9\n0.4,0.1\n");
  write(tmp.path / "mu.csv", "0.5,0.5\n0.5,0.5\n");
  const fs::path plan = tmp.path / "plan.csv";
  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu.csv") + " --mode unbalanced --tau 0 --epsilon 0.5 --out-plan " +
                q(plan) + " --out-summary " + q(tmp.path / "s.json")) == 0);
  const otc::Matrix got = otc::read_matrix_csv(plan);
  const otc::Matrix C = otc::read_matrix_csv(tmp.path / "cost.csv");
  const otc::Matrix want = (-C / 0.5).array().exp();
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve: input errors exit 2") {
  TempDir tmp;
  write(tmp.path / "bad.csv", "1,zebra\n");
  write(tmp.path / "mu.csv", "1\n1\n");
  CHECK(run_cli("solve --cost " + q(tmp.path / "bad.csv") + " --marginals " +
                q(tmp.path / "mu.csv") + " --mode balanced") == 2);

  write(tmp.path / "cost.csv", "0,1\n1,0\n");
  write(tmp.path / "mu3.csv", "0.3,0.3,0.4\n0.5,0.5\n");
  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu3.csv") + " --mode balanced") == 2);

  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu.csv") + " --mode sideways") == 2);
}

TEST_CASE("solve: hitting the iteration cap exits 3 with residuals reported") {
  TempDir tmp;
  write(tmp.path / "cost.csv", "0.61,0.23,0.77\n0.12,0.98,0.33\n0.45,0.06,0.58\n");
  write(tmp.path / "mu.csv", "0.6,0.3,0.1\n0.2,0.3,0.5\n");
  const fs::path summary = tmp.path / "s.json";
  CHECK(run_cli("solve --cost " + q(tmp.path / "cost.csv") + " --marginals " +
                q(tmp.path / "mu.csv") +
                " --mode balanced --epsilon 0.05 --max-iter 1 --tol 1e-12 --out-plan " +
                q(tmp.path / "plan.csv") + " --out-summary " + q(summary)) == 3);
  const json s = json::parse(otc::read_text_file(summary));
  CHECK_FALSE(s["converged"].get<bool>());
  CHECK(s["row_residual"].get<double>() + s["col_residual"].get<double>() > 1e-12);
  CHECK(fs::exists(tmp.path / "plan.csv"));  // outputs are still written
}

TEST_CASE("gen-data: reproducible outputs plus a manifest") {
  TempDir tmp;
  write(tmp.path / "cfg", kTinyBench);
  const fs::path d1 = tmp.path / "data1";
  const fs::path d2 = tmp.path / "data2";
  const std::string base = "gen-data --config " + q(tmp.path / "cfg") + " --out ";
  CHECK(run_cli(base + q(d1)) == 0);
  CHECK(run_cli(base + q(d2)) == 0);
  for (const char* name : {"d_src.jsonl", "d_tgt.jsonl", "probes.jsonl", "manifest.json"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(d1 / name));
    CHECK(otc::read_text_file(d1 / name) == otc::read_text_file(d2 / name));
  }
  const json m = json::parse(otc::read_text_file(d1 / "manifest.json"));
  CHECK(m["seed"].get<std::uint64_t>() == 7);
  CHECK(m["tool_version"].get<std::string>() == "0.1.0");
  CHECK(m.contains("config_hash"));
  CHECK(m["input_hashes"].contains("config"));
}

TEST_CASE("gen-data: config errors exit 2 and write nothing") {
  TempDir tmp;
  write(tmp.path / "bad", "bench.n_src=10\nbench.made_up_key=3\nbench.seed=1\n");
  const fs::path out = tmp.path / "data";
  CHECK(run_cli("gen-data --config " + q(tmp.path / "bad") + " --out " + q(out)) == 2);
  CHECK_FALSE(fs::exists(out));

  write(tmp.path / "noseed", "bench.n_src=10\nbench.n_tgt=3\n");
  CHECK(run_cli("gen-data --config " + q(tmp.path / "noseed") + " --out " + q(out)) == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("dtw command writes the weight table and retained paths") {
  TempDir tmp;
  write(tmp.path / "cfg", kTinyBench);
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "cfg") + " --out " + q(data)) == 0);
  const fs::path out = tmp.path / "dtw";
  CHECK(run_cli("dtw --src " + q(data / "d_src.jsonl") + " --tgt " + q(data / "d_tgt.jsonl") +
                " --out " + q(out)) == 0);
  const otc::Matrix w = otc::read_matrix_csv(out / "weights.csv");
  CHECK(w.rows() == 10);
  CHECK(w.cols() == 3);
  CHECK(w.minCoeff() > 0.0);
  CHECK(w.maxCoeff() < 1.0);
  const otc::Matrix nd = otc::read_matrix_csv(out / "norm_dists.csv");
  CHECK(nd.minCoeff() >= 0.0);
  int path_lines = 0;
  for (const char c : otc::read_text_file(out / "paths.jsonl"))
    if (c == '\n') ++path_lines;
  CHECK(path_lines == 30);  // desk-scale weights all clear the retention floor
}

TEST_CASE("sample-debug dumps provenance and a distance histogram") {
  TempDir tmp;
  write(tmp.path / "cfg", kTinyBench + "sampler.seed=5\nsampler.batch_size=32\n");
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "cfg") + " --out " + q(data)) == 0);
  const fs::path out = tmp.path / "batch";
  CHECK(run_cli("sample-debug --config " + q(tmp.path / "cfg") + " --data " + q(data) + " --out " +
                q(out)) == 0);
  const std::string prov = otc::read_text_file(out / "provenance.csv");
  CHECK(prov.rfind("element,src_traj,src_t,tgt_traj,tgt_t\n", 0) == 0);
  int rows = -1;  // discount the header
  for (const char c : prov)
    if (c == '\n') ++rows;
  CHECK(rows == 32);
  const std::string hist = otc::read_text_file(out / "dist_hist.csv");
  CHECK(hist.rfind("bin_lo,bin_hi,count\n", 0) == 0);

  write(tmp.path / "noseed", kTinyBench);
  CHECK(run_cli("sample-debug --config " + q(tmp.path / "noseed") + " --data " + q(data) +
                " --out " + q(out)) == 2);
}

TEST_CASE("train, eval, sweep, and export pipeline") {
  TempDir tmp;
  const std::string train_cfg = kTinyBench +
                                "train.method=ours\n"
                                "train.steps=10\n"
                                "train.eval_every=5\n"
                                "train.bc_batch=16\n"
                                "train.ot_batch=8\n"
                                "train.seed=3\n"
                                "uot.epsilon=0.0005\n";
  write(tmp.path / "cfg", train_cfg);
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "cfg") + " --out " + q(data)) == 0);

  const fs::path run = tmp.path / "run";
  CHECK(run_cli("train --config " + q(tmp.path / "cfg") + " --data " + q(data) + " --out " +
                q(run)) == 0);
  REQUIRE(fs::exists(run / "metrics.csv"));
  REQUIRE(fs::exists(run / "checkpoint.json"));
  REQUIRE(fs::exists(run / "manifest.json"));
  const std::string metrics = otc::read_text_file(run / "metrics.csv");
  CHECK(metrics.rfind("step,bc_loss,uot_loss,", 0) == 0);
  int rows = -1;
  for (const char c : metrics)
    if (c == '\n') ++rows;
  CHECK(rows == 3);  // steps 0, 5, 10

  // Same config and data reproduce the training outputs byte for byte.
  const fs::path rerun = tmp.path / "rerun";
  CHECK(run_cli("train --config " + q(tmp.path / "cfg") + " --data " + q(data) + " --out " +
                q(rerun)) == 0);
  CHECK(otc::read_text_file(rerun / "metrics.csv") == metrics);
  CHECK(otc::read_text_file(rerun / "checkpoint.json") ==
        otc::read_text_file(run / "checkpoint.json"));

  const fs::path ev = tmp.path / "eval";
  CHECK(run_cli("eval --config " + q(tmp.path / "cfg") + " --data " + q(data) + " --checkpoint " +
                q(run / "checkpoint.json") + " --out " + q(ev)) == 0);
  const std::string eval_csv = otc::read_text_file(ev / "metrics.csv");
  int eval_rows = -1;
  for (const char c : eval_csv)
    if (c == '\n') ++eval_rows;
  CHECK(eval_rows == 1);

  const fs::path emb = tmp.path / "z.csv";
  CHECK(run_cli("export-embeddings --config " + q(tmp.path / "cfg") + " --data " + q(data) +
                " --checkpoint " + q(run / "checkpoint.json") + " --out " + q(emb)) == 0);
  const std::string z = otc::read_text_file(emb);
  CHECK(z.rfind("domain,region,z0", 0) == 0);
  int z_rows = -1;
  for (const char c : z)
    if (c == '\n') ++z_rows;
  CHECK(z_rows == 20);  // 2 rows per probe, 10 probes

  // A one-point sweep reproduces the direct training run's metrics bytes.
  write(tmp.path / "sweep_cfg",
        train_cfg + "sweep.param=epsilon\nsweep.values=0.0005\nsweep.seeds=3\n");
  const fs::path sw = tmp.path / "sweep";
  CHECK(run_cli("sweep --config " + q(tmp.path / "sweep_cfg") + " --out " + q(sw)) == 0);
  REQUIRE(fs::exists(sw / "summary.csv"));
  const std::string summary = otc::read_text_file(sw / "summary.csv");
  CHECK(summary.rfind("param,value,seed,ok,", 0) == 0);
  int summary_rows = -1;
  for (const char c : summary)
    if (c == '\n') ++summary_rows;
  CHECK(summary_rows == 1);
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(sw / "runs")) run_dirs.push_back(entry.path());
  REQUIRE(run_dirs.size() == 1);
  CHECK(otc::read_text_file(run_dirs[0] / "metrics.csv") == metrics);
}

TEST_CASE("train guards against a mismatched data directory") {
  TempDir tmp;
  write(tmp.path / "cfg", kTinyBench + "train.seed=1\n");
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "cfg") + " --out " + q(data)) == 0);
  write(tmp.path / "other",
        "bench.n_src=10\nbench.n_tgt=3\nbench.horizon=15\nbench.n_probes=5\nbench.seed=8\n"
        "train.seed=1\n");
  CHECK(run_cli("train --config " + q(tmp.path / "other") + " --data " + q(data) + " --out " +
                q(tmp.path / "run")) == 2);
}

TEST_CASE("eval rejects a checkpoint whose dimensions do not match") {
  TempDir tmp;
  write(tmp.path / "cfg", kTinyBench + "train.seed=1\ntrain.steps=0\n");
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "cfg") + " --out " + q(data)) == 0);

  // A second pipeline with a wider observation space supplies the bad checkpoint.
  write(tmp.path / "wide", kTinyBench + "bench.d_o=20\ntrain.seed=1\ntrain.steps=0\n");
  const fs::path data20 = tmp.path / "data20";
  REQUIRE(run_cli("gen-data --config " + q(tmp.path / "wide") + " --out " + q(data20)) == 0);
  const fs::path run20 = tmp.path / "run20";
  REQUIRE(run_cli("train --config " + q(tmp.path / "wide") + " --data " + q(data20) + " --out " +
                  q(run20)) == 0);

  CHECK(run_cli("eval --config " + q(tmp.path / "cfg") + " --data " + q(data) + " --checkpoint " +
                q(run20 / "checkpoint.json") + " --out " + q(tmp.path / "ev")) == 2);
}
