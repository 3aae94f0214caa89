#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "otcotrain/geometry.hpp"
#include "otcotrain/model.hpp"
#include "otcotrain/synthdata.hpp"
#include "otcotrain/trainer_eval.hpp"

namespace otc {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double x);

std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(const std::string& text);  // throws ConfigError on bad input

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

// Marginals file: exactly two CSV rows, p then q (lengths may differ).
Marginals read_marginals_csv(const std::filesystem::path& path);

// One trajectory per line: {"domain","region","goal","obs","proprio","actions"}
// plus "shadow_obs" when correspondence records exist.
void write_dataset_jsonl(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset_jsonl(const std::filesystem::path& path);

void write_probes_jsonl(const std::filesystem::path& path, const ProbeSet& probes);
ProbeSet read_probes_jsonl(const std::filesystem::path& path);

std::string metrics_to_csv(const MetricsLog& log);
void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdamState& opt);
struct Checkpoint {
  ModelParams params;
  AdamState opt;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& data);
std::string hash_hex(std::uint64_t h);

// Manifest accompanying an output directory: tool_version, config_hash over
// the canonical config text, seed (when the command is seeded), input file
// hashes, and the config text itself for exact reproduction.
struct ManifestInfo {
  std::string config_text;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;  // name -> fnv1a64 hex
};
void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info);
std::string read_manifest_config(const std::filesystem::path& dir);  // "" if absent

}
