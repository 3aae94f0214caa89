#include "otcotrain/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "otcotrain/errors.hpp"
#include "otcotrain/version.hpp"

namespace otc {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& tok, const char* where) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r')) --e;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw ConfigError(std::string(where) + ": cannot parse number '" + tok + "'");
  return v;
}

std::vector<double> parse_csv_row(const std::string& line, const char* where) {
  std::vector<double> row;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string tok = line.substr(start, comma == std::string::npos ? comma : comma - start);
    row.push_back(parse_double(tok, where));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return row;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json vec_list_to_json(const std::vector<Vec>& xs) {
  json a = json::array();
  for (const Vec& x : xs) a.push_back(vec_to_json(x));
  return a;
}

std::vector<Vec> vec_list_from_json(const json& a) {
  std::vector<Vec> xs;
  xs.reserve(a.size());
  for (const json& it : a) xs.push_back(vec_from_json(it));
  return xs;
}

// Tensors persist as flat column-major coefficient lists; shapes are
// recovered from the dims block.
json matrix_to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) a.push_back(m.data()[i]);
  return a;
}

Matrix matrix_from_json(const json& flat, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw ConfigError("checkpoint tensor has " + std::to_string(flat.size()) +
                      " coefficients, expected " + std::to_string(rows * cols));
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out.data()[i] = flat[static_cast<std::size_t>(i)].get<double>();
  return out;
}

}  // namespace

std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line, "csv"));
    if (rows.back().size() != rows[0].size())
      throw ConfigError("csv: ragged rows");
  }
  if (rows.empty()) throw ConfigError("csv: no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  write_text_file(path, matrix_to_csv(m));
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  try {
    return matrix_from_csv(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Marginals read_marginals_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line, "marginals"));
  }
  if (rows.size() != 2)
    throw ConfigError(path.string() + ": marginals file needs exactly two rows (p, then q)");
  Marginals mu;
  mu.p = Eigen::Map<const Vec>(rows[0].data(), static_cast<Eigen::Index>(rows[0].size()));
  mu.q = Eigen::Map<const Vec>(rows[1].data(), static_cast<Eigen::Index>(rows[1].size()));
  return mu;
}

namespace {

const char* domain_name(Domain d) { return d == Domain::kSrc ? "src" : "tgt"; }

Domain domain_from(const std::string& s) {
  if (s == "src") return Domain::kSrc;
  if (s == "tgt") return Domain::kTgt;
  throw ConfigError("unknown domain tag: " + s);
}

const char* region_name(Region r) {
  switch (r) {
    case Region::kSource: return "source";
    case Region::kTarget: return "target";
    case Region::kTargetOod: return "target_ood";
  }
  return "source";
}

Region region_from(const std::string& s) {
  if (s == "source") return Region::kSource;
  if (s == "target") return Region::kTarget;
  if (s == "target_ood") return Region::kTargetOod;
  throw ConfigError("unknown region tag: " + s);
}

}  // namespace

void write_dataset_jsonl(const std::filesystem::path& path, const Dataset& ds) {
  std::string out;
  for (const Trajectory& tr : ds) {
    json j;
    j["domain"] = domain_name(tr.domain);
    j["region"] = region_name(tr.region);
    j["goal"] = vec_to_json(tr.goal);
    j["obs"] = vec_list_to_json(tr.obs);
    j["proprio"] = vec_list_to_json(tr.proprio);
    j["actions"] = vec_list_to_json(tr.actions);
    if (!tr.shadow_obs.empty()) j["shadow_obs"] = vec_list_to_json(tr.shadow_obs);
    out += j.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset read_dataset_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Trajectory tr;
    tr.domain = domain_from(j.at("domain").get<std::string>());
    tr.region = region_from(j.at("region").get<std::string>());
    tr.goal = vec_from_json(j.at("goal"));
    tr.obs = vec_list_from_json(j.at("obs"));
    tr.proprio = vec_list_from_json(j.at("proprio"));
    tr.actions = vec_list_from_json(j.at("actions"));
    if (j.contains("shadow_obs")) tr.shadow_obs = vec_list_from_json(j["shadow_obs"]);
    if (tr.obs.size() != tr.proprio.size() || tr.obs.size() != tr.actions.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": obs/proprio/actions lengths differ");
    ds.push_back(std::move(tr));
  }
  return ds;
}

void write_probes_jsonl(const std::filesystem::path& path, const ProbeSet& probes) {
  std::string out;
  for (const Probe& pb : probes) {
    json j;
    j["region"] = region_name(pb.region);
    j["state"] = vec_to_json(pb.state);
    j["goal"] = vec_to_json(pb.goal);
    j["o_src"] = vec_to_json(pb.o_src);
    j["o_tgt"] = vec_to_json(pb.o_tgt);
    out += j.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

ProbeSet read_probes_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  ProbeSet probes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Probe pb;
    pb.region = region_from(j.at("region").get<std::string>());
    pb.state = vec_from_json(j.at("state"));
    pb.goal = vec_from_json(j.at("goal"));
    pb.o_src = vec_from_json(j.at("o_src"));
    pb.o_tgt = vec_from_json(j.at("o_tgt"));
    probes.push_back(std::move(pb));
  }
  return probes;
}

std::string metrics_to_csv(const MetricsLog& log) {
  std::string out =
      "step,bc_loss,uot_loss,align_err_id,align_err_ood,action_mse_ood,success_rate_id,"
      "success_rate_ood\n";
  for (const MetricsRecord& r : log) {
    out += std::to_string(r.step);
    for (const double v : {r.bc_loss, r.uot_loss, r.align_err_id, r.align_err_ood,
                           r.action_mse_ood, r.success_rate_id, r.success_rate_ood}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log) {
  write_text_file(path, metrics_to_csv(log));
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdamState& opt) {
  json j;
  j["dims"] = {{"d_o", params.dims.d_o},
               {"hidden", params.dims.hidden},
               {"d_z", params.dims.d_z},
               {"d_x", params.dims.d_x},
               {"d_a", params.dims.d_a}};
  j["params"] = {{"W1", matrix_to_json(params.W1)}, {"b1", vec_to_json(params.b1)},
                 {"W2", matrix_to_json(params.W2)}, {"b2", vec_to_json(params.b2)},
                 {"Wp", matrix_to_json(params.Wp)}, {"bp", vec_to_json(params.bp)}};
  j["adam"] = {{"step", opt.step},
               {"m",
                {{"W1", matrix_to_json(opt.m.W1)}, {"b1", vec_to_json(opt.m.b1)},
                 {"W2", matrix_to_json(opt.m.W2)}, {"b2", vec_to_json(opt.m.b2)},
                 {"Wp", matrix_to_json(opt.m.Wp)}, {"bp", vec_to_json(opt.m.bp)}}},
               {"v",
                {{"W1", matrix_to_json(opt.v.W1)}, {"b1", vec_to_json(opt.v.b1)},
                 {"W2", matrix_to_json(opt.v.W2)}, {"b2", vec_to_json(opt.v.b2)},
                 {"Wp", matrix_to_json(opt.v.Wp)}, {"bp", vec_to_json(opt.v.bp)}}}};
  write_text_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  Checkpoint ck;
  const json& d = j.at("dims");
  ck.params.dims = {d.at("d_o").get<int>(), d.at("hidden").get<int>(), d.at("d_z").get<int>(),
                    d.at("d_x").get<int>(), d.at("d_a").get<int>()};
  const auto& dims = ck.params.dims;
  auto sized_vec = [](const json& a, Eigen::Index n, const char* name) {
    if (static_cast<Eigen::Index>(a.size()) != n)
      throw ConfigError(std::string("checkpoint tensor ") + name + " has " +
                        std::to_string(a.size()) + " coefficients, expected " +
                        std::to_string(n));
    return vec_from_json(a);
  };
  auto tensors_from = [&dims, &sized_vec](const json& g, auto& out) {
    out.W1 = matrix_from_json(g.at("W1"), dims.hidden, dims.d_o);
    out.b1 = sized_vec(g.at("b1"), dims.hidden, "b1");
    out.W2 = matrix_from_json(g.at("W2"), dims.d_z, dims.hidden);
    out.b2 = sized_vec(g.at("b2"), dims.d_z, "b2");
    out.Wp = matrix_from_json(g.at("Wp"), dims.d_a, dims.d_z + dims.d_x);
    out.bp = sized_vec(g.at("bp"), dims.d_a, "bp");
  };
  tensors_from(j.at("params"), ck.params);
  const json& a = j.at("adam");
  ck.opt.step = a.at("step").get<long>();
  tensors_from(a.at("m"), ck.opt.m);
  tensors_from(a.at("v"), ck.opt.v);
  return ck;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info) {
  json j;
  j["tool_version"] = kVersion;
  j["config_hash"] = hash_hex(fnv1a64(info.config_text));
  j["config"] = info.config_text;
  if (info.has_seed)
    j["seed"] = info.seed;
  else
    j["seed"] = nullptr;
  json hashes = json::object();
  for (const auto& [name, hex] : info.input_hashes) hashes[name] = hex;
  j["input_hashes"] = hashes;
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

std::string read_manifest_config(const std::filesystem::path& dir) {
  const std::filesystem::path p = dir / "manifest.json";
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return "";
  try {
    const json j = json::parse(read_text_file(p));
    if (j.contains("config") && j["config"].is_string()) return j["config"].get<std::string>();
  } catch (const json::exception&) {
    return "";
  }
  return "";
}

}
