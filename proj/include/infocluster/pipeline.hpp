#pragma once

// End-to-end run: data -> transfer matrix -> influence graph -> clusters,
// with every artifact stamped by the digest of the configuration.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "infocluster/clustering.hpp"
#include "infocluster/influence.hpp"
#include "infocluster/infotransfer.hpp"
#include "infocluster/simulate.hpp"
#include "infocluster/timeseries.hpp"
#include "json.hpp"

namespace infocluster {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256: digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kDataNotFound, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

struct PipelineConfig {
  std::optional<std::string> data;
  std::optional<std::string> system;
  long steps = 1000;
  std::uint64_t seed = 0;
  std::optional<std::string> groups;
  double lambda = 0.05;
  std::optional<double> noise_var;
  double beta = 1.0;
  double zero_threshold = 0.0;
  double sentinel = kDefaultSentinel;
  std::string method = "spectral";
  int k = 2;
  double tol = 1e-8;
  std::string out = "infocluster-out";
  bool standardize = false;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
    if (data.has_value() == system.has_value()) {
      fail("exactly one of data or system must be given");
    }
    if (system && *system != "three-state" && *system != "oscillator") {
      fail("unknown system '" + *system + "' (expected three-state or oscillator)");
    }
    if (steps < 1) fail("steps must be >= 1");
    if (!(lambda >= 0.0)) fail("lambda must be >= 0");
    if (noise_var && !(*noise_var > 0.0)) fail("noise_var must be > 0");
    if (!(beta > 0.0)) fail("beta must be > 0");
    if (!(zero_threshold >= 0.0)) fail("threshold must be >= 0");
    if (!(sentinel > 1.0)) fail("sentinel must be > 1");
    if (method != "spectral" && method != "kmeans" && method != "hierarchical") {
      fail("unknown method '" + method + "' (expected spectral, kmeans or hierarchical)");
    }
    if (k < 1) fail("k must be >= 1");
    if (!(tol > 0.0)) fail("tol must be > 0");
    if (out.empty()) fail("out must not be empty");
  }

  /// Every parameter that affects results, one key=value per line in key
  /// order. The output directory is excluded.
  std::string canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "beta=" << beta << '\n';
    if (data) os << "data=" << *data << '\n';
    if (groups) os << "groups=" << *groups << '\n';
    os << "k=" << k << '\n';
    os << "lambda=" << lambda << '\n';
    os << "method=" << method << '\n';
    if (noise_var) os << "noise_var=" << *noise_var << '\n';
    os << "seed=" << seed << '\n';
    os << "sentinel=" << sentinel << '\n';
    os << "standardize=" << (standardize ? "true" : "false") << '\n';
    os << "steps=" << steps << '\n';
    if (system) os << "system=" << *system << '\n';
    os << "threshold=" << zero_threshold << '\n';
    os << "tol=" << tol << '\n';
    return os.str();
  }

  std::string digest() const { return sha256_hex(canonical()); }
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "config: " + key + " expects a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "config: " + key + " expects an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::kConfig, "config: " + key + " expects true or false, got '" + v + "'");
}

}  // namespace detail

/// Applies one key=value setting; unknown keys are rejected.
inline void set_config_value(PipelineConfig& cfg, const std::string& key,
                             const std::string& value) {
  if (key == "data") {
    cfg.data = value;
  } else if (key == "system") {
    cfg.system = value;
  } else if (key == "steps") {
    cfg.steps = detail::parse_long(key, value);
  } else if (key == "seed") {
    const long s = detail::parse_long(key, value);
    if (s < 0) throw Error(ErrorCode::kConfig, "config: seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else if (key == "groups") {
    cfg.groups = value;
  } else if (key == "lambda") {
    cfg.lambda = detail::parse_real(key, value);
  } else if (key == "noise_var" || key == "noise-var") {
    cfg.noise_var = detail::parse_real(key, value);
  } else if (key == "beta") {
    cfg.beta = detail::parse_real(key, value);
  } else if (key == "threshold" || key == "zero_threshold") {
    cfg.zero_threshold = detail::parse_real(key, value);
  } else if (key == "sentinel") {
    cfg.sentinel = detail::parse_real(key, value);
  } else if (key == "method") {
    cfg.method = value;
  } else if (key == "k") {
    cfg.k = static_cast<int>(detail::parse_long(key, value));
  } else if (key == "tol") {
    cfg.tol = detail::parse_real(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "standardize") {
    cfg.standardize = detail::parse_bool(key, value);
  } else {
    throw Error(ErrorCode::kConfig, "config: unknown key '" + key + "'");
  }
}

/// key=value lines; '#' starts a comment line.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig cfg = {}) {
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig,
                  "config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kDataNotFound, "cannot open config '" + path.string() + "'");
  return parse_config(in, std::move(cfg));
}

/// Lines `label: var1, var2`; '#' starts a comment line.
inline std::vector<TransferGroup> parse_groups(std::istream& in, const TimeSeries& ts) {
  std::vector<TransferGroup> groups;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto colon = t.find(':');
    const std::string where = "groups line " + std::to_string(line_no);
    if (colon == std::string::npos) {
      throw Error(ErrorCode::kConfig, where + ": expected 'label: var1, var2'");
    }
    TransferGroup g{detail::trim(t.substr(0, colon)), {}};
    if (g.label.empty()) throw Error(ErrorCode::kConfig, where + ": empty label");
    for (const std::string& name : detail::split(t.substr(colon + 1), ',')) {
      const std::string v = detail::trim(name);
      const auto idx = ts.find(v);
      if (!idx) throw Error(ErrorCode::kConfig, where + ": unknown variable '" + v + "'");
      g.indices.push_back(*idx);
    }
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw Error(ErrorCode::kConfig, "groups: no groups defined");
  return groups;
}

/// Per-oscillator (theta_i, theta_i') groups labelled osc1..oscN.
inline std::vector<TransferGroup> oscillator_groups(Index oscillators) {
  std::vector<TransferGroup> groups;
  for (Index k = 0; k < oscillators; ++k) {
    groups.push_back({"osc" + std::to_string(k + 1), {2 * k, 2 * k + 1}});
  }
  return groups;
}

struct PipelineInput {
  TimeSeries series;
  std::vector<TransferGroup> groups;
  std::string data_digest;
};

/// Simulated series of a builtin system started from N(0, I).
inline TimeSeries simulate_builtin(const std::string& system, long steps, std::uint64_t seed) {
  if (system == "three-state") {
    const LinearModel m = make_three_state();
    return simulate_linear(m, Covariance::identity(m.size()), steps, seed);
  }
  if (system == "oscillator") {
    const OscillatorNetwork net = make_oscillator_network();
    return simulate_linear(net.model, Covariance::identity(net.model.size()), steps, seed);
  }
  throw Error(ErrorCode::kConfig, "unknown system '" + system + "'");
}

inline std::string csv_text(const TimeSeries& ts) {
  std::ostringstream os;
  write_csv(ts, os);
  return os.str();
}

inline PipelineInput load_input(const PipelineConfig& cfg) {
  std::optional<TimeSeries> ts;
  std::string digest;
  if (cfg.data) {
    const std::string bytes = read_file(*cfg.data);
    std::istringstream in(bytes);
    ts = read_csv(in, *cfg.data);
    digest = sha256_hex(bytes);
  } else {
    ts = simulate_builtin(*cfg.system, cfg.steps, cfg.seed);
    digest = sha256_hex(csv_text(*ts));
  }
  if (cfg.standardize) ts = standardize(*ts);
  std::vector<TransferGroup> groups;
  if (cfg.groups) {
    std::ifstream in(*cfg.groups);
    if (!in) throw Error(ErrorCode::kDataNotFound, "cannot open groups '" + *cfg.groups + "'");
    groups = parse_groups(in, *ts);
  } else if (cfg.system && *cfg.system == "oscillator") {
    groups = oscillator_groups(ts->variables() / 2);
  } else {
    groups = singleton_groups(ts->names());
  }
  return PipelineInput{std::move(*ts), std::move(groups), std::move(digest)};
}

inline TransferOptions transfer_options(const PipelineConfig& cfg) {
  TransferOptions o;
  o.lambda = cfg.lambda;
  o.noise_var = cfg.noise_var;
  o.tol = cfg.tol;
  return o;
}

inline GraphOptions graph_options(const PipelineConfig& cfg) {
  return GraphOptions{cfg.beta, cfg.zero_threshold, cfg.sentinel};
}

struct ClusterResult {
  ClusterLabels labels;
  std::optional<Dendrogram> dendrogram;
};

/// spectral: row-normalized embedding + k-means. kmeans: k-means on the
/// unnormalized embedding. hierarchical: average linkage on the min-
/// symmetrized distances, cut into k clusters.
inline ClusterResult cluster_graph(const InfluenceGraph& g, const std::string& method, int k,
                                   std::uint64_t seed) {
  if (k > g.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cluster: k = " + std::to_string(k) + " exceeds node count " +
                    std::to_string(g.size()));
  }
  ClusterResult r;
  if (method == "spectral") {
    r.labels = spectral_clustering(symmetrize_affinity(g), k, seed);
  } else if (method == "kmeans") {
    if (k < 2) throw Error(ErrorCode::kInvalidArgument, "cluster: kmeans needs k >= 2");
    r.labels = kmeans_cluster(spectral_embedding(symmetrize_affinity(g), k, false), k, seed);
  } else if (method == "hierarchical") {
    r.dendrogram = hierarchical_cluster(symmetrize_distance(g), g.nodes);
    r.labels.labels = r.dendrogram->cut(k);
    r.labels.k = k;
    r.labels.method = "hierarchical";
    r.labels.seed = seed;
  } else {
    throw Error(ErrorCode::kConfig, "unknown method '" + method + "'");
  }
  return r;
}

/// Comment-line prefixes per text format, used to stamp the config digest.
inline std::string stamp(const std::string& prefix, const std::string& digest) {
  return prefix + "config_digest: " + digest;
}

inline std::string labels_artifact(const InfluenceGraph& g, const ClusterResult& r,
                                   const std::string& digest) {
  return stamp("# ", digest) + "\n" + labels_csv(g.nodes, r.labels);
}

struct PipelineResult {
  TransferMatrix transfer;
  InfluenceGraph graph;
  ClusterResult clusters;
  std::string config_digest;
  std::string data_digest;
  std::vector<std::filesystem::path> artifacts;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Runs every stage and writes the artifacts into cfg.out. Only the
/// manifest's timestamp differs between runs of the same configuration.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult res;
  res.config_digest = cfg.digest();
  const PipelineInput input = load_input(cfg);
  res.data_digest = input.data_digest;

  res.transfer = transfer_matrix(input.series, input.groups, transfer_options(cfg));
  res.transfer.provenance.data_digest = input.data_digest;
  if (cfg.system) res.transfer.provenance.seed = cfg.seed;
  res.graph = build_influence_graph(res.transfer, graph_options(cfg));
  res.clusters = cluster_graph(res.graph, cfg.method, cfg.k, cfg.seed);

  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());

  std::map<std::string, std::string> files;
  const std::string& dg = res.config_digest;
  if (cfg.system) files["data.csv"] = [&] {
    std::ostringstream os;
    write_csv(input.series, os, "config_digest: " + dg);
    return os.str();
  }();
  nlohmann::json tm = to_json(res.transfer);
  tm["config_digest"] = dg;
  files["transfer_matrix.json"] = tm.dump(2) + "\n";
  files["graph.dot"] = stamp("// ", dg) + "\n" + export_graph(res.graph, GraphFormat::kDot);
  files["graph_edges.csv"] =
      stamp("# ", dg) + "\n" + export_graph(res.graph, GraphFormat::kEdgeCsv);
  nlohmann::json gj = to_json(res.graph);
  gj["config_digest"] = dg;
  files["graph.json"] = gj.dump(2) + "\n";
  files["labels.csv"] = labels_artifact(res.graph, res.clusters, dg);
  if (res.clusters.dendrogram) {
    nlohmann::json dj = res.clusters.dendrogram->to_json();
    dj["config_digest"] = dg;
    files["dendrogram.json"] = dj.dump(2) + "\n";
    files["dendrogram.nwk"] =
        "[" + stamp("", dg) + "]\n" + res.clusters.dendrogram->to_newick() + "\n";
  }

  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& [name, text] : files) {
    write_file(dir / name, text);
    res.artifacts.push_back(dir / name);
    artifacts[name] = sha256_hex(text);
  }

  nlohmann::json params = nlohmann::json::object();
  std::istringstream canon(cfg.canonical());
  for (std::string line; std::getline(canon, line);) {
    const auto eq = line.find('=');
    params[line.substr(0, eq)] = line.substr(eq + 1);
  }
  nlohmann::json manifest = {
      {"kind", "manifest"},
      {"tool", "infocluster"},
      {"version", kVersion},
      {"config_digest", dg},
      {"data_digest", res.data_digest},
      {"config", params},
      {"groups", to_json(res.transfer)["groups"]},
      {"clusters", {{"method", res.clusters.labels.method},
                    {"k", res.clusters.labels.k},
                    {"seed", cfg.seed},
                    {"degenerate", res.clusters.labels.degenerate}}},
      {"artifacts", artifacts},
      {"timestamp", utc_timestamp()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  res.artifacts.push_back(dir / "manifest.json");
  return res;
}

}  // namespace infocluster
