// infocluster: simulate, transfer, graph, cluster, pipeline.
//
// Errors end the process with status 1 and one line on stderr of the form
// error[CODE]: message

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "infocluster/pipeline.hpp"

namespace ic = infocluster;

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string system;
  std::string groups;
  std::string in;
  std::string out;
  std::string method;
  long steps = 0;
  long seed = 0;
  double lambda = 0;
  double noise_var = 0;
  double beta = 0;
  double threshold = 0;
  double tol = 0;
  int k = 0;
  bool standardize = false;
};

// Handles of the flags a subcommand registered; apply() copies the ones given
// on the command line over the config file values.
struct Options {
  CLI::Option* config = nullptr;
  CLI::Option* data = nullptr;
  CLI::Option* system = nullptr;
  CLI::Option* steps = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* groups = nullptr;
  CLI::Option* lambda = nullptr;
  CLI::Option* noise_var = nullptr;
  CLI::Option* beta = nullptr;
  CLI::Option* threshold = nullptr;
  CLI::Option* method = nullptr;
  CLI::Option* k = nullptr;
  CLI::Option* tol = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* standardize = nullptr;
};

void add_source(CLI::App* app, Flags& f, Options& o) {
  o.data = app->add_option("--data", f.data, "CSV time series (header row of variable names)");
  o.system = app->add_option("--system", f.system, "builtin system: three-state | oscillator");
  o.steps = app->add_option("--steps", f.steps, "simulation steps for --system");
  o.seed = app->add_option("--seed", f.seed, "random seed");
}

void add_transfer(CLI::App* app, Flags& f, Options& o) {
  o.groups = app->add_option("--groups", f.groups, "groups file, lines 'label: var1, var2'");
  o.lambda = app->add_option("--lambda", f.lambda, "ridge regularization");
  o.noise_var = app->add_option("--noise-var", f.noise_var, "noise variance (default lambda)");
  o.tol = app->add_option("--tol", f.tol, "steady-state tolerance");
  o.standardize = app->add_flag("--standardize", f.standardize, "z-score each variable");
}

void add_graph(CLI::App* app, Flags& f, Options& o) {
  o.beta = app->add_option("--beta", f.beta, "influence distance temperature");
  o.threshold = app->add_option("--threshold", f.threshold, "|T| below this is no edge");
}

void add_cluster(CLI::App* app, Flags& f, Options& o) {
  o.method = app->add_option("--method", f.method, "spectral | kmeans | hierarchical");
  o.k = app->add_option("--k", f.k, "number of clusters");
}

ic::PipelineConfig apply(ic::PipelineConfig cfg, const Flags& f, const Options& o) {
  auto given = [](const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; };
  if (given(o.data)) {
    cfg.data = f.data;
    cfg.system.reset();
  }
  if (given(o.system)) {
    cfg.system = f.system;
    if (!given(o.data)) cfg.data.reset();
  }
  if (given(o.steps)) cfg.steps = f.steps;
  if (given(o.seed)) {
    if (f.seed < 0) throw ic::Error(ic::ErrorCode::kConfig, "seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(f.seed);
  }
  if (given(o.groups)) cfg.groups = f.groups;
  if (given(o.lambda)) cfg.lambda = f.lambda;
  if (given(o.noise_var)) cfg.noise_var = f.noise_var;
  if (given(o.tol)) cfg.tol = f.tol;
  if (given(o.standardize)) cfg.standardize = f.standardize;
  if (given(o.beta)) cfg.beta = f.beta;
  if (given(o.threshold)) cfg.zero_threshold = f.threshold;
  if (given(o.method)) cfg.method = f.method;
  if (given(o.k)) cfg.k = f.k;
  if (given(o.out)) cfg.out = f.out;
  return cfg;
}

ic::PipelineConfig base_config(const Flags& f, const Options& o) {
  ic::PipelineConfig cfg;
  if (o.config != nullptr && o.config->count() > 0) cfg = ic::load_config(f.config);
  return apply(std::move(cfg), f, o);
}

void require_source(const ic::PipelineConfig& cfg) {
  if (cfg.data.has_value() == cfg.system.has_value()) {
    throw ic::Error(ic::ErrorCode::kConfig, "exactly one of --data or --system is required");
  }
}

std::string stamped_json(nlohmann::json j, const std::string& digest) {
  j["config_digest"] = digest;
  return j.dump(2) + "\n";
}

int run_simulate(const Flags& f, const Options& o) {
  ic::PipelineConfig cfg = base_config(f, o);
  if (!cfg.system) throw ic::Error(ic::ErrorCode::kConfig, "simulate requires --system");
  cfg.validate();
  const ic::TimeSeries ts = ic::simulate_builtin(*cfg.system, cfg.steps, cfg.seed);
  std::ostringstream os;
  ic::write_csv(ts, os, "config_digest: " + cfg.digest());
  if (f.out.empty() || f.out == "-") {
    std::cout << os.str();
  } else {
    ic::write_file(f.out, os.str());
  }
  return 0;
}

int run_transfer(const Flags& f, const Options& o) {
  ic::PipelineConfig cfg = base_config(f, o);
  require_source(cfg);
  cfg.validate();
  const ic::PipelineInput input = ic::load_input(cfg);
  ic::TransferMatrix tm = ic::transfer_matrix(input.series, input.groups,
                                              ic::transfer_options(cfg));
  tm.provenance.data_digest = input.data_digest;
  if (cfg.system) tm.provenance.seed = cfg.seed;
  const std::string text = stamped_json(ic::to_json(tm), cfg.digest());
  if (f.out.empty() || f.out == "-") {
    std::cout << text;
  } else {
    ic::write_file(f.out, text);
  }
  return tm.all_ok() ? 0 : 2;
}

int run_graph(const Flags& f, const Options& o) {
  ic::PipelineConfig cfg = apply({}, f, o);
  if (f.in.empty()) throw ic::Error(ic::ErrorCode::kConfig, "graph requires --in");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ic::read_file(f.in));
  } catch (const nlohmann::json::exception& e) {
    throw ic::Error(ic::ErrorCode::kParse, f.in + ": " + e.what());
  }
  const ic::TransferMatrix tm = ic::transfer_matrix_from_json(j);
  const ic::InfluenceGraph g = ic::build_influence_graph(tm, ic::graph_options(cfg));
  const std::string dg = j.value("config_digest", std::string());
  const std::filesystem::path dir(f.out.empty() ? "." : f.out);
  std::filesystem::create_directories(dir);
  ic::write_file(dir / "graph.dot", ic::stamp("// ", dg) + "\n" +
                                        ic::export_graph(g, ic::GraphFormat::kDot));
  ic::write_file(dir / "graph_edges.csv", ic::stamp("# ", dg) + "\n" +
                                              ic::export_graph(g, ic::GraphFormat::kEdgeCsv));
  ic::write_file(dir / "graph.json", stamped_json(ic::to_json(g), dg));
  return 0;
}

int run_cluster(const Flags& f, const Options& o) {
  ic::PipelineConfig cfg = apply({}, f, o);
  if (f.in.empty()) throw ic::Error(ic::ErrorCode::kConfig, "cluster requires --in");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ic::read_file(f.in));
  } catch (const nlohmann::json::exception& e) {
    throw ic::Error(ic::ErrorCode::kParse, f.in + ": " + e.what());
  }
  const ic::InfluenceGraph g = ic::influence_graph_from_json(j);
  const ic::ClusterResult r = ic::cluster_graph(g, cfg.method, cfg.k, cfg.seed);
  const std::string dg = j.value("config_digest", std::string());
  const std::filesystem::path dir(f.out.empty() ? "." : f.out);
  std::filesystem::create_directories(dir);
  ic::write_file(dir / "labels.csv", ic::labels_artifact(g, r, dg));
  if (r.dendrogram) {
    ic::write_file(dir / "dendrogram.json", stamped_json(r.dendrogram->to_json(), dg));
    ic::write_file(dir / "dendrogram.nwk",
                   "[" + ic::stamp("", dg) + "]\n" + r.dendrogram->to_newick() + "\n");
  }
  return 0;
}

int run_pipeline(const Flags& f, const Options& o) {
  const ic::PipelineConfig cfg = base_config(f, o);
  const ic::PipelineResult res = ic::run_pipeline(cfg);
  std::cout << "config_digest " << res.config_digest << '\n';
  for (const auto& p : res.artifacts) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-transfer influence graphs and clustering"};
  app.set_version_flag("--version", ic::kVersion);
  app.require_subcommand(1);
  Flags f;

  Options sim_o;
  auto* sim = app.add_subcommand("simulate", "simulate a builtin system to CSV");
  sim_o.config = sim->add_option("--config", f.config, "key=value config file");
  sim_o.system = sim->add_option("--system", f.system, "three-state | oscillator");
  sim_o.steps = sim->add_option("--steps", f.steps, "number of steps");
  sim_o.seed = sim->add_option("--seed", f.seed, "random seed");
  sim->add_option("--out", f.out, "output CSV (default stdout)");

  Options tr_o;
  auto* tr = app.add_subcommand("transfer", "transfer matrix from data");
  tr_o.config = tr->add_option("--config", f.config, "key=value config file");
  add_source(tr, f, tr_o);
  add_transfer(tr, f, tr_o);
  tr->add_option("--out", f.out, "output JSON (default stdout)");

  Options gr_o;
  auto* gr = app.add_subcommand("graph", "influence graph from a transfer matrix");
  gr->add_option("--in", f.in, "transfer_matrix.json")->required();
  add_graph(gr, f, gr_o);
  gr->add_option("--out", f.out, "output directory");

  Options cl_o;
  auto* cl = app.add_subcommand("cluster", "cluster an influence graph");
  cl->add_option("--in", f.in, "graph.json")->required();
  add_cluster(cl, f, cl_o);
  cl_o.seed = cl->add_option("--seed", f.seed, "random seed");
  cl->add_option("--out", f.out, "output directory");

  Options pl_o;
  auto* pl = app.add_subcommand("pipeline", "every stage end to end");
  pl_o.config = pl->add_option("--config", f.config, "key=value config file");
  add_source(pl, f, pl_o);
  add_transfer(pl, f, pl_o);
  add_graph(pl, f, pl_o);
  add_cluster(pl, f, pl_o);
  pl_o.out = pl->add_option("--out", f.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[" << ic::to_string(ic::ErrorCode::kConfig) << "]: " << e.what() << '\n';
    return 1;
  }

  try {
    if (sim->parsed()) return run_simulate(f, sim_o);
    if (tr->parsed()) return run_transfer(f, tr_o);
    if (gr->parsed()) return run_graph(f, gr_o);
    if (cl->parsed()) return run_cluster(f, cl_o);
    return run_pipeline(f, pl_o);
  } catch (const ic::Error& e) {
    std::cerr << "error[" << ic::to_string(e.code()) << "]: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[" << ic::to_string(ic::ErrorCode::kIo) << "]: " << e.what() << '\n';
  }
  return 1;
}
