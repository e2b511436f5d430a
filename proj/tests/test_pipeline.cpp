#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "infocluster/pipeline.hpp"

using namespace infocluster;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("infocluster_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string strip_timestamp(const std::string& manifest) {
  nlohmann::json j = nlohmann::json::parse(manifest);
  j.erase("timestamp");
  return j.dump();
}

}  // namespace

TEST(Config, ParsesKeyValueAndRejectsUnknownKeys) {
  std::istringstream in("# comment\nsystem = three-state\nlambda=0.1\nk=3\nstandardize=true\n");
  const PipelineConfig cfg = parse_config(in);
  EXPECT_EQ(cfg.system, "three-state");
  EXPECT_EQ(cfg.lambda, 0.1);
  EXPECT_EQ(cfg.k, 3);
  EXPECT_TRUE(cfg.standardize);
  EXPECT_NO_THROW(cfg.validate());

  std::istringstream bad("system=three-state\ncolour=blue\n");
  try {
    parse_config(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream nonnum("beta=warm\n");
  EXPECT_THROW(parse_config(nonnum), Error);
}

TEST(Config, Validation) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.validate(), Error);  // no source
  cfg.system = "three-state";
  cfg.data = "x.csv";
  EXPECT_THROW(cfg.validate(), Error);  // two sources
  cfg.data.reset();
  cfg.beta = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.beta = 1.0;
  cfg.method = "louvain";
  EXPECT_THROW(cfg.validate(), Error);
  cfg.method = "kmeans";
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, DigestIgnoresOutputDirectoryOnly) {
  PipelineConfig a;
  a.system = "three-state";
  PipelineConfig b = a;
  b.out = "elsewhere";
  EXPECT_EQ(a.digest(), b.digest());
  b.beta = 2.0;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Groups, ParseAndErrors) {
  const TimeSeries ts(Matrix::Zero(3, 4), {"a", "b", "c"});
  std::istringstream in("# groups\nleft: a, b\nright: c\n");
  const auto groups = parse_groups(in, ts);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].label, "left");
  EXPECT_EQ(groups[0].indices, (IndexSet{0, 1}));
  std::istringstream unknown("left: a, z\n");
  EXPECT_THROW(parse_groups(unknown, ts), Error);
  std::istringstream malformed("left a b\n");
  EXPECT_THROW(parse_groups(malformed, ts), Error);
}

TEST(Pipeline, ThreeStateDefaults) {
  PipelineConfig cfg;
  cfg.system = "three-state";
  cfg.out = fresh_dir("three").string();
  const PipelineResult res = run_pipeline(cfg);
  const std::string manifest = read_file(fs::path(cfg.out) / "manifest.json");
  const auto j = nlohmann::json::parse(manifest);
  EXPECT_EQ(j["config"]["beta"], "1");
  EXPECT_EQ(j["config_digest"], res.config_digest);
  const std::string dot = read_file(fs::path(cfg.out) / "graph.dot");
  EXPECT_NE(dot.find("x1 -> x2"), std::string::npos);
  EXPECT_NEAR(res.graph.dist(0, 1), 0.7391, 0.05);
  for (const auto& p : res.artifacts) {
    EXPECT_NE(read_file(p).find(res.config_digest), std::string::npos) << p;
  }
}

TEST(Pipeline, OscillatorSpectralGivesTwoSixes) {
  PipelineConfig cfg;
  cfg.system = "oscillator";
  cfg.out = fresh_dir("osc").string();
  const PipelineResult res = run_pipeline(cfg);
  const std::vector<int>& l = res.clusters.labels.labels;
  ASSERT_EQ(l.size(), 12u);
  std::vector<int> truth;
  for (int i = 0; i < 12; ++i) truth.push_back(i < 6 ? 0 : 1);
  EXPECT_EQ(adjusted_rand_index(l, truth), 1.0);
  const std::string labels = read_file(fs::path(cfg.out) / "labels.csv");
  EXPECT_NE(labels.find("node,label\nosc1,0\n"), std::string::npos) << labels;
}

TEST(Pipeline, HierarchicalWritesDendrogram) {
  PipelineConfig cfg;
  cfg.system = "three-state";
  cfg.method = "hierarchical";
  cfg.out = fresh_dir("hier").string();
  run_pipeline(cfg);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "dendrogram.json"));
  const std::string nwk = read_file(fs::path(cfg.out) / "dendrogram.nwk");
  EXPECT_NE(nwk.find(");"), std::string::npos);
}

TEST(Pipeline, ByteIdenticalReruns) {
  PipelineConfig cfg;
  cfg.system = "three-state";
  cfg.method = "hierarchical";
  cfg.out = fresh_dir("rerun_a").string();
  run_pipeline(cfg);
  PipelineConfig again = cfg;
  again.out = fresh_dir("rerun_b").string();
  run_pipeline(again);
  for (const auto& entry : fs::directory_iterator(cfg.out)) {
    const std::string name = entry.path().filename().string();
    const std::string a = read_file(entry.path());
    const std::string b = read_file(fs::path(again.out) / name);
    if (name == "manifest.json") {
      EXPECT_EQ(strip_timestamp(a), strip_timestamp(b));
    } else {
      EXPECT_EQ(a, b) << name;
    }
  }
}

TEST(Pipeline, DataFileWithGroups) {
  const fs::path dir = fresh_dir("datafile");
  fs::create_directories(dir);
  const TimeSeries ts = simulate_builtin("three-state", 800, 3);
  {
    std::ofstream out(dir / "series.csv");
    write_csv(ts, out);
    std::ofstream groups(dir / "groups.txt");
    groups << "source: x1\nrest: x2, x3\n";
  }
  PipelineConfig cfg;
  cfg.data = (dir / "series.csv").string();
  cfg.groups = (dir / "groups.txt").string();
  cfg.k = 2;
  cfg.out = (dir / "out").string();
  cfg.standardize = true;
  const PipelineResult res = run_pipeline(cfg);
  EXPECT_EQ(res.graph.nodes, (std::vector<std::string>{"source", "rest"}));
  EXPECT_EQ(res.data_digest, sha256_hex(read_file(dir / "series.csv")));
}

TEST(Pipeline, MissingDataFile) {
  PipelineConfig cfg;
  cfg.data = "/nonexistent/series.csv";
  cfg.out = fresh_dir("missing").string();
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataNotFound);
  }
}
