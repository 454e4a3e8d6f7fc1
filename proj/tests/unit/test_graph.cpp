#include "helpers.hpp"

#include <fstream>

using namespace ussl;
using namespace ussl::testing;
namespace fs = std::filesystem;

namespace {

struct ManifestFiles {
  fs::path dir;
  std::string edges = "0,1\n";
  std::string features = "0.5,1\n2,-3\n";
  std::string labels = "0\n1\n";
  std::string splits = "node_index,split\n0,train\n1,test\n";
  int num_nodes = 2;

  fs::path write() const {
    fs::create_directories(dir);
    std::ofstream(dir / "edges.csv") << edges;
    std::ofstream(dir / "features.csv") << features;
    std::ofstream(dir / "labels.csv") << labels;
    std::ofstream(dir / "splits.csv") << splits;
    nlohmann::json m = {{"graph_id", "tiny"},         {"num_nodes", num_nodes},        {"num_classes", 2},
                        {"edges_file", "edges.csv"},  {"features_file", "features.csv"},
                        {"labels_file", "labels.csv"}, {"splits_file", "splits.csv"}};
    std::ofstream(dir / "manifest.json") << m.dump();
    return dir / "manifest.json";
  }
};

std::string error_of(const fs::path& manifest) {
  try {
    load_dataset(manifest);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadDataset, MinimalGraph) {
  ManifestFiles f{temp_dir("minimal")};
  const auto g = load_dataset(f.write());
  EXPECT_EQ(g.num_nodes, 2);
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}}));
  EXPECT_EQ(g.feature_dim(), 2);
  EXPECT_FLOAT_EQ(g.features(1, 1), -3.0f);
  EXPECT_EQ(g.splits.train, (std::vector<NodeId>{0}));
  EXPECT_EQ(g.splits.test, (std::vector<NodeId>{1}));
}

TEST(LoadDataset, SymmetricDuplicatesCollapse) {
  ManifestFiles f{temp_dir("dedupe")};
  f.edges = "0,1\n1,0\n0,1\n";
  EXPECT_EQ(load_dataset(f.write()).edges, (std::vector<Edge>{{0, 1}}));
}

TEST(LoadDataset, SelfLoopsStripped) {
  ManifestFiles f{temp_dir("selfloop")};
  f.edges = "0,0\n1,0\n1,1\n";
  EXPECT_EQ(load_dataset(f.write()).edges, (std::vector<Edge>{{0, 1}}));
}

TEST(LoadDataset, OutOfRangeEdgeNamesFileAndLine) {
  ManifestFiles f{temp_dir("range")};
  f.num_nodes = 3;
  f.features = "1,1\n1,1\n1,1\n";
  f.labels = "0\n1\n0\n";
  f.edges = "0,1\n5,0\n";
  const std::string msg = error_of(f.write());
  EXPECT_NE(msg.find("node index 5 out of range"), std::string::npos) << msg;
  EXPECT_NE(msg.find("edges.csv:2"), std::string::npos) << msg;
}

TEST(LoadDataset, RaggedFeatureRows) {
  ManifestFiles f{temp_dir("ragged")};
  f.features = "1,2\n3\n";
  const std::string msg = error_of(f.write());
  EXPECT_NE(msg.find("features.csv"), std::string::npos) << msg;
}

TEST(LoadDataset, OverlappingSplits) {
  ManifestFiles f{temp_dir("overlap")};
  f.splits = "node_index,split\n0,train\n0,val\n";
  const std::string msg = error_of(f.write());
  EXPECT_NE(msg.find("overlapping splits"), std::string::npos) << msg;
  EXPECT_NE(msg.find("splits.csv:3"), std::string::npos) << msg;
}

TEST(LoadDataset, MissingFile) {
  ManifestFiles f{temp_dir("missing")};
  const auto m = f.write();
  fs::remove(f.dir / "labels.csv");
  EXPECT_NE(error_of(m).find("labels.csv"), std::string::npos);
}

TEST(LoadDataset, BadLabel) {
  ManifestFiles f{temp_dir("label")};
  f.labels = "0\n2\n";
  EXPECT_NE(error_of(f.write()).find("label 2 out of range"), std::string::npos);
}

TEST(SaveDataset, RoundTripCsvAndBinary) {
  const auto g = random_graph(40, 5, 0.1, 3);
  for (bool binary : {false, true}) {
    const auto dir = temp_dir(binary ? "rt_bin" : "rt_csv");
    const auto m = save_dataset(g, dir, binary);
    const auto back = load_dataset(m);
    EXPECT_EQ(back, g);
    // saving the reloaded graph yields the same files
    const auto dir2 = temp_dir(binary ? "rt_bin2" : "rt_csv2");
    save_dataset(back, dir2, binary);
    for (const char* f : {"edges.csv", "labels.csv", "splits.csv"}) {
      std::ifstream a(dir / f), b(dir2 / f);
      std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
      EXPECT_EQ(sa, sb) << f;
    }
  }
}

TEST(BinaryFeatures, HeaderLayout) {
  const auto dir = temp_dir("binhdr");
  MatF m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  write_features_binary(dir / "f.bin", m);
  EXPECT_EQ(fs::file_size(dir / "f.bin"), 8u + 6u * 4u);
  std::ifstream in(dir / "f.bin", std::ios::binary);
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  EXPECT_EQ(hdr[0], 2);
  EXPECT_EQ(hdr[4], 3);
  EXPECT_EQ(read_features_binary(dir / "f.bin"), m);
}

TEST(Validate, RejectsBrokenInvariants) {
  auto g = random_graph(10, 2, 0.3, 1);
  EXPECT_NO_THROW(validate(g));
  auto bad = g;
  bad.features(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(validate(bad), ValidationError);
  bad = g;
  bad.splits.val.push_back(bad.splits.train.front());
  EXPECT_THROW(validate(bad), ValidationError);
  bad = g;
  bad.edges.push_back({3, 11});
  EXPECT_THROW(validate(bad), ValidationError);
}

TEST(GenerateFamily, ShapesAndDeterminism) {
  SyntheticFamilySpec spec;
  spec.node_counts = {500, 500, 500};
  spec.feature_dims = {32, 48, 64};
  spec.num_classes = 5;
  const auto a = generate_family(spec, 7);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& g = a.graphs[i];
    EXPECT_EQ(g.num_nodes, 500);
    EXPECT_EQ(g.feature_dim(), spec.feature_dims[i]);
    EXPECT_EQ(g.num_classes, 5);
    EXPECT_NO_THROW(validate(g));
    EXPECT_EQ(g.splits.train.size() + g.splits.val.size() + g.splits.test.size(), 500u);
    EXPECT_EQ(g.splits.train.size(), 300u);
  }
  const auto b = generate_family(spec, 7);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.graphs[i], b.graphs[i]);
  EXPECT_NE(generate_family(spec, 8).graphs[0].edges, a.graphs[0].edges);
}

TEST(GenerateFamily, StratifiedSplits) {
  SyntheticFamilySpec spec;
  const auto f = generate_family(spec, 3);
  for (const auto& g : f.graphs) {
    std::vector<int> per_class(g.num_classes, 0);
    for (NodeId v : g.splits.train) ++per_class[g.labels[v]];
    for (int c : per_class) EXPECT_EQ(c, 60);
  }
}

TEST(GenerateFamily, EdgelessSpecWarns) {
  SyntheticFamilySpec spec;
  spec.p_intra = 0.0;
  spec.p_inter = 0.0;
  std::vector<std::string> seen;
  auto prev = set_log_sink([&](const std::string& level, const std::string& msg) {
    if (level == "warn") seen.push_back(msg);
  });
  const auto f = generate_family(spec, 1);
  set_log_sink(prev);
  for (const auto& g : f.graphs) EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(seen.size(), 1u);
  EXPECT_EQ(f.provenance.warnings.size(), 1u);
}

TEST(GenerateFamily, DegenerateSpecsRejected) {
  SyntheticFamilySpec spec;
  spec.node_counts = {0, 10, 10};
  EXPECT_THROW(generate_family(spec, 1), ValidationError);
  spec = {};
  spec.num_classes = 0;
  EXPECT_THROW(generate_family(spec, 1), ValidationError);
  spec = {};
  spec.p_inter = 1.5;
  EXPECT_THROW(generate_family(spec, 1), ValidationError);
}

TEST(GraphFamily, DuplicateIdsRejected) {
  GraphFamily f;
  f.graphs = {random_graph(5, 2, 0.5, 1, 2, "a"), random_graph(5, 2, 0.5, 2, 2, "a")};
  EXPECT_THROW(validate(f), ValidationError);
}

TEST(Csr, SymmetricNeighborhoods) {
  const auto g = random_graph(30, 2, 0.2, 9);
  const auto csr = build_csr(g.num_nodes, g.edges);
  for (auto [u, v] : g.edges) {
    auto has = [&](NodeId a, NodeId b) {
      for (auto i = csr.offsets[a]; i < csr.offsets[a + 1]; ++i)
        if (csr.targets[i] == b) return true;
      return false;
    };
    EXPECT_TRUE(has(u, v));
    EXPECT_TRUE(has(v, u));
  }
}
