#include "helpers.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace ussl;
using namespace ussl::testing;

TEST(NormalizeAdjacency, SingleNode) {
  GraphDataset g = random_graph(1, 2, 0.0, 1, 1);
  const auto a = normalize_adjacency(g);
  ASSERT_EQ(a.size(), 1);
  EXPECT_DOUBLE_EQ(a.matrix.coeff(0, 0), 1.0);
}

TEST(NormalizeAdjacency, TwoNodes) {
  GraphDataset g = random_graph(2, 2, 0.0, 1, 1);
  g.edges = {{0, 1}};
  const Eigen::MatrixXd a = normalize_adjacency(g).matrix.toDense();
  EXPECT_TRUE(a.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5), 1e-15));
}

TEST(NormalizeAdjacency, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(32, 3, 0.15, seed);
    const Eigen::MatrixXd got = normalize_adjacency(g).matrix.toDense();
    EXPECT_LE((got - dense_normalized(g)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NormalizeAdjacency, Invariants) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_graph(40, 2, 0.1, 100 + seed);
    const Eigen::MatrixXd a = normalize_adjacency(g).matrix.toDense();
    EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
    // sqrt of the self-loop degree is a fixed point
    const Eigen::VectorXd d = (dense_adjacency(g).rowwise().sum().array() + 1.0).sqrt();
    EXPECT_LE((a * d - d).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i];
      EXPECT_TRUE(x == 0.0 || (x > 0.0 && x <= 1.0));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    EXPECT_LE(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-6);
  }
}

TEST(NormalizeAdjacency, RegularGraphKeepsConstantVector) {
  // cycle: every node has degree 2
  GraphDataset g = random_graph(12, 2, 0.0, 1);
  for (NodeId v = 0; v < 12; ++v) g.edges.emplace_back(std::min(v, (v + 1) % 12), std::max(v, (v + 1) % 12));
  g.edges = canonicalize_edges(g.edges);
  const Eigen::MatrixXd a = normalize_adjacency(g).matrix.toDense();
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(12);
  EXPECT_LE((ones * a - ones).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LaplacianPE, TwoNodePath) {
  GraphDataset g = random_graph(2, 1, 0.0, 1, 1);
  g.edges = {{0, 1}};
  const auto pe = laplacian_pe(g, 1);
  ASSERT_EQ(pe.eigenvalues.size(), 1u);
  EXPECT_NEAR(pe.eigenvalues[0], 1.0, 1e-12);
  EXPECT_NEAR(pe.vectors(0, 0), 0.70710678, 1e-8);
  EXPECT_NEAR(pe.vectors(1, 0), -0.70710678, 1e-8);
}

TEST(LaplacianPE, MatchesJacobiOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto g = connected_graph(24, 2, 0.1, 200 + seed);
    const auto pe = laplacian_pe(g, 4);
    const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(24, 24) - dense_normalized(g);
    const auto oracle = jacobi_eigen(lap);
    // connected: skip exactly one zero eigenvalue
    EXPECT_NEAR(oracle.values[0], 0.0, 1e-10);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(pe.eigenvalues[j], oracle.values[j + 1], 1e-8);
    const Eigen::MatrixXd gram = pe.vectors.transpose() * pe.vectors;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
    for (int j = 0; j < 4; ++j) {
      const Eigen::VectorXd v = pe.vectors.col(j);
      EXPECT_LE((lap * v - pe.eigenvalues[j] * v).norm(), 1e-7);
    }
  }
}

TEST(LaplacianPE, DisconnectedSkipsWholeKernel) {
  // two triangles plus an isolated node: three components
  GraphDataset g = random_graph(7, 2, 0.0, 1);
  g.edges = canonicalize_edges({{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const auto pe = laplacian_pe(g, 2);
  for (double ev : pe.eigenvalues) EXPECT_GT(ev, 1e-6);
  const auto oracle = jacobi_eigen(Eigen::MatrixXd::Identity(7, 7) - dense_normalized(g));
  EXPECT_NEAR(pe.eigenvalues[0], oracle.values[3], 1e-8);
  EXPECT_THROW(laplacian_pe(g, 5), ValidationError);
}

TEST(LaplacianPE, SignConvention) {
  const auto g = connected_graph(20, 2, 0.2, 5);
  const auto pe = laplacian_pe(g, 3);
  for (int j = 0; j < 3; ++j) {
    Eigen::Index arg;
    pe.vectors.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(pe.vectors(arg, j), 0.0);
  }
}

TEST(LaplacianPE, EdgePermutationInvariant) {
  auto g = connected_graph(18, 2, 0.2, 11);
  const auto a = laplacian_pe(g, 3);
  std::reverse(g.edges.begin(), g.edges.end());
  std::swap(g.edges[0], g.edges[3]);
  const auto b = laplacian_pe(g, 3);
  EXPECT_LE((a.vectors - b.vectors).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LaplacianPE, PeDimTooLarge) {
  const auto g = connected_graph(5, 2, 0.0, 1);
  EXPECT_THROW(laplacian_pe(g, 5), ValidationError);
  EXPECT_EQ(laplacian_pe(g, 0).vectors.cols(), 0);
}

TEST(LaplacianPE, LanczosAgreesWithDense) {
  const auto g = connected_graph(300, 2, 0.02, 21);
  PeOptions sparse;
  sparse.dense_limit = 10;
  const auto a = laplacian_pe(g, 6);
  const auto b = laplacian_pe(g, 6, sparse);
  for (int j = 0; j < 6; ++j) {
    EXPECT_NEAR(a.eigenvalues[j], b.eigenvalues[j], 1e-8);
    EXPECT_NEAR(std::abs(a.vectors.col(j).dot(b.vectors.col(j))), 1.0, 1e-6);
  }
}

TEST(AugmentFeatures, Concatenation) {
  MatF x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  MatD pe(2, 2);
  pe << 0.5, -0.5, 0.25, 1;
  const MatF out = augment_features(x, pe);
  ASSERT_EQ(out.cols(), 5);
  EXPECT_EQ(MatF(out.leftCols(3)), x);
  EXPECT_FLOAT_EQ(out(1, 4), 1.0f);
  EXPECT_EQ(augment_features(x, MatD(2, 0)), x);
  EXPECT_THROW(augment_features(x, MatD(3, 1)), ValidationError);
}

TEST(AugmentFeatures, AugmentedWidthIsFeaturesPlusPe) {
  const auto g = connected_graph(60, 32, 0.05, 3);
  EXPECT_EQ(prepare_small(g, 15, 3).input_dim(), 47);
}

TEST(Hop2Token, ZeroHopsIsIdentity) {
  const auto g = random_graph(10, 4, 0.3, 2);
  const auto t = hop2token("g", g.features, normalize_adjacency(g), 0);
  EXPECT_EQ(t.tokens, g.features);
  EXPECT_THROW(hop2token("g", g.features, normalize_adjacency(g), -1), ValidationError);
}

TEST(Hop2Token, TwoNodeHandComputed) {
  GraphDataset g = random_graph(2, 2, 0.0, 1, 1);
  g.edges = {{0, 1}};
  const auto t = hop2token("g", MatF::Identity(2, 2), normalize_adjacency(g), 1);
  EXPECT_FLOAT_EQ(t.token(0, 0)(0), 1.0f);
  EXPECT_FLOAT_EQ(t.token(0, 0)(1), 0.0f);
  EXPECT_FLOAT_EQ(t.token(0, 1)(0), 0.5f);
  EXPECT_FLOAT_EQ(t.token(0, 1)(1), 0.5f);
}

TEST(Hop2Token, MatchesDensePowerOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_graph(48, 6, 0.1, 300 + seed);
    const auto t = hop2token("g", g.features, normalize_adjacency(g), 4);
    const Eigen::MatrixXd a = dense_normalized(g);
    Eigen::MatrixXd cur = g.features.cast<double>();
    for (int k = 0; k <= 4; ++k) {
      if (k > 0) cur = a * cur;
      for (NodeId v = 0; v < 48; ++v)
        EXPECT_LE((t.token(v, k).cast<double>() - cur.row(v)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Hop2Token, PrefixProperty) {
  const auto g = random_graph(30, 3, 0.2, 8);
  const auto adj = normalize_adjacency(g);
  const auto t4 = hop2token("g", g.features, adj, 4);
  const auto t3 = hop2token("g", g.features, adj, 3);
  for (NodeId v = 0; v < 30; ++v)
    for (int k = 0; k <= 3; ++k) EXPECT_EQ(t4.token(v, k), t3.token(v, k));
}

TEST(Hop2Token, Hop0EqualsAugmentedFeatures) {
  const auto g = connected_graph(25, 4, 0.1, 4);
  const auto p = prepare_small(g, 3, 2);
  const auto pe = laplacian_pe(g, 3);
  EXPECT_EQ(p.tokens.hop0(), augment_features(g.features, pe.vectors));
  EXPECT_TRUE(p.tokens.tokens.allFinite());
}

TEST(TokenCache, RoundTripAndReuse) {
  const auto dir = temp_dir("tokcache");
  const auto g = connected_graph(30, 3, 0.1, 6);
  PrepareOptions opt;
  opt.pe_dim = 3;
  opt.hop_k = 2;
  opt.cache_root = dir;
  const auto a = prepare_graph(g, opt);
  const auto file = token_cache_path(dir, g.graph_id, dataset_hash(g), 3, 2);
  ASSERT_TRUE(std::filesystem::exists(file));
  const auto t = read_token_cache(file);
  EXPECT_EQ(t.tokens, a.tokens.tokens);
  EXPECT_EQ(t.hop_k, 2);
  const auto b = prepare_graph(g, opt);
  EXPECT_EQ(b.tokens.tokens, a.tokens.tokens);
}

TEST(PairSim, HandExample) {
  GraphDataset g = random_graph(4, 2, 0.0, 1, 1);
  g.features << 1, 0, 2, 0, 0, 1, 0, 3;
  const auto s = sample_pairsim(g, 4, 0);
  ASSERT_EQ(s.n_pos, 2);
  ASSERT_EQ(s.n_neg, 2);
  EXPECT_EQ(s.pairs[0], (LabeledPair{0, 1, 1}));
  EXPECT_EQ(s.pairs[1], (LabeledPair{2, 3, 1}));
  EXPECT_EQ(s.pairs[2], (LabeledPair{0, 2, 0}));
  EXPECT_EQ(s.pairs[3], (LabeledPair{0, 3, 0}));
}

TEST(PairSim, ZeroRowCountsAsDissimilar) {
  GraphDataset g = random_graph(5, 2, 0.0, 1, 1);
  g.features << 1, 0, 1, 0.1f, 0, 0, 1, 0.2f, 0.9f, 0;
  const auto s = sample_pairsim(g, 4, 0);
  for (const auto& p : s.pairs)
    if (p.u == 2 || p.v == 2) EXPECT_EQ(p.label, 0);
}

TEST(PairSim, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const NodeId n = 20 + static_cast<NodeId>(seed) * 13;
    auto g = random_graph(n, 3, 0.0, 400 + seed);
    g.features = integer_features(n, 3, seed);
    g.features.row(5) = 2.0f * g.features.row(0);
    const int budget = 2 * static_cast<int>(n) + static_cast<int>(seed % 2);
    const auto got = sample_pairsim(g, budget, seed);
    EXPECT_EQ(got.pairs, brute_force_pairsim(g.features, budget));
  }
}

TEST(PairSim, Invariants) {
  const auto g = random_graph(60, 5, 0.0, 9);
  const auto s = sample_pairsim(g, 100, 3);
  EXPECT_EQ(s.n_pos, 50);
  EXPECT_EQ(s.n_neg, 50);
  std::set<std::pair<NodeId, NodeId>> seen;
  const auto norms = feature_norms(g.features);
  double pos = 0, neg = 0;
  for (const auto& p : s.pairs) {
    EXPECT_NE(p.u, p.v);
    EXPECT_TRUE(seen.insert({std::min(p.u, p.v), std::max(p.u, p.v)}).second);
    (p.label ? pos : neg) += cosine(g.features, norms, p.u, p.v);
  }
  EXPECT_GT(pos / 50, neg / 50);
  EXPECT_EQ(sample_pairsim(g, 100, 3).pairs, s.pairs);
}

TEST(PairSim, SampledPoolIsSeeded) {
  const auto g = random_graph(1100, 4, 0.0, 10);
  const auto a = sample_pairsim(g, 200, 1);
  const auto b = sample_pairsim(g, 200, 1);
  const auto c = sample_pairsim(g, 200, 2);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_NE(a.pairs, c.pairs);
  EXPECT_EQ(a.n_pos, 100);
  EXPECT_EQ(a.n_neg, 100);
}

TEST(PairSim, Errors) {
  const auto g = random_graph(4, 2, 0.0, 1);
  EXPECT_THROW(sample_pairsim(g, 1, 0), ValidationError);
  EXPECT_THROW(sample_pairsim(g, 8, 0), ValidationError);
  EXPECT_THROW(sample_pairsim(random_graph(3, 2, 0.0, 1), 2, 0), ValidationError);
}

TEST(PairSim, DefaultBudget) {
  EXPECT_EQ(default_pair_budget(500), 2000);
  EXPECT_EQ(default_pair_budget(10000), 20000);
  EXPECT_EQ(default_pair_budget(4), 6);
}
