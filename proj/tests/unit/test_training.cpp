#include "helpers.hpp"

#include <cmath>

using namespace ussl;
using namespace ussl::testing;

namespace {

std::vector<PreparedGraph> toy_family(int n = 2, NodeId nodes = 60) {
  SyntheticFamilySpec spec;
  spec.name = "toy";
  spec.node_counts.assign(static_cast<std::size_t>(n), nodes);
  spec.feature_dims.clear();
  for (int i = 0; i < n; ++i) spec.feature_dims.push_back(6 + 3 * i);
  spec.num_classes = 3;
  spec.p_intra = 0.15;
  spec.p_inter = 0.02;
  PrepareOptions opt;
  opt.pe_dim = 2;
  opt.hop_k = 2;
  return prepare_family(generate_family(spec, 11), opt);
}

ModelConfig toy_model() {
  auto c = tiny_model();
  c.embed_dim = 16;
  c.num_heads = 2;
  return c;
}

std::vector<double> flat(const LossHistory& h) {
  std::vector<double> out;
  for (const auto& e : h.epochs) {
    out.insert(out.end(), e.graph_losses.begin(), e.graph_losses.end());
    out.push_back(e.total_loss);
    out.push_back(e.lr);
  }
  return out;
}

}  // namespace

TEST(Pretrain, LossAdditivity) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), fam, 1);
  const auto h = pretrain_ussl(m, fam, quick_pretrain(5, 3));
  ASSERT_EQ(h.epochs.size(), 5u);
  for (const auto& e : h.epochs) {
    ASSERT_EQ(e.graph_losses.size(), 2u);
    EXPECT_NEAR(e.total_loss, e.graph_losses[0] + e.graph_losses[1], 1e-6);
  }
  const auto ev = evaluate_pretext(m, fam, quick_pretrain(1, 3));
  EXPECT_NEAR(ev.total, ev.graph_losses[0] + ev.graph_losses[1], 1e-6);
}

TEST(Pretrain, SingletonEqualsSsl) {
  const auto fam = toy_family(1);
  auto a = make_model<float>(toy_model(), fam, 4);
  auto b = make_model<float>(toy_model(), fam, 4);
  const auto ha = pretrain_ussl(a, fam, quick_pretrain(20, 8));
  const auto hb = pretrain_ssl(b, fam[0], quick_pretrain(20, 8));
  EXPECT_EQ(flat(ha), flat(hb));
  EXPECT_EQ(parameter_digest(a, {""}), parameter_digest(b, {""}));
}

TEST(Pretrain, Deterministic) {
  const auto fam = toy_family();
  auto a = make_model<float>(toy_model(), fam, 4);
  auto b = make_model<float>(toy_model(), fam, 4);
  EXPECT_EQ(flat(pretrain_ussl(a, fam, quick_pretrain(6, 2))), flat(pretrain_ussl(b, fam, quick_pretrain(6, 2))));
  EXPECT_EQ(parameter_digest(a, {""}), parameter_digest(b, {""}));
}

TEST(Pretrain, LossDecreases) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), fam, 4);
  const auto h = pretrain_ussl(m, fam, quick_pretrain(40, 2));
  EXPECT_LT(h.epochs.back().total_loss, h.epochs.front().total_loss);
}

TEST(Pretrain, EpochZeroNearLn2) {
  const auto fam = toy_family(2, 120);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto m = make_model<float>(toy_model(), fam, seed);
    const auto ev = evaluate_pretext(m, fam, quick_pretrain(1, seed));
    for (double l : ev.graph_losses) EXPECT_NEAR(l, std::log(2.0), 0.15);
  }
}

TEST(Pretrain, SslRunsShareNothing) {
  const auto fam = toy_family();
  auto a = make_model<float>(toy_model(), std::span(fam.data(), 1), 4);
  auto b = make_model<float>(toy_model(), std::span(fam.data() + 1, 1), 4);
  const auto phi_b = parameter_digest(b, {"phi/"});
  pretrain_ssl(a, fam[0], quick_pretrain(3, 1));
  EXPECT_EQ(parameter_digest(b, {"phi/"}), phi_b);
  EXPECT_FALSE(a.has_graph(fam[1].id()));
  EXPECT_EQ(a.representation_kind(), RepresentationKind::ssl);
}

TEST(Pretrain, DivergenceGuard) {
  const auto fam = toy_family(1);
  auto m = make_model<float>(toy_model(), fam, 4);
  m.theta(fam[0].id()).weight().value.setConstant(std::numeric_limits<float>::quiet_NaN());
  int epochs = 0;
  EXPECT_THROW(pretrain_ussl(m, fam, quick_pretrain(10, 1), [&](const EpochRecord&) { ++epochs; }), NumericalError);
  EXPECT_EQ(epochs, 3);
}

TEST(Pretrain, BatchesRespectNodeLimit) {
  const auto fam = toy_family(1, 80);
  const auto pairs = sample_pairsim(*fam[0].data, 300, 1).pairs;
  std::mt19937_64 rng(1);
  const auto batches = train_detail::batch_pairs(pairs, 80, 20, rng);
  std::size_t total = 0;
  for (const auto& b : batches) {
    std::set<NodeId> nodes;
    for (const auto& p : b) nodes.insert({p.u, p.v});
    EXPECT_LE(nodes.size(), 20u);
    total += b.size();
  }
  EXPECT_EQ(total, pairs.size());
}

TEST(Scheduler, HalvesAfterPatience) {
  PlateauScheduler s(1.0, 3, 0.5);
  EXPECT_EQ(s.step(1.0), 1.0);
  EXPECT_EQ(s.step(1.0), 1.0);
  EXPECT_EQ(s.step(2.0), 1.0);
  EXPECT_EQ(s.step(1.0), 0.5);  // third epoch without improvement
  EXPECT_EQ(s.step(0.9), 0.5);
  EXPECT_EQ(s.step(0.95), 0.5);
  EXPECT_EQ(s.step(0.95), 0.5);
  EXPECT_EQ(s.step(0.95), 0.25);
}

TEST(Scheduler, RateNeverIncreasesDuringTraining) {
  const auto fam = toy_family(1);
  auto m = make_model<float>(toy_model(), fam, 4);
  auto cfg = quick_pretrain(30, 1);
  cfg.patience = 2;
  const auto h = pretrain_ussl(m, fam, cfg);
  for (std::size_t i = 1; i < h.epochs.size(); ++i) EXPECT_LE(h.epochs[i].lr, h.epochs[i - 1].lr);
}

TEST(Finetune, OnlyHeadChanges) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), fam, 4);
  pretrain_ussl(m, fam, quick_pretrain(3, 1));
  const auto frozen = parameter_digest(m, {"theta/", "phi/", "gamma/"});
  auto cfg = default_train_config(Regime::finetune);
  cfg.epochs = 20;
  const auto r = finetune(m, fam[0], cfg, 77);
  EXPECT_EQ(parameter_digest(m, {"theta/", "phi/", "gamma/"}), frozen);
  UniversalModel<float> fresh(toy_model(), 4);
  fresh.add_graph(graph_spec_of(fam[0]));
  fresh.set_classifier(fam[0].id(), 3, 77);
  EXPECT_NE(m.psi(fam[0].id()).fc().weight().value, fresh.psi(fam[0].id()).fc().weight().value);
  EXPECT_GE(r.test_accuracy, 0.0);
  EXPECT_LE(r.test_accuracy, 1.0);
}

TEST(Finetune, MissingEncoder) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), std::span(fam.data(), 1), 4);
  try {
    finetune(m, fam[1], default_train_config(Regime::finetune), 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(fam[1].id()), std::string::npos);
  }
}

TEST(Finetune, SeparableRepresentationsReachFullAccuracy) {
  // one-hot-like features on an edgeless graph
  GraphDataset g = random_graph(60, 3, 0.0, 1, 3);
  for (NodeId v = 0; v < 60; ++v) {
    g.features.row(v).setZero();
    g.features(v, g.labels[v]) = 4.0f;
  }
  const auto p = prepare_small(g, 0, 0);
  auto cfg = tiny_model();
  cfg.embed_dim = 4;
  cfg.num_heads = 1;
  cfg.hop_k = 0;
  cfg.pe_dim = 0;
  auto m = make_model<float>(cfg, std::span(&p, 1), 2);
  auto ft = default_train_config(Regime::finetune);
  ft.epochs = 200;
  EXPECT_EQ(finetune(m, p, ft, 3).test_accuracy, 1.0);
}

TEST(Finetune, HeadSeedsGiveDifferentInstances) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), fam, 4);
  auto cfg = default_train_config(Regime::finetune);
  cfg.epochs = 3;
  const auto a = finetune(m, fam[0], cfg, 1);
  const auto a2 = finetune(m, fam[0], cfg, 1);
  const auto b = finetune(m, fam[0], cfg, 2);
  EXPECT_EQ(flat(a.history), flat(a2.history));
  EXPECT_NE(flat(a.history), flat(b.history));
}

TEST(Supervised, ChanceAtStartAndDeterministic) {
  const auto fam = toy_family(1, 150);
  auto cfg = default_train_config(Regime::supervised);
  cfg.epochs = 3;
  cfg.seed = 5;
  UniversalModel<float> a(toy_model(), 9), b(toy_model(), 9);
  const auto ra = train_supervised(a, fam[0], cfg);
  const auto rb = train_supervised(b, fam[0], cfg);
  EXPECT_EQ(flat(ra.history), flat(rb.history));
  EXPECT_NEAR(ra.initial_train_accuracy, 1.0 / 3.0, 0.2);
}

TEST(Supervised, LearnsEasyBlocks) {
  SyntheticFamilySpec spec;
  spec.node_counts = {200};
  spec.feature_dims = {16};
  spec.num_classes = 4;
  spec.prototype_scale = 3.0;
  spec.latent_noise = 0.3;
  spec.feature_noise = 0.1;
  PrepareOptions opt;
  opt.pe_dim = 2;
  opt.hop_k = 2;
  const auto fam = prepare_family(generate_family(spec, 1), opt);
  auto cfg = default_train_config(Regime::supervised);
  cfg.epochs = 60;
  UniversalModel<float> m(toy_model(), 1);
  const auto r = train_supervised(m, fam[0], cfg);
  EXPECT_GE(r.train_accuracy, 0.95);
}

TEST(Adapt, FreezesBackboneAndOtherEncoders) {
  const auto fam = toy_family(3);
  auto m = make_model<float>(toy_model(), std::span(fam.data(), 2), 4);
  pretrain_ussl(m, std::span(fam.data(), 2), quick_pretrain(3, 1));
  const auto phi = parameter_digest(m, {"phi/"});
  const std::vector<std::string> others{"theta/" + fam[0].id() + "/", "theta/" + fam[1].id() + "/",
                                        "gamma/" + fam[0].id() + "/", "gamma/" + fam[1].id() + "/"};
  const auto old = parameter_digest(m, others);
  const auto h = adapt_new_graph(m, fam[2], quick_pretrain(5, 2));
  EXPECT_EQ(h.epochs.size(), 5u);
  EXPECT_EQ(parameter_digest(m, {"phi/"}), phi);
  EXPECT_EQ(parameter_digest(m, others), old);
  UniversalModel<float> fresh(toy_model(), 4);
  fresh.add_graph(graph_spec_of(fam[2]));
  EXPECT_NE(m.theta(fam[2].id()).weight().value, fresh.theta(fam[2].id()).weight().value);
  EXPECT_THROW(adapt_new_graph(m, fam[2], quick_pretrain(1, 2)), ValidationError);
}

TEST(Representations, KindFollowsPretraining) {
  const auto fam = toy_family();
  auto m = make_model<float>(toy_model(), fam, 4);
  pretrain_ussl(m, fam, quick_pretrain(1, 1));
  const std::vector<NodeId> nodes{0, 1};
  EXPECT_EQ(forward_ussl(m, fam[0], nodes).kind, RepresentationKind::ussl);
  EXPECT_TRUE(forward_ussl(m, fam[0], nodes).rows.allFinite());
}
