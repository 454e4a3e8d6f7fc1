#include "helpers.hpp"

#include <fstream>
#include <sstream>

using namespace ussl;
using namespace ussl::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

ProtocolSettings tiny_settings() {
  ProtocolSettings s;
  s.model = tiny_model();
  s.pretrain.epochs = 3;
  s.finetune.epochs = 5;
  s.supervised.epochs = 3;
  s.instances = 2;
  s.supervised_instances = 2;
  s.seed = 1;
  return s;
}

std::vector<PreparedGraph> small_family(int n) {
  std::vector<PreparedGraph> out;
  for (int i = 0; i < n; ++i)
    out.push_back(prepare_small(random_graph(40, 5 + i, 0.1, 10 + i, 3, "g" + std::to_string(i)), 2, 2));
  return out;
}

}  // namespace

TEST(Accuracy, AllCorrect) {
  MatF logits = MatF::Zero(4, 3);
  const std::vector<int> labels{0, 2, 1, 2};
  for (int v = 0; v < 4; ++v) logits(v, labels[v]) = 1.0f;
  const std::vector<NodeId> mask{0, 1, 2, 3};
  EXPECT_EQ(accuracy(logits, labels, mask), 1.0);
}

TEST(Accuracy, ConstantLogitsPickClassZero) {
  const MatF logits = MatF::Constant(6, 3, 0.25f);
  const std::vector<int> labels{0, 1, 0, 2, 0, 1};
  const std::vector<NodeId> mask{0, 1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(accuracy(logits, labels, mask), 0.5);
}

TEST(Accuracy, MatchesRecount) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0, 1);
  MatF logits(50, 4);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  std::vector<int> labels;
  std::vector<NodeId> mask;
  for (int v = 0; v < 50; ++v) {
    labels.push_back(static_cast<int>(rng() % 4));
    if (v % 3) mask.push_back(v);
  }
  int correct = 0;
  for (NodeId v : mask) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (logits(v, c) > logits(v, best)) best = c;
    correct += best == labels[v];
  }
  EXPECT_DOUBLE_EQ(accuracy(logits, labels, mask), static_cast<double>(correct) / mask.size());
}

TEST(Accuracy, EmptyMaskRejected) {
  const MatF logits = MatF::Zero(2, 2);
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(accuracy(logits, labels, std::span<const NodeId>{}), ValidationError);
}

TEST(Summary, MeanAndSampleStd) {
  const std::vector<double> xs{0.7, 0.8, 0.9};
  EXPECT_DOUBLE_EQ(mean_of(xs), 0.8);
  EXPECT_NEAR(sample_std(xs), 0.1, 1e-12);
  EXPECT_EQ(sample_std(std::vector<double>{0.5}), 0.0);
}

TEST(Summary, TrimmedMedianDropsEnds) {
  std::vector<double> t(20, 1.0);
  t[0] = 100.0;
  t[1] = 50.0;
  t[19] = 0.001;
  EXPECT_EQ(trimmed_median(t), 1.0);
}

TEST(Report, CsvRoundTripIsExact) {
  const auto r1 = make_report("run/a", "ussl", "g0", {11, 12, 13}, {0.1, 1.0 / 3.0, 0.7071067811865476}, nullptr, "ab12");
  const auto r2 = make_report("run/b", "ssl", "g1", {5}, {0.25}, nullptr, "ab12");
  std::stringstream ss(reports_to_csv({r1, r2}));
  const auto back = reports_from_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].accuracies, r1.accuracies);
  EXPECT_EQ(back[0].seeds, r1.seeds);
  EXPECT_EQ(back[0].mean, r1.mean);
  EXPECT_EQ(back[0].std, r1.std);
  EXPECT_EQ(back[1].graph_id, "g1");
  EXPECT_EQ(reports_to_csv(back), reports_to_csv({r1, r2}));
}

TEST(Report, JsonRoundTrip) {
  LossHistory h;
  for (int e = 0; e < 10; ++e) h.epochs.push_back({e, {1.0 / (e + 1)}, 1.0 / (e + 1), 1e-3, 0.01 * e});
  const auto r = make_report("r", "ussl", "g", {1, 2}, {0.5, 0.75}, &h, "f");
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(back.loss_curve, r.loss_curve);
  EXPECT_EQ(back.accuracies, r.accuracies);
  EXPECT_EQ(back.epoch_time_s, r.epoch_time_s);
}

TEST(Report, MismatchedSeedsRejected) {
  EXPECT_THROW(make_report("r", "ussl", "g", {1}, {0.5, 0.6}, nullptr, ""), ValidationError);
}

TEST(Table, BoldsRowMaximumAmongEligible) {
  ComparisonTable t("t", {"Baseline", "SSL", "U-SSL"}, {"g0", "g1"});
  t.bold_columns = {1, 2};
  t.improvement = std::pair{1, 2};
  t.set(0, 0, {0.95, 0.01, {}});
  t.set(0, 1, {0.80, 0.02, {}});
  t.set(0, 2, {0.85, 0.01, {}});
  t.set(1, 1, {0.70, 0.0, {}});
  t.set(1, 2, {0.70, 0.0, {}});
  const auto md = t.to_markdown();
  EXPECT_NE(md.find("0.950 ± 0.010 |"), std::string::npos) << md;
  EXPECT_EQ(md.find("**0.950"), std::string::npos) << md;
  EXPECT_NE(md.find("**0.850**"), std::string::npos) << md;
  EXPECT_NE(md.find("+0.050"), std::string::npos) << md;
  // ties are both bold
  EXPECT_NE(md.find("**0.700** ± 0.000 | **0.700**"), std::string::npos) << md;
  EXPECT_NE(md.find("–"), std::string::npos);
}

TEST(Table, CsvHasOneLinePerRow) {
  ComparisonTable t("t", {"a", "b"}, {"x", "y", "z"});
  t.set(0, 0, {0.5, 0.1, {}});
  const auto csv = t.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("x,0.5,0.1,,"), std::string::npos) << csv;
}

TEST(EmitReport, RerunIsByteIdentical) {
  const auto r = make_report("r/x", "ussl", "g", {1, 2}, {0.5, 0.75}, nullptr, "f");
  ComparisonTable t("acc", {"U-SSL"}, {"g"});
  t.set(0, 0, TableCell::of(r));
  const auto a = temp_dir("emit_a"), b = temp_dir("emit_b");
  const auto fa = emit_report({r}, a, {{"accuracy", t}});
  emit_report({r}, b, {{"accuracy", t}});
  ASSERT_FALSE(fa.data.empty());
  for (const auto& p : fa.data) {
    const auto rel = fs::relative(p, a);
    EXPECT_EQ(slurp(p), slurp(b / rel)) << rel;
  }
  for (const auto& p : fa.plots) EXPECT_TRUE(fs::exists(p));
  EXPECT_THROW(emit_report({}, a), ValidationError);
}

TEST(Parallel, RunsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(17, 0);
  parallel_for(17, 4, [&](int i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(5, 3, [](int i) {
                 if (i == 2) throw ValidationError("boom");
               }),
               ValidationError);
}

TEST(Protocols, SingletonFamilyMakesSslAndUsslIdentical) {
  const auto fam = small_family(1);
  auto s = tiny_settings();
  s.run_supervised = false;
  const auto e = run_efficacy_protocol(fam, s);
  ASSERT_EQ(e.reports.size(), 2u);
  EXPECT_EQ(e.reports[0].accuracies, e.reports[1].accuracies);
  EXPECT_EQ(e.ussl_history.totals(), e.ssl_histories[0].totals());
}

TEST(Protocols, EfficacyShapeAndDeterminism) {
  const auto fam = small_family(2);
  auto s = tiny_settings();
  const auto a = run_efficacy_protocol(fam, s);
  EXPECT_EQ(a.reports.size(), 6u);
  for (const auto& r : a.reports) EXPECT_EQ(r.accuracies.size(), 2u);
  const auto b = run_efficacy_protocol(fam, s);
  for (std::size_t i = 0; i < a.reports.size(); ++i) EXPECT_EQ(a.reports[i].accuracies, b.reports[i].accuracies);
  const auto t = timing_from_efficacy(a);
  EXPECT_EQ(t.row_count(), fam.size() + 1);
  EXPECT_NEAR(t.ssl_sum(), t.ssl[0] + t.ssl[1], 1e-12);
  EXPECT_GT(t.ussl, 0.0);
}

TEST(Protocols, ThreadedMatchesSequential) {
  const auto fam = small_family(2);
  auto s = tiny_settings();
  s.run_supervised = false;
  const auto a = run_efficacy_protocol(fam, s);
  s.jobs = 3;
  const auto b = run_efficacy_protocol(fam, s);
  for (std::size_t i = 0; i < a.reports.size(); ++i) EXPECT_EQ(a.reports[i].accuracies, b.reports[i].accuracies);
}

TEST(Protocols, AdaptabilityKeepsBackbone) {
  const auto fam = small_family(3);
  const auto r = run_adaptability_protocol(fam, 2, tiny_settings());
  EXPECT_EQ(r.held_out, "g2");
  EXPECT_EQ(r.phi_digest_before, r.phi_digest_after);
  EXPECT_EQ(r.adapted.test_accuracy.size(), 2u);
  EXPECT_EQ(r.joint.test_accuracy.size(), 2u);
  EXPECT_THROW(run_adaptability_protocol(std::span(fam.data(), 1), 0, tiny_settings()), ValidationError);
}

TEST(Protocols, AblationGridCells) {
  const auto fam = small_family(2);
  auto s = tiny_settings();
  s.instances = 1;
  AblationAxes axes;
  axes.embed_dim = std::vector<int>{8, 4};
  axes.url_variant = std::vector<UrlVariant>{UrlVariant::transformer, UrlVariant::gcn};
  const auto r = run_ablation_grid(fam, axes, s);
  EXPECT_EQ(r.cell_count, 8u);
  ASSERT_EQ(r.tables.size(), 2u);
  EXPECT_TRUE(r.tables[1].second.cells[0][1]->delta.has_value());
  EXPECT_FALSE(r.tables[0].second.cells[0][0]->delta.has_value());
  EXPECT_THROW(run_ablation_grid(fam, AblationAxes{}, s), ValidationError);
  AblationAxes empty;
  empty.depth = std::vector<int>{};
  EXPECT_THROW(run_ablation_grid(fam, empty, s), ValidationError);
  AblationAxes bad;
  bad.embed_dim = std::vector<int>{7};
  EXPECT_THROW(run_ablation_grid(fam, bad, s), ValidationError);
}
