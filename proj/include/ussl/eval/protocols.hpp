#pragma once

#include "ussl/core/log.hpp"
#include "ussl/eval/report.hpp"
#include "ussl/train/run_dir.hpp"
#include "ussl/train/trainer.hpp"

#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

namespace ussl {

struct ProtocolSettings {
  ModelConfig model;
  TrainConfig pretrain = default_train_config(Regime::ussl_pretrain);
  TrainConfig finetune = default_train_config(Regime::finetune);
  TrainConfig supervised = default_train_config(Regime::supervised);
  int instances = 10;             // downstream heads per (graph, regime)
  int supervised_instances = 10;  // independently trained supervised baselines per graph
  bool run_supervised = true;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::optional<std::filesystem::path> run_root;  // per-run directories when set
  int checkpoint_every = 0;
  bool log_epochs = false;
  std::string fingerprint;  // of the resolved configuration
  std::string tag = "run";  // prefix of run ids
};

/// Seeds derived from the protocol seed, shared by every regime so comparisons are paired.
struct ProtocolSeeds {
  std::uint64_t base;
  std::uint64_t init() const { return derive_seed(base, "init"); }
  std::uint64_t pretrain() const { return derive_seed(base, "pretrain"); }
  std::uint64_t head(int k) const { return derive_seed(base, "head", static_cast<std::uint64_t>(k)); }
  std::uint64_t supervised_init(int k) const { return derive_seed(base, "supervised-init", static_cast<std::uint64_t>(k)); }
  std::uint64_t supervised(int k) const { return derive_seed(base, "supervised", static_cast<std::uint64_t>(k)); }
};

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  int next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      int i;
      {
        std::lock_guard lock(mu);
        if (next >= n || error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string format_epoch(const std::string& run_id, const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "run=%s epoch=%d loss=%.6f lr=%.3g time=%.4fs", run_id.c_str(), r.epoch, r.total_loss,
                r.lr, r.seconds);
  std::string line = buf;
  if (r.graph_losses.size() > 1)
    for (double l : r.graph_losses) {
      std::snprintf(buf, sizeof buf, " %.6f", l);
      line += buf;
    }
  return line;
}

namespace protocol_detail {

/// Epoch callback that logs and, with a run root, writes loss_history.csv and checkpoints.
struct RunRecorder {
  std::string run_id;
  std::optional<RunDirectory> dir;
  bool log = false;

  RunRecorder(const ProtocolSettings& s, std::string id, const std::vector<std::string>& graph_ids,
              const nlohmann::json& config)
      : run_id(std::move(id)), log(s.log_epochs) {
    if (s.run_root) {
      dir.emplace(*s.run_root / report_detail::file_stem(run_id), s.checkpoint_every);
      dir->write_config(config);
      dir->begin_history(graph_ids);
    }
  }

  EpochCallback callback(UniversalModel<float>* model) {
    return [this, model](const EpochRecord& r) {
      if (log) log_info(format_epoch(run_id, r));
      if (dir) dir->record(r, model);
    };
  }

  void finish(UniversalModel<float>& model) {
    if (dir) dir->final_checkpoint(model, {{"run_id", run_id}});
  }
};

inline nlohmann::json run_config(const ProtocolSettings& s, const TrainConfig& t) {
  return {{"model", s.model}, {"train", to_json(t)}, {"protocol_seed", s.seed}};
}

inline std::vector<std::string> ids_of(std::span<const PreparedGraph> graphs) {
  std::vector<std::string> ids;
  for (const auto& g : graphs) ids.push_back(g.id());
  return ids;
}

}  // namespace protocol_detail

struct PretrainedModel {
  UniversalModel<float> model;
  LossHistory history;
};

/// Joint PairSim pre-training over `graphs` (a single graph gives the SSL baseline).
inline PretrainedModel pretrain_run(std::span<const PreparedGraph> graphs, const ProtocolSettings& s,
                                    const std::string& run_id) {
  const ProtocolSeeds seeds{s.seed};
  TrainConfig cfg = s.pretrain;
  cfg.regime = graphs.size() > 1 ? Regime::ussl_pretrain : Regime::ssl_pretrain;
  cfg.seed = seeds.pretrain();
  PretrainedModel out{make_model<float>(s.model, graphs, seeds.init()), {}};
  protocol_detail::RunRecorder rec(s, run_id, protocol_detail::ids_of(graphs), protocol_detail::run_config(s, cfg));
  out.history = pretrain_ussl(out.model, graphs, cfg, rec.callback(&out.model));
  rec.finish(out.model);
  return out;
}

struct DownstreamRun {
  std::vector<std::uint64_t> seeds;
  std::vector<double> test_accuracy;
  std::vector<double> val_accuracy;
  LossHistory first_history;  // of instance 0, for timing
};

/// Fine-tunes `instances` fresh heads on frozen representations.
inline DownstreamRun finetune_instances(UniversalModel<float>& model, const PreparedGraph& g,
                                        const ProtocolSettings& s) {
  const ProtocolSeeds seeds{s.seed};
  DownstreamRun out;
  TrainConfig cfg = s.finetune;
  cfg.regime = Regime::finetune;
  for (int k = 0; k < s.instances; ++k) {
    cfg.seed = seeds.head(k);
    auto r = finetune(model, g, cfg, seeds.head(k));
    out.seeds.push_back(seeds.head(k));
    out.test_accuracy.push_back(r.test_accuracy);
    out.val_accuracy.push_back(r.val_accuracy);
    if (k == 0) out.first_history = std::move(r.history);
  }
  return out;
}

/// Independently initialized end-to-end baselines.
inline DownstreamRun supervised_instances(const PreparedGraph& g, const ProtocolSettings& s, const std::string& run_id) {
  const ProtocolSeeds seeds{s.seed};
  DownstreamRun out;
  out.seeds.resize(static_cast<std::size_t>(s.supervised_instances));
  out.test_accuracy.resize(out.seeds.size());
  out.val_accuracy.resize(out.seeds.size());
  std::vector<LossHistory> histories(out.seeds.size());
  parallel_for(s.supervised_instances, s.jobs, [&](int k) {
    TrainConfig cfg = s.supervised;
    cfg.regime = Regime::supervised;
    cfg.seed = seeds.supervised(k);
    UniversalModel<float> model(s.model, seeds.supervised_init(k));
    const std::string id = run_id + "-" + std::to_string(k);
    protocol_detail::RunRecorder rec(s, id, {g.id()}, protocol_detail::run_config(s, cfg));
    auto r = train_supervised(model, g, cfg, rec.callback(&model));
    rec.finish(model);
    out.seeds[k] = cfg.seed;
    out.test_accuracy[k] = r.test_accuracy;
    out.val_accuracy[k] = r.val_accuracy;
    histories[k] = std::move(r.history);
  });
  if (!histories.empty()) out.first_history = std::move(histories[0]);
  return out;
}

// ---- efficacy -----------------------------------------------------------------------

struct EfficacyResult {
  ComparisonTable table;  // columns Baseline, SSL, U-SSL
  std::vector<RunReport> reports;
  LossHistory ussl_history;
  std::vector<LossHistory> ssl_histories;          // family order
  std::vector<LossHistory> finetune_histories;     // U-SSL head, instance 0, family order
  std::vector<LossHistory> supervised_histories;   // instance 0, family order
  std::vector<DownstreamRun> ssl_runs, ussl_runs;  // family order
  std::shared_ptr<UniversalModel<float>> joint_model;
};

inline constexpr int kBaselineColumn = 0, kSslColumn = 1, kUsslColumn = 2;

/// Supervised baseline, per-graph SSL + fine-tune, and one joint U-SSL + per-graph fine-tune.
inline EfficacyResult run_efficacy_protocol(std::span<const PreparedGraph> graphs, const ProtocolSettings& s) {
  if (graphs.empty()) throw ValidationError("efficacy protocol needs at least one graph");
  const std::size_t n = graphs.size();
  EfficacyResult res;
  res.table = ComparisonTable("Node classification accuracy", {"Baseline", "SSL", "U-SSL"}, protocol_detail::ids_of(graphs));
  res.table.bold_columns = {kSslColumn, kUsslColumn};
  res.table.improvement = std::pair{kSslColumn, kUsslColumn};
  res.table.underline_reference = kBaselineColumn;
  res.ssl_histories.resize(n);
  res.finetune_histories.resize(n);
  res.supervised_histories.resize(n);
  res.ssl_runs.resize(n);
  res.ussl_runs.resize(n);
  std::vector<std::optional<DownstreamRun>> sup(n);

  const std::string tag = s.tag;
  auto joint = pretrain_run(graphs, s, tag + "/ussl");
  res.ussl_history = joint.history;
  res.joint_model = std::make_shared<UniversalModel<float>>(std::move(joint.model));
  for (std::size_t i = 0; i < n; ++i) {
    res.ussl_runs[i] = finetune_instances(*res.joint_model, graphs[i], s);
    res.finetune_histories[i] = res.ussl_runs[i].first_history;
  }
  // SSL runs are independent of each other: one model each.
  ProtocolSettings inner = s;
  inner.jobs = 1;
  parallel_for(static_cast<int>(n), s.jobs, [&](int i) {
    auto ssl = pretrain_run(graphs.subspan(i, 1), inner, tag + "/ssl/" + graphs[i].id());
    res.ssl_histories[i] = std::move(ssl.history);
    res.ssl_runs[i] = finetune_instances(ssl.model, graphs[i], inner);
  });
  if (s.run_supervised && s.supervised_instances > 0)
    for (std::size_t i = 0; i < n; ++i) {
      sup[i] = supervised_instances(graphs[i], s, tag + "/supervised/" + graphs[i].id());
      res.supervised_histories[i] = sup[i]->first_history;
    }

  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = graphs[i].id();
    if (sup[i]) {
      res.reports.push_back(make_report(tag + "/supervised/" + id, "supervised", id, sup[i]->seeds,
                                        sup[i]->test_accuracy, &res.supervised_histories[i], s.fingerprint));
      res.table.set(i, kBaselineColumn, TableCell::of(res.reports.back()));
    }
    res.reports.push_back(make_report(tag + "/ssl/" + id, "ssl", id, res.ssl_runs[i].seeds,
                                      res.ssl_runs[i].test_accuracy, &res.ssl_histories[i], s.fingerprint));
    res.table.set(i, kSslColumn, TableCell::of(res.reports.back()));
    res.reports.push_back(make_report(tag + "/ussl/" + id, "ussl", id, res.ussl_runs[i].seeds,
                                      res.ussl_runs[i].test_accuracy, &res.ussl_history, s.fingerprint));
    res.table.set(i, kUsslColumn, TableCell::of(res.reports.back()));
  }
  return res;
}

// ---- efficiency ---------------------------------------------------------------------

/// Per-epoch wall time (trimmed median). Rows: one per graph plus a final family row holding
/// Σ SSL and the joint U-SSL time.
struct TimingTable {
  std::vector<std::string> rows;
  std::vector<double> ssl;         // per graph; last entry = sum
  double ussl = 0.0;               // joint run, whole family
  std::vector<double> finetune;    // per graph; last entry = sum
  std::vector<double> supervised;  // per graph; last entry = sum

  std::size_t row_count() const { return rows.size(); }
  double ssl_sum() const { return ssl.empty() ? 0.0 : ssl.back(); }

  std::string to_csv() const {
    std::string out = "row,ssl_s,ussl_s,finetune_s,supervised_s\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const bool last = r + 1 == rows.size();
      out += rows[r] + "," + exact_number(ssl[r]) + "," + (last ? exact_number(ussl) : std::string()) + "," +
             (finetune.empty() ? std::string() : exact_number(finetune[r])) + "," +
             (supervised.empty() ? std::string() : exact_number(supervised[r])) + "\n";
    }
    return out;
  }

  std::string to_markdown() const {
    auto fixed = [](double v, int) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", v);
      return std::string(buf);
    };
    std::string out = "### Training time per epoch (s)\n\n| Dataset | SSL | U-SSL | Fine-tuning | Supervised baseline |\n|---|---|---|---|---|\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const bool last = r + 1 == rows.size();
      out += "| " + rows[r] + " | " + fixed(ssl[r], 4) + " | " + (last ? fixed(ussl, 4) : std::string("↕")) + " | " +
             (finetune.empty() ? "–" : fixed(finetune[r], 4)) + " | " +
             (supervised.empty() ? "–" : fixed(supervised[r], 4)) + " |\n";
    }
    return out;
  }
};

inline TimingTable timing_from_efficacy(const EfficacyResult& e) {
  TimingTable t;
  t.rows = e.table.rows;
  t.rows.push_back("all graphs");
  auto column = [](const std::vector<LossHistory>& hs) {
    std::vector<double> v;
    double sum = 0.0;
    for (const auto& h : hs) {
      v.push_back(h.epochs.empty() ? 0.0 : trimmed_median(h.epoch_seconds()));
      sum += v.back();
    }
    v.push_back(sum);
    return v;
  };
  t.ssl = column(e.ssl_histories);
  t.ussl = trimmed_median(e.ussl_history.epoch_seconds());
  t.finetune = column(e.finetune_histories);
  t.supervised = column(e.supervised_histories);
  return t;
}

/// Sequential timing runs (jobs forced to 1 so runs do not compete for cores).
inline TimingTable run_efficiency_protocol(std::span<const PreparedGraph> graphs, ProtocolSettings s) {
  s.jobs = 1;
  s.instances = 1;
  s.supervised_instances = 1;
  return timing_from_efficacy(run_efficacy_protocol(graphs, s));
}

// ---- adaptability -------------------------------------------------------------------

struct AdaptabilityResult {
  std::string held_out;
  DownstreamRun adapted;  // pre-train on the rest, adapt Θ/Γ for held_out, fine-tune
  DownstreamRun joint;    // joint U-SSL including held_out
  LossHistory base_history, adapt_history;
  std::uint64_t phi_digest_before = 0, phi_digest_after = 0;
};

/// `joint_model`, when given, must be the joint U-SSL model of the whole family under `s`;
/// it is reused instead of pre-training again.
inline AdaptabilityResult run_adaptability_protocol(std::span<const PreparedGraph> graphs, std::size_t held_out,
                                                    const ProtocolSettings& s,
                                                    UniversalModel<float>* joint_model = nullptr) {
  if (graphs.size() < 2) throw ValidationError("adaptability needs at least two graphs");
  if (held_out >= graphs.size()) throw ValidationError("held-out index out of range");
  AdaptabilityResult res;
  res.held_out = graphs[held_out].id();
  std::vector<PreparedGraph> rest;
  for (std::size_t i = 0; i < graphs.size(); ++i)
    if (i != held_out) rest.push_back(graphs[i]);
  auto base = pretrain_run(rest, s, s.tag + "/adapt-base");
  res.base_history = base.history;
  res.phi_digest_before = parameter_digest(base.model, {"phi/"});
  TrainConfig cfg = s.pretrain;
  cfg.regime = Regime::adapt;
  cfg.seed = ProtocolSeeds{s.seed}.pretrain();
  protocol_detail::RunRecorder rec(s, s.tag + "/adapt/" + res.held_out, {res.held_out},
                                   protocol_detail::run_config(s, cfg));
  res.adapt_history = adapt_new_graph(base.model, graphs[held_out], cfg, rec.callback(&base.model));
  rec.finish(base.model);
  res.phi_digest_after = parameter_digest(base.model, {"phi/"});
  res.adapted = finetune_instances(base.model, graphs[held_out], s);
  if (joint_model) {
    res.joint = finetune_instances(*joint_model, graphs[held_out], s);
  } else {
    auto joint = pretrain_run(graphs, s, s.tag + "/ussl");
    res.joint = finetune_instances(joint.model, graphs[held_out], s);
  }
  return res;
}

// ---- ablation -----------------------------------------------------------------------

struct AblationAxes {
  std::optional<std::vector<int>> embed_dim;
  std::optional<std::vector<int>> depth;
  std::optional<std::vector<UrlVariant>> url_variant;

  static AblationAxes full_scale() {
    return {std::vector<int>{256, 128, 64}, std::vector<int>{2, 4, 6},
            std::vector<UrlVariant>{UrlVariant::transformer, UrlVariant::gcn, UrlVariant::sage}};
  }
};

struct AblationResult {
  std::vector<std::pair<std::string, ComparisonTable>> tables;  // one per axis
  std::vector<RunReport> reports;
  std::size_t cell_count = 0;  // (axis value, graph) cells
};

/// One U-SSL pre-training per axis value (everything else at `s`), fine-tuned on each graph.
/// The architecture axis also trains SSL baselines and shows U-SSL − SSL in parentheses.
inline AblationResult run_ablation_grid(std::span<const PreparedGraph> graphs, const AblationAxes& axes,
                                        const ProtocolSettings& s) {
  if (!axes.embed_dim && !axes.depth && !axes.url_variant) throw ValidationError("ablation: no axis given");
  if ((axes.embed_dim && axes.embed_dim->empty()) || (axes.depth && axes.depth->empty()) ||
      (axes.url_variant && axes.url_variant->empty()))
    throw ValidationError("ablation: empty axis");
  AblationResult res;
  const auto ids = protocol_detail::ids_of(graphs);

  auto run_axis = [&](const std::string& axis, const std::string& title, const std::vector<std::string>& labels,
                      const std::function<void(ModelConfig&, std::size_t)>& apply, bool with_ssl) {
    ComparisonTable table(title, labels, ids);
    for (std::size_t v = 0; v < labels.size(); ++v) {
      ProtocolSettings cell = s;
      apply(cell.model, v);
      validate(cell.model);
      cell.tag = s.tag + "/" + axis + "=" + labels[v];
      auto joint = pretrain_run(graphs, cell, cell.tag + "/ussl");
      std::vector<std::optional<RunReport>> ssl(graphs.size());
      if (with_ssl) {
        ProtocolSettings inner = cell;
        inner.jobs = 1;
        parallel_for(static_cast<int>(graphs.size()), cell.jobs, [&](int i) {
          auto m = pretrain_run(graphs.subspan(i, 1), inner, cell.tag + "/ssl/" + graphs[i].id());
          auto d = finetune_instances(m.model, graphs[i], inner);
          ssl[i] = make_report(cell.tag + "/ssl/" + graphs[i].id(), "ssl", graphs[i].id(), d.seeds, d.test_accuracy,
                               &m.history, s.fingerprint);
        });
      }
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        auto d = finetune_instances(joint.model, graphs[i], cell);
        res.reports.push_back(make_report(cell.tag + "/ussl/" + graphs[i].id(), "ussl", graphs[i].id(), d.seeds,
                                          d.test_accuracy, &joint.history, s.fingerprint));
        TableCell c = TableCell::of(res.reports.back());
        if (ssl[i]) {
          c.delta = c.mean - ssl[i]->mean;
          res.reports.push_back(*ssl[i]);
        }
        table.set(i, v, c);
        ++res.cell_count;
      }
    }
    res.tables.emplace_back("ablation_" + axis, std::move(table));
  };

  if (axes.embed_dim) {
    std::vector<std::string> labels;
    for (int d : *axes.embed_dim) labels.push_back(std::to_string(d));
    run_axis("embed_dim", "Ablation: transformer embedding size", labels,
             [&](ModelConfig& m, std::size_t v) { m.embed_dim = (*axes.embed_dim)[v]; }, false);
  }
  if (axes.depth) {
    std::vector<std::string> labels;
    for (int d : *axes.depth) labels.push_back(std::to_string(d));
    run_axis("depth", "Ablation: transformer depth", labels,
             [&](ModelConfig& m, std::size_t v) { m.num_layers = (*axes.depth)[v]; }, false);
  }
  if (axes.url_variant) {
    std::vector<std::string> labels;
    for (auto u : *axes.url_variant) labels.push_back(to_string(u));
    run_axis("url_variant", "Ablation: URL module architecture (U-SSL − SSL in parentheses)", labels,
             [&](ModelConfig& m, std::size_t v) { m.url_variant = (*axes.url_variant)[v]; }, true);
  }
  return res;
}

}  // namespace ussl
