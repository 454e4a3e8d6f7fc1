#pragma once

#include "ussl/cli/config.hpp"
#include "ussl/core/log.hpp"
#include "ussl/eval/protocols.hpp"
#include "ussl/eval/report.hpp"
#include "ussl/model/checkpoint.hpp"
#include "ussl/preprocess/prepared_graph.hpp"
#include "ussl/train/run_dir.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ussl::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"generate", "preprocess", "pretrain-ssl", "pretrain-ussl",
                                                 "finetune", "supervised", "adapt",        "efficacy",
                                                 "efficiency", "ablate",   "report"};
  return names;
}

struct Invocation {
  std::string command;
  std::optional<fs::path> config;
  fs::path out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool desk_scale = false;
  bool force = false;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> embed_dim;
  std::optional<int> depth;
  std::optional<std::string> url_variant;
  std::optional<int> hop_k;
  std::optional<int> pe_dim;
  std::optional<int> pair_budget;
  std::optional<int> instances;
  std::optional<std::string> family;
  std::vector<std::string> graphs;
  std::optional<fs::path> checkpoint;
  std::vector<fs::path> inputs;
  bool quiet = false;
};

/// Training section that --epochs/--lr refer to for each subcommand.
inline TrainConfig& primary_train_config(const std::string& cmd, ExperimentConfig& c) {
  if (cmd == "finetune") return c.finetune;
  if (cmd == "supervised") return c.supervised;
  return c.pretrain;
}

/// defaults < --desk-scale preset < --family preset < config file < flags
inline ExperimentConfig resolve(const Invocation& inv) {
  ExperimentConfig c;
  if (inv.desk_scale) apply_desk_scale(c);
  if (inv.family) {
    if (*inv.family != "synthetic3") throw ValidationError("unknown family preset '" + *inv.family + "' (known: synthetic3)");
    c.family = FamilySource{};
  }
  if (inv.config) apply_config(parse_config_file(*inv.config), inv.config->parent_path(), c);
  if (inv.seed) c.seed = *inv.seed;
  if (inv.jobs) c.jobs = *inv.jobs;
  auto& t = primary_train_config(inv.command, c);
  if (inv.epochs) t.epochs = *inv.epochs;
  if (inv.lr) t.base_lr = *inv.lr;
  if (inv.embed_dim) c.model.embed_dim = *inv.embed_dim;
  if (inv.depth) c.model.num_layers = *inv.depth;
  if (inv.url_variant) c.model.url_variant = parse_url_variant(*inv.url_variant);
  if (inv.hop_k) c.model.hop_k = *inv.hop_k;
  if (inv.pe_dim) c.model.pe_dim = *inv.pe_dim;
  if (inv.pair_budget) c.pretrain.pair_budget = *inv.pair_budget;
  if (inv.instances) c.instances = *inv.instances;
  validate(c);
  return c;
}

namespace command_detail {

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

/// Creates out_dir; refuses to reuse a directory holding an earlier run unless forced.
inline void prepare_out_dir(const Invocation& inv) {
  const fs::path marker = inv.out / "config.resolved.json";
  if (fs::exists(marker)) {
    if (!inv.force)
      throw ValidationError("output directory " + inv.out.string() + " already holds a run; pass --force to overwrite");
    for (const char* sub : {"runs", "plots", "checkpoint", "data", "cache"}) fs::remove_all(inv.out / sub);
  }
  std::error_code ec;
  fs::create_directories(inv.out, ec);
  if (ec) throw Error("cannot create output directory " + inv.out.string() + ": " + ec.message());
}

struct Context {
  Invocation inv;
  ExperimentConfig cfg;
  GraphFamily family;
  std::vector<PreparedGraph> prepared;

  PrepareOptions prepare_options() const {
    PrepareOptions o;
    o.pe_dim = cfg.model.pe_dim;
    o.hop_k = cfg.model.hop_k;
    o.cache_root = cache_root_from_env();
    return o;
  }

  void prepare() {
    const auto opt = prepare_options();
    for (const auto& g : family.graphs) {
      log_info("preprocessing " + g.graph_id + " (" + std::to_string(g.num_nodes) + " nodes, " +
               std::to_string(g.edges.size()) + " edges)");
      prepared.push_back(prepare_graph(g, opt));
    }
  }

  /// Graphs selected with --graph (all when none given), in family order.
  std::vector<PreparedGraph> selected() const {
    if (inv.graphs.empty()) return prepared;
    std::vector<PreparedGraph> out;
    for (const auto& id : inv.graphs) {
      auto it = std::find_if(prepared.begin(), prepared.end(), [&](const PreparedGraph& p) { return p.id() == id; });
      if (it == prepared.end()) throw ValidationError("graph '" + id + "' is not part of the family");
      out.push_back(*it);
    }
    return out;
  }

  ProtocolSettings settings(const std::string& tag) const {
    auto s = protocol_settings(cfg);
    s.run_root = inv.out / "runs";
    s.log_epochs = !inv.quiet;
    s.tag = tag;
    return s;
  }
};

inline fs::path require_checkpoint(const Invocation& inv) {
  if (!inv.checkpoint) throw ValidationError(inv.command + " needs --checkpoint");
  return *inv.checkpoint;
}

inline void emit_downstream(const Context& ctx, const std::vector<RunReport>& reports, const std::string& title) {
  std::vector<std::string> rows, cols;
  for (const auto& r : reports) {
    if (std::find(rows.begin(), rows.end(), r.graph_id) == rows.end()) rows.push_back(r.graph_id);
    if (std::find(cols.begin(), cols.end(), r.regime) == cols.end()) cols.push_back(r.regime);
  }
  ComparisonTable t(title, cols, rows);
  for (const auto& r : reports)
    t.set(std::find(rows.begin(), rows.end(), r.graph_id) - rows.begin(),
          std::find(cols.begin(), cols.end(), r.regime) - cols.begin(), TableCell::of(r));
  emit_report(reports, ctx.inv.out, {{"accuracy", t}});
  for (const auto& r : reports)
    log_info(r.regime + " " + r.graph_id + ": accuracy " + report_detail::fixed(r.mean, 4) + " ± " +
             report_detail::fixed(r.std, 4));
}

// ---- subcommands --------------------------------------------------------------------

inline void cmd_generate(Context& ctx) {
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto& g : ctx.family.graphs) {
    const fs::path m = save_dataset(g, ctx.inv.out / "data" / g.graph_id);
    manifests.push_back(fs::relative(m, ctx.inv.out).string());
    log_info("wrote " + m.string());
  }
  nlohmann::json family_cfg = resolved_json(ctx.cfg);
  family_cfg["family"] = {{"source", "manifests"}, {"manifests", manifests}};
  write_json(ctx.inv.out / "family.json", family_cfg);
  for (const auto& w : ctx.family.provenance.warnings) log_warning(w);
}

inline void cmd_preprocess(Context& ctx) {
  auto opt = ctx.prepare_options();
  if (!opt.cache_root) opt.cache_root = ctx.inv.out / "cache";
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& g : ctx.family.graphs) {
    const auto p = prepare_graph(g, opt);
    summary.push_back({{"graph_id", g.graph_id},
                       {"num_nodes", g.num_nodes},
                       {"feature_dim", g.feature_dim()},
                       {"augmented_dim", p.input_dim()},
                       {"hop_k", p.tokens.hop_k},
                       {"pe_dim", p.tokens.pe_dim},
                       {"cache_file", token_cache_path(*opt.cache_root, g.graph_id, dataset_hash(g), opt.pe_dim,
                                                       opt.hop_k).string()}});
    log_info("tokenized " + g.graph_id + ": " + std::to_string(p.num_nodes()) + " x " +
             std::to_string(p.tokens.seq_len()) + " x " + std::to_string(p.input_dim()));
  }
  write_json(ctx.inv.out / "preprocess.json", summary);
}

inline void cmd_pretrain(Context& ctx, bool joint) {
  const auto graphs = ctx.selected();
  auto s = ctx.settings(joint ? "ussl" : "ssl");
  s.run_root = ctx.inv.out / "runs";
  auto finish = [&](PretrainedModel& m, const fs::path& dir) {
    save_checkpoint(m.model, dir, {{"command", ctx.inv.command}, {"seed", ctx.cfg.seed}});
    write_loss_history_csv(dir.parent_path() / (dir.filename().string() + "_loss_history.csv"), m.history);
    log_info("checkpoint written to " + dir.string());
  };
  if (joint) {
    auto m = pretrain_run(graphs, s, "ussl");
    write_loss_history_csv(ctx.inv.out / "loss_history.csv", m.history);
    save_checkpoint(m.model, ctx.inv.out / "checkpoint", {{"command", ctx.inv.command}, {"seed", ctx.cfg.seed}});
    log_info("checkpoint written to " + (ctx.inv.out / "checkpoint").string());
  } else {
    for (const auto& g : graphs) {
      auto m = pretrain_run(std::span<const PreparedGraph>(&g, 1), s, "ssl/" + g.id());
      fs::create_directories(ctx.inv.out / "ssl");
      finish(m, ctx.inv.out / "ssl" / g.id());
    }
  }
}

inline void cmd_finetune(Context& ctx) {
  const fs::path ckpt = require_checkpoint(ctx.inv);
  auto model = load_checkpoint<float>(ckpt);
  auto s = ctx.settings("finetune");
  std::vector<RunReport> reports;
  for (const auto& g : ctx.selected()) {
    if (!model.has_graph(g.id()))
      throw ValidationError("checkpoint " + ckpt.string() + " has no graph-specific encoder for graph '" + g.id() + "'");
    const auto before = parameter_digest(model, {"theta/", "phi/", "gamma/"});
    auto d = finetune_instances(model, g, s);
    if (parameter_digest(model, {"theta/", "phi/", "gamma/"}) != before)
      throw Error("internal error: fine-tuning modified frozen parameters");
    const std::string regime = model.representation_kind() == RepresentationKind::ussl ? "ussl" : "ssl";
    reports.push_back(make_report("finetune/" + g.id(), regime, g.id(), d.seeds, d.test_accuracy, &d.first_history,
                                  s.fingerprint));
  }
  save_checkpoint(model, ctx.inv.out / "checkpoint", {{"command", "finetune"}, {"source", ckpt.string()}});
  emit_downstream(ctx, reports, "Fine-tuned accuracy");
}

inline void cmd_supervised(Context& ctx) {
  auto s = ctx.settings("supervised");
  std::vector<RunReport> reports;
  for (const auto& g : ctx.selected()) {
    auto d = supervised_instances(g, s, "supervised/" + g.id());
    reports.push_back(make_report("supervised/" + g.id(), "supervised", g.id(), d.seeds, d.test_accuracy,
                                  &d.first_history, s.fingerprint));
  }
  emit_downstream(ctx, reports, "Supervised baseline accuracy");
}

inline void cmd_adapt(Context& ctx) {
  const fs::path ckpt = require_checkpoint(ctx.inv);
  if (ctx.inv.graphs.size() != 1) throw ValidationError("adapt needs exactly one --graph (the new graph)");
  auto model = load_checkpoint<float>(ckpt);
  const PreparedGraph g = ctx.selected().front();
  if (model.has_graph(g.id()))
    throw ValidationError("graph '" + g.id() + "' is already registered in checkpoint " + ckpt.string());
  auto s = ctx.settings("adapt");
  TrainConfig cfg = ctx.cfg.pretrain;
  cfg.regime = Regime::adapt;
  cfg.seed = ProtocolSeeds{s.seed}.pretrain();
  const auto phi = parameter_digest(model, {"phi/"});
  RunDirectory dir(ctx.inv.out / "runs" / ("adapt_" + g.id()));
  dir.write_config(resolved_json(ctx.cfg));
  dir.begin_history({g.id()});
  auto history = adapt_new_graph(model, g, cfg, [&](const EpochRecord& r) {
    if (s.log_epochs) log_info(format_epoch("adapt/" + g.id(), r));
    dir.record<float>(r);
  });
  if (parameter_digest(model, {"phi/"}) != phi) throw Error("internal error: adaptation modified the backbone");
  auto d = finetune_instances(model, g, s);
  save_checkpoint(model, ctx.inv.out / "checkpoint", {{"command", "adapt"}, {"source", ckpt.string()}});
  emit_downstream(ctx, {make_report("adapt/" + g.id(), "adapted", g.id(), d.seeds, d.test_accuracy, &history,
                                    s.fingerprint)},
                  "Adapted accuracy");
}

inline void cmd_efficacy(Context& ctx) {
  auto s = ctx.settings("efficacy");
  auto res = run_efficacy_protocol(ctx.selected(), s);
  emit_report(res.reports, ctx.inv.out, {{"table1_efficacy", res.table}});
  const auto timing = timing_from_efficacy(res);
  write_file(ctx.inv.out / "timing.csv", timing.to_csv());
  write_file(ctx.inv.out / "timing.md", timing.to_markdown());
  std::cout << res.table.to_markdown();
}

inline void cmd_efficiency(Context& ctx) {
  auto s = ctx.settings("efficiency");
  const auto timing = run_efficiency_protocol(ctx.selected(), s);
  write_file(ctx.inv.out / "timing.csv", timing.to_csv());
  write_file(ctx.inv.out / "timing.md", timing.to_markdown());
  std::cout << timing.to_markdown();
  log_info("sum of SSL epoch times " + report_detail::fixed(timing.ssl_sum(), 4) + " s, U-SSL " +
           report_detail::fixed(timing.ussl, 4) + " s");
}

inline void cmd_ablate(Context& ctx) {
  auto s = ctx.settings("ablate");
  auto res = run_ablation_grid(ctx.selected(), ctx.cfg.ablation, s);
  emit_report(res.reports, ctx.inv.out, res.tables);
  for (const auto& [name, t] : res.tables) std::cout << t.to_markdown() << "\n";
}

inline void cmd_report(Context& ctx) {
  if (ctx.inv.inputs.empty()) throw ValidationError("report needs at least one --input directory");
  std::vector<RunReport> reports;
  for (const auto& dir : ctx.inv.inputs) {
    const fs::path p = dir / "reports.json";
    std::ifstream in(p);
    if (!in) throw ValidationError("no reports.json in " + dir.string());
    try {
      for (const auto& j : nlohmann::json::parse(in)) reports.push_back(report_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("invalid " + p.string() + ": " + e.what());
    }
  }
  emit_downstream(ctx, reports, "Collected accuracy");
}

}  // namespace command_detail

/// Runs one invocation; returns the process exit code (0 ok, 1 validation, 2 runtime).
inline int run(const Invocation& inv) {
  using namespace command_detail;
  std::unique_ptr<std::ofstream> log_file;
  LogSink previous;
  bool sink_installed = false;
  try {
    Context ctx{inv, resolve(inv), {}, {}};
    prepare_out_dir(inv);
    log_file = std::make_unique<std::ofstream>(inv.out / "log.txt", std::ios::app);
    previous = set_log_sink([&log_file, quiet = inv.quiet](const std::string& level, const std::string& msg) {
      const std::string line = "[" + level + "] " + msg;
      if (!quiet || level != "info") (level == "info" ? std::cout : std::cerr) << line << std::endl;
      if (log_file && *log_file) *log_file << line << '\n' << std::flush;
    });
    sink_installed = true;
    write_json(inv.out / "config.resolved.json", resolved_json(ctx.cfg));
    log_info("command " + inv.command + ", out " + inv.out.string() + ", seed " + std::to_string(ctx.cfg.seed));
    if (inv.command != "report") {
      ctx.family = load_family(ctx.cfg.family);
      for (const auto& w : ctx.family.provenance.warnings) log_warning(w);
    }
    const std::string& c = inv.command;
    if (c == "generate") cmd_generate(ctx);
    else if (c == "preprocess") cmd_preprocess(ctx);
    else if (c == "report") cmd_report(ctx);
    else {
      ctx.prepare();
      if (c == "pretrain-ssl") cmd_pretrain(ctx, false);
      else if (c == "pretrain-ussl") cmd_pretrain(ctx, true);
      else if (c == "finetune") cmd_finetune(ctx);
      else if (c == "supervised") cmd_supervised(ctx);
      else if (c == "adapt") cmd_adapt(ctx);
      else if (c == "efficacy") cmd_efficacy(ctx);
      else if (c == "efficiency") cmd_efficiency(ctx);
      else if (c == "ablate") cmd_ablate(ctx);
      else throw ValidationError("unknown subcommand '" + c + "'");
    }
    log_info("done");
    set_log_sink(previous);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    if (log_file && *log_file) *log_file << "[error] " << e.what() << '\n';
    if (sink_installed) set_log_sink(previous);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << std::endl;
    if (log_file && *log_file) *log_file << "[error] " << e.what() << '\n';
    if (sink_installed) set_log_sink(previous);
    return 2;
  }
}

/// Parses argv and runs the selected subcommand.
inline int main(int argc, const char* const* argv) {
  CLI::App app{"Universal self-supervised learning over graph families"};
  app.require_subcommand(1, 1);
  Invocation inv;
  std::string config, out = "out", checkpoint;
  std::uint64_t seed = 0;
  int jobs = 1, epochs = 0, embed_dim = 0, depth = 0, hop_k = 0, pe_dim = 0, pair_budget = 0, instances = 0;
  double lr = 0;
  std::string url_variant, family;
  std::vector<std::string> inputs;

  auto* o_config = app.add_option("--config", config, "experiment config (JSON)");
  app.add_option("--out", out, "output directory")->capture_default_str();
  auto* o_seed = app.add_option("--seed", seed, "protocol seed");
  auto* o_jobs = app.add_option("--jobs", jobs, "parallel independent runs")->check(CLI::PositiveNumber);
  app.add_flag("--desk-scale", inv.desk_scale, "shorter schedules and embed_dim 64");
  app.add_flag("--force", inv.force, "overwrite an earlier run in --out");
  auto* o_epochs = app.add_option("--epochs", epochs, "epochs of the subcommand's main training phase");
  auto* o_lr = app.add_option("--lr", lr, "base learning rate of the main training phase");
  auto* o_embed = app.add_option("--embed-dim", embed_dim);
  auto* o_depth = app.add_option("--depth", depth, "number of transformer layers");
  auto* o_url = app.add_option("--url-variant", url_variant, "transformer, gcn or sage");
  auto* o_hop = app.add_option("--hop-k", hop_k);
  auto* o_pe = app.add_option("--pe-dim", pe_dim);
  auto* o_pairs = app.add_option("--pair-budget", pair_budget, "PairSim pairs per graph (0: automatic)");
  auto* o_inst = app.add_option("--instances", instances, "downstream heads per graph");
  auto* o_family = app.add_option("--family", family, "family preset (synthetic3)");
  app.add_option("--graph", inv.graphs, "restrict to these graph ids");
  auto* o_ckpt = app.add_option("--checkpoint", checkpoint, "checkpoint directory");
  app.add_option("--input", inputs, "report: directories holding reports.json");
  app.add_flag("--quiet", inv.quiet, "no per-epoch log lines on stdout");
  for (const auto& name : subcommands()) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  inv.command = app.get_subcommands().front()->get_name();
  inv.out = out;
  if (*o_config) inv.config = config;
  if (*o_seed) inv.seed = seed;
  if (*o_jobs) inv.jobs = jobs;
  if (*o_epochs) inv.epochs = epochs;
  if (*o_lr) inv.lr = lr;
  if (*o_embed) inv.embed_dim = embed_dim;
  if (*o_depth) inv.depth = depth;
  if (*o_url) inv.url_variant = url_variant;
  if (*o_hop) inv.hop_k = hop_k;
  if (*o_pe) inv.pe_dim = pe_dim;
  if (*o_pairs) inv.pair_budget = pair_budget;
  if (*o_inst) inv.instances = instances;
  if (*o_family) inv.family = family;
  if (*o_ckpt) inv.checkpoint = checkpoint;
  for (const auto& i : inputs) inv.inputs.emplace_back(i);
  return run(inv);
}

}  // namespace ussl::cli
