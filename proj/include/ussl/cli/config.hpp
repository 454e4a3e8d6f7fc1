#pragma once

#include "ussl/eval/protocols.hpp"
#include "ussl/graph/io.hpp"
#include "ussl/graph/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Experiment config (JSON). Every section is optional; unknown keys are rejected.
//
// {
//   "seed": 0,
//   "family":     {"source": "synthetic", "seed": 7, <SyntheticFamilySpec fields>}
//              or {"source": "manifests", "manifests": ["a/manifest.json", ...]},
//   "model":      {embed_dim, num_layers, num_heads, hop_k, pe_dim, url_variant,
//                  ffn_multiplier, dropout_rate, gnn_layers},
//   "pretrain":   {base_lr, epochs, patience, lr_factor, pair_budget, node_batch, device,
//                  normalize_loss_by_graph_size, nan_epoch_limit},
//   "finetune":   {... same keys ...},
//   "supervised": {... same keys ...},
//   "protocol":   {instances, supervised_instances, run_supervised, jobs, checkpoint_every, held_out},
//   "ablation":   {embed_dim: [...], depth: [...], url_variant: [...]}
// }
//
// Relative manifest paths are resolved against the config file's directory.

namespace ussl::cli {

struct FamilySource {
  bool synthetic = true;
  SyntheticFamilySpec spec;
  std::uint64_t family_seed = 7;
  std::vector<std::filesystem::path> manifests;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  FamilySource family;
  ModelConfig model;
  TrainConfig pretrain = default_train_config(Regime::ussl_pretrain);
  TrainConfig finetune = default_train_config(Regime::finetune);
  TrainConfig supervised = default_train_config(Regime::supervised);
  int instances = 10;
  int supervised_instances = 10;
  bool run_supervised = true;
  int jobs = 1;
  int checkpoint_every = 0;
  std::string held_out;  // adaptability: graph to hold out (default: last)
  AblationAxes ablation = AblationAxes::full_scale();
};

/// Desk-scale preset: shorter schedules and a narrower backbone for a single CPU core.
inline void apply_desk_scale(ExperimentConfig& c) {
  c.pretrain.epochs = 300;
  c.finetune.epochs = 150;
  c.supervised.epochs = 100;
  c.model.embed_dim = 64;
}

namespace config_detail {

inline void check_keys(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in config section '" + section + "'");
}

inline void read_train(const nlohmann::json& j, const std::string& section, TrainConfig& t) {
  check_keys(j, section,
             {"base_lr", "epochs", "patience", "lr_factor", "pair_budget", "node_batch", "device",
              "normalize_loss_by_graph_size", "nan_epoch_limit"});
  t.base_lr = j.value("base_lr", t.base_lr);
  t.epochs = j.value("epochs", t.epochs);
  t.patience = j.value("patience", t.patience);
  t.lr_factor = j.value("lr_factor", t.lr_factor);
  t.pair_budget = j.value("pair_budget", t.pair_budget);
  t.node_batch = j.value("node_batch", t.node_batch);
  t.device = j.value("device", t.device);
  t.normalize_loss_by_graph_size = j.value("normalize_loss_by_graph_size", t.normalize_loss_by_graph_size);
  t.nan_epoch_limit = j.value("nan_epoch_limit", t.nan_epoch_limit);
}

inline nlohmann::json train_json(const TrainConfig& t) {
  return {{"base_lr", t.base_lr},
          {"epochs", t.epochs},
          {"patience", t.patience},
          {"lr_factor", t.lr_factor},
          {"pair_budget", t.pair_budget},
          {"node_batch", t.node_batch},
          {"device", t.device},
          {"normalize_loss_by_graph_size", t.normalize_loss_by_graph_size},
          {"nan_epoch_limit", t.nan_epoch_limit}};
}

inline void read_family(const nlohmann::json& j, const std::filesystem::path& base, FamilySource& f) {
  if (!j.is_object()) throw ValidationError("config section 'family' must be an object");
  const std::string source = j.value("source", std::string("synthetic"));
  if (source == "manifests") {
    check_keys(j, "family", {"source", "manifests"});
    f.synthetic = false;
    f.manifests.clear();
    for (const auto& m : j.at("manifests")) {
      std::filesystem::path p = m.get<std::string>();
      f.manifests.push_back(p.is_absolute() ? p : base / p);
    }
    if (f.manifests.empty()) throw ValidationError("family.manifests is empty");
    return;
  }
  if (source != "synthetic") throw ValidationError("family.source must be 'synthetic' or 'manifests'");
  check_keys(j, "family",
             {"source", "seed", "name", "node_counts", "feature_dims", "num_classes", "p_intra", "p_inter", "latent_dim",
              "prototype_scale", "latent_noise", "feature_noise", "train_fraction", "val_fraction"});
  f.synthetic = true;
  auto& s = f.spec;
  f.family_seed = j.value("seed", f.family_seed);
  s.name = j.value("name", s.name);
  s.node_counts = j.value("node_counts", s.node_counts);
  s.feature_dims = j.value("feature_dims", s.feature_dims);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.p_intra = j.value("p_intra", s.p_intra);
  s.p_inter = j.value("p_inter", s.p_inter);
  s.latent_dim = j.value("latent_dim", s.latent_dim);
  s.prototype_scale = j.value("prototype_scale", s.prototype_scale);
  s.latent_noise = j.value("latent_noise", s.latent_noise);
  s.feature_noise = j.value("feature_noise", s.feature_noise);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
}

inline void read_ablation(const nlohmann::json& j, AblationAxes& a) {
  check_keys(j, "ablation", {"embed_dim", "depth", "url_variant"});
  a = {};
  if (j.contains("embed_dim")) a.embed_dim = j.at("embed_dim").get<std::vector<int>>();
  if (j.contains("depth")) a.depth = j.at("depth").get<std::vector<int>>();
  if (j.contains("url_variant")) {
    a.url_variant.emplace();
    for (const auto& v : j.at("url_variant")) a.url_variant->push_back(parse_url_variant(v.get<std::string>()));
  }
}

}  // namespace config_detail

/// Merge a parsed config document into `c`.
inline void apply_config(const nlohmann::json& doc, const std::filesystem::path& base, ExperimentConfig& c) {
  using namespace config_detail;
  try {
    check_keys(doc, "<root>", {"seed", "family", "model", "pretrain", "finetune", "supervised", "protocol", "ablation"});
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("family")) read_family(doc.at("family"), base, c.family);
    if (doc.contains("model")) {
      if (!doc.at("model").is_object()) throw ValidationError("config section 'model' must be an object");
      from_json(doc.at("model"), c.model);
    }
    if (doc.contains("pretrain")) read_train(doc.at("pretrain"), "pretrain", c.pretrain);
    if (doc.contains("finetune")) read_train(doc.at("finetune"), "finetune", c.finetune);
    if (doc.contains("supervised")) read_train(doc.at("supervised"), "supervised", c.supervised);
    if (doc.contains("protocol")) {
      const auto& p = doc.at("protocol");
      check_keys(p, "protocol",
                 {"instances", "supervised_instances", "run_supervised", "jobs", "checkpoint_every", "held_out"});
      c.instances = p.value("instances", c.instances);
      c.supervised_instances = p.value("supervised_instances", c.supervised_instances);
      c.run_supervised = p.value("run_supervised", c.run_supervised);
      c.jobs = p.value("jobs", c.jobs);
      c.checkpoint_every = p.value("checkpoint_every", c.checkpoint_every);
      c.held_out = p.value("held_out", c.held_out);
    }
    if (doc.contains("ablation")) read_ablation(doc.at("ablation"), c.ablation);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config value: ") + e.what());
  }
}

inline nlohmann::json parse_config_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot read config file " + p.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + p.string() + ": " + e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  validate(c.model);
  validate(c.pretrain);
  validate(c.finetune);
  validate(c.supervised);
  if (c.family.synthetic) validate(c.family.spec);
  if (c.instances < 1) throw ValidationError("protocol.instances must be at least 1");
  if (c.supervised_instances < 0) throw ValidationError("protocol.supervised_instances must be non-negative");
  if (c.jobs < 1) throw ValidationError("--jobs must be at least 1");
  if (c.checkpoint_every < 0) throw ValidationError("protocol.checkpoint_every must be non-negative");
}

/// The fully resolved configuration, in the same schema as the input file.
inline nlohmann::json resolved_json(const ExperimentConfig& c) {
  using config_detail::train_json;
  nlohmann::json family;
  if (c.family.synthetic) {
    family = c.family.spec.to_json();
    family["source"] = "synthetic";
    family["seed"] = c.family.family_seed;
  } else {
    family = {{"source", "manifests"}, {"manifests", nlohmann::json::array()}};
    for (const auto& m : c.family.manifests) family["manifests"].push_back(m.string());
  }
  nlohmann::json ablation = nlohmann::json::object();
  if (c.ablation.embed_dim) ablation["embed_dim"] = *c.ablation.embed_dim;
  if (c.ablation.depth) ablation["depth"] = *c.ablation.depth;
  if (c.ablation.url_variant) {
    ablation["url_variant"] = nlohmann::json::array();
    for (auto v : *c.ablation.url_variant) ablation["url_variant"].push_back(to_string(v));
  }
  return {{"seed", c.seed},
          {"family", family},
          {"model", c.model},
          {"pretrain", train_json(c.pretrain)},
          {"finetune", train_json(c.finetune)},
          {"supervised", train_json(c.supervised)},
          {"protocol",
           {{"instances", c.instances},
            {"supervised_instances", c.supervised_instances},
            {"run_supervised", c.run_supervised},
            {"jobs", c.jobs},
            {"checkpoint_every", c.checkpoint_every},
            {"held_out", c.held_out}}},
          {"ablation", ablation}};
}

inline GraphFamily load_family(const FamilySource& f) {
  if (f.synthetic) return generate_family(f.spec, f.family_seed);
  GraphFamily fam;
  fam.name = "loaded";
  fam.provenance.source = "loaded";
  for (const auto& m : f.manifests) fam.graphs.push_back(load_dataset(m));
  nlohmann::json list = nlohmann::json::array();
  for (const auto& m : f.manifests) list.push_back(m.string());
  fam.provenance.parameters = nlohmann::json{{"manifests", list}}.dump();
  validate(fam);
  return fam;
}

inline ProtocolSettings protocol_settings(const ExperimentConfig& c) {
  ProtocolSettings s;
  s.model = c.model;
  s.pretrain = c.pretrain;
  s.finetune = c.finetune;
  s.supervised = c.supervised;
  s.instances = c.instances;
  s.supervised_instances = c.supervised_instances;
  s.run_supervised = c.run_supervised;
  s.seed = c.seed;
  s.jobs = c.jobs;
  s.checkpoint_every = c.checkpoint_every;
  s.fingerprint = config_fingerprint(resolved_json(c));
  return s;
}

}  // namespace ussl::cli
