#pragma once

#include "ussl/core/log.hpp"
#include "ussl/graph/io.hpp"
#include "ussl/model/universal_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

// Checkpoint directory:
//   manifest.json   {format, config, init_seed, graphs[], pretrained_on[], provenance,
//                    parameters[{name, rows, cols, file}]}
//   params/*.f32    one raw little-endian float32 blob per parameter, row-major

namespace ussl {

inline constexpr const char* kCheckpointFormat = "ussl-checkpoint-v1";

namespace ckpt_detail {
inline std::string blob_name(const std::string& param) {
  std::string out;
  for (char c : param) out += (c == '/' ? '~' : c);
  return out + ".f32";
}
}  // namespace ckpt_detail

template <typename S>
void save_checkpoint(UniversalModel<S>& model, const std::filesystem::path& dir,
                     const nlohmann::json& provenance = nlohmann::json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "params");
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["config"] = model.config();
  manifest["init_seed"] = model.init_seed();
  manifest["pretrained_on"] = model.pretrained_on();
  manifest["provenance"] = provenance;
  auto& graphs = manifest["graphs"] = nlohmann::json::array();
  for (const auto& g : model.graphs())
    graphs.push_back({{"graph_id", g.graph_id}, {"input_dim", g.input_dim}, {"num_classes", g.num_classes}});
  auto& params = manifest["parameters"] = nlohmann::json::array();
  model.visit_params([&](const std::string& name, nn::Param<S>& p) {
    const std::string file = "params/" + ckpt_detail::blob_name(name);
    const MatF values = p.value.template cast<float>();
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint blob " + (dir / file).string());
    write_f32_blob(out, values.data(), static_cast<std::size_t>(values.size()));
    params.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"file", file}});
  });
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ValidationError("cannot write checkpoint manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ValidationError("no checkpoint manifest at " + path.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid checkpoint manifest " + path.string() + ": " + e.what());
  }
  if (m.value("format", "") != kCheckpointFormat)
    throw ValidationError("unsupported checkpoint format in " + path.string());
  return m;
}

/// Graph ids that have an encoder stored in the checkpoint.
inline std::vector<std::string> checkpoint_graph_ids(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  const nlohmann::json m = read_checkpoint_manifest(dir);
  for (const auto& g : m.at("graphs")) out.push_back(g.at("graph_id").get<std::string>());
  return out;
}

/// Load a checkpoint. With `graphs` given, the model is built for exactly those graphs:
/// stored tensors are reused, missing per-graph tensors are freshly initialized and stored
/// graphs that are not requested are dropped with a warning.
template <typename S>
UniversalModel<S> load_checkpoint(const std::filesystem::path& dir,
                                  const std::optional<std::vector<GraphSpec>>& graphs = std::nullopt) {
  const nlohmann::json m = read_checkpoint_manifest(dir);
  ModelConfig config;
  from_json(m.at("config"), config);
  UniversalModel<S> model(config, m.at("init_seed").get<std::uint64_t>());

  std::map<std::string, GraphSpec> stored;
  for (const auto& g : m.at("graphs"))
    stored[g.at("graph_id").get<std::string>()] = {g.at("graph_id").get<std::string>(), g.at("input_dim").get<int>(),
                                                   g.at("num_classes").get<int>()};
  std::vector<GraphSpec> wanted;
  if (graphs) {
    wanted = *graphs;
    for (auto& w : wanted) {
      auto it = stored.find(w.graph_id);
      if (it != stored.end() && it->second.input_dim != w.input_dim)
        throw ValidationError("checkpoint encoder for '" + w.graph_id + "' expects input width " +
                              std::to_string(it->second.input_dim) + ", graph provides " + std::to_string(w.input_dim));
      if (it != stored.end() && w.num_classes == 0) w.num_classes = it->second.num_classes;
    }
    std::set<std::string> keep;
    for (const auto& w : wanted) keep.insert(w.graph_id);
    for (const auto& [id, spec] : stored)
      if (!keep.count(id)) log_warning("checkpoint graph '" + id + "' not requested; its parameters are ignored");
  } else {
    for (const auto& g : m.at("graphs")) wanted.push_back(stored.at(g.at("graph_id").get<std::string>()));
  }
  for (const auto& w : wanted) model.add_graph(w);

  std::map<std::string, nlohmann::json> blobs;
  for (const auto& p : m.at("parameters")) blobs[p.at("name").get<std::string>()] = p;
  model.visit_params([&](const std::string& name, nn::Param<S>& p) {
    auto it = blobs.find(name);
    if (it == blobs.end()) return;
    const auto rows = it->second.at("rows").get<Eigen::Index>();
    const auto cols = it->second.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      if (name.rfind("psi/", 0) == 0) {
        log_warning("checkpoint head '" + name + "' has a different shape; reinitialized");
        return;
      }
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                            std::to_string(p.value.cols()));
    }
    const auto file = dir / it->second.at("file").get<std::string>();
    auto in = io_detail::open_in(file, std::ios::binary);
    const auto values = read_f32_blob(in, static_cast<std::size_t>(rows * cols), file.string());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<S>(values[i]);
    p.zero_grad();
  });
  std::vector<std::string> pre;
  for (const auto& id : m.value("pretrained_on", nlohmann::json::array())) pre.push_back(id.get<std::string>());
  model.set_pretrained_on(pre);
  return model;
}

}  // namespace ussl
