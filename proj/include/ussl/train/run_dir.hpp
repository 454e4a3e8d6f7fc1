#pragma once

#include "ussl/model/checkpoint.hpp"
#include "ussl/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

// Run directory:
//   config.json          resolved configuration snapshot
//   loss_history.csv     epoch, <graph_id>..., total, lr, wall_s
//   checkpoints/epoch_<n>/, checkpoints/final/

namespace ussl {

inline std::string loss_history_header(const std::vector<std::string>& graph_ids) {
  std::string h = "epoch";
  for (const auto& id : graph_ids) h += "," + id;
  return h + ",total,lr,wall_s";
}

inline std::string loss_history_row(const EpochRecord& r) {
  char buf[64];
  std::string row = std::to_string(r.epoch);
  for (double l : r.graph_losses) {
    std::snprintf(buf, sizeof buf, ",%.9g", l);
    row += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.6f", r.total_loss, r.lr, r.seconds);
  return row + buf;
}

inline void write_loss_history_csv(const std::filesystem::path& p, const LossHistory& h) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << loss_history_header(h.graph_ids) << '\n';
  for (const auto& e : h.epochs) out << loss_history_row(e) << '\n';
}

class RunDirectory {
 public:
  RunDirectory(std::filesystem::path dir, int checkpoint_every = 0)
      : dir_(std::move(dir)), checkpoint_every_(checkpoint_every) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("cannot create run directory " + dir_.string() + ": " + ec.message());
  }

  const std::filesystem::path& path() const { return dir_; }

  void write_config(const nlohmann::json& resolved) const {
    std::ofstream out(dir_ / "config.json");
    if (!out) throw Error("cannot write " + (dir_ / "config.json").string());
    out << resolved.dump(2) << '\n';
  }

  /// Starts loss_history.csv; rows are appended by `record`.
  void begin_history(const std::vector<std::string>& graph_ids) {
    history_.open(dir_ / "loss_history.csv");
    if (!history_) throw Error("cannot write " + (dir_ / "loss_history.csv").string());
    history_ << loss_history_header(graph_ids) << '\n';
  }

  template <typename S>
  void record(const EpochRecord& r, UniversalModel<S>* model = nullptr) {
    if (history_.is_open()) history_ << loss_history_row(r) << '\n' << std::flush;
    if (model && checkpoint_every_ > 0 && (r.epoch + 1) % checkpoint_every_ == 0)
      save_checkpoint(*model, dir_ / "checkpoints" / ("epoch_" + std::to_string(r.epoch + 1)));
  }

  template <typename S>
  void final_checkpoint(UniversalModel<S>& model, const nlohmann::json& provenance = nlohmann::json::object()) const {
    save_checkpoint(model, dir_ / "checkpoints" / "final", provenance);
  }

 private:
  std::filesystem::path dir_;
  int checkpoint_every_;
  std::ofstream history_;
};

}  // namespace ussl
