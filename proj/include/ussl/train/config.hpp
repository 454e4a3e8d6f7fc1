#pragma once

#include "ussl/core/types.hpp"

#include <nlohmann/json.hpp>

#include <limits>
#include <string>

namespace ussl {

enum class Regime { ussl_pretrain, ssl_pretrain, finetune, supervised, adapt };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::ussl_pretrain: return "ussl_pretrain";
    case Regime::ssl_pretrain: return "ssl_pretrain";
    case Regime::finetune: return "finetune";
    case Regime::supervised: return "supervised";
    case Regime::adapt: return "adapt";
  }
  return "?";
}

struct TrainConfig {
  Regime regime = Regime::ussl_pretrain;
  double base_lr = 1e-3;
  int epochs = 2500;
  int patience = 50;
  double lr_factor = 0.5;
  int pair_budget = 0;     // 0: min(4 * num_nodes, 20000)
  int node_batch = 2000;   // token sequences per forward pass
  std::uint64_t seed = 0;
  std::string device = "cpu";
  bool normalize_loss_by_graph_size = false;
  int nan_epoch_limit = 3;
};

/// Optimizer and schedule defaults for each regime.
inline TrainConfig default_train_config(Regime regime) {
  TrainConfig c;
  c.regime = regime;
  switch (regime) {
    case Regime::ussl_pretrain:
    case Regime::ssl_pretrain:
    case Regime::adapt:
      c.base_lr = 1e-3;
      c.epochs = 2500;
      break;
    case Regime::finetune:
      c.base_lr = 1e-2;
      c.epochs = 1000;
      break;
    case Regime::supervised:
      c.base_lr = 1e-3;
      c.epochs = 500;
      break;
  }
  return c;
}

inline void validate(const TrainConfig& c) {
  if (!(c.base_lr > 0)) throw ValidationError("learning rate must be positive");
  if (c.epochs <= 0) throw ValidationError("epochs must be positive");
  if (c.patience < 1) throw ValidationError("scheduler patience must be at least 1");
  if (!(c.lr_factor > 0 && c.lr_factor < 1)) throw ValidationError("scheduler factor must be in (0, 1)");
  if (c.pair_budget < 0) throw ValidationError("pair_budget must be non-negative");
  if (c.node_batch < 1) throw ValidationError("node_batch must be positive");
  if (c.device != "cpu") throw ValidationError("device '" + c.device + "' is not available (only cpu)");
  if (c.nan_epoch_limit < 1) throw ValidationError("nan_epoch_limit must be at least 1");
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"regime", to_string(c.regime)}, {"base_lr", c.base_lr},       {"epochs", c.epochs},
          {"patience", c.patience},        {"lr_factor", c.lr_factor},   {"pair_budget", c.pair_budget},
          {"node_batch", c.node_batch},    {"seed", c.seed},             {"device", c.device},
          {"normalize_loss_by_graph_size", c.normalize_loss_by_graph_size}};
}

/// Reduce-on-plateau: the rate is multiplied by `factor` once the monitored loss has gone
/// `patience` consecutive epochs without a strict improvement.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor) : lr_(lr), patience_(patience), factor_(factor) {}

  /// Record one epoch's loss; returns the rate for the next epoch.
  double step(double loss) {
    if (loss < best_) {
      best_ = loss;
      stale_ = 0;
    } else if (++stale_ >= patience_) {
      lr_ *= factor_;
      stale_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

}  // namespace ussl
