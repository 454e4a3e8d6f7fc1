#pragma once

#include "ussl/eval/metrics.hpp"
#include "ussl/model/universal_model.hpp"
#include "ussl/nn/adam.hpp"
#include "ussl/nn/loss.hpp"
#include "ussl/train/config.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ussl {

struct EpochRecord {
  int epoch = 0;
  std::vector<double> graph_losses;  // one per graph, family order
  double total_loss = 0.0;           // sum of graph_losses
  double lr = 0.0;                   // rate used during this epoch
  double seconds = 0.0;
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct LossHistory {
  std::vector<std::string> graph_ids;
  std::vector<EpochRecord> epochs;

  std::vector<double> totals() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.total_loss);
    return out;
  }
  std::vector<double> epoch_seconds() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.seconds);
    return out;
  }
};

using EpochCallback = std::function<void(const EpochRecord&)>;
using ParamFilter = std::function<bool(const std::string&)>;

inline ParamFilter prefix_filter(std::vector<std::string> prefixes) {
  return [prefixes = std::move(prefixes)](const std::string& name) {
    for (const auto& p : prefixes)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  };
}

namespace train_detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Split pairs into batches whose distinct endpoints never exceed `node_limit`.
inline std::vector<std::vector<LabeledPair>> batch_pairs(const std::vector<LabeledPair>& pairs, NodeId num_nodes,
                                                         int node_limit, std::mt19937_64& rng) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<LabeledPair>> batches(1);
  std::vector<int> stamp(static_cast<std::size_t>(num_nodes), -1);
  int batch_id = 0, distinct = 0;
  for (std::size_t i : order) {
    const auto& p = pairs[i];
    const int extra = (stamp[p.u] != batch_id) + (stamp[p.v] != batch_id);
    if (distinct + extra > node_limit && !batches.back().empty()) {
      batches.emplace_back();
      ++batch_id;
      distinct = 0;
    }
    for (NodeId v : {p.u, p.v})
      if (stamp[v] != batch_id) {
        stamp[v] = batch_id;
        ++distinct;
      }
    batches.back().push_back(p);
  }
  if (batches.back().empty()) batches.pop_back();
  return batches;
}

template <typename S>
void adam_step(UniversalModel<S>& model, nn::Adam<S>& adam, const ParamFilter& touched, const ParamFilter& trainable,
               double lr) {
  model.visit_params([&](const std::string& name, nn::Param<S>& p) {
    if (touched(name) && trainable(name)) adam.step(name, p, lr);
  });
}

}  // namespace train_detail

/// PairSim cross-entropy on one batch of pairs from graph `g`; backpropagates into Γ, Θ, Φ when
/// `backward` is set, scaling the gradient by `weight`. Returns the unweighted mean loss.
template <typename S>
double pretext_batch(UniversalModel<S>& model, const PreparedGraph& g, std::span<const LabeledPair> pairs,
                     const nn::ForwardContext& ctx, bool backward, double weight = 1.0) {
  std::vector<NodeId> nodes;
  std::vector<Eigen::Index> row(static_cast<std::size_t>(g.num_nodes()), -1);
  nn::PairIndex idx;
  std::vector<int> labels;
  labels.reserve(pairs.size());
  auto slot = [&](NodeId v) {
    if (row[v] < 0) {
      row[v] = static_cast<Eigen::Index>(nodes.size());
      nodes.push_back(v);
    }
    return row[v];
  };
  for (const auto& p : pairs) {
    idx.first.push_back(slot(p.u));
    idx.second.push_back(slot(p.v));
    labels.push_back(p.label);
  }
  const Mat<S> h = model.represent(g, nodes, ctx);
  auto& head = model.gamma(g.id());
  const Mat<S> logits = head.forward(h, idx);
  auto ce = nn::softmax_cross_entropy<S>(logits, labels);
  if (backward) {
    if (weight != 1.0) ce.grad *= static_cast<S>(weight);
    model.backward(head.backward(ce.grad));
  }
  return ce.loss;
}

/// Pair sets per graph for one epoch; exhaustive pools are reused across epochs.
class PairSchedule {
 public:
  PairSchedule(std::span<const PreparedGraph> graphs, int budget, std::uint64_t seed) : graphs_(graphs), seed_(seed) {
    for (const auto& g : graphs) {
      const int b = budget > 0 ? budget : default_pair_budget(g.num_nodes());
      budgets_.push_back(b);
      if (pairsim_is_exhaustive(g.num_nodes(), b)) fixed_.push_back(sample_pairsim(*g.data, b, seed));
      else fixed_.emplace_back();
    }
  }

  const std::vector<LabeledPair>& pairs(std::size_t i, int epoch) {
    if (!fixed_[i].pairs.empty()) return fixed_[i].pairs;
    current_ = sample_pairsim(*graphs_[i].data, budgets_[i], derive_seed(seed_, "pairs/" + graphs_[i].id(), epoch));
    return current_.pairs;
  }

 private:
  std::span<const PreparedGraph> graphs_;
  std::uint64_t seed_;
  std::vector<int> budgets_;
  std::vector<PairLabelSet> fixed_;
  PairLabelSet current_;
};

/// Shared PairSim pre-training loop. Each epoch visits graphs in order and takes one Adam
/// step per pair batch, updating only parameters that both received gradient from that graph
/// and pass `trainable`.
template <typename S>
LossHistory pretrain_pairsim(UniversalModel<S>& model, std::span<const PreparedGraph> graphs, const TrainConfig& cfg,
                             const ParamFilter& trainable, const EpochCallback& on_epoch = {}) {
  validate(cfg);
  if (graphs.empty()) throw ValidationError("pre-training needs at least one graph");
  for (const auto& g : graphs)
    if (!model.has_graph(g.id())) throw ValidationError("graph '" + g.id() + "' is not registered in the model");

  LossHistory history;
  for (const auto& g : graphs) history.graph_ids.push_back(g.id());
  double mean_nodes = 0;
  for (const auto& g : graphs) mean_nodes += g.num_nodes();
  mean_nodes /= static_cast<double>(graphs.size());

  nn::Adam<S> adam;
  PlateauScheduler sched(cfg.base_lr, cfg.patience, cfg.lr_factor);
  PairSchedule schedule(graphs, cfg.pair_budget, cfg.seed);
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  const nn::ForwardContext ctx{true, &dropout_rng};
  int nan_epochs = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = train_detail::Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const PreparedGraph& g = graphs[i];
      const double weight = cfg.normalize_loss_by_graph_size ? mean_nodes / g.num_nodes() : 1.0;
      const auto touched = prefix_filter({"theta/" + g.id() + "/", "phi/", "gamma/" + g.id() + "/"});
      std::mt19937_64 batch_rng(derive_seed(cfg.seed, "batches/" + g.id(), static_cast<std::uint64_t>(epoch)));
      const auto& pairs = schedule.pairs(i, epoch);
      double loss_sum = 0.0;
      std::size_t count = 0;
      for (const auto& batch : train_detail::batch_pairs(pairs, g.num_nodes(), cfg.node_batch, batch_rng)) {
        model.zero_grad();
        double loss;
        try {
          loss = pretext_batch(model, g, batch, ctx, true, weight);
        } catch (const NumericalError&) {
          loss = std::numeric_limits<double>::quiet_NaN();
        }
        loss_sum += weight * loss * static_cast<double>(batch.size());
        count += batch.size();
        if (std::isfinite(loss)) train_detail::adam_step(model, adam, touched, trainable, sched.lr());
      }
      rec.graph_losses.push_back(loss_sum / static_cast<double>(count));
    }
    rec.total_loss = 0.0;
    for (double l : rec.graph_losses) rec.total_loss += l;
    sched.step(rec.total_loss);
    rec.seconds = train_detail::seconds_since(t0);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    nan_epochs = std::isnan(rec.total_loss) ? nan_epochs + 1 : 0;
    if (nan_epochs >= cfg.nan_epoch_limit)
      throw NumericalError("training diverged: total loss NaN for " + std::to_string(nan_epochs) +
                           " consecutive epochs (last epoch " + std::to_string(epoch) + ")");
  }
  model.zero_grad();
  return history;
}

/// Joint PairSim pre-training over every graph of the family: minimizes the summed loss.
template <typename S>
LossHistory pretrain_ussl(UniversalModel<S>& model, std::span<const PreparedGraph> family, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  std::vector<std::string> prefixes{"phi/"};
  std::vector<std::string> ids;
  for (const auto& g : family) {
    prefixes.push_back("theta/" + g.id() + "/");
    prefixes.push_back("gamma/" + g.id() + "/");
    ids.push_back(g.id());
  }
  auto history = pretrain_pairsim(model, family, cfg, prefix_filter(prefixes), on_epoch);
  model.set_pretrained_on(ids);
  return history;
}

/// Single-graph self-supervision; the same loop as pretrain_ussl with one graph.
template <typename S>
LossHistory pretrain_ssl(UniversalModel<S>& model, const PreparedGraph& g, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  return pretrain_ussl(model, std::span<const PreparedGraph>(&g, 1), cfg, on_epoch);
}

/// Per-graph PairSim losses at the current parameters (no dropout, no update) and their sum.
struct PretextEvaluation {
  std::vector<double> graph_losses;
  double total = 0.0;
};

template <typename S>
PretextEvaluation evaluate_pretext(UniversalModel<S>& model, std::span<const PreparedGraph> graphs,
                                   const TrainConfig& cfg) {
  PretextEvaluation out;
  PairSchedule schedule(graphs, cfg.pair_budget, cfg.seed);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& pairs = schedule.pairs(i, 0);
    std::mt19937_64 batch_rng(derive_seed(cfg.seed, "eval-batches/" + graphs[i].id()));
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& batch : train_detail::batch_pairs(pairs, graphs[i].num_nodes(), cfg.node_batch, batch_rng)) {
      sum += pretext_batch(model, graphs[i], batch, {}, false) * static_cast<double>(batch.size());
      n += batch.size();
    }
    out.graph_losses.push_back(sum / static_cast<double>(n));
  }
  for (double l : out.graph_losses) out.total += l;
  return out;
}

/// Frozen-backbone representations for every node of `g` (inference mode).
template <typename S>
Mat<S> compute_representations(UniversalModel<S>& model, const PreparedGraph& g, int node_batch) {
  const NodeId n = g.num_nodes();
  Mat<S> out(n, model.config().embed_dim);
  if (model.config().url_variant != UrlVariant::transformer) node_batch = n;
  std::vector<NodeId> nodes;
  for (NodeId start = 0; start < n; start += node_batch) {
    const NodeId end = std::min<NodeId>(n, start + node_batch);
    nodes.resize(static_cast<std::size_t>(end - start));
    std::iota(nodes.begin(), nodes.end(), start);
    out.middleRows(start, end - start) = model.represent(g, nodes, {});
  }
  return out;
}

struct NodeClassificationResult {
  LossHistory history;
  double train_accuracy = 0.0;
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double initial_train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double initial_test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

namespace train_detail {

inline double split_accuracy_or_nan(const auto& logits, const GraphDataset& g, Split s) {
  const auto& mask = g.splits.get(s);
  return mask.empty() ? std::numeric_limits<double>::quiet_NaN() : accuracy(logits, g.labels, mask);
}

template <typename S>
void shuffle_batches(std::vector<NodeId>& nodes, std::uint64_t seed, std::vector<std::span<const NodeId>>& out,
                     int batch) {
  std::mt19937_64 rng(seed);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  out.clear();
  for (std::size_t s = 0; s < nodes.size(); s += static_cast<std::size_t>(batch))
    out.emplace_back(nodes.data() + s, std::min(nodes.size() - s, static_cast<std::size_t>(batch)));
}

}  // namespace train_detail

/// Train a fresh downstream head Ψ on frozen Θ/Φ representations. Only Ψ changes.
template <typename S>
NodeClassificationResult finetune(UniversalModel<S>& model, const PreparedGraph& g, const TrainConfig& cfg,
                                  std::uint64_t head_seed, const EpochCallback& on_epoch = {}) {
  validate(cfg);
  const GraphDataset& ds = *g.data;
  if (!model.has_graph(g.id()))
    throw ValidationError("model has no graph-specific encoder for graph '" + g.id() + "'");
  if (ds.splits.train.empty()) throw ValidationError("graph '" + g.id() + "' has an empty train split");

  const Mat<S> reps = compute_representations(model, g, cfg.node_batch);
  model.set_classifier(g.id(), ds.num_classes, head_seed);
  auto& head = model.psi(g.id());
  const std::string prefix = "psi/" + g.id() + "/";

  NodeClassificationResult result;
  result.history.graph_ids = {g.id()};
  {
    const Mat<S> logits = head.apply(reps);
    result.initial_train_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::train);
    result.initial_test_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::test);
  }
  nn::Adam<S> adam;
  PlateauScheduler sched(cfg.base_lr, cfg.patience, cfg.lr_factor);
  std::vector<NodeId> train_nodes = ds.splits.train;
  std::vector<std::span<const NodeId>> batches;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = train_detail::Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    train_detail::shuffle_batches<S>(train_nodes, derive_seed(head_seed, "finetune-batches", epoch), batches,
                                     cfg.node_batch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (auto batch : batches) {
      Mat<S> x(static_cast<Eigen::Index>(batch.size()), reps.cols());
      std::vector<int> y(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = reps.row(batch[i]);
        y[i] = ds.labels[batch[i]];
      }
      head.fc().weight().zero_grad();
      head.fc().bias().zero_grad();
      const Mat<S> logits = head.forward(x);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) correct += argmax_row(logits.row(r)) == y[r];
      const auto ce = nn::softmax_cross_entropy<S>(logits, y);
      head.backward(ce.grad, false);
      head.visit(prefix, [&](const std::string& name, nn::Param<S>& p) { adam.step(name, p, sched.lr()); });
      loss_sum += ce.loss * static_cast<double>(batch.size());
    }
    rec.graph_losses = {loss_sum / static_cast<double>(train_nodes.size())};
    rec.total_loss = rec.graph_losses[0];
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_nodes.size());
    sched.step(rec.total_loss);
    rec.seconds = train_detail::seconds_since(t0);
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  const Mat<S> logits = head.apply(reps);
  result.train_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::train);
  result.val_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::val);
  result.test_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::test);
  return result;
}

/// End-to-end node classification on one graph: Θ, Φ and Ψ all trained.
template <typename S>
NodeClassificationResult train_supervised(UniversalModel<S>& model, const PreparedGraph& g, const TrainConfig& cfg,
                                          const EpochCallback& on_epoch = {}) {
  validate(cfg);
  const GraphDataset& ds = *g.data;
  if (!model.has_graph(g.id())) model.add_graph(graph_spec_of(g));
  if (!model.has_classifier(g.id()) || model.psi(g.id()).num_classes() != ds.num_classes)
    model.set_classifier(g.id(), ds.num_classes, model.init_seed());
  if (ds.splits.train.empty()) throw ValidationError("graph '" + g.id() + "' has an empty train split");
  auto& head = model.psi(g.id());

  NodeClassificationResult result;
  result.history.graph_ids = {g.id()};
  {
    const Mat<S> logits = head.apply(compute_representations(model, g, cfg.node_batch));
    result.initial_train_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::train);
    result.initial_test_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::test);
  }
  const auto trainable = prefix_filter({"theta/" + g.id() + "/", "phi/", "psi/" + g.id() + "/"});
  nn::Adam<S> adam;
  PlateauScheduler sched(cfg.base_lr, cfg.patience, cfg.lr_factor);
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  const nn::ForwardContext ctx{true, &dropout_rng};
  std::vector<NodeId> train_nodes = ds.splits.train;
  std::vector<std::span<const NodeId>> batches;
  int nan_epochs = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = train_detail::Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr();
    train_detail::shuffle_batches<S>(train_nodes, derive_seed(cfg.seed, "supervised-batches", epoch), batches,
                                     cfg.node_batch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (auto batch : batches) {
      std::vector<int> y(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) y[i] = ds.labels[batch[i]];
      model.zero_grad();
      double loss;
      try {
        const Mat<S> logits = head.forward(model.represent(g, batch, ctx));
        for (Eigen::Index r = 0; r < logits.rows(); ++r) correct += argmax_row(logits.row(r)) == y[r];
        const auto ce = nn::softmax_cross_entropy<S>(logits, y);
        model.backward(head.backward(ce.grad));
        loss = ce.loss;
      } catch (const NumericalError&) {
        loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (std::isfinite(loss)) train_detail::adam_step(model, adam, trainable, trainable, sched.lr());
      loss_sum += loss * static_cast<double>(batch.size());
    }
    rec.graph_losses = {loss_sum / static_cast<double>(train_nodes.size())};
    rec.total_loss = rec.graph_losses[0];
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_nodes.size());
    sched.step(rec.total_loss);
    rec.seconds = train_detail::seconds_since(t0);
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    nan_epochs = std::isnan(rec.total_loss) ? nan_epochs + 1 : 0;
    if (nan_epochs >= cfg.nan_epoch_limit) throw NumericalError("supervised training diverged");
  }
  model.zero_grad();
  const Mat<S> logits = head.apply(compute_representations(model, g, cfg.node_batch));
  result.train_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::train);
  result.val_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::val);
  result.test_accuracy = train_detail::split_accuracy_or_nan(logits, ds, Split::test);
  return result;
}

/// Register a new graph on a pre-trained model and learn only its Θ and Γ by PairSim
/// self-supervision; Φ and every existing graph's parameters stay untouched.
template <typename S>
LossHistory adapt_new_graph(UniversalModel<S>& model, const PreparedGraph& g_new, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
  if (model.has_graph(g_new.id()))
    throw ValidationError("graph '" + g_new.id() + "' is already registered in the model");
  GraphSpec spec = graph_spec_of(g_new);
  spec.num_classes = 0;
  model.add_graph(spec);
  const auto trainable = prefix_filter({"theta/" + g_new.id() + "/", "gamma/" + g_new.id() + "/"});
  return pretrain_pairsim(model, std::span<const PreparedGraph>(&g_new, 1), cfg, trainable, on_epoch);
}

/// Fresh model with Θ/Γ registered for every graph, in order.
template <typename S>
UniversalModel<S> make_model(const ModelConfig& config, std::span<const PreparedGraph> graphs, std::uint64_t init_seed) {
  UniversalModel<S> model(config, init_seed);
  for (const auto& g : graphs) {
    GraphSpec spec = graph_spec_of(g);
    spec.num_classes = 0;
    model.add_graph(spec);
  }
  return model;
}

}  // namespace ussl
