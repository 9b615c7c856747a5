#include "odc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "odc/error.hpp"

namespace odc {

namespace {

using Clock = std::chrono::steady_clock;

using namespace streams;

Matrix gather_rows(const Matrix& data, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), data.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = data.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::pair<std::size_t, std::size_t> min_max(const std::vector<std::size_t>& counts) {
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  return {*lo, *hi};
}

Backbone initial_backbone(const Matrix& data, const RunConfig& cfg, Rng& rng) {
  if (cfg.resume_checkpoint) return resume(cfg, data.cols());
  BackboneDims dims{data.cols(), cfg.hidden_dim, cfg.feature_dim, cfg.num_clusters};
  return Backbone::random(dims, rng);
}

double effective_lr(const RunConfig& cfg, int epoch) {
  if (cfg.lr_decay_epoch > 0 && epoch >= cfg.lr_decay_epoch) return cfg.sgd.learning_rate * 0.1;
  return cfg.sgd.learning_rate;
}

void check_finite(double loss, std::size_t iter) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::NonFinite, "loss became " + format_double(loss) + " at iteration " + std::to_string(iter));
  }
}

void assert_consistent(const Memories& m, const char* where) {
  const std::string problem = check_consistency(m.samples, m.centroids);
  if (!problem.empty()) throw std::logic_error(std::string("memory invariant violated ") + where + ": " + problem);
}

struct StepOutput {
  double loss;
  double unweighted;
};

// One supervised SGD step on `batch` with the given pseudo-labels.
StepOutput supervised_step(Backbone& b, BackboneParams& velocity, const ForwardCache& cache, std::span<const int> labels,
                           std::span<const double> weights, SgdConfig sgd, std::size_t iter) {
  const LossResult weighted = weighted_ce_loss(cache.logits, labels, weights);
  const std::vector<double> ones(weights.size(), 1.0);
  const double unweighted = weighted_ce_loss(cache.logits, labels, ones).loss;
  check_finite(weighted.loss, iter);
  const BackwardResult grads = backward(b, cache, weighted.dlogits);
  sgd_step(b, grads.grads, sgd, velocity);
  return {weighted.loss, unweighted};
}

// Uniform-over-clusters sample order: every nonempty cluster contributes
// about N / (#nonempty) draws, with replacement only when it is too small.
std::vector<std::size_t> uniform_cluster_order(const std::vector<int>& labels, std::size_t num_clusters, Rng& rng) {
  std::vector<std::vector<std::size_t>> members(num_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::size_t nonempty = 0;
  for (const auto& m : members) nonempty += !m.empty();
  const std::size_t per_cluster = labels.size() / nonempty + 1;
  std::vector<std::size_t> order;
  order.reserve(per_cluster * nonempty);
  for (auto& m : members) {
    if (m.empty()) continue;
    if (m.size() > per_cluster) {
      rng.shuffle(m);
      order.insert(order.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(per_cluster));
    } else {
      for (std::size_t j = 0; j < per_cluster; ++j) order.push_back(m[static_cast<std::size_t>(rng.below(m.size()))]);
    }
  }
  rng.shuffle(order);
  order.resize(labels.size());
  return order;
}

void emit(RunLog& log, const TrainHooks& hooks, const IterationRecord& rec, const Memories& mem) {
  log.records.push_back(rec);
  if (hooks.sink) hooks.sink->push(rec);
  if (hooks.on_iteration) hooks.on_iteration(rec, mem);
}

}  // namespace

const char* to_string(Algo a) { return a == Algo::ODC ? "odc" : "dc"; }

Algo parse_algo(const std::string& s) {
  if (s == "odc") return Algo::ODC;
  if (s == "dc") return Algo::DC;
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + s + "' (expected odc or dc)");
}

RunConfig resolve_config(RunConfig cfg, std::size_t num_samples) {
  if (cfg.num_clusters < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 clusters");
  if (cfg.num_clusters > num_samples) throw Error(ErrorCode::InvalidConfig, "more clusters than samples");
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be >= 1");
  if (cfg.epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
  if (cfg.centroid_interval < 1) throw Error(ErrorCode::InvalidConfig, "centroid interval must be >= 1");
  if (!(cfg.momentum > 0.0 && cfg.momentum <= 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum m must be in (0, 1]");
  if (!(cfg.sgd.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be >= 0");
  if (!(cfg.sgd.momentum >= 0.0 && cfg.sgd.momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "SGD momentum must be in [0, 1)");
  if (!(cfg.sgd.weight_decay >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weight decay must be >= 0");
  if (cfg.feature_dim < 2) throw Error(ErrorCode::InvalidConfig, "feature dim must be >= 2");
  if (cfg.hidden_dim < 1) throw Error(ErrorCode::InvalidConfig, "hidden dim must be >= 1");
  if (cfg.rebalance.check_every < 0) throw Error(ErrorCode::InvalidConfig, "rebalance interval must be >= 0");
  if (cfg.rebalance.min_cluster_size == 0) {
    cfg.rebalance.min_cluster_size =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(num_samples) /
                                                                     static_cast<double>(cfg.num_clusters))));
  }
  if (cfg.rebalance.check_every == 0) cfg.rebalance.check_every = cfg.centroid_interval;
  return cfg;
}

Backbone resume(const RunConfig& cfg, std::size_t input_dim) {
  if (!cfg.resume_checkpoint) throw Error(ErrorCode::CorruptCheckpoint, "no checkpoint path given");
  Backbone b = load_checkpoint(*cfg.resume_checkpoint);
  if (b.dims.input_dim != input_dim || b.dims.num_classes != cfg.num_clusters) {
    throw Error(ErrorCode::CorruptCheckpoint, "checkpoint dims (input " + std::to_string(b.dims.input_dim) +
                                                  ", classes " + std::to_string(b.dims.num_classes) +
                                                  ") do not fit data/config");
  }
  return b;
}

Matrix normalized_features(const Backbone& b, const Matrix& data) {
  Matrix f = extract_features(b, data);
  for (std::size_t i = 0; i < f.rows(); ++i) l2_normalize_inplace(f.row(i));
  return f;
}

RunLog train_odc(const Matrix& data, const RunConfig& raw_cfg, Rng& rng, const TrainHooks& hooks) {
  const auto start = Clock::now();
  RunLog log;
  log.config = resolve_config(raw_cfg, data.rows());
  const RunConfig& cfg = log.config;
  Rng init_rng = rng.split(kInit);
  Rng cluster_rng = rng.split(kCluster);
  Rng shuffle_rng = rng.split(kShuffle);
  Rng rebalance_rng = rng.split(kRebalance);

  Backbone b = initial_backbone(data, cfg, init_rng);
  log.initial_backbone = b;
  Memories mem = init_memories(normalized_features(b, data), cfg.num_clusters, cluster_rng, cfg.kmeans);

  auto run_rebalance = [&] {
    RebalanceReport rep = handle_small_clusters(mem.samples, mem.centroids, cfg.rebalance, rebalance_rng);
    ++log.rebalance_passes;
    log.rebalance_moved += rep.absorbed.size();
    for (const auto& s : rep.splits) log.rebalance_moved += s.moved.size();
    log.splits += rep.splits.size();
    if (cfg.check_invariants) assert_consistent(mem, "after rebalance");
    if (hooks.on_rebalance && !rep.empty()) hooks.on_rebalance(rep, mem);
  };
  run_rebalance();

  const std::size_t n = data.rows();
  const MomentumConfig mcfg{cfg.momentum};
  BackboneParams velocity = BackboneParams::zeros(b.dims);
  std::vector<std::size_t> order(n);
  log.iterations_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    SgdConfig sgd = cfg.sgd;
    sgd.learning_rate = effective_lr(cfg, epoch);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + begin, std::min(cfg.batch_size, n - begin));
      ++iter;
      // 1. forward
      const ForwardCache cache = forward(b, gather_rows(data, idx));
      // 2. read pseudo-labels, weighted loss, SGD
      std::vector<int> labels(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) labels[r] = mem.samples.labels[idx[r]];
      const Vector weights = class_weights(mem.samples.counts);
      const StepOutput step = supervised_step(b, velocity, cache, labels, weights, sgd, iter);
      // 3. momentum update of the samples memory and nearest-centroid reassignment
      std::size_t changed = 0;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        try {
          momentum_update(mem.samples, idx[r], cache.features.row(r), mcfg);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ZeroNorm) throw;
        }
        changed += reassign(mem.samples, mem.centroids, idx[r]).changed();
      }
      // 4. refresh the centroids touched since the last refresh
      bool refreshed = false;
      if (iter % static_cast<std::size_t>(cfg.centroid_interval) == 0) {
        recompute_dirty(mem.samples, mem.centroids);
        refreshed = true;
      }
      if (iter % static_cast<std::size_t>(cfg.rebalance.check_every) == 0) {
        if (!refreshed) recompute_dirty(mem.samples, mem.centroids);
        run_rebalance();
      }
      if (cfg.check_invariants) assert_consistent(mem, "after iteration");

      const auto [lo, hi] = min_max(mem.samples.counts);
      IterationRecord rec{iter,
                          epoch,
                          step.loss,
                          step.unweighted,
                          static_cast<double>(changed) / static_cast<double>(idx.size()),
                          lo,
                          hi,
                          std::chrono::duration<double>(Clock::now() - start).count()};
      emit(log, hooks, rec, mem);
    }
  }
  log.backbone = std::move(b);
  log.final_labels = mem.samples.labels;
  log.zero_norm_events = mem.samples.zero_norm_events;
  log.final_memories = std::move(mem);
  log.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return log;
}

RunLog train_dc(const Matrix& data, const RunConfig& raw_cfg, Rng& rng, const TrainHooks& hooks) {
  const auto start = Clock::now();
  RunLog log;
  log.config = resolve_config(raw_cfg, data.rows());
  const RunConfig& cfg = log.config;
  Rng init_rng = rng.split(kInit);
  Rng cluster_rng = rng.split(kCluster);
  Rng shuffle_rng = rng.split(kShuffle);
  Rng reinit_rng = rng.split(kReinit);

  Backbone b = initial_backbone(data, cfg, init_rng);
  log.initial_backbone = b;
  const std::size_t n = data.rows();
  BackboneParams velocity = BackboneParams::zeros(b.dims);
  log.iterations_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

  Memories mem;
  std::vector<int> previous;
  std::size_t iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Offline clustering of the whole dataset with the current network.
    const Matrix feats = normalized_features(b, data);
    KmeansResult km = kmeans(feats, cfg.num_clusters, cluster_rng, cfg.kmeans);
    mem.samples.features = feats;
    mem.samples.labels = std::move(km.assignments);
    mem.samples.counts = histogram(mem.samples.labels, cfg.num_clusters);
    mem.centroids.centroids = std::move(km.centroids);
    mem.centroids.dirty.clear();

    reinit_classifier(b, reinit_rng);
    velocity.classifier = BackboneParams::zeros(b.dims).classifier;

    std::vector<std::size_t> order;
    Vector weights;
    if (cfg.dc_uniform_sampling) {
      order = uniform_cluster_order(mem.samples.labels, cfg.num_clusters, shuffle_rng);
      weights.assign(cfg.num_clusters, 1.0);
    } else {
      order.resize(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      shuffle_rng.shuffle(order);
      weights = class_weights(mem.samples.counts);
    }
    SgdConfig sgd = cfg.sgd;
    sgd.learning_rate = effective_lr(cfg, epoch);
    const auto [lo, hi] = min_max(mem.samples.counts);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + begin, std::min(cfg.batch_size, n - begin));
      ++iter;
      const ForwardCache cache = forward(b, gather_rows(data, idx));
      std::vector<int> labels(idx.size());
      std::size_t changed = 0;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        labels[r] = mem.samples.labels[idx[r]];
        if (!previous.empty()) changed += previous[idx[r]] != labels[r];
      }
      const StepOutput step = supervised_step(b, velocity, cache, labels, weights, sgd, iter);
      IterationRecord rec{iter,
                          epoch,
                          step.loss,
                          step.unweighted,
                          static_cast<double>(changed) / static_cast<double>(idx.size()),
                          lo,
                          hi,
                          std::chrono::duration<double>(Clock::now() - start).count()};
      emit(log, hooks, rec, mem);
    }
    previous = mem.samples.labels;
  }
  log.backbone = std::move(b);
  log.final_labels = mem.samples.labels;
  log.final_memories = std::move(mem);
  log.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return log;
}

RunLog train(const Matrix& data, const RunConfig& cfg, Rng& rng, const TrainHooks& hooks) {
  return cfg.algo == Algo::ODC ? train_odc(data, cfg, rng, hooks) : train_dc(data, cfg, rng, hooks);
}

Evaluation evaluate_representation(const Backbone& b, const Matrix& data, std::span<const int> truth, std::size_t k,
                                   Rng& rng, const KmeansOptions& opts) {
  const KmeansResult km = kmeans(normalized_features(b, data), k, rng, opts);
  return Evaluation{nmi(km.assignments, truth), purity(km.assignments, truth), k};
}

RunSummary summarize(const RunLog& log, const Dataset& data) {
  RunSummary s;
  if (!log.records.empty()) {
    const int last_epoch = log.records.back().epoch;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : log.records) {
      if (r.epoch != last_epoch) continue;
      sum += r.label_switch_ratio;
      ++count;
    }
    s.final_switch_ratio = sum / static_cast<double>(count);
    std::vector<double> curve;
    for (const auto& r : log.records) curve.push_back(r.unweighted_loss);
    if (curve.size() >= 2 * std::max<std::size_t>(log.iterations_per_epoch, kStabilityWindow)) {
      s.stability = loss_stability(curve, log.iterations_per_epoch);
    }
  }
  if (!data.has_labels) return s;
  const std::size_t k = log.config.eval_clusters ? log.config.eval_clusters : data.num_true_classes();
  Rng eval_rng(mix_seed(log.config.seed, kEval));
  Rng initial_rng = eval_rng;
  s.final_eval = evaluate_representation(log.backbone, data.points, data.labels, k, eval_rng, log.config.kmeans);
  s.initial_eval = evaluate_representation(log.initial_backbone, data.points, data.labels, k, initial_rng, log.config.kmeans);
  if (!log.final_labels.empty()) {
    s.pseudo_label_nmi = nmi(log.final_labels, data.labels);
    s.pseudo_label_purity = purity(log.final_labels, data.labels);
  }
  return s;
}

const char* const kMetricsCsvHeader = "iter,epoch,loss,unweighted_loss,label_switch_ratio,min_cluster,max_cluster";

std::string csv_row(const IterationRecord& r) {
  return std::to_string(r.iter) + "," + std::to_string(r.epoch) + "," + format_double(r.loss) + "," +
         format_double(r.unweighted_loss) + "," + format_double(r.label_switch_ratio) + "," +
         std::to_string(r.min_cluster) + "," + std::to_string(r.max_cluster);
}

std::string metrics_csv(const RunLog& log) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : log.records) out += csv_row(r) + "\n";
  return out;
}

namespace {

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["algo"] = to_string(c.algo);
  j["clusters"] = c.num_clusters;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["momentum"] = c.momentum;
  j["centroid_interval"] = c.centroid_interval;
  j["min_cluster_size"] = c.rebalance.min_cluster_size;
  j["rebalance_interval"] = c.rebalance.check_every;
  j["lr"] = c.sgd.learning_rate;
  j["sgd_momentum"] = c.sgd.momentum;
  j["weight_decay"] = c.sgd.weight_decay;
  j["lr_decay_epoch"] = c.lr_decay_epoch;
  j["hidden_dim"] = c.hidden_dim;
  j["feature_dim"] = c.feature_dim;
  j["kmeans_restarts"] = c.kmeans.restarts;
  j["kmeans_max_iters"] = c.kmeans.max_iters;
  j["kmeans_tol"] = c.kmeans.tol;
  j["seed"] = c.seed;
  j["uniform_sampling"] = c.dc_uniform_sampling;
  j["resume"] = c.resume_checkpoint ? nlohmann::ordered_json(c.resume_checkpoint->string()) : nlohmann::ordered_json();
  j["eval_clusters"] = c.eval_clusters;
  return j;
}

}  // namespace

std::string config_json(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

std::string summary_json(const RunLog& log, const RunSummary& s, bool include_timing) {
  nlohmann::ordered_json j;
  j["final_nmi"] = s.final_eval.nmi;
  j["final_purity"] = s.final_eval.purity;
  j["initial_nmi"] = s.initial_eval.nmi;
  j["eval_clusters"] = s.final_eval.clusters;
  j["pseudo_label_nmi"] = s.pseudo_label_nmi;
  j["pseudo_label_purity"] = s.pseudo_label_purity;
  j["iterations"] = log.records.size();
  j["iterations_per_epoch"] = log.iterations_per_epoch;
  j["final_loss"] = log.records.empty() ? 0.0 : log.records.back().loss;
  j["final_switch_ratio"] = s.final_switch_ratio;
  if (s.stability) {
    j["max_boundary_jump"] = s.stability->max_boundary_jump;
    j["max_interior_jump"] = s.stability->max_interior_jump;
    j["max_any_jump"] = s.stability->max_any_jump;
  }
  j["rebalance"] = {{"passes", log.rebalance_passes}, {"moved", log.rebalance_moved}, {"splits", log.splits}};
  j["zero_norm_events"] = log.zero_norm_events;
  j["config"] = config_to_json(log.config);
  if (include_timing) j["wall_time_s"] = log.wall_time_s;
  return j.dump(2) + "\n";
}

}  // namespace odc
