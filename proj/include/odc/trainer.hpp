#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "odc/backbone.hpp"
#include "odc/data.hpp"
#include "odc/kmeans.hpp"
#include "odc/memory.hpp"
#include "odc/metrics.hpp"
#include "odc/rebalance.hpp"

namespace odc {

enum class Algo { ODC, DC };

// Rng::split ids; each stochastic component of a run draws from its own stream.
namespace streams {
enum Stream : std::uint64_t { kInit = 1, kCluster = 2, kShuffle = 3, kRebalance = 4, kReinit = 5, kEval = 6 };
}

const char* to_string(Algo a);
Algo parse_algo(const std::string& s);

struct RunConfig {
  Algo algo = Algo::ODC;
  std::size_t num_clusters = 50;
  std::size_t batch_size = 64;
  int epochs = 50;
  double momentum = 0.5;      // memory momentum m
  int centroid_interval = 10;  // k
  RebalanceConfig rebalance{0, 0};  // min_cluster_size 0 -> max(2, floor(0.2 N / C))
  // Tuned for the small desk-scale backbone; 0.05/0.9 diverges here.
  SgdConfig sgd{0.02, 0.5, 0.0};
  std::size_t hidden_dim = 32;
  std::size_t feature_dim = 16;
  // Multiply the learning rate by 0.1 from this epoch on; 0 disables the step.
  int lr_decay_epoch = 40;
  KmeansOptions kmeans;
  std::uint64_t seed = 0;
  bool dc_uniform_sampling = false;
  std::optional<std::filesystem::path> resume_checkpoint;
  // Clusters for the representation K-Means in the summary; 0 -> number of true classes.
  std::size_t eval_clusters = 0;
  bool check_invariants = false;
};

// Fills the data-dependent defaults and validates. Throws InvalidConfig.
RunConfig resolve_config(RunConfig cfg, std::size_t num_samples);

struct IterationRecord {
  std::size_t iter = 0;  // 1-based
  int epoch = 0;         // 0-based
  double loss = 0.0;     // the weighted loss that was optimized
  double unweighted_loss = 0.0;
  double label_switch_ratio = 0.0;
  std::size_t min_cluster = 0;
  std::size_t max_cluster = 0;
  double wall_time_s = 0.0;  // since training start; not part of the CSV
};

// Receives records as the trainer produces them.
class MetricSink {
 public:
  virtual ~MetricSink() = default;
  virtual void push(const IterationRecord& rec) = 0;
};

struct TrainHooks {
  MetricSink* sink = nullptr;
  // Called after every ODC iteration / DC step with the current memories.
  std::function<void(const IterationRecord&, const Memories&)> on_iteration;
  // Called after every small-cluster pass that changed something.
  std::function<void(const RebalanceReport&, const Memories&)> on_rebalance;
};

struct RunLog {
  RunConfig config;  // resolved
  std::vector<IterationRecord> records;
  std::size_t iterations_per_epoch = 0;
  Backbone initial_backbone;
  Backbone backbone;
  std::vector<int> final_labels;
  Memories final_memories;  // ODC only
  std::size_t rebalance_passes = 0;
  std::size_t rebalance_moved = 0;
  std::size_t splits = 0;
  std::size_t zero_norm_events = 0;
  double wall_time_s = 0.0;
};

RunLog train_odc(const Matrix& data, const RunConfig& cfg, Rng& rng, const TrainHooks& hooks = {});
RunLog train_dc(const Matrix& data, const RunConfig& cfg, Rng& rng, const TrainHooks& hooks = {});
RunLog train(const Matrix& data, const RunConfig& cfg, Rng& rng, const TrainHooks& hooks = {});

// Loads cfg.resume_checkpoint and checks it fits the data. Throws CorruptCheckpoint.
Backbone resume(const RunConfig& cfg, std::size_t input_dim);

// L2-normalized features of every row.
Matrix normalized_features(const Backbone& b, const Matrix& data);

struct Evaluation {
  double nmi = 0.0;     // K-Means on normalized features vs. truth
  double purity = 0.0;
  std::size_t clusters = 0;
};

// K-Means with k clusters on the backbone's normalized features, scored against truth.
Evaluation evaluate_representation(const Backbone& b, const Matrix& data, std::span<const int> truth, std::size_t k,
                                   Rng& rng, const KmeansOptions& opts = {});

struct RunSummary {
  Evaluation final_eval;
  Evaluation initial_eval;
  double pseudo_label_nmi = 0.0;
  double pseudo_label_purity = 0.0;
  std::optional<LossStability> stability;
  double final_switch_ratio = 0.0;  // mean over the last epoch
};

// Scores a run against ground truth. Uses a seed derived from the run seed.
RunSummary summarize(const RunLog& log, const Dataset& data);

// iter,epoch,loss,unweighted_loss,label_switch_ratio,min_cluster,max_cluster
std::string metrics_csv(const RunLog& log);
std::string csv_row(const IterationRecord& r);
extern const char* const kMetricsCsvHeader;

// Summary JSON text; wall time is included only when include_timing is set.
std::string summary_json(const RunLog& log, const RunSummary& summary, bool include_timing);
std::string config_json(const RunConfig& cfg);

}  // namespace odc
