#include "odc/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "odc/data.hpp"
#include "odc/error.hpp"
#include "odc/sink.hpp"
#include "odc/trainer.hpp"

namespace odc::cli {

namespace {

namespace fs = std::filesystem;

struct TrainFlags {
  std::string algo = "odc";
  std::size_t clusters = 0;
  std::size_t batch_size = 64;
  int epochs = 50;
  double momentum = 0.5;
  int centroid_interval = 10;
  std::size_t min_cluster_size = 0;
  int rebalance_interval = 0;
  double lr = 0.02;
  double sgd_momentum = 0.5;
  double weight_decay = 0.0;
  int lr_decay_epoch = 40;
  std::size_t hidden_dim = 32;
  std::size_t feature_dim = 16;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
  bool uniform_sampling = false;
  std::string resume;
  std::size_t eval_clusters = 0;
};

struct BlobFlags {
  BlobSpec spec;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--algo", f.algo, "odc or dc")->check(CLI::IsMember({"odc", "dc"}));
  app->add_option("--clusters", f.clusters, "cluster count C; 0 = 10x the number of true classes");
  app->add_option("--batch-size", f.batch_size, "mini-batch size B")->check(CLI::PositiveNumber);
  app->add_option("--epochs", f.epochs, "passes over the data")->check(CLI::NonNegativeNumber);
  app->add_option("--momentum", f.momentum, "samples-memory momentum m in (0,1] (ImageNet-scale setting: 0.5)");
  app->add_option("--centroid-interval", f.centroid_interval, "refresh dirty centroids every k iterations (ImageNet-scale setting: 10)")
      ->check(CLI::PositiveNumber);
  app->add_option("--min-cluster-size", f.min_cluster_size,
                  "small-cluster threshold; 0 = max(2, floor(0.2 N/C)) (ImageNet-scale setting: 20)");
  app->add_option("--rebalance-interval", f.rebalance_interval,
                  "iterations between small-cluster passes; 0 = same as --centroid-interval");
  app->add_option("--lr", f.lr, "SGD learning rate (ImageNet-scale setting: 0.04-0.06)");
  app->add_option("--sgd-momentum", f.sgd_momentum, "SGD momentum");
  app->add_option("--weight-decay", f.weight_decay, "SGD weight decay");
  app->add_option("--lr-decay-epoch", f.lr_decay_epoch, "multiply lr by 0.1 from this epoch; 0 = never");
  app->add_option("--hidden-dim", f.hidden_dim, "extractor width")->check(CLI::PositiveNumber);
  app->add_option("--feature-dim", f.feature_dim, "feature (head output) width");
  app->add_option("--kmeans-restarts", f.kmeans_restarts, "k-means++ restarts per global clustering")
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", f.seed, "run seed");
  app->add_flag("--uniform-sampling", f.uniform_sampling, "dc: uniform-over-cluster sampling instead of loss re-weighting");
  app->add_option("--resume", f.resume, "start from a backbone checkpoint (fine-tuning)");
  app->add_option("--eval-clusters", f.eval_clusters, "K for the evaluation K-Means; 0 = number of true classes");
}

void add_blob_flags(CLI::App* app, BlobSpec& s) {
  app->add_option("--classes", s.num_classes, "true class count")->check(CLI::PositiveNumber);
  app->add_option("--dim", s.dim, "feature dimension")->check(CLI::PositiveNumber);
  app->add_option("--n", s.num_samples, "total samples")->check(CLI::PositiveNumber);
  app->add_option("--longtail-ratio", s.longtail_ratio, "largest/smallest class size (typical sweep: 1 to 64)");
  app->add_option("--separation", s.separation, "minimum class-mean distance in noise std units");
}

RunConfig to_config(const TrainFlags& f, const Dataset& data) {
  RunConfig c;
  c.algo = parse_algo(f.algo);
  c.num_clusters = f.clusters;
  if (c.num_clusters == 0) {
    if (!data.has_labels) throw Error(ErrorCode::InvalidConfig, "--clusters is required when the data has no label column");
    c.num_clusters = 10 * data.num_true_classes();
  }
  c.batch_size = f.batch_size;
  c.epochs = f.epochs;
  c.momentum = f.momentum;
  c.centroid_interval = f.centroid_interval;
  c.rebalance.min_cluster_size = f.min_cluster_size;
  c.rebalance.check_every = f.rebalance_interval;
  c.sgd = SgdConfig{f.lr, f.sgd_momentum, f.weight_decay};
  c.lr_decay_epoch = f.lr_decay_epoch;
  c.hidden_dim = f.hidden_dim;
  c.feature_dim = f.feature_dim;
  c.kmeans.restarts = f.kmeans_restarts;
  c.seed = f.seed;
  c.dc_uniform_sampling = f.uniform_sampling;
  if (!f.resume.empty()) c.resume_checkpoint = f.resume;
  c.eval_clusters = f.eval_clusters;
  return resolve_config(c, data.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_grid(const std::string& s, T fallback, const char* name) {
  if (s.empty()) return {fallback};
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    std::istringstream in(item);
    T v{};
    in >> v;
    if (!in || !in.eof()) throw Error(ErrorCode::InvalidConfig, std::string("bad value '") + item + "' in " + name);
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, std::string("empty grid for ") + name);
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::CorruptCheckpoint:
      return kIo;
    case ErrorCode::InvalidConfig:
      return kUsage;
    default:
      return kRuntimeAbort;
  }
}

// ---- gen-data ----

int cmd_gen_data(const BlobSpec& spec, const std::string& out) {
  write_csv(gen_blobs(spec), out);
  return kOk;
}

// ---- train ----

struct TrainOutputs {
  std::string out_dir = "odc_run";
  std::string save_checkpoint;
  std::string save_memory;
  std::string save_labels;
  bool no_timing = false;
  bool check_invariants = false;
};

int cmd_train(const std::string& data_path, const TrainFlags& flags, const TrainOutputs& outs) {
  const Dataset data = load_csv(data_path);
  RunConfig cfg = to_config(flags, data);
  cfg.check_invariants = outs.check_invariants;
  const fs::path dir(outs.out_dir);
  ensure_dir(dir);

  std::ofstream csv(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  if (!csv) throw Error(ErrorCode::IoError, "cannot open " + (dir / "metrics.csv").string());
  csv << kMetricsCsvHeader << '\n';
  RunLog log;
  {
    ChannelSink sink([&csv](const IterationRecord& r) { csv << csv_row(r) << '\n'; });
    TrainHooks hooks;
    hooks.sink = &sink;
    Rng rng(cfg.seed);
    log = train(data.points, cfg, rng, hooks);
    sink.close();
  }
  csv.close();
  if (!csv) throw Error(ErrorCode::IoError, "write failed for metrics.csv");

  const RunSummary summary = summarize(log, data);
  write_text(dir / "summary.json", summary_json(log, summary, !outs.no_timing));
  if (!outs.save_checkpoint.empty()) save_checkpoint(log.backbone, outs.save_checkpoint);
  if (!outs.save_memory.empty()) save_memory_snapshot(log.final_memories, outs.save_memory);
  if (!outs.save_labels.empty()) {
    Dataset labels;
    labels.points = Matrix(log.final_labels.size(), 0);
    labels.labels = log.final_labels;
    labels.has_labels = true;
    write_csv(labels, outs.save_labels);
  }
  std::cout << "final_nmi " << format_double(summary.final_eval.nmi) << " pseudo_label_nmi "
            << format_double(summary.pseudo_label_nmi) << '\n';
  return kOk;
}

// ---- sweep ----

struct SweepFlags {
  std::string data;
  BlobSpec blobs;
  std::uint64_t data_seed = 0;
  std::string interval_grid;
  std::string min_size_grid;
  std::string momentum_grid;
  std::string longtail_grid;
  int repeats = 1;
  int jobs = 1;
  std::string out = "sweep.csv";
};

struct GridPoint {
  int centroid_interval;
  std::size_t min_cluster_size;
  double momentum;
  double longtail_ratio;
  int repeat;
  std::uint64_t seed;
};

struct SweepRow {
  std::string status = "ok";
  RunSummary summary;
};

int cmd_sweep(const SweepFlags& sf, const TrainFlags& base) {
  const auto intervals = parse_grid<int>(sf.interval_grid, base.centroid_interval, "--centroid-interval-grid");
  const auto min_sizes = parse_grid<std::size_t>(sf.min_size_grid, base.min_cluster_size, "--min-cluster-size-grid");
  const auto momenta = parse_grid<double>(sf.momentum_grid, base.momentum, "--momentum-grid");
  const auto ratios = parse_grid<double>(sf.longtail_grid, sf.blobs.longtail_ratio, "--longtail-ratio-grid");
  if (!sf.data.empty() && !sf.longtail_grid.empty()) {
    throw Error(ErrorCode::InvalidConfig, "--longtail-ratio-grid needs generated data; drop --data");
  }
  if (sf.repeats < 1) throw Error(ErrorCode::InvalidConfig, "--repeats must be >= 1");

  // Replicate r uses the same derived seed at every grid point so runs are paired.
  std::vector<GridPoint> grid;
  for (double ratio : ratios)
    for (int k : intervals)
      for (std::size_t ms : min_sizes)
        for (double m : momenta)
          for (int r = 0; r < sf.repeats; ++r) grid.push_back({k, ms, m, ratio, r, mix_seed(base.seed, static_cast<std::uint64_t>(r))});

  std::optional<Dataset> file_data;
  if (!sf.data.empty()) file_data = load_csv(sf.data);

  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::optional<Error> fatal;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      const GridPoint& g = grid[i];
      try {
        Dataset data;
        if (file_data) {
          data = *file_data;
        } else {
          BlobSpec spec = sf.blobs;
          spec.longtail_ratio = g.longtail_ratio;
          spec.seed = sf.data_seed;
          data = gen_blobs(spec);
        }
        TrainFlags f = base;
        f.centroid_interval = g.centroid_interval;
        f.min_cluster_size = g.min_cluster_size;
        f.momentum = g.momentum;
        f.seed = g.seed;
        const RunConfig cfg = to_config(f, data);
        Rng rng(cfg.seed);
        const RunLog log = train(data.points, cfg, rng);
        rows[i].summary = summarize(log, data);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Unsatisfiable) {
          rows[i].status = "unsatisfiable";
        } else if (e.code() == ErrorCode::NonFinite) {
          rows[i].status = "nonfinite";
        } else {
          std::lock_guard lock(err_mu);
          if (!fatal) fatal = e;
        }
      }
    }
  };
  const int jobs = std::max(1, sf.jobs);
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (fatal) throw *fatal;

  std::ostringstream out;
  out << "index,centroid_interval,min_cluster_size,momentum,longtail_ratio,repeat,seed,status,final_nmi,final_purity,"
         "pseudo_label_nmi,max_boundary_jump,max_any_jump,final_switch_ratio\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GridPoint& g = grid[i];
    const SweepRow& r = rows[i];
    out << i << ',' << g.centroid_interval << ',' << g.min_cluster_size << ',' << format_double(g.momentum) << ','
        << format_double(g.longtail_ratio) << ',' << g.repeat << ',' << g.seed << ',' << r.status << ',';
    if (r.status == "ok") {
      const auto& s = r.summary;
      out << format_double(s.final_eval.nmi) << ',' << format_double(s.final_eval.purity) << ','
          << format_double(s.pseudo_label_nmi) << ','
          << (s.stability ? format_double(s.stability->max_boundary_jump) : "") << ','
          << (s.stability ? format_double(s.stability->max_any_jump) : "") << ','
          << format_double(s.final_switch_ratio);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  write_text(sf.out, out.str());
  return kOk;
}

// ---- eval ----

struct EvalFlags {
  std::string pred;
  std::string truth;
  std::string checkpoint;
  std::string data;
  std::size_t clusters = 0;
  std::uint64_t seed = 0;
};

std::vector<int> labels_of(const std::string& path) {
  Dataset d = load_csv(path);
  if (!d.has_labels) throw Error(ErrorCode::ParseError, path + ": no 'label' column");
  return d.labels;
}

int cmd_eval(const EvalFlags& f) {
  nlohmann::ordered_json j;
  if (!f.checkpoint.empty()) {
    if (f.data.empty()) throw Error(ErrorCode::InvalidConfig, "--checkpoint needs --data");
    const Dataset data = load_csv(f.data);
    if (!data.has_labels) throw Error(ErrorCode::ParseError, f.data + ": no 'label' column");
    const Backbone b = load_checkpoint(f.checkpoint);
    if (b.dims.input_dim != data.points.cols()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint input dim does not match data");
    const std::size_t k = f.clusters ? f.clusters : data.num_true_classes();
    Rng rng(f.seed);
    const Evaluation e = evaluate_representation(b, data.points, data.labels, k, rng);
    j["nmi"] = e.nmi;
    j["purity"] = e.purity;
    j["clusters"] = k;
    j["n"] = data.size();
  } else {
    if (f.pred.empty() || f.truth.empty()) throw Error(ErrorCode::InvalidConfig, "eval needs --pred and --truth, or --checkpoint and --data");
    const auto pred = labels_of(f.pred);
    const auto truth = labels_of(f.truth);
    j["nmi"] = nmi(pred, truth);
    j["purity"] = purity(pred, truth);
    j["n"] = pred.size();
  }
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Online deep clustering on tabular features.\n"
               "Option precedence: command-line flags > --config file > built-in defaults."};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  BlobSpec gen_spec;
  std::string gen_out = "data.csv";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic Gaussian-mixture CSV");
  add_blob_flags(gen, gen_spec);
  gen->add_option("--seed", gen_spec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output CSV");

  std::string train_data;
  TrainFlags train_flags;
  TrainOutputs train_outs;
  auto* tr = app.add_subcommand("train", "train with ODC or the DC baseline");
  tr->add_option("--data", train_data, "input CSV")->required();
  add_train_flags(tr, train_flags);
  tr->add_option("--out-dir", train_outs.out_dir, "directory for metrics.csv and summary.json");
  tr->add_option("--save-checkpoint", train_outs.save_checkpoint, "write the final backbone here");
  tr->add_option("--save-memory", train_outs.save_memory, "write the final memories snapshot here");
  tr->add_option("--save-labels", train_outs.save_labels, "write final pseudo-labels CSV here");
  tr->add_flag("--no-timing", train_outs.no_timing, "omit wall time from summary.json (byte-reproducible output)");
  tr->add_flag("--check-invariants", train_outs.check_invariants, "verify memory invariants after every iteration");

  SweepFlags sweep_flags;
  TrainFlags sweep_train;
  auto* sw = app.add_subcommand("sweep", "grid of training runs, one CSV row per run");
  sw->add_option("--data", sweep_flags.data, "input CSV (default: generated blobs)");
  add_blob_flags(sw, sweep_flags.blobs);
  sw->add_option("--data-seed", sweep_flags.data_seed, "seed for generated blobs");
  add_train_flags(sw, sweep_train);
  sw->add_option("--centroid-interval-grid", sweep_flags.interval_grid, "comma list, e.g. 1,5,20");
  sw->add_option("--min-cluster-size-grid", sweep_flags.min_size_grid, "comma list");
  sw->add_option("--momentum-grid", sweep_flags.momentum_grid, "comma list");
  sw->add_option("--longtail-ratio-grid", sweep_flags.longtail_grid, "comma list, e.g. 1,4,16,64");
  sw->add_option("--repeats", sweep_flags.repeats, "seeds per grid point");
  sw->add_option("--jobs", sweep_flags.jobs, "parallel workers");
  sw->add_option("--out", sweep_flags.out, "aggregate CSV");

  EvalFlags eval_flags;
  auto* ev = app.add_subcommand("eval", "score labels or a checkpoint against ground truth (JSON on stdout)");
  ev->add_option("--pred", eval_flags.pred, "CSV with a 'label' column");
  ev->add_option("--truth", eval_flags.truth, "CSV with a 'label' column");
  ev->add_option("--checkpoint", eval_flags.checkpoint, "backbone checkpoint");
  ev->add_option("--data", eval_flags.data, "data CSV for --checkpoint mode");
  ev->add_option("--clusters", eval_flags.clusters, "K-Means K; 0 = number of true classes");
  ev->add_option("--seed", eval_flags.seed, "K-Means seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_spec, gen_out);
    if (tr->parsed()) return cmd_train(train_data, train_flags, train_outs);
    if (sw->parsed()) return cmd_sweep(sweep_flags, sweep_train);
    if (ev->parsed()) return cmd_eval(eval_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return kUsage;
}

}  // namespace odc::cli
