#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "awfnet/dataset.hpp"
#include "awfnet/losses.hpp"
#include "awfnet/metrics.hpp"
#include "awfnet/network.hpp"

namespace awfnet {

struct AugmentConfig {
  double random_rotation_degrees = 10.0;  // train split only
  bool intensity_normalization = true;
};

struct TrainConfig {
  double lr = 1e-4;  // Adam, default betas
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  int max_epochs = 30;
  int early_stop_patience = 20;
  double early_stop_min_delta = 1e-4;
  LossConfig loss;
  std::uint64_t seed = 0;
  int threads = 1;  // recorded in the run record; execution is sequential
  AugmentConfig augment;

  void validate() const {
    if (lr <= 0) throw ConfigError("train: lr must be > 0");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (early_stop_patience < 1)
      throw ConfigError("train: patience must be >= 1");
    if (early_stop_min_delta < 0)
      throw ConfigError("train: min_delta must be >= 0");
    if (augment.random_rotation_degrees < 0)
      throw ConfigError("train: rotation degrees must be >= 0");
  }
};

/// Patience counter on the validation loss. An improvement must be strictly
/// greater than min_delta to reset the counter.
struct EarlyStopper {
  double min_delta = 1e-4;
  int patience = 20;
  double best = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  bool observe(double value) {
    if (best - value > min_delta) {
      best = value;
      epochs_since_improvement = 0;
      return true;
    }
    ++epochs_since_improvement;
    return false;
  }
  bool should_stop() const { return epochs_since_improvement >= patience; }
};

class Adam {
 public:
  Adam(Registry<float>& reg, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
       float eps = 1e-8f);
  void step();

 private:
  Registry<float>* reg_;
  std::vector<std::vector<float>> m_, v_;
  long t_ = 0;
  float lr_, b1_, b2_, eps_;
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  MetricReport val;
};

/// Persisted training artifact: resolved config snapshot, per-epoch metrics,
/// final test report, checkpoint reference.
struct RunRecord {
  NetworkSpec net;
  AwfConfig awf;
  TrainConfig train_cfg;
  DatasetSpec data;
  std::vector<EpochRow> epochs;
  int best_epoch = 0;  // 1-based
  MetricReport test;
  std::string checkpoint_path;
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Adam training with seeded shuffling, rotation augmentation on the train
/// split, early stopping on validation loss, best-epoch restore, and the
/// run-directory artifacts (config, metrics.csv, report, model.awfn).
/// An empty out_dir keeps the run in memory.
RunRecord train(const NetworkSpec& net_spec, const AwfConfig& awf_cfg,
                const TrainConfig& cfg, const DatasetSpec& data_spec,
                const Dataset& ds, const std::string& out_dir);

/// Convenience overload: materializes the dataset from its spec first.
RunRecord train(const NetworkSpec& net_spec, const AwfConfig& awf_cfg,
                const TrainConfig& cfg, const DatasetSpec& data_spec,
                const std::string& out_dir);

/// Eval-mode metrics over one split.
MetricReport evaluate_split(AwfNet<float>& net, const std::vector<Sample>& split,
                            int num_classes, int h, int w, int batch_size,
                            int bins = 15);

/// (metrics, mean loss) over one split, eval mode.
std::pair<MetricReport, double> evaluate_split_with_loss(
    AwfNet<float>& net, const std::vector<Sample>& split, int num_classes,
    int h, int w, const LossConfig& loss_cfg, int batch_size, int bins = 15);

/// Rebuild the network from specs, load the checkpoint, evaluate a split.
MetricReport evaluate_checkpoint(const NetworkSpec& net_spec,
                                 const AwfConfig& awf_cfg,
                                 const std::string& checkpoint_path,
                                 const std::vector<Sample>& split,
                                 int num_classes, int h, int w, int batch_size);

/// Ordered key=value snapshot sufficient to relaunch the identical run; keys
/// match the CLI flag names.
std::vector<std::pair<std::string, std::string>> config_snapshot(
    const NetworkSpec& net, const AwfConfig& awf, const TrainConfig& train,
    const DatasetSpec& data);

void write_config_file(const std::string& path, const RunRecord& rec);
void write_metrics_csv(const std::string& path, const std::vector<EpochRow>& rows);
void write_report_file(const std::string& path, const RunRecord& rec);

}  // namespace awfnet
