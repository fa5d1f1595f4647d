#include "awfnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "awfnet/checkpoint.hpp"
#include "awfnet/image_io.hpp"

namespace fs = std::filesystem;

namespace awfnet {

namespace {

double uniform01(std::uint64_t& state) {
  state = splitmix64(state + 0x2545f4914f6cdd1dULL);
  return double(state >> 11) * 0x1.0p-53;
}

void fisher_yates(std::vector<int>& v, std::uint64_t& state) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(uniform01(state) * double(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

Tensor<float> batch_tensor(const std::vector<const Sample*>& samples, int h,
                           int w) {
  const int b = static_cast<int>(samples.size());
  std::vector<float> data;
  data.reserve(std::size_t(b) * h * w);
  for (const Sample* s : samples)
    data.insert(data.end(), s->pixels.begin(), s->pixels.end());
  return Tensor<float>::from_data({b, 1, h, w}, std::move(data));
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::string join_longs(const std::vector<long>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::string join_ratios(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace

Adam::Adam(Registry<float>& reg, float lr, float beta1, float beta2, float eps)
    : reg_(&reg), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  m_.resize(reg.entries().size());
  v_.resize(reg.entries().size());
  for (std::size_t i = 0; i < reg.entries().size(); ++i) {
    if (!reg.entries()[i].trainable) continue;
    m_[i].assign(reg.entries()[i].tensor.data().size(), 0.0f);
    v_[i].assign(reg.entries()[i].tensor.data().size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(b1_, float(t_));
  const float bc2 = 1.0f - std::pow(b2_, float(t_));
  for (std::size_t i = 0; i < reg_->entries().size(); ++i) {
    const auto& e = reg_->entries()[i];
    if (!e.trainable) continue;
    auto t = e.tensor;
    auto& data = t.mutable_data();
    const bool has_grad = t.has_grad();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const float g = has_grad ? t.grad()[k] : 0.0f;
      m_[i][k] = b1_ * m_[i][k] + (1.0f - b1_) * g;
      v_[i][k] = b2_ * v_[i][k] + (1.0f - b2_) * g * g;
      const float mhat = m_[i][k] / bc1;
      const float vhat = v_[i][k] / bc2;
      data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

MetricReport evaluate_split(AwfNet<float>& net, const std::vector<Sample>& split,
                            int num_classes, int h, int w, int batch_size,
                            int bins) {
  LossConfig none;  // CE; loss value discarded
  return evaluate_split_with_loss(net, split, num_classes, h, w, none,
                                  batch_size, bins)
      .first;
}

std::pair<MetricReport, double> evaluate_split_with_loss(
    AwfNet<float>& net, const std::vector<Sample>& split, int num_classes,
    int h, int w, const LossConfig& loss_cfg, int batch_size, int bins) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  PredictionSet pred;
  pred.num_classes = num_classes;
  pred.positive_class = num_classes == 2 ? 1 : 0;
  double loss_sum = 0;
  for (std::size_t at = 0; at < split.size(); at += batch_size) {
    std::vector<const Sample*> chunk;
    std::vector<int> targets;
    for (std::size_t i = at; i < std::min(split.size(), at + batch_size); ++i) {
      chunk.push_back(&split[i]);
      targets.push_back(split[i].label);
      pred.labels.push_back(split[i].label);
    }
    auto logits = net.forward(batch_tensor(chunk, h, w), Mode::eval);
    auto probs = softmax(logits);
    for (float p : probs.data()) pred.probs.push_back(double(p));
    auto loss = compute_loss(logits, targets, loss_cfg);
    for (float v : loss.per_sample) loss_sum += double(v);
  }
  return {compute_metrics(pred, bins), loss_sum / double(split.size())};
}

MetricReport evaluate_checkpoint(const NetworkSpec& net_spec,
                                 const AwfConfig& awf_cfg,
                                 const std::string& checkpoint_path,
                                 const std::vector<Sample>& split,
                                 int num_classes, int h, int w, int batch_size) {
  AwfNet<float> net(net_spec, awf_cfg, 0);
  load_checkpoint(checkpoint_path, net.registry());
  return evaluate_split(net, split, num_classes, h, w, batch_size);
}

RunRecord train(const NetworkSpec& net_spec, const AwfConfig& awf_cfg,
                const TrainConfig& cfg, const DatasetSpec& data_spec,
                const std::string& out_dir) {
  return train(net_spec, awf_cfg, cfg, data_spec, load_dataset(data_spec),
               out_dir);
}

RunRecord train(const NetworkSpec& net_spec, const AwfConfig& awf_cfg,
                const TrainConfig& cfg, const DatasetSpec& data_spec,
                const Dataset& ds, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (ds.train.empty() || ds.val.empty() || ds.test.empty())
    throw ContractError("train: dataset must have train/val/test splits");

  RunRecord rec;
  rec.net = net_spec;
  rec.net.num_classes = ds.num_classes;
  rec.net.input_h = ds.height;
  rec.net.input_w = ds.width;
  rec.awf = awf_cfg;
  rec.train_cfg = cfg;
  rec.data = data_spec;
  rec.seed = cfg.seed;
  rec.threads = cfg.threads;

  // class counts are a dataset-level prior, fixed once from the train split
  if ((cfg.loss.kind == LossKind::CS || cfg.loss.kind == LossKind::BC) &&
      rec.train_cfg.loss.class_counts.empty())
    rec.train_cfg.loss.class_counts = ds.train_class_counts();
  const LossConfig& loss_cfg = rec.train_cfg.loss;
  loss_cfg.validate(ds.num_classes);

  AwfNet<float> net(rec.net, rec.awf, cfg.seed);
  rec.awf = net.config();  // resolved groups/channels
  Adam opt(net.registry(), float(cfg.lr), float(cfg.beta1), float(cfg.beta2),
           float(cfg.adam_eps));

  std::uint64_t shuffle_state = splitmix64(cfg.seed ^ 0x5145ULL);
  std::uint64_t augment_state = splitmix64(cfg.seed ^ 0xA316ULL);

  EarlyStopper stopper{cfg.early_stop_min_delta, cfg.early_stop_patience};
  std::vector<std::vector<float>> best_params;
  std::vector<int> order(ds.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    fisher_yates(order, shuffle_state);
    double train_loss_sum = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::vector<Sample> views;
      std::vector<const Sample*> chunk;
      std::vector<int> targets;
      for (std::size_t i = at; i < std::min(order.size(), at + cfg.batch_size);
           ++i) {
        const Sample& src = ds.train[order[i]];
        Sample view;
        view.label = src.label;
        if (cfg.augment.random_rotation_degrees > 0) {
          const double deg = (uniform01(augment_state) * 2.0 - 1.0) *
                             cfg.augment.random_rotation_degrees;
          view.pixels = rotate_bilinear(src.pixels, ds.height, ds.width, deg);
        } else {
          view.pixels = src.pixels;
        }
        if (cfg.augment.intensity_normalization) normalize_image(view.pixels);
        views.push_back(std::move(view));
        targets.push_back(src.label);
      }
      for (const auto& v : views) chunk.push_back(&v);

      try {
        auto logits =
            net.forward(batch_tensor(chunk, ds.height, ds.width), Mode::train);
        auto loss = compute_loss(logits, targets, loss_cfg);
        net.zero_grad();
        loss.value.backward();
        opt.step();
        for (float v : loss.per_sample) train_loss_sum += double(v);
      } catch (const NumericsError& e) {
        throw TrainError("diverged at epoch " + std::to_string(epoch) +
                         ", batch starting at sample " + std::to_string(at) +
                         ": " + e.what());
      }
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_loss_sum / double(ds.train.size());
    auto [val_metrics, val_loss] = evaluate_split_with_loss(
        net, ds.val, ds.num_classes, ds.height, ds.width, loss_cfg,
        cfg.batch_size);
    row.val_loss = val_loss;
    row.val = val_metrics;
    rec.epochs.push_back(row);

    if (stopper.observe(val_loss)) {
      rec.best_epoch = epoch;
      best_params = net.registry().snapshot();
    }
    if (stopper.should_stop()) break;
  }

  if (!best_params.empty()) net.registry().restore(best_params);
  rec.test = evaluate_split(net, ds.test, ds.num_classes, ds.height, ds.width,
                            cfg.batch_size);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    rec.checkpoint_path = (fs::path(out_dir) / "model.awfn").string();
    save_checkpoint(rec.checkpoint_path, net.registry());
    write_config_file((fs::path(out_dir) / "config").string(), rec);
    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), rec.epochs);
    write_report_file((fs::path(out_dir) / "report").string(), rec);
  }
  return rec;
}

std::vector<std::pair<std::string, std::string>> config_snapshot(
    const NetworkSpec& net, const AwfConfig& awf, const TrainConfig& train,
    const DatasetSpec& data) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto put = [&](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  put("seed", std::to_string(train.seed));
  put("threads", std::to_string(train.threads));
  put("stem", stem_kind_name(net.stem));
  put("channels", join_ints(net.stem_channels));
  put("blocks", std::to_string(net.num_awf_blocks));
  put("groups", std::to_string(awf.groups));
  put("expansion", std::to_string(awf.expansion_ratio));
  put("variant", weighting_variant_name(awf.variant));
  put("mixer-only", awf.awf_mixer ? "0" : "1");
  put("loss", loss_kind_name(train.loss.kind));
  put("alpha", fmt6(train.loss.alpha));
  put("lambda", fmt6(train.loss.lambda));
  put("t", fmt6(train.loss.t));
  put("gamma", fmt6(train.loss.focal_gamma));
  put("sign", train.loss.sign == SignConvention::convex ? "convex" : "literal");
  if (!train.loss.class_counts.empty())
    put("counts", join_longs(train.loss.class_counts));
  put("lr", fmt6(train.lr));
  put("batch", std::to_string(train.batch_size));
  put("epochs", std::to_string(train.max_epochs));
  put("patience", std::to_string(train.early_stop_patience));
  put("min-delta", fmt6(train.early_stop_min_delta));
  put("rotation", fmt6(train.augment.random_rotation_degrees));
  put("intensity-norm", train.augment.intensity_normalization ? "1" : "0");
  if (data.kind == DatasetSpec::Kind::image_folder) put("data", data.root);
  put("samples", std::to_string(data.num_samples));
  put("ratio", join_ratios(data.class_ratio));
  put("size", std::to_string(data.image_h));
  put("contrast", fmt6(data.grating_contrast));
  put("cycles", fmt6(data.grating_cycles));
  put("slope", fmt6(data.spectral_slope));
  return kv;
}

void write_config_file(const std::string& path, const RunRecord& rec) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TrainError("cannot write " + path);
  for (const auto& [k, v] : config_snapshot(rec.net, rec.awf, rec.train_cfg,
                                            rec.data))
    out << k << "=" << v << "\n";
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TrainError("cannot write " + path);
  out << "epoch,train_loss,val_loss,acc,precision,sensitivity,f1,specificity,"
         "b_acc,auc,ece,mce\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt6(r.train_loss) << ',' << fmt6(r.val_loss);
    for (double v : metric_column_values(r.val)) out << ',' << fmt6(v);
    out << '\n';
  }
}

void write_report_file(const std::string& path, const RunRecord& rec) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TrainError("cannot write " + path);
  out << "epochs_run: " << rec.epochs.size() << "\n";
  out << "best_epoch: " << rec.best_epoch << "\n";
  out << "seed: " << rec.seed << "\n";
  out << "threads: " << rec.threads << "\n";
  out << "wall_seconds: " << fmt6(rec.wall_seconds) << "\n";
  out << "checkpoint: " << rec.checkpoint_path << "\n";
  const auto& names = metric_column_names();
  const auto values = metric_column_values(rec.test);
  for (std::size_t i = 0; i < names.size(); ++i)
    out << "test." << names[i] << ": " << fmt6(values[i]) << "\n";
  out << "test.confusion: " << join_longs(rec.test.confusion) << "\n";
}

}  // namespace awfnet
