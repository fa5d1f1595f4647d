// Command-line surface: synthetic data generation, training, evaluation,
// the gradient-check release gate, and the ablation sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "awfnet/checkpoint.hpp"
#include "awfnet/gradsuite.hpp"
#include "awfnet/train.hpp"

namespace fs = std::filesystem;
using namespace awfnet;

namespace {

struct Options {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;

  // dataset
  std::string data;  // image folder; empty = synthetic
  int samples = 400;
  std::string ratio = "0.704,0.296";
  int size = 64;
  double contrast = 0.35;
  double cycles = 8.0;
  double slope = 1.0;

  // network
  std::string stem = "small_cnn";
  std::string channels = "8,16,32";
  int blocks = 3;
  int groups = 0;
  int expansion = 2;
  std::string variant = "grouped_linear";
  int mixer_only = 0;

  // training
  std::string loss = "ce";
  double alpha = 0.5;
  double lambda = 0.8;
  double t = 2.0;
  double gamma = 2.0;
  std::string sign = "convex";
  std::string counts;
  double lr = 1e-4;
  int batch = 16;
  int epochs = 30;
  int patience = 20;
  double min_delta = 1e-4;
  double rotation = 10.0;
  int intensity_norm = 1;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError("empty list '" + s + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError("empty list '" + s + "'");
  return out;
}

DatasetSpec make_dataset_spec(const Options& o) {
  DatasetSpec d;
  if (!o.data.empty()) {
    d.kind = DatasetSpec::Kind::image_folder;
    d.root = o.data;
  }
  d.num_samples = o.samples;
  d.class_ratio = parse_double_list(o.ratio);
  d.image_h = d.image_w = o.size;
  d.seed = o.seed;
  d.grating_contrast = o.contrast;
  d.grating_cycles = o.cycles;
  d.spectral_slope = o.slope;
  return d;
}

NetworkSpec make_network_spec(const Options& o, const Dataset& ds) {
  NetworkSpec n;
  n.stem = stem_kind_from_name(o.stem);
  n.stem_channels = parse_int_list(o.channels);
  n.num_awf_blocks = o.blocks;
  n.num_classes = ds.num_classes;
  n.in_channels = 1;
  n.input_h = ds.height;
  n.input_w = ds.width;
  return n;
}

AwfConfig make_awf_config(const Options& o) {
  AwfConfig a;
  a.groups = o.groups;
  a.expansion_ratio = o.expansion;
  a.variant = weighting_variant_from_name(o.variant);
  a.awf_mixer = o.mixer_only == 0;
  return a;
}

TrainConfig make_train_config(const Options& o) {
  TrainConfig t;
  t.lr = o.lr;
  t.batch_size = o.batch;
  t.max_epochs = o.epochs;
  t.early_stop_patience = o.patience;
  t.early_stop_min_delta = o.min_delta;
  t.seed = o.seed;
  t.threads = o.threads;
  t.augment.random_rotation_degrees = o.rotation;
  t.augment.intensity_normalization = o.intensity_norm != 0;
  t.loss.kind = loss_kind_from_name(o.loss);
  t.loss.alpha = o.alpha;
  t.loss.lambda = o.lambda;
  t.loss.t = o.t;
  t.loss.focal_gamma = o.gamma;
  t.loss.sign = o.sign == "literal" ? SignConvention::literal
                                    : SignConvention::convex;
  if (!o.counts.empty()) {
    for (int c : parse_int_list(o.counts)) t.loss.class_counts.push_back(c);
  }
  return t;
}

void add_dataset_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "image folder (one subdirectory per class)");
  cmd->add_option("--samples", o.samples, "synthetic sample count");
  cmd->add_option("--ratio", o.ratio, "class ratios, comma separated");
  cmd->add_option("--size", o.size, "square image size");
  cmd->add_option("--contrast", o.contrast, "grating contrast");
  cmd->add_option("--cycles", o.cycles, "grating cycles across the image");
  cmd->add_option("--slope", o.slope, "noise spectral slope");
}

void add_network_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--stem", o.stem, "small_cnn | resnet18_like");
  cmd->add_option("--channels", o.channels, "stem stage widths");
  cmd->add_option("--blocks", o.blocks, "number of AWF blocks [0..5]");
  cmd->add_option("--groups", o.groups, "AGLW groups (0 = derive)");
  cmd->add_option("--expansion", o.expansion, "channel mixer expansion ratio");
  cmd->add_option("--variant", o.variant,
                  "grouped_linear | identity | scalar_gate");
  cmd->add_option("--mixer-only", o.mixer_only,
                  "1 = channel-mixer-only ablation blocks");
}

void add_train_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--loss", o.loss, "ce | fl | cs | bc");
  cmd->add_option("--alpha", o.alpha, "BC mixing weight");
  cmd->add_option("--lambda", o.lambda, "probability-ratio exponent");
  cmd->add_option("--t", o.t, "count-ratio exponent");
  cmd->add_option("--gamma", o.gamma, "focal loss gamma");
  cmd->add_option("--sign", o.sign, "convex | literal BC sign convention");
  cmd->add_option("--counts", o.counts,
                  "class counts override (default: train split)");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--batch", o.batch, "mini-batch size");
  cmd->add_option("--epochs", o.epochs, "max epochs");
  cmd->add_option("--patience", o.patience, "early stopping patience");
  cmd->add_option("--min-delta", o.min_delta, "early stopping min improvement");
  cmd->add_option("--rotation", o.rotation, "augmentation rotation degrees");
  cmd->add_option("--intensity-norm", o.intensity_norm,
                  "1 = re-standardize augmented views");
}

void print_report_line(const std::string& tag, const MetricReport& r) {
  std::ostringstream os;
  os << tag;
  const auto& names = metric_column_names();
  const auto values = metric_column_values(r);
  for (std::size_t i = 0; i < names.size(); ++i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), " %s=%.6f", names[i].c_str(), values[i]);
    os << buf;
  }
  std::cout << os.str() << "\n";
}

std::map<std::string, std::string> read_config_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

Options options_from_map(const std::map<std::string, std::string>& kv) {
  Options o;
  auto get = [&](const char* k, auto& field) {
    auto it = kv.find(k);
    if (it == kv.end()) return;
    std::stringstream ss(it->second);
    ss >> field;
  };
  get("seed", o.seed);
  get("threads", o.threads);
  get("data", o.data);
  get("samples", o.samples);
  get("ratio", o.ratio);
  get("size", o.size);
  get("contrast", o.contrast);
  get("cycles", o.cycles);
  get("slope", o.slope);
  get("stem", o.stem);
  get("channels", o.channels);
  get("blocks", o.blocks);
  get("groups", o.groups);
  get("expansion", o.expansion);
  get("variant", o.variant);
  get("mixer-only", o.mixer_only);
  get("loss", o.loss);
  get("alpha", o.alpha);
  get("lambda", o.lambda);
  get("t", o.t);
  get("gamma", o.gamma);
  get("sign", o.sign);
  get("counts", o.counts);
  get("lr", o.lr);
  get("batch", o.batch);
  get("epochs", o.epochs);
  get("patience", o.patience);
  get("min-delta", o.min_delta);
  get("rotation", o.rotation);
  get("intensity-norm", o.intensity_norm);
  return o;
}

int run_train(const Options& o) {
  const std::string out_dir = o.out.empty() ? "awfnet-run" : o.out;
  auto data_spec = make_dataset_spec(o);
  auto ds = load_dataset(data_spec);
  auto rec = train(make_network_spec(o, ds), make_awf_config(o),
                   make_train_config(o), data_spec, ds, out_dir);
  std::cout << "run dir: " << out_dir << " epochs: " << rec.epochs.size()
            << " best: " << rec.best_epoch << "\n";
  print_report_line("test", rec.test);
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int run_eval(const std::string& run_dir, const std::string& split,
             const std::string& data_override) {
  Options o = options_from_map(read_config_map(
      (fs::path(run_dir) / "config").string()));
  if (!data_override.empty()) o.data = data_override;
  auto data_spec = make_dataset_spec(o);
  auto ds = load_dataset(data_spec);
  const auto& samples = split == "train" ? ds.train
                        : split == "val" ? ds.val
                                         : ds.test;
  auto report = evaluate_checkpoint(
      make_network_spec(o, ds), make_awf_config(o),
      (fs::path(run_dir) / "model.awfn").string(), samples, ds.num_classes,
      ds.height, ds.width, o.batch);
  print_report_line(split, report);
  return 0;
}

int run_gradcheck(int seeds) {
  GradSuiteOptions opts;
  opts.seeds = seeds;
  auto reports = run_gradient_suite(opts);
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-26s max_rel_error=%.3e %s\n", r.op_name.c_str(),
                r.max_rel_error, r.pass ? "pass" : "FAIL");
    ok = ok && r.pass;
  }
  if (!ok) throw TrainError("gradient suite failed");
  return 0;
}

int run_ablate(const Options& base, const std::string& blocks_list,
               const std::string& losses_list) {
  const std::string out_dir = base.out.empty() ? "awfnet-ablation" : base.out;
  fs::create_directories(out_dir);
  const auto blocks = parse_int_list(blocks_list);
  std::vector<std::string> losses;
  {
    std::stringstream ss(losses_list);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) losses.push_back(item);
  }
  if (losses.empty()) throw ConfigError("ablate: empty loss list");

  std::ofstream table(fs::path(out_dir) / "ablation.csv");
  std::ostringstream header;
  header << "blocks,loss";
  for (const auto& n : metric_column_names()) header << ',' << n;
  table << header.str() << "\n";
  std::cout << header.str() << "\n";

  for (int b : blocks)
    for (const auto& l : losses) {
      Options o = base;
      o.blocks = b;
      o.loss = l;
      const std::string run_dir =
          (fs::path(out_dir) / ("blocks" + std::to_string(b) + "_" + l))
              .string();
      auto data_spec = make_dataset_spec(o);
      auto ds = load_dataset(data_spec);
      auto rec = train(make_network_spec(o, ds), make_awf_config(o),
                       make_train_config(o), data_spec, ds, run_dir);
      std::ostringstream row;
      row << b << ',' << l;
      for (double v : metric_column_values(rec.test)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        row << ',' << buf;
      }
      table << row.str() << "\n";
      std::cout << row.str() << "\n";
    }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive wavelet filter networks: data, training, evaluation"};
  app.require_subcommand(1);

  Options o;
  // --config seeds the defaults before parsing, so explicit flags override it
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        o = options_from_map(read_config_map(argv[i + 1]));
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  }
  app.add_option("--seed", o.seed, "global seed")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (recorded; execution is sequential)")
      ->capture_default_str();
  app.add_option("--out", o.out, "output directory");

  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset to PGM folders");
  add_dataset_flags(gen, o);

  auto* tr = app.add_subcommand("train", "train a network and write the run directory");
  add_dataset_flags(tr, o);
  add_network_flags(tr, o);
  add_train_flags(tr, o);
  std::string config_path;
  tr->add_option("--config", config_path,
                 "flat key=value config file; flags override");

  std::string run_dir, split = "test", data_override;
  auto* ev = app.add_subcommand("eval", "evaluate a run's checkpoint on a split");
  ev->add_option("--run", run_dir, "run directory (config + model.awfn)")
      ->required();
  ev->add_option("--split", split, "train | val | test");
  ev->add_option("--data", data_override, "image folder override");

  int seeds = 5;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc->add_option("--seeds", seeds, "seeds per check")->capture_default_str();

  std::string blocks_list = "0,1,2,3,4,5", losses_list = "ce";
  auto* ab = app.add_subcommand("ablate", "sweep AWF block counts and losses");
  add_dataset_flags(ab, o);
  add_network_flags(ab, o);
  add_train_flags(ab, o);
  ab->add_option("--block-grid", blocks_list, "block counts to sweep")
      ->capture_default_str();
  ab->add_option("--loss-grid", losses_list, "losses to sweep")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      const std::string out_dir = o.out.empty() ? "awfnet-data" : o.out;
      const int n = write_synthetic_folder(make_dataset_spec(o), out_dir);
      std::cout << "wrote " << n << " images under " << out_dir << "\n";
      return 0;
    }
    if (tr->parsed()) return run_train(o);
    if (ev->parsed()) return run_eval(run_dir, split, data_override);
    if (gc->parsed()) return run_gradcheck(seeds);
    if (ab->parsed()) return run_ablate(o, blocks_list, losses_list);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
