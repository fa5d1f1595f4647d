#include "awfnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "awfnet/image_io.hpp"
#include "awfnet/params.hpp"  // splitmix64

namespace fs = std::filesystem;

namespace awfnet {

namespace {

// Explicit generators so sample streams are pinned to the seed alone.
double uniform01(std::uint64_t& state) {
  state = splitmix64(state + 0x2545f4914f6cdd1dULL);
  return double(state >> 11) * 0x1.0p-53;
}

double normal01(std::uint64_t& state) {
  const double u1 = std::max(uniform01(state), 1e-300);
  const double u2 = uniform01(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Largest-remainder allocation of N samples to the ratio vector.
std::vector<int> allocate_counts(int n, const std::vector<double>& ratio) {
  const int k = static_cast<int>(ratio.size());
  std::vector<int> counts(k);
  std::vector<std::pair<double, int>> rem(k);
  int assigned = 0;
  for (int c = 0; c < k; ++c) {
    const double exact = ratio[c] * n;
    counts[c] = static_cast<int>(std::floor(exact));
    rem[c] = {exact - counts[c], c};
    assigned += counts[c];
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < n - assigned; ++i) ++counts[rem[i % k].second];
  return counts;
}

void fisher_yates(std::vector<int>& v, std::uint64_t& state) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(uniform01(state) * double(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

// Band-limited background: octaves of upsampled white noise, coarser octaves
// weighted by 2^(slope * k).
std::vector<float> octave_noise(int h, int w, double slope,
                                std::uint64_t& state) {
  std::vector<float> img(std::size_t(h) * w, 0.0f);
  double total_w = 0;
  for (int k = 0; k < 4; ++k) {
    const int gh = std::max(2, h >> k), gw = std::max(2, w >> k);
    std::vector<float> grid(std::size_t(gh) * gw);
    for (auto& v : grid) v = static_cast<float>(normal01(state));
    auto up = k == 0 ? grid : resize_bilinear(grid, gh, gw, h, w);
    const double wk = std::pow(2.0, slope * k);
    total_w += wk * wk;
    for (std::size_t i = 0; i < img.size(); ++i)
      img[i] += static_cast<float>(wk) * up[i];
  }
  const float norm = static_cast<float>(1.0 / std::sqrt(total_w));
  for (auto& v : img) v *= norm;
  return img;
}

Sample make_sample(const DatasetSpec& spec, int label, std::uint64_t rng_key) {
  std::uint64_t state = splitmix64(rng_key);
  const int h = spec.image_h, w = spec.image_w;
  Sample s;
  s.label = label;
  s.pixels = octave_noise(h, w, spec.spectral_slope, state);
  if (label > 0) {
    // oriented grating; binary tasks draw the orientation freely, while
    // multi-class tasks separate the case classes into orientation buckets
    double theta;
    if (spec.num_classes() == 2) {
      theta = uniform01(state) * M_PI;
    } else {
      const double base = (label - 1) * M_PI / (spec.num_classes() - 1);
      theta = base + (uniform01(state) - 0.5) * (M_PI / 9.0);
    }
    const double phase = uniform01(state) * 2.0 * M_PI;
    const double freq = 2.0 * M_PI * spec.grating_cycles / w;
    const double c = std::cos(theta), si = std::sin(theta);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        s.pixels[std::size_t(y) * w + x] += static_cast<float>(
            spec.grating_contrast * std::sin(freq * (c * x + si * y) + phase));
  }
  normalize_image(s.pixels);
  return s;
}

// Stratified 70/15/15 split of per-class sample lists.
void split_stratified(std::vector<std::vector<Sample>>& per_class,
                      std::uint64_t seed, Dataset& out) {
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& samples = per_class[c];
    const int n = static_cast<int>(samples.size());
    const int n_train = static_cast<int>(std::floor(0.70 * n));
    const int n_val = static_cast<int>(std::floor(0.15 * n));
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1)
      throw DatasetError("dataset: class " + std::to_string(c) + " has only " +
                         std::to_string(n) +
                         " samples; too few for a stratified 70/15/15 split");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::uint64_t state = splitmix64(seed ^ (0xC1A55ULL + c));
    fisher_yates(idx, state);
    for (int i = 0; i < n; ++i) {
      auto& dst = i < n_train ? out.train
                  : i < n_train + n_val ? out.val
                                        : out.test;
      dst.push_back(std::move(samples[idx[i]]));
    }
  }
}

}  // namespace

void DatasetSpec::validate() const {
  if (num_samples < 1) throw DatasetError("dataset: num_samples must be >= 1");
  if (class_ratio.size() < 2 || class_ratio.size() > 9)
    throw DatasetError("dataset: class_ratio must list 2..9 classes");
  double sum = 0;
  for (double r : class_ratio) {
    if (r <= 0) throw DatasetError("dataset: class ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw DatasetError("dataset: class ratios sum to " + std::to_string(sum) +
                       ", expected 1");
  if (image_h < 2 || image_w < 2 || image_h % 2 != 0 || image_w % 2 != 0)
    throw DatasetError("dataset: image size must be even and >= 2");
  if (grating_contrast < 0) throw DatasetError("dataset: contrast must be >= 0");
}

Dataset generate_synthetic(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.height = spec.image_h;
  ds.width = spec.image_w;
  ds.num_classes = spec.num_classes();

  const auto counts = allocate_counts(spec.num_samples, spec.class_ratio);
  std::vector<std::vector<Sample>> per_class(spec.num_classes());
  int global = 0;
  for (int c = 0; c < spec.num_classes(); ++c)
    for (int i = 0; i < counts[c]; ++i, ++global)
      per_class[c].push_back(
          make_sample(spec, c, spec.seed ^ (0x9E3779B9ULL * (global + 1))));

  split_stratified(per_class, spec.seed, ds);
  return ds;
}

Dataset ingest_images(const std::string& root, const DatasetSpec& spec) {
  if (!fs::is_directory(root))
    throw DatasetError("ingest: '" + root + "' is not a directory");
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2)
    throw DatasetError("ingest: need at least two class subdirectories in " +
                       root);

  Dataset ds;
  ds.height = spec.image_h;
  ds.width = spec.image_w;
  ds.num_classes = static_cast<int>(class_dirs.size());

  std::vector<std::vector<Sample>> per_class(class_dirs.size());
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[c]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        const RawImage raw = read_pnm(f);
        Sample s;
        s.label = static_cast<int>(c);
        s.pixels = resize_bilinear(to_luminance(raw), raw.height, raw.width,
                                   spec.image_h, spec.image_w);
        normalize_image(s.pixels);
        per_class[c].push_back(std::move(s));
      } catch (const DatasetError& e) {
        ds.warnings.push_back(std::string("skipped ") + f + ": " + e.what());
      }
    }
    if (per_class[c].empty())
      throw DatasetError("ingest: class directory '" + class_dirs[c] +
                         "' has no readable images");
  }
  split_stratified(per_class, spec.seed, ds);
  return ds;
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::image_folder)
    return ingest_images(spec.root, spec);
  return generate_synthetic(spec);
}

int write_synthetic_folder(const DatasetSpec& spec, const std::string& out_root) {
  spec.validate();
  const auto counts = allocate_counts(spec.num_samples, spec.class_ratio);
  int written = 0, global = 0;
  for (int c = 0; c < spec.num_classes(); ++c) {
    const fs::path dir = fs::path(out_root) / ("class" + std::to_string(c));
    fs::create_directories(dir);
    for (int i = 0; i < counts[c]; ++i, ++global) {
      Sample s = make_sample(spec, c, spec.seed ^ (0x9E3779B9ULL * (global + 1)));
      std::vector<std::uint8_t> gray(s.pixels.size());
      for (std::size_t k = 0; k < gray.size(); ++k) {
        // standardized values land comfortably in [-4, 4]
        const double v = 128.0 + 32.0 * s.pixels[k];
        gray[k] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
      char name[32];
      std::snprintf(name, sizeof(name), "img_%05d.pgm", i);
      write_pgm((dir / name).string(), spec.image_w, spec.image_h, gray);
      ++written;
    }
  }
  return written;
}

}  // namespace awfnet
