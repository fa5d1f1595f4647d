#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awfnet/errors.hpp"

namespace awfnet {

/// Synthetic imbalanced texture task or an on-disk image folder. The
/// synthetic classes share the same band-limited noise background and differ
/// only in frequency content: "case" classes carry an oriented sinusoidal
/// grating. Per-image intensity is standardized, so mean brightness carries
/// no label signal.
struct DatasetSpec {
  enum class Kind { synthetic_texture, image_folder };
  Kind kind = Kind::synthetic_texture;
  int num_samples = 400;
  std::vector<double> class_ratio = {0.704, 0.296};
  int image_h = 64;
  int image_w = 64;
  std::uint64_t seed = 0;

  // synthetic texture knobs
  double grating_contrast = 0.35;
  double grating_cycles = 8.0;   // cycles across the image width
  double spectral_slope = 1.0;   // octave weighting of the noise background

  std::string root;  // image_folder only

  int num_classes() const { return static_cast<int>(class_ratio.size()); }
  void validate() const;
};

struct Sample {
  std::vector<float> pixels;  // image_h * image_w, standardized
  int label = 0;
};

struct Dataset {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<Sample> train, val, test;
  std::vector<std::string> warnings;  // skipped files etc.

  std::vector<long> train_class_counts() const {
    std::vector<long> counts(num_classes, 0);
    for (const auto& s : train) ++counts[s.label];
    return counts;
  }
};

/// Deterministic in spec.seed; stratified 70/15/15 splits.
Dataset generate_synthetic(const DatasetSpec& spec);

/// One subdirectory per class (lexicographic order fixes the labels), PGM or
/// PPM files inside. Unreadable files are skipped with a warning; an empty
/// class directory is an error.
Dataset ingest_images(const std::string& root, const DatasetSpec& spec);

/// Dispatch on spec.kind.
Dataset load_dataset(const DatasetSpec& spec);

/// Renders the synthetic samples of `spec` into `out_root/class<k>/*.pgm`
/// so the folder can be re-ingested. Returns the number of files written.
int write_synthetic_folder(const DatasetSpec& spec, const std::string& out_root);

}  // namespace awfnet
