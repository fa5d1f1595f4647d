#include <cstdio>
#include <filesystem>
#include <fstream>

#include "awfnet/dataset.hpp"
#include "awfnet/image_io.hpp"
#include "doctest.h"
#include "fft_oracle.hpp"

using namespace awfnet;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.num_samples = 100;
  s.image_h = 32;
  s.image_w = 32;
  s.seed = 5;
  return s;
}

std::vector<const Sample*> all_samples(const Dataset& ds) {
  std::vector<const Sample*> out;
  for (const auto& s : ds.train) out.push_back(&s);
  for (const auto& s : ds.val) out.push_back(&s);
  for (const auto& s : ds.test) out.push_back(&s);
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("per-image standardization contract") {
  auto ds = generate_synthetic(small_spec());
  for (const Sample* s : all_samples(ds)) {
    double mean = 0, var = 0;
    for (float v : s->pixels) mean += v;
    mean /= double(s->pixels.size());
    for (float v : s->pixels) var += (v - mean) * (v - mean);
    var /= double(s->pixels.size());
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("label ratio matches the spec within one sample") {
  auto spec = small_spec();
  auto ds = generate_synthetic(spec);
  std::vector<long> counts(2, 0);
  for (const Sample* s : all_samples(ds)) ++counts[s->label];
  CHECK(std::abs(counts[0] - 0.704 * spec.num_samples) <= 1.0);
  CHECK(std::abs(counts[1] - 0.296 * spec.num_samples) <= 1.0);
  CHECK(counts[0] + counts[1] == spec.num_samples);
}

TEST_CASE("stratified 70/15/15 split") {
  auto ds = generate_synthetic(small_spec());
  CHECK(ds.train.size() == 70);  // floor(.7*70)=49 + floor(.7*30)=21
  CHECK(ds.val.size() == 14);    // floor(.15*70)=10 + floor(.15*30)=4
  CHECK(ds.test.size() == 16);
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    bool has0 = false, has1 = false;
    for (const auto& s : *split) (s.label == 0 ? has0 : has1) = true;
    CHECK(has0);
    CHECK(has1);
  }

  auto tiny = small_spec();
  tiny.num_samples = 8;  // 2-3 case samples cannot give three nonempty splits
  CHECK_THROWS_AS(generate_synthetic(tiny), DatasetError);
}

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate_synthetic(small_spec());
  auto b = generate_synthetic(small_spec());
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].label == b.train[i].label);
    CHECK(a.train[i].pixels == b.train[i].pixels);  // bitwise
  }
  auto c_spec = small_spec();
  c_spec.seed = 6;
  auto c = generate_synthetic(c_spec);
  CHECK(c.train[0].pixels != a.train[0].pixels);
}

TEST_CASE("classes differ in grating-band spectral energy by >= 2x") {
  DatasetSpec spec;
  spec.num_samples = 100;
  spec.image_h = 64;
  spec.image_w = 64;
  spec.seed = 11;
  auto ds = generate_synthetic(spec);
  double band0 = 0, band1 = 0;
  long n0 = 0, n1 = 0;
  const double r0 = spec.grating_cycles - 2.0, r1 = spec.grating_cycles + 2.0;
  for (const Sample* s : all_samples(ds)) {
    const double frac = oracle::band_energy_fraction(s->pixels, 64, 64, r0, r1);
    if (s->label == 0) {
      band0 += frac;
      ++n0;
    } else {
      band1 += frac;
      ++n1;
    }
  }
  band0 /= double(n0);
  band1 /= double(n1);
  CHECK(band1 >= 2.0 * band0);
}

TEST_CASE("three-class mode generates distinct orientation buckets") {
  DatasetSpec spec;
  spec.num_samples = 60;
  spec.class_ratio = {0.4, 0.3, 0.3};
  spec.image_h = 32;
  spec.image_w = 32;
  auto ds = generate_synthetic(spec);
  CHECK(ds.num_classes == 3);
  std::vector<long> counts(3, 0);
  for (const Sample* s : all_samples(ds)) ++counts[s->label];
  CHECK(counts[0] == 24);
  CHECK(counts[1] == 18);
  CHECK(counts[2] == 18);
}

TEST_CASE("spec validation") {
  auto bad = small_spec();
  bad.class_ratio = {0.5, 0.4};  // sums to 0.9
  CHECK_THROWS_AS(generate_synthetic(bad), DatasetError);
  bad = small_spec();
  bad.image_h = 33;
  CHECK_THROWS_AS(generate_synthetic(bad), DatasetError);
}

TEST_CASE("pnm round trip and formats") {
  TempDir dir("awfnet_pnm_test");
  std::vector<std::uint8_t> gray = {0, 64, 128, 255, 10, 20};
  const auto p = (dir.path / "a.pgm").string();
  write_pgm(p, 3, 2, gray);
  auto img = read_pnm(p);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  CHECK(img.pixels == gray);

  // ascii P2
  {
    std::ofstream f(dir.path / "b.pgm");
    f << "P2\n# comment line\n2 2\n255\n0 255\n128 64\n";
  }
  auto b = read_pnm((dir.path / "b.pgm").string());
  CHECK(b.pixels == std::vector<std::uint8_t>{0, 255, 128, 64});

  // rgb P6 luminance
  {
    std::ofstream f(dir.path / "c.ppm", std::ios::binary);
    f << "P6\n1 1\n255\n";
    const unsigned char px[3] = {255, 0, 0};
    f.write(reinterpret_cast<const char*>(px), 3);
  }
  auto lum = to_luminance(read_pnm((dir.path / "c.ppm").string()));
  CHECK(lum[0] == doctest::Approx(0.299).epsilon(1e-6));

  CHECK_THROWS_AS(read_pnm((dir.path / "missing.pgm").string()), DatasetError);
  {
    std::ofstream f(dir.path / "junk.pgm");
    f << "not a pnm";
  }
  CHECK_THROWS_AS(read_pnm((dir.path / "junk.pgm").string()), DatasetError);
}

TEST_CASE("constant image ingests to all zeros") {
  TempDir dir("awfnet_const_test");
  std::vector<std::uint8_t> white(512 * 512, 255);
  write_pgm((dir.path / "w.pgm").string(), 512, 512, white);
  auto raw = read_pnm((dir.path / "w.pgm").string());
  auto img = resize_bilinear(to_luminance(raw), 512, 512, 64, 64);
  normalize_image(img);
  CHECK(img.size() == 64u * 64u);
  for (float v : img) CHECK(v == 0.0f);
}

TEST_CASE("folder ingest: labels, determinism, warnings, errors") {
  TempDir dir("awfnet_ingest_test");
  DatasetSpec spec;
  spec.num_samples = 60;
  spec.image_h = 32;
  spec.image_w = 32;
  spec.seed = 3;
  const int written = write_synthetic_folder(spec, dir.path.string());
  CHECK(written == 60);

  DatasetSpec in_spec = spec;
  in_spec.kind = DatasetSpec::Kind::image_folder;
  in_spec.root = dir.path.string();
  auto a = ingest_images(dir.path.string(), in_spec);
  CHECK(a.num_classes == 2);
  CHECK(a.train.size() + a.val.size() + a.test.size() == 60);

  // labels follow lexicographic class-directory order
  std::vector<long> counts(2, 0);
  for (const Sample* s : all_samples(a)) ++counts[s->label];
  CHECK(counts[0] == 42);  // class0 = control majority
  CHECK(counts[1] == 18);

  // re-ingesting yields bitwise-identical tensors
  auto b = ingest_images(dir.path.string(), in_spec);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].pixels == b.train[i].pixels);

  // unreadable file: skipped with a warning, ingest still succeeds
  {
    std::ofstream f(dir.path / "class0" / "zzz_broken.pgm");
    f << "garbage";
  }
  auto c = ingest_images(dir.path.string(), in_spec);
  CHECK(c.warnings.size() == 1);
  CHECK(c.warnings[0].find("zzz_broken") != std::string::npos);

  // empty class directory is an error
  fs::create_directories(dir.path / "class2");
  CHECK_THROWS_AS(ingest_images(dir.path.string(), in_spec), DatasetError);
}

TEST_SUITE_END();
