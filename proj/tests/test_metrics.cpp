#include <random>

#include "awfnet/metrics.hpp"
#include "doctest.h"

using namespace awfnet;

namespace {

PredictionSet binary_set(const std::vector<double>& pos_scores,
                         const std::vector<int>& labels) {
  PredictionSet p;
  p.num_classes = 2;
  p.labels = labels;
  p.positive_class = 1;
  for (double s : pos_scores) {
    p.probs.push_back(1.0 - s);
    p.probs.push_back(s);
  }
  return p;
}

// Exhaustive positive-negative pair counting.
double brute_force_auc(const std::vector<double>& scores,
                       const std::vector<int>& labels) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  return wins / double(pairs);
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("perfect predictions score 1.0 everywhere") {
  auto p = binary_set({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0});
  auto r = compute_metrics(p);
  CHECK(r.acc == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.sensitivity == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.specificity == 1.0);
  CHECK(r.b_acc == 1.0);
  CHECK(r.auc == 1.0);
}

TEST_CASE("degenerate all-negative classifier on a 70/30 split") {
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 7; ++i) {
    scores.push_back(0.2);
    labels.push_back(0);
  }
  for (int i = 0; i < 3; ++i) {
    scores.push_back(0.2);
    labels.push_back(1);
  }
  auto r = classification_metrics(binary_set(scores, labels));
  CHECK(r.acc == doctest::Approx(0.7));
  CHECK(r.sensitivity == 0.0);
  CHECK(r.specificity == 1.0);
  CHECK(r.b_acc == doctest::Approx(0.5));
  CHECK(r.degenerate);  // precision has an empty denominator
}

TEST_CASE("hand confusion matrices") {
  // TP=2 FP=1 FN=1 TN=4
  std::vector<double> scores = {0.9, 0.8, 0.1,   // TP TP FN
                                0.7,             // FP
                                0.2, 0.3, 0.1, 0.4};  // TN x4
  std::vector<int> labels = {1, 1, 1, 0, 0, 0, 0, 0};
  auto r = classification_metrics(binary_set(scores, labels));
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.sensitivity == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.specificity == doctest::Approx(0.8));
  CHECK(r.acc == doctest::Approx(0.75));
  CHECK(r.confusion == std::vector<long>{4, 1, 1, 2});

  // TP=2 FP=1 FN=2 TN=4, exercising F1 with precision != recall
  std::vector<double> s2 = {0.9, 0.8, 0.1, 0.2, 0.7, 0.2, 0.3, 0.1, 0.4};
  std::vector<int> l2 = {1, 1, 1, 1, 0, 0, 0, 0, 0};
  auto r2 = classification_metrics(binary_set(s2, l2));
  CHECK(r2.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r2.sensitivity == doctest::Approx(0.5));
  CHECK(r2.f1 == doctest::Approx(4.0 / 7.0));
  CHECK(r2.specificity == doctest::Approx(0.8));
  CHECK(r2.acc == doctest::Approx(6.0 / 9.0));
}

TEST_CASE("auc examples") {
  CHECK(auc(binary_set({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
  CHECK(auc(binary_set({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})) == 0.5);
  CHECK(auc(binary_set({0.9, 0.8, 0.4, 0.3}, {1, 0, 1, 0})) ==
        doctest::Approx(0.75));
  CHECK_THROWS_AS(auc(binary_set({0.5, 0.6}, {1, 1})), MetricError);
}

TEST_CASE("rank-statistic auc equals brute-force pair counting") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> len(2, 200);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = len(rng);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores[i] = std::round(dist(rng) * 8.0) / 8.0;
      labels[i] = coin(rng);
      has0 = has0 || labels[i] == 0;
      has1 = has1 || labels[i] == 1;
    }
    if (!has0) labels[0] = 0;
    if (!has1) labels[n - 1] = 1;
    CHECK(auc(binary_set(scores, labels)) ==
          doctest::Approx(brute_force_auc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("calibration errors") {
  // every sample confidently correct
  auto perfect = binary_set({0.999999, 1e-6}, {1, 0});
  auto [e0, m0] = calibration_errors(perfect);
  CHECK(e0 == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(m0 == doctest::Approx(0.0).epsilon(1e-5));

  // two samples at confidence 0.9, one correct: single bin, gap 0.4
  auto two = binary_set({0.9, 0.9}, {1, 0});
  auto [ece, mce] = calibration_errors(two);
  CHECK(ece == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(mce == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("ece <= mce and both within [0,1] on random sets") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    for (int i = 0; i < 50; ++i) {
      scores[i] = dist(rng);
      labels[i] = coin(rng);
    }
    auto [ece, mce] = calibration_errors(binary_set(scores, labels));
    CHECK(ece <= mce + 1e-12);
    CHECK(ece >= 0.0);
    CHECK(mce <= 1.0);
  }
}

TEST_CASE("metrics are permutation invariant") {
  std::vector<double> scores = {0.9, 0.2, 0.6, 0.3, 0.8};
  std::vector<int> labels = {1, 0, 1, 0, 0};
  auto r1 = compute_metrics(binary_set(scores, labels));
  std::vector<double> ps = {0.3, 0.8, 0.9, 0.6, 0.2};
  std::vector<int> pl = {0, 0, 1, 1, 0};
  auto r2 = compute_metrics(binary_set(ps, pl));
  CHECK(r1.acc == r2.acc);
  CHECK(r1.f1 == r2.f1);
  CHECK(r1.auc == r2.auc);
  CHECK(r1.ece == doctest::Approx(r2.ece).epsilon(1e-12));
}

TEST_CASE("constant classifier b-ACC equals 1/C") {
  PredictionSet p;
  p.num_classes = 3;
  p.positive_class = 1;
  p.labels = {0, 0, 1, 1, 2, 2, 0};
  for (int i = 0; i < 7; ++i) {
    p.probs.push_back(0.6);
    p.probs.push_back(0.3);
    p.probs.push_back(0.1);
  }
  auto r = classification_metrics(p);
  CHECK(r.b_acc == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("multi-class macro averaging") {
  PredictionSet p;
  p.num_classes = 3;
  p.labels = {0, 1, 2, 2};
  auto push = [&](double a, double b, double c) {
    p.probs.push_back(a);
    p.probs.push_back(b);
    p.probs.push_back(c);
  };
  push(0.8, 0.1, 0.1);  // correct 0
  push(0.1, 0.8, 0.1);  // correct 1
  push(0.1, 0.8, 0.1);  // 2 -> 1 wrong
  push(0.1, 0.1, 0.8);  // correct 2
  auto r = classification_metrics(p);
  // recalls: 1, 1, 0.5 -> b_acc = 5/6; macro precision: 1, 0.5, 1 -> 5/6
  CHECK(r.b_acc == doctest::Approx(5.0 / 6.0));
  CHECK(r.precision == doctest::Approx(5.0 / 6.0));
  CHECK(r.sensitivity == doctest::Approx(5.0 / 6.0));
  // macro one-vs-rest auc is defined here
  CHECK(auc(p) > 0.5);
}

TEST_CASE("decision rule consistency: renormalized scaling keeps metrics") {
  std::vector<double> scores = {0.9, 0.2, 0.6, 0.3, 0.8, 0.7};
  std::vector<int> labels = {1, 0, 1, 0, 0, 1};
  auto base = classification_metrics(binary_set(scores, labels));
  // scaling all rows by a positive constant and renormalizing is the identity
  // on probability rows, so argmax decisions cannot move
  auto p = binary_set(scores, labels);
  for (std::size_t i = 0; i < p.probs.size(); i += 2) {
    const double a = p.probs[i] * 3.0, b = p.probs[i + 1] * 3.0;
    p.probs[i] = a / (a + b);
    p.probs[i + 1] = b / (a + b);
  }
  auto r = classification_metrics(p);
  CHECK(r.acc == base.acc);
  CHECK(r.f1 == doctest::Approx(base.f1));
  CHECK(r.b_acc == doctest::Approx(base.b_acc));
}

TEST_CASE("contract errors") {
  PredictionSet empty;
  empty.num_classes = 2;
  CHECK_THROWS_AS(classification_metrics(empty), ContractError);

  PredictionSet bad;
  bad.num_classes = 2;
  bad.labels = {0};
  bad.probs = {0.7, 0.7};  // does not sum to 1
  CHECK_THROWS_AS(classification_metrics(bad), ContractError);
}

TEST_SUITE_END();
