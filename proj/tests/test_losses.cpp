#include <cmath>
#include <random>

#include "awfnet/gradcheck.hpp"
#include "awfnet/losses.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace awfnet;
using Td = Tensor<double>;

namespace {

LossConfig bc_config(std::vector<long> counts, double alpha = 0.5,
                     double lambda = 0.8, double t = 2.0,
                     SignConvention sign = SignConvention::convex) {
  LossConfig cfg;
  cfg.kind = LossKind::BC;
  cfg.alpha = alpha;
  cfg.lambda = lambda;
  cfg.t = t;
  cfg.class_counts = std::move(counts);
  cfg.sign = sign;
  return cfg;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("ce examples") {
  auto l = ce_loss(Td::from_data({1, 2}, {0.0, 0.0}), {0});
  CHECK(l.value.item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  auto sat = ce_loss(Td::from_data({1, 2}, {50.0, 0.0}), {0});
  CHECK(sat.value.item() <= 1e-8);

  CHECK_THROWS_AS(ce_loss(Td::from_data({1, 2}, {0.0, 0.0}), {2}), LabelError);
  CHECK_THROWS_AS(ce_loss(Td::from_data({1, 2}, {0.0, 0.0}), {-1}), LabelError);
}

TEST_CASE("ce matches the direct formula oracle on a random batch") {
  std::mt19937_64 rng(3);
  auto logits = oracle::random_tensor<double>({4, 3}, rng, false, -2.0, 2.0);
  std::vector<int> targets = {2, 0, 1, 1};
  auto l = ce_loss(logits, targets);

  double ref = 0;
  for (int n = 0; n < 4; ++n) {
    double denom = 0;
    for (int c = 0; c < 3; ++c) denom += std::exp(logits.data()[n * 3 + c]);
    ref += -std::log(std::exp(logits.data()[n * 3 + targets[n]]) / denom);
  }
  ref /= 4.0;
  CHECK(l.value.item() == doctest::Approx(ref).epsilon(1e-6));
  CHECK(l.value.item() == doctest::Approx(mean_of(l.per_sample)).epsilon(1e-7));
}

TEST_CASE("ce closed-form gradient") {
  auto logits = Td::from_data({1, 2}, {0.0, 0.0});
  auto g = ce_gradient_closed_form(logits, {0});
  CHECK(g.data()[0] == doctest::Approx(-0.5));
  CHECK(g.data()[1] == doctest::Approx(0.5));

  // sign structure: target entry negative, all others positive, per sample
  std::mt19937_64 rng(5);
  auto z = oracle::random_tensor<double>({6, 4}, rng, true, -3.0, 3.0);
  std::vector<int> targets = {0, 1, 2, 3, 1, 2};
  auto grad = ce_gradient_closed_form(z, targets);
  for (int n = 0; n < 6; ++n)
    for (int c = 0; c < 4; ++c) {
      const double v = grad.data()[n * 4 + c];
      if (c == targets[n])
        CHECK(v < 0.0);
      else
        CHECK(v > 0.0);
    }

  // agrees with the analytic backward of ce_loss
  ce_loss(z, targets).value.backward();
  CHECK(oracle::max_abs_diff(z.grad(), std::vector<double>(grad.data().begin(),
                                                           grad.data().end())) <=
        1e-6);

  // summing per-class columns reproduces the case split of the batch gradient
  for (int c = 0; c < 4; ++c) {
    double target_mass = 0, other_mass = 0;
    for (int n = 0; n < 6; ++n) {
      if (targets[n] == c)
        target_mass += grad.data()[n * 4 + c];
      else
        other_mass += grad.data()[n * 4 + c];
    }
    if (target_mass != 0) CHECK(target_mass < 0.0);
    CHECK(other_mass > 0.0);
  }
}

TEST_CASE("balance factors") {
  // uniform probabilities and balanced counts hit the 1-branches everywhere
  auto s = balance_factors<double>({0.25, 0.25, 0.25, 0.25}, {10, 10, 10, 10},
                                   1, 0.8, 2.0);
  for (double v : s) CHECK(v == doctest::Approx(1.0));

  // worked scalar example: logits (0,1), target 0, counts (300,100)
  const double e1 = std::exp(1.0);
  const double p1 = e1 / (1.0 + e1), p0 = 1.0 / (1.0 + e1);
  auto s2 = balance_factors<double>({p0, p1}, {300, 100}, 0, 0.8, 2.0);
  CHECK(s2[0] == 1.0);
  CHECK(s2[1] == doctest::Approx(std::exp(0.8) * 9.0).epsilon(1e-9));
  CHECK(s2[1] == doctest::Approx(20.0299).epsilon(1e-4));

  // rare-class target never inflates competitors
  auto s3 = balance_factors<double>({0.6, 0.3, 0.1}, {5, 100, 200}, 0, 0.8, 2.0);
  CHECK(s3[1] == 1.0);  // p_1 < p_0 and n_0 < n_1
  CHECK(s3[2] == 1.0);

  // scale covariance: only count ratios matter
  auto a = balance_factors<double>({p0, p1}, {300, 100}, 0, 0.8, 2.0);
  auto b = balance_factors<double>({p0, p1}, {3000, 1000}, 0, 0.8, 2.0);
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-12));
}

TEST_CASE("cs worked example") {
  LossConfig cfg = bc_config({300, 100});
  cfg.kind = LossKind::CS;
  auto logits = Td::from_data({1, 2}, {0.0, 1.0});
  auto l = cs_loss(logits, {0}, cfg);

  // independent scalar evaluation
  const double S1 = std::exp(0.8) * 9.0;
  const double phat = 1.0 / (S1 * std::exp(1.0) + 1.0);
  CHECK(phat == doctest::Approx(0.018035).epsilon(1e-4));
  CHECK(l.value.item() == doctest::Approx(-std::log(phat)).epsilon(1e-9));
  CHECK(l.value.item() == doctest::Approx(4.0154).epsilon(1e-4));
}

TEST_CASE("cs degenerates to ce when every factor is 1") {
  LossConfig cfg = bc_config({10, 10});
  cfg.kind = LossKind::CS;
  auto logits = Td::from_data({2, 2}, {0.3, 0.3, -1.2, -1.2});
  std::vector<int> targets = {0, 1};
  auto cs = cs_loss(logits, targets, cfg);
  auto ce = ce_loss(logits, targets);
  CHECK(cs.value.item() == ce.value.item());  // bitwise
  CHECK(cs.per_sample == ce.per_sample);
}

TEST_CASE("cs loss never drops below ce when all factors >= 1") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = oracle::random_tensor<double>({5, 3}, rng, false, -3.0, 3.0);
    std::vector<int> targets(5);
    std::uniform_int_distribution<int> d(0, 2);
    for (auto& t : targets) t = d(rng);
    LossConfig cfg = bc_config({37, 11, 95});
    cfg.kind = LossKind::CS;
    auto cs = cs_loss(logits, targets, cfg);
    auto ce = ce_loss(logits, targets);
    CHECK(cs.value.item() >= ce.value.item() - 1e-12);
  }
}

TEST_CASE("cs loss is monotone in t when the target outnumbers a competitor") {
  auto logits = Td::from_data({1, 2}, {0.2, 0.4});
  double prev = -1.0;
  for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}) {
    LossConfig cfg = bc_config({300, 100}, 0.5, 0.8, t);
    cfg.kind = LossKind::CS;
    const double v = cs_loss(logits, {0}, cfg).value.item();
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("bc endpoints and sign conventions") {
  std::mt19937_64 rng(11);
  auto logits = oracle::random_tensor<double>({4, 2}, rng, false, -2.0, 2.0);
  std::vector<int> targets = {0, 1, 0, 0};

  // alpha = 0: exactly CE regardless of counts
  auto bc0 = bc_loss(logits, targets, bc_config({300, 100}, 0.0));
  CHECK(bc0.value.item() == ce_loss(logits, targets).value.item());

  // alpha = 1: exactly CS
  auto bc1 = bc_loss(logits, targets, bc_config({300, 100}, 1.0));
  LossConfig cs_cfg = bc_config({300, 100});
  cs_cfg.kind = LossKind::CS;
  CHECK(bc1.value.item() ==
        doctest::Approx(cs_loss(logits, targets, cs_cfg).value.item())
            .epsilon(1e-12));

  // S = 1 everywhere needs uniform rows (T = 1) and balanced counts (M = 1);
  // the convex combination then equals CE
  auto uniform = Td::from_data({3, 2}, {0.4, 0.4, -1.0, -1.0, 2.5, 2.5});
  std::vector<int> ut = {0, 1, 0};
  auto bal = bc_loss(uniform, ut, bc_config({50, 50}, 0.5));
  CHECK(bal.value.item() ==
        doctest::Approx(ce_loss(uniform, ut).value.item()).epsilon(1e-12));

  // literal convention with S = 1 cancels to zero at alpha = 0.5
  auto lit = bc_loss(uniform, ut,
                     bc_config({50, 50}, 0.5, 0.8, 2.0, SignConvention::literal));
  CHECK(lit.value.item() == doctest::Approx(0.0).epsilon(1e-12));

  // continuity in alpha: value is a linear path between CE and CS
  const double ce = ce_loss(logits, targets).value.item();
  const double cs = cs_loss(logits, targets, cs_cfg).value.item();
  for (double a : {0.1, 0.35, 0.8}) {
    auto v = bc_loss(logits, targets, bc_config({300, 100}, a)).value.item();
    CHECK(v == doctest::Approx(a * cs + (1 - a) * ce).epsilon(1e-9));
  }
}

TEST_CASE("focal loss examples and oracle") {
  std::mt19937_64 rng(13);
  auto logits = oracle::random_tensor<double>({4, 3}, rng, false, -2.0, 2.0);
  std::vector<int> targets = {1, 0, 2, 1};

  // gamma = 0 reduces to CE exactly
  auto fl0 = focal_loss(logits, targets, 0.0);
  CHECK(fl0.value.item() == ce_loss(logits, targets).value.item());

  // saturated prediction has zero loss
  auto sat = focal_loss(Td::from_data({1, 2}, {60.0, 0.0}), {0}, 2.0);
  CHECK(sat.value.item() <= 1e-8);

  // gamma = 2 against an independent scalar evaluation
  auto fl = focal_loss(logits, targets, 2.0);
  double ref = 0;
  for (int n = 0; n < 4; ++n) {
    double denom = 0;
    for (int c = 0; c < 3; ++c) denom += std::exp(logits.data()[n * 3 + c]);
    const double p = std::exp(logits.data()[n * 3 + targets[n]]) / denom;
    ref += std::pow(1.0 - p, 2.0) * -std::log(p);
  }
  ref /= 4.0;
  CHECK(fl.value.item() == doctest::Approx(ref).epsilon(1e-6));
  CHECK(fl.value.item() == doctest::Approx(mean_of(fl.per_sample)).epsilon(1e-7));
}

TEST_CASE("loss gradchecks at 1e-4 with factors held constant") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937_64 rng(seed);
    auto logits = oracle::random_tensor<double>({4, 3}, rng, true, -2.0, 2.0);
    std::vector<int> targets = {0, 2, 1, 0};
    LossConfig cfg = bc_config({120, 40, 260});

    auto rce = gradcheck(
        "ce_loss",
        [&](const std::vector<Td>& in) { return ce_loss(in[0], targets).value; },
        {logits}, 1e-3, 1e-4);
    CHECK(rce.pass);

    const auto factors = balance_factor_matrix(logits, targets, cfg);
    auto rcs = gradcheck(
        "cs_loss",
        [&](const std::vector<Td>& in) {
          return cs_loss_with_factors(in[0], targets, factors).value;
        },
        {logits}, 1e-3, 1e-4);
    CHECK(rcs.pass);

    auto rbc = gradcheck(
        "bc_loss",
        [&](const std::vector<Td>& in) {
          auto cs = cs_loss_with_factors(in[0], targets, factors).value;
          auto ce = ce_loss(in[0], targets).value;
          return add(scale(cs, 0.5), scale(ce, 0.5));
        },
        {logits}, 1e-3, 1e-4);
    CHECK(rbc.pass);

    auto rfl = gradcheck(
        "focal_loss",
        [&](const std::vector<Td>& in) {
          return focal_loss(in[0], targets, 2.0).value;
        },
        {logits}, 1e-3, 1e-4);
    CHECK(rfl.pass);
  }
}

TEST_CASE("loss config validation") {
  auto logits = Td::from_data({1, 2}, {0.0, 0.0});
  LossConfig cfg = bc_config({10});  // wrong length
  CHECK_THROWS_AS(bc_loss(logits, {0}, cfg), ConfigError);
  LossConfig neg = bc_config({10, -1});
  CHECK_THROWS_AS(bc_loss(logits, {0}, neg), ConfigError);
  LossConfig bad_alpha = bc_config({10, 10}, 1.5);
  CHECK_THROWS_AS(bc_loss(logits, {0}, bad_alpha), ConfigError);
  CHECK_THROWS_AS(focal_loss(logits, {0}, -1.0), ConfigError);
}

TEST_SUITE_END();
