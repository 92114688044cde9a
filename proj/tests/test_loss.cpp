// Copyright 2026 The SAD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sad/errors.hpp"
#include "sad/gradcheck.hpp"
#include "sad/loss.hpp"

using namespace sad;

namespace {

double logit_of(double p) { return std::log(p / (1.0 - p)); }

SampleTerm term(double z, double q, std::optional<Label> y = std::nullopt) {
  return SampleTerm{z, q, y};
}

LossHyperparams hp_with(double gamma, double beta) {
  LossHyperparams hp;
  hp.gamma = gamma;
  hp.beta = beta;
  return hp;
}

// Expected values below come from 40-digit mpmath evaluation of the
// closed-form definitions.
constexpr double kFocalHalf = 0.17328679513998632;      // 0.25 ln 2
constexpr double kKlHalfQuarter = 0.14384103622589046;  // KL(0.5 || 0.25)
constexpr double kEntropy09 = 0.32508297339144824;
constexpr double kDw05 = 0.15481812174617547;
constexpr double kAdwHalf = 0.41789321881345248;        // (1 - 2^{-1.5})^2
constexpr double kAdlBeta0 = 0.0025818304387106001;
constexpr double kFdlExample = 0.092016051792124267;    // 0.25 KL(0.9 || 0.5)
constexpr double kNormHalf = 0.28717458874925875;       // 0.5^1.8

}  // namespace

TEST_CASE("hyperparameter defaults and validation") {
  LossHyperparams hp;
  CHECK(hp.gamma == 2.0);
  CHECK(hp.beta == 1.5);
  CHECK(hp.theta == 1.8);
  CHECK(hp.alpha == 1.0);
  CHECK(hp.eps == 1e-6);
  CHECK_NOTHROW(hp.validate());
  hp.theta = 0.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.gamma = -1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.eps = 1e-2;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.beta = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("focal_loss") {
  LossHyperparams hp;
  SUBCASE("p = 0.5, y = +1, gamma = 2") {
    const auto r = focal_loss(term(0.0, 0.5, Label::kPositive), hp);
    CHECK(r.value == doctest::Approx(kFocalHalf).epsilon(1e-14));
  }
  SUBCASE("saturated p_t goes to zero") {
    const auto r = focal_loss(term(40.0, 0.5, Label::kPositive), hp);
    CHECK(r.value < 1e-30);
    CHECK(std::abs(r.grad_logit) < 1e-30);
  }
  SUBCASE("gamma = 0 is cross entropy") {
    const auto r = focal_loss(term(0.0, 0.5, Label::kNegative), hp_with(0.0, 0.0));
    CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("alpha balancing") {
    LossHyperparams a = hp;
    a.alpha = 0.25;
    const auto pos = focal_loss(term(0.0, 0.5, Label::kPositive), a);
    const auto neg = focal_loss(term(0.0, 0.5, Label::kNegative), a);
    CHECK(pos.value == doctest::Approx(0.25 * kFocalHalf));
    CHECK(neg.value == doctest::Approx(0.75 * kFocalHalf));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(focal_loss(term(0.0, 0.5), hp), UsageError);
    CHECK_THROWS_AS(focal_loss(term(std::nan(""), 0.5, Label::kPositive), hp), InputError);
  }
}

TEST_CASE("kl_binary") {
  LossHyperparams hp;
  CHECK(kl_binary(term(0.0, 0.5), hp).value == doctest::Approx(0.0).epsilon(1e-15));
  const auto r = kl_binary(term(logit_of(0.25), 0.5), hp);
  CHECK(r.value == doctest::Approx(kKlHalfQuarter).epsilon(1e-13));
  CHECK(r.grad_logit == doctest::Approx(0.25 - 0.5).epsilon(1e-14));
  CHECK(std::abs(kl_binary(term(logit_of(0.9), 0.9), hp).grad_logit) < 1e-15);
  CHECK_THROWS_AS(kl_binary(term(0.0, 1.5), hp), InputError);
  CHECK_THROWS_AS(kl_binary(term(0.0, -0.1), hp), InputError);
}

TEST_CASE("teacher_entropy") {
  CHECK(teacher_entropy(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(teacher_entropy(1.0 - 1e-6) < 2e-5);
  CHECK(teacher_entropy(1.0) < 2e-5);
  CHECK(teacher_entropy(0.9) == doctest::Approx(kEntropy09).epsilon(1e-14));
  for (double q = 0.01; q < 1.0; q += 0.01) {
    CHECK(teacher_entropy(q) <= teacher_entropy(0.5));
  }
}

TEST_CASE("distill weights") {
  CHECK(distill_weight(0.0, 2.0) == 0.0);
  CHECK(distill_weight(800.0, 2.0) == doctest::Approx(1.0));
  CHECK(distill_weight(0.5, 2.0) == doctest::Approx(kDw05).epsilon(1e-14));
  CHECK_THROWS_AS(distill_weight(-1e-3, 2.0), InputError);

  LossHyperparams hp;
  CHECK(adaptive_distill_weight(0.0, 0.0, hp) == 0.0);
  CHECK(adaptive_distill_weight(0.0, std::log(2.0), hp) ==
        doctest::Approx(kAdwHalf).epsilon(1e-14));
  CHECK_THROWS_AS(adaptive_distill_weight(-1.0, 0.0, hp), InputError);
  CHECK_THROWS_AS(adaptive_distill_weight(0.0, -1.0, hp), InputError);

  LossHyperparams b0 = hp_with(2.0, 0.0);
  for (double kl : {0.0, 1e-3, 0.1, 0.7, 3.0}) {
    CHECK(adaptive_distill_weight(kl, 0.4, b0) == distill_weight(kl, 2.0));
  }
}

TEST_CASE("adaptive weight monotonicity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double kl = u(rng);
    const double t = u(rng) * 0.14;  // entropy is at most ln 2
    const double dk = u(rng) * 0.1;
    for (double gamma : {0.5, 1.0, 2.0, 5.0}) {
      for (double beta : {0.0, 0.5, 1.0, 1.5}) {
        const auto hp = hp_with(gamma, beta);
        const double w = adaptive_distill_weight(kl, t, hp);
        CHECK(w >= 0.0);
        CHECK(w < 1.0);
        CHECK(adaptive_distill_weight(kl + dk, t, hp) >= w);
        CHECK(adaptive_distill_weight(kl, t, hp_with(gamma, beta + 0.5)) >= w);
      }
    }
  }
}

TEST_CASE("adl") {
  SUBCASE("zero at p = q") {
    for (double beta : {0.0, 0.5, 1.5}) {
      const auto r = adl(term(logit_of(0.9), 0.9), hp_with(2.0, beta));
      CHECK(r.value < 1e-15);
      CHECK(std::abs(r.grad_logit) < 1e-15);
    }
  }
  SUBCASE("beta = 0 chain value") {
    const auto r = adl(term(logit_of(0.25), 0.5), hp_with(2.0, 0.0));
    CHECK(r.value == doctest::Approx(kAdlBeta0).epsilon(1e-12));
  }
  SUBCASE("beta raises the weight when the teacher is uncertain") {
    const auto r0 = adl(term(logit_of(0.25), 0.5), hp_with(2.0, 0.0));
    const auto r15 = adl(term(logit_of(0.25), 0.5), hp_with(2.0, 1.5));
    CHECK(r15.value > r0.value);
  }
  SUBCASE("beta = 0 equals DW(kl) * kl exactly") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> z(-10.0, 10.0);
    std::uniform_real_distribution<double> q(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const SampleTerm t = term(z(rng), q(rng));
      const auto hp = hp_with(2.0, 0.0);
      const double kl = kl_binary(t, hp).value;
      CHECK(adl(t, hp).value == distill_weight(kl, 2.0) * kl);
    }
  }
  SUBCASE("detached weight keeps only the KL path") {
    LossHyperparams hp;
    hp.detach_weight = true;
    const SampleTerm t = term(logit_of(0.25), 0.5);
    const double kl = kl_binary(t, hp).value;
    const double w = adaptive_distill_weight(kl, teacher_entropy(0.5), hp);
    CHECK(adl(t, hp).grad_logit == doctest::Approx(w * (0.25 - 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("fdl") {
  LossHyperparams hp;
  CHECK(fdl(term(logit_of(0.3), 0.3, Label::kPositive), hp).value < 1e-15);
  CHECK(fdl(term(logit_of(0.3), 0.3, Label::kNegative), hp).value < 1e-15);
  CHECK(fdl(term(0.0, 0.9, Label::kPositive), hp).value ==
        doctest::Approx(kFdlExample).epsilon(1e-13));
  CHECK(fdl(term(40.0, 0.2, Label::kPositive), hp).value < 1e-20);
  CHECK_THROWS_AS(fdl(term(0.0, 0.5), hp), UsageError);
}

TEST_CASE("focal_shared_joint") {
  LossHyperparams hp;
  const double z = logit_of(1.0 - 1e-6);
  for (double q : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    CHECK(std::abs(focal_shared_joint(term(z, q, Label::kPositive), hp).grad_logit) <= 1e-4);
    CHECK(std::abs(focal_shared_joint(term(-z, q, Label::kNegative), hp).grad_logit) <= 1e-4);
  }
  // KL vanishes at p = q; the cross entropy part stays.
  const SampleTerm t = term(logit_of(0.7), 0.7, Label::kPositive);
  const double expected = std::pow(0.3, 2.0) * -std::log(0.7);
  CHECK(focal_shared_joint(t, hp).value == doctest::Approx(expected).epsilon(1e-12));
  // gamma = 0 with KL = 0 is plain cross entropy.
  CHECK(focal_shared_joint(term(0.0, 0.5, Label::kPositive), hp_with(0.0, 0.0)).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(focal_shared_joint(term(0.0, 0.5), hp), UsageError);
}

TEST_CASE("adl_normalizer") {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(adl_normalizer(ones, 0.7) == 3.0);
  CHECK(adl_normalizer(ones, 1.8) == 3.0);
  CHECK(adl_normalizer(std::vector<double>{0.5}, 1.8) == doctest::Approx(kNormHalf).epsilon(1e-14));
  const std::vector<double> bg(10, 0.0);
  CHECK(adl_normalizer(bg, 1.8) == doctest::Approx(10.0 * std::pow(1e-6, 1.8)));
  CHECK(adl_normalizer(bg, 1.8) > 0.0);
  CHECK_THROWS_AS(adl_normalizer(std::vector<double>{}, 1.8), InputError);
  CHECK_THROWS_AS(adl_normalizer(std::vector<double>{1.2}, 1.8), InputError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> q(64);
  for (double& v : q) v = u(rng);
  const double n = adl_normalizer(q, 1.8);
  std::vector<double> doubled = q;
  doubled.insert(doubled.end(), q.begin(), q.end());
  CHECK(adl_normalizer(doubled, 1.8) == doctest::Approx(2.0 * n).epsilon(1e-14));
  for (int i = 0; i < 20; ++i) {
    std::shuffle(q.begin(), q.end(), rng);
    CHECK(adl_normalizer(q, 1.8) == doctest::Approx(n).epsilon(1e-14));
  }
}

TEST_CASE("l2_mimic") {
  const std::vector<double> a{1.0, -2.0, 0.5};
  const auto same = l2_mimic(a, a);
  CHECK(same.value == 0.0);
  CHECK(std::all_of(same.grad.begin(), same.grad.end(), [](double g) { return g == 0.0; }));
  const auto r = l2_mimic(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0});
  CHECK(r.value == 0.5);
  CHECK(r.grad[0] == 1.0);
  CHECK_THROWS_AS(l2_mimic(std::vector<double>{0.0}, a), InputError);
}

TEST_CASE("image_distill_loss") {
  LossHyperparams hp;
  SUBCASE("all p = q gives zero ADL") {
    std::vector<SampleTerm> terms;
    for (double q : {0.1, 0.4, 0.8, 0.95, 0.02, 0.5}) terms.push_back(term(logit_of(q), q));
    const auto b = image_distill_loss(terms, 3, 0, hp);
    CHECK(b.adl_sum < 1e-14);
  }
  SUBCASE("single term divides by the normalizer") {
    const auto hp0 = hp_with(2.0, 0.0);
    const std::vector<SampleTerm> terms{term(logit_of(0.25), 0.5)};
    const auto b = image_distill_loss(terms, 1, 0, hp0);
    CHECK(b.normalizer_adl == doctest::Approx(kNormHalf).epsilon(1e-14));
    CHECK(b.total == doctest::Approx(kAdlBeta0 / kNormHalf).epsilon(1e-12));
  }
  SUBCASE("anchor permutation invariance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> z(-6.0, 6.0);
    const std::size_t anchors = 50;
    const std::size_t classes = 3;
    std::vector<SampleTerm> terms;
    for (std::size_t i = 0; i < anchors * classes; ++i) {
      terms.push_back(term(z(rng), u(rng), u(rng) < 0.1 ? Label::kPositive : Label::kNegative));
    }
    const auto base = image_distill_loss(terms, classes, 4, hp);
    std::vector<std::size_t> perm(anchors);
    for (std::size_t i = 0; i < anchors; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<SampleTerm> shuffled;
    for (std::size_t i : perm) {
      for (std::size_t c = 0; c < classes; ++c) shuffled.push_back(terms[i * classes + c]);
    }
    const auto other = image_distill_loss(shuffled, classes, 4, hp);
    CHECK(other.total == doctest::Approx(base.total).epsilon(1e-13));
    CHECK(other.normalizer_adl == doctest::Approx(base.normalizer_adl).epsilon(1e-13));
  }
  SUBCASE("total matches the breakdown identity and gradients match fd") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> z(-4.0, 4.0);
    std::vector<SampleTerm> terms;
    for (int i = 0; i < 12; ++i) {
      std::optional<Label> y;
      if (i % 4 != 3) y = (i % 5 == 0) ? Label::kPositive : Label::kNegative;
      terms.push_back(term(z(rng), u(rng), y));
    }
    for (auto soft : {SoftTargetLoss::kNone, SoftTargetLoss::kAdl, SoftTargetLoss::kFdl}) {
      std::vector<double> grad(terms.size());
      auto b = image_loss(terms, 2, 3, soft, hp, grad);
      b.loc_sum = 0.0;
      const double expect = b.focal_sum / 3.0 + b.adl_sum / b.normalizer_adl;
      CHECK(b.total == doctest::Approx(expect).epsilon(1e-14));
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const double fd = fd_gradient(
            [&](double v) {
              auto copy = terms;
              copy[t].logit = v;
              return image_loss(copy, 2, 3, soft, hp).total;
            },
            terms[t].logit);
        CHECK(relative_gradient_error(grad[t], fd) <= 1e-5);
      }
    }
  }
}

TEST_CASE("finite for extreme logits and probabilities") {
  for (double z = -40.0; z <= 40.0; z += 0.5) {
    for (double q : {0.0, 1e-9, 0.3, 0.5, 1.0 - 1e-9, 1.0}) {
      for (double gamma : {0.0, 0.5, 2.0, 5.0}) {
        const auto hp = hp_with(gamma, 1.5);
        for (auto y : {Label::kPositive, Label::kNegative}) {
          const SampleTerm t = term(z, q, y);
          for (const auto& r : {focal_loss(t, hp), kl_binary(t, hp), adl(t, hp), fdl(t, hp),
                                focal_shared_joint(t, hp)}) {
            CHECK(std::isfinite(r.value));
            CHECK(std::isfinite(r.grad_logit));
            CHECK(r.value >= 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("fd_gradient oracle") {
  CHECK(fd_gradient([](double x) { return x; }, 2.5) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(fd_gradient([](double x) { return x * x; }, 3.0, 1e-5) - 6.0) < 1e-8);
  CHECK_THROWS_AS(fd_gradient([](double) { return std::nan(""); }, 0.0), OracleError);
  CHECK_THROWS_AS(fd_gradient([](double x) { return x; }, 0.0, 1e-2), InputError);
  LossHyperparams hp;
  const SampleTerm t = term(0.7, 0.2);
  const double fd = fd_gradient([&](double z) { return adl(term(z, 0.2), hp).value; }, t.logit);
  CHECK(relative_gradient_error(adl(t, hp).grad_logit, fd) <= 1e-6);
}

TEST_CASE("gradcheck suite") {
  GradcheckOptions opts;
  opts.trials = 1000;
  const auto rows = run_gradcheck(opts);
  CHECK(rows.size() == 6);
  for (const auto& row : rows) {
    INFO(row.kernel << " max rel err " << row.max_rel_error);
    CHECK(row.trials == 1000);
    CHECK(row.passed());
  }
  opts.perturb = 1e-3;
  opts.trials = 50;
  for (const auto& row : run_gradcheck(opts)) {
    CHECK_FALSE(row.passed());
  }
  opts.trials = 0;
  CHECK_THROWS_AS(run_gradcheck(opts), UsageError);
}
