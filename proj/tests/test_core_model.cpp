// Copyright 2026 The OBCTR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "obctr/core_model.hpp"
#include "obctr/random.hpp"

using namespace obctr;

TEST_CASE("hyperparameter invariants") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());

  auto bad = hp;
  bad.K = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = hp;
  bad.burn_in = bad.sweeps;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = hp;
  bad.sigma_r2 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = hp;
  bad.sigma_eps2 = INFINITY;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = hp;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const auto h10 = HyperParams::with_topics(10);
  CHECK(h10.K == 10);
  CHECK(h10.alpha == doctest::Approx(0.1));
  CHECK(h10.beta == doctest::Approx(0.1));
}

TEST_CASE("prior factors") {
  HyperParams hp;
  hp.K = 3;
  hp.sigma_u2 = 1.0;
  const auto u = init_user_factor(hp);
  CHECK(u.mean == std::vector<double>{0, 0, 0});
  CHECK(u.var == std::vector<double>{1, 1, 1});

  // sigma_* are variances, so sigma_u2 = 4 gives prior variance 4.
  hp.K = 1;
  hp.sigma_u2 = 4.0;
  CHECK(init_user_factor(hp).var == std::vector<double>{4.0});
  hp.sigma_v2 = 0.5;
  CHECK(init_item_factor(hp).var == std::vector<double>{0.5});

  hp.K = 0;
  CHECK_THROWS_AS(init_user_factor(hp), std::invalid_argument);
  CHECK_THROWS_AS(init_item_factor(hp), std::invalid_argument);
}

TEST_CASE("prior factors are valid for every grid scale") {
  // Grid scales s enter as variance 1/s^2 (sigma_u, sigma_v) or as s^2.
  for (double s : {0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    for (double var : {1.0 / (s * s), s * s}) {
      HyperParams hp;
      hp.K = 5;
      hp.sigma_u2 = var;
      hp.sigma_v2 = var;
      CHECK_NOTHROW(hp.validate());
      CHECK_NOTHROW(init_user_factor(hp).validate());
      CHECK_NOTHROW(init_item_factor(hp).validate());
    }
  }
}

TEST_CASE("gaussian factor invariants") {
  GaussianFactor f{{0.0, 1.0}, {1.0, 2.0}};
  CHECK_NOTHROW(f.validate());
  f.var[1] = 0.0;
  CHECK_THROWS(f.validate());
  f.var[1] = 1.0;
  f.mean[0] = NAN;
  CHECK_THROWS(f.validate());
  GaussianFactor ragged{{0.0}, {1.0, 1.0}};
  CHECK_THROWS(ragged.validate());
}

TEST_CASE("predict is the dot product of the means") {
  GaussianFactor u{{0, 0}, {1, 1}};
  GaussianFactor v{{3, -1}, {1, 1}};
  CHECK(predict(u, v) == 0.0);
  u.mean = {1, 2};
  CHECK(predict(u, v) == 1.0);

  GaussianFactor w{{1, 2, 3}, {1, 1, 1}};
  CHECK_THROWS_AS(predict(u, w), std::invalid_argument);
}

TEST_CASE("predict is bilinear") {
  Rng rng(11);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    GaussianFactor a{{}, {}}, b{{}, {}}, v{{}, {}};
    for (int k = 0; k < 4; ++k) {
      a.mean.push_back(n01(rng));
      b.mean.push_back(n01(rng));
      v.mean.push_back(n01(rng));
      a.var.push_back(1.0);
      b.var.push_back(1.0);
      v.var.push_back(1.0);
    }
    const double x = n01(rng), y = n01(rng);
    GaussianFactor mix{{}, std::vector<double>(4, 1.0)};
    for (int k = 0; k < 4; ++k) mix.mean.push_back(x * a.mean[k] + y * b.mean[k]);
    CHECK(predict(mix, v) == doctest::Approx(x * predict(a, v) + y * predict(b, v)).epsilon(1e-12));
  }
}

TEST_CASE("predict matches a Monte-Carlo estimate of E[u^T v]") {
  Rng rng(2024);
  std::normal_distribution<double> n01;
  const int K = 5;
  GaussianFactor u{{}, {}}, v{{}, {}};
  for (int k = 0; k < K; ++k) {
    u.mean.push_back(n01(rng));
    v.mean.push_back(n01(rng));
    u.var.push_back(0.2 + std::abs(n01(rng)));
    v.var.push_back(0.2 + std::abs(n01(rng)));
  }
  const int samples = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    double x = 0.0;
    for (int k = 0; k < K; ++k)
      x += (u.mean[k] + std::sqrt(u.var[k]) * n01(rng)) * (v.mean[k] + std::sqrt(v.var[k]) * n01(rng));
    sum += x;
    sq += x * x;
  }
  const double mean = sum / samples;
  const double se = std::sqrt((sq / samples - mean * mean) / samples);
  CHECK(std::abs(mean - predict(u, v)) <= 3.0 * se);
}

TEST_CASE("document counts and frequencies") {
  Document d;
  d.tokens = {0, 1, 2, 1};
  d.z = {1, 0, 1, 1};
  d.recount(2);
  CHECK(d.topic_counts == std::vector<std::int32_t>{1, 3});
  CHECK(d.frequencies() == std::vector<double>{0.25, 0.75});
  CHECK(d.zbar == std::vector<double>{0.25, 0.75});
  CHECK_NOTHROW(d.validate(2, 3));
  CHECK_THROWS(d.validate(2, 2));  // token 2 outside a 2-word vocabulary
  d.topic_counts[0] = 2;
  CHECK_THROWS(d.validate(2, 3));
}

TEST_CASE("topic state smoothing and cache") {
  TopicState t(3, 4, 0.5);
  for (int k = 0; k < 3; ++k)
    for (int w = 0; w < 4; ++w) CHECK(t.phi(k, w) == doctest::Approx(0.25));

  t.add(0, 1, 3);
  t.add(0, 2, 1);
  t.add(2, 3, 5);
  CHECK(t.count(0, 1) == 3);
  CHECK(t.total(0) == 4);
  CHECK(t.total(1) == 0);
  CHECK(t.phi(0, 1) == doctest::Approx(3.5 / 6.0));
  CHECK(t.phi(0, 0) == doctest::Approx(0.5 / 6.0));
  CHECK(t.log_phi(2, 3) == doctest::Approx(std::log(5.5 / 7.0)).epsilon(1e-14));

  t.add(0, 1, -3);
  CHECK(t.phi(0, 1) == doctest::Approx(0.5 / 3.0));
  CHECK_THROWS_AS(t.add(0, 1, -1), std::logic_error);

  const auto phi = t.phi_matrix();
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int w = 0; w < 4; ++w) {
      s += phi[k * 4 + w];
      CHECK(std::exp(t.log_phi(k, w)) == doctest::Approx(phi[k * 4 + w]).epsilon(1e-13));
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK_NOTHROW(t.validate());

  std::vector<std::int64_t> counts(12, 2);
  t.assign_counts(counts);
  CHECK(t.total(1) == 8);
  CHECK(t.phi(1, 3) == doctest::Approx(0.25));
}

TEST_CASE("id map") {
  IdMap m;
  CHECK(m.intern(122) == 0);
  CHECK(m.intern(7) == 1);
  CHECK(m.intern(122) == 0);
  CHECK(m.find(7) == 1);
  CHECK(m.find(8) == -1);
  CHECK(m.external(1) == 7);
  const auto copy = IdMap::from_externals(m.externals());
  CHECK(copy.find(122) == 0);
  CHECK(copy.find(7) == 1);
  CHECK(copy.size() == 2);
}

TEST_CASE("derived seeds depend on every key") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = uniform01(rng);
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}
