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
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <doctest.h>

#include "obctr/engine.hpp"
#include "obctr/synth.hpp"

using namespace obctr;

namespace {

SynthParams small_params(std::uint64_t seed) {
  auto p = SynthParams::defaults();
  p.users = 20;
  p.items = 10;
  p.vocab = 30;
  p.doc_len = 15;
  p.ratings = 300;
  p.heldout_docs = 5;
  p.seed = seed;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

TEST_CASE("generator output shapes") {
  const auto p = small_params(1);
  const auto d = generate_synthetic(p);
  CHECK(d.corpus.vocab_size() == 30);
  CHECK(d.corpus.docs.size() == 10u);
  CHECK(d.events.size() == 300u);
  CHECK(d.heldout_docs.size() == 5u);
  CHECK(d.truth.u.size() == 20u);
  CHECK(d.truth.v.size() == 10u);
  for (int k = 0; k < p.hp.K; ++k) {
    double s = 0.0;
    for (int w = 0; w < 30; ++w) s += d.truth.phi[k * 30 + w];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(d.truth.z[j].size() == d.corpus.docs.at(j).size());
    CHECK(d.corpus.docs.at(j).size() >= 2u);
    for (int k = 0; k < p.hp.K; ++k) CHECK(d.truth.v[j][k] == d.truth.theta[j][k] + d.truth.eps[j][k]);
  }
  const auto ds = d.dataset();
  CHECK(ds.corpus_size() == 10);
  CHECK(ds.events_without_text == 0u);
  CHECK(ds.heldout_docs.size() == 5u);

  const auto again = generate_synthetic(p);
  CHECK(again.events == d.events);
  CHECK(again.truth.phi == d.truth.phi);

  const auto j = d.truth.to_json();
  CHECK(j.at("K") == p.hp.K);
  CHECK(j.at("u").size() == 20u);
}

TEST_CASE("vanishing offset variance gives v = theta") {
  auto p = small_params(2);
  p.hp.sigma_eps2 = 1e-30;
  const auto d = generate_synthetic(p);
  for (std::size_t j = 0; j < d.truth.v.size(); ++j)
    for (int k = 0; k < p.hp.K; ++k) CHECK(std::abs(d.truth.v[j][k] - d.truth.theta[j][k]) <= 1e-12);
}

TEST_CASE("rating noise has zero mean") {
  auto p = small_params(3);
  p.ratings = 100000;
  p.users = 50;
  p.items = 40;
  const auto d = generate_synthetic(p);
  double sum = 0.0;
  for (const auto& e : d.events) {
    double m = 0.0;
    for (int k = 0; k < p.hp.K; ++k) m += d.truth.u[e.user_id][k] * d.truth.v[e.item_id][k];
    sum += e.rating - m;
  }
  const double mean = sum / p.ratings;
  const double se = std::sqrt(p.hp.sigma_r2 / p.ratings);
  CHECK(std::abs(mean) <= 4.0 * se);
}

TEST_CASE("word frequencies follow theta^T phi on long documents") {
  auto p = small_params(4);
  p.items = 4;
  p.vocab = 20;
  p.doc_len = 40000;
  p.hp.beta = 1.0;
  p.ratings = 1;
  const auto d = generate_synthetic(p);
  const int D = p.vocab;
  for (int j = 0; j < p.items; ++j) {
    const auto& doc = d.corpus.docs.at(j);
    std::vector<double> counts(D, 0.0);
    for (auto w : doc) counts[w] += 1.0;
    double chi2 = 0.0;
    int cells = 0;
    for (int w = 0; w < D; ++w) {
      double pw = 0.0;
      for (int k = 0; k < p.hp.K; ++k) pw += d.truth.theta[j][k] * d.truth.phi[k * D + w];
      const double e = pw * doc.size();
      if (e < 5.0) continue;
      chi2 += (counts[w] - e) * (counts[w] - e) / e;
      ++cells;
    }
    const double df = cells - 1;
    CHECK(chi2 < df + 6.0 * std::sqrt(2.0 * df));
  }
}

// ---------------------------------------------------------------------------
// Gaussian posterior oracle

TEST_CASE("no observations return the prior") {
  const std::vector<double> m{1.0, -2.0};
  const std::vector<double> cov{2.0, 0.5, 0.5, 1.0};
  const auto post = gaussian_posterior_oracle(m, cov, {}, std::vector<double>{}, std::vector<double>{});
  for (int i = 0; i < 2; ++i) CHECK(post.mean[i] == doctest::Approx(m[i]).epsilon(1e-14));
  for (int i = 0; i < 4; ++i) CHECK(post.cov[i] == doctest::Approx(cov[i]).epsilon(1e-14));
}

TEST_CASE("textbook one-dimensional update") {
  const auto post = gaussian_posterior_oracle(std::vector<double>{0.0}, std::vector<double>{1.0}, {{1.0}},
                                              std::vector<double>{2.0}, std::vector<double>{1.0});
  CHECK(post.mean[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(post.cov[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("oracle agrees with an LDLT linear solve") {
  Rng rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 3;
    Eigen::MatrixXd A(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) A(i, j) = n01(rng);
    const Eigen::MatrixXd S0 = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(K, K);
    Eigen::VectorXd m0(K);
    for (int i = 0; i < K; ++i) m0(i) = n01(rng);

    const int M = 1 + trial % 4;
    std::vector<std::vector<double>> obs(M, std::vector<double>(K));
    std::vector<double> vals(M), vars(M);
    Eigen::MatrixXd P = S0.inverse();
    Eigen::VectorXd rhs = P * m0;
    for (int o = 0; o < M; ++o) {
      Eigen::VectorXd a(K);
      for (int i = 0; i < K; ++i) a(i) = obs[o][i] = n01(rng);
      vals[o] = n01(rng);
      vars[o] = 0.1 + uniform01(rng);
      P += a * a.transpose() / vars[o];
      rhs += vals[o] * a / vars[o];
    }
    const auto ldlt = P.ldlt();
    const Eigen::VectorXd mean = ldlt.solve(rhs);
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(K, K));

    std::vector<double> m0v(m0.data(), m0.data() + K), s0v(K * K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) s0v[i * K + j] = S0(i, j);
    const auto post = gaussian_posterior_oracle(m0v, s0v, obs, vals, vars);
    for (int i = 0; i < K; ++i) {
      CHECK(std::abs(post.mean[i] - mean(i)) <= 1e-12 * std::max(1.0, std::abs(mean(i))));
      for (int j = 0; j < K; ++j) CHECK(std::abs(post.cov[i * K + j] - cov(i, j)) <= 1e-12);
    }
  }
}

TEST_CASE("oracle errors") {
  const std::vector<double> singular{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS(gaussian_posterior_oracle(std::vector<double>{0, 0}, singular, {}, std::vector<double>{},
                                         std::vector<double>{}));
  CHECK_THROWS_AS(dense_inverse(singular, 2), std::domain_error);
  const std::vector<double> big(9 * 9, 0.0);
  CHECK_THROWS_AS(gaussian_posterior_oracle(std::vector<double>(9, 0.0), big, {}, std::vector<double>{},
                                            std::vector<double>{}),
                  std::invalid_argument);
  const std::vector<double> id{1.0, 0.0, 0.0, 1.0};
  CHECK_THROWS_AS(gaussian_posterior_oracle(std::vector<double>{0, 0}, id, {{1.0, 1.0}}, std::vector<double>{1.0},
                                            std::vector<double>{0.0}),
                  std::invalid_argument);
}

TEST_CASE("dense inverse") {
  const std::vector<double> a{4, 7, 2, 6};
  const auto inv = dense_inverse(a, 2);
  CHECK(inv[0] == doctest::Approx(0.6));
  CHECK(inv[1] == doctest::Approx(-0.7));
  CHECK(inv[2] == doctest::Approx(-0.2));
  CHECK(inv[3] == doctest::Approx(0.4));
}

// ---------------------------------------------------------------------------
// Gibbs enumeration oracle

namespace {

struct SmallState {
  HyperParams hp;
  TopicState topics;
  Document doc;
  GaussianFactor v;
};

SmallState small_state(int K, int N, std::uint64_t seed, double eps2) {
  Rng rng(seed);
  SmallState s;
  s.hp = HyperParams::with_topics(K);
  s.hp.sigma_eps2 = eps2;
  const int D = 4;
  s.hp.beta = 0.3;
  s.topics = TopicState(K, D, s.hp.beta);
  for (int k = 0; k < K; ++k)
    for (int w = 0; w < D; ++w) s.topics.add(k, w, static_cast<std::int64_t>(rng() % 8));
  for (int n = 0; n < N; ++n) {
    s.doc.tokens.push_back(static_cast<std::int32_t>(rng() % D));
    s.doc.z.push_back(static_cast<std::int32_t>(rng() % K));
  }
  s.doc.recount(K);
  std::normal_distribution<double> n01;
  for (int k = 0; k < K; ++k) {
    s.v.mean.push_back(0.5 * n01(rng));
    s.v.var.push_back(1.0);
  }
  return s;
}

}  // namespace

TEST_CASE("single-token enumeration equals the conditional") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = small_state(3, 1, seed, 0.2);
    const auto exact = gibbs_enumeration_oracle(s.doc, s.v, s.topics, s.hp);
    const auto p = gibbs_conditional(s.doc, 0, s.v, s.topics, s.hp);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(exact[k] - p[k]) <= 1e-12);
  }
}

TEST_CASE("symmetric state enumerates to uniform") {
  HyperParams hp = HyperParams::with_topics(2);
  TopicState t(2, 2, 0.5);
  Document doc;
  doc.tokens = {0, 1, 0};
  doc.z = {0, 0, 0};
  doc.recount(2);
  GaussianFactor v{{0.5, 0.5}, {1, 1}};
  // Symmetric under relabeling: z and its complement are equally likely.
  const auto p = gibbs_enumeration_oracle(doc, v, t, hp);
  for (std::size_t s = 0; s < p.size(); ++s) CHECK(std::abs(p[s] - p[p.size() - 1 - s]) <= 1e-15);

  // One token: fully uniform.
  doc.tokens = {1};
  doc.z = {0};
  doc.recount(2);
  const auto q = gibbs_enumeration_oracle(doc, v, t, hp);
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("enumeration refuses huge state spaces") {
  auto s = small_state(4, 11, 1, 1.0);  // 4^11 > 10^6
  CHECK_THROWS_AS(gibbs_enumeration_oracle(s.doc, s.v, s.topics, s.hp), std::invalid_argument);
  CHECK(assignment_index(std::vector<std::int32_t>{1, 0, 2}, 3) == 1 + 0 * 3 + 2 * 9);
}

TEST_CASE("Gibbs chain converges to the enumerated distribution") {
  auto s = small_state(2, 4, 9, 0.05);
  const auto exact = gibbs_enumeration_oracle(s.doc, s.v, s.topics, s.hp);
  double total = 0.0;
  for (double x : exact) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(77);
  std::vector<double> hist(exact.size(), 0.0);
  const int sweeps = 200000;
  for (int t = 0; t < 100; ++t) gibbs_sweep(s.doc, s.v, s.topics, s.hp, rng);
  for (int t = 0; t < sweeps; ++t) {
    gibbs_sweep(s.doc, s.v, s.topics, s.hp, rng);
    hist[assignment_index(s.doc.z, 2)] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) tv += std::abs(hist[i] / sweeps - exact[i]);
  CHECK(0.5 * tv < 0.02);
}
