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

#include "obctr/baselines.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <map>
#include <stdexcept>

#include "obctr/kernels.hpp"

namespace obctr {

PointFactor random_point_factor(int K, double init_std, Rng& rng) {
  std::normal_distribution<double> nd(0.0, init_std);
  PointFactor f;
  f.vec.resize(K);
  for (auto& x : f.vec) x = nd(rng);
  return f;
}

std::pair<PointFactor, PointFactor> pa_i_update(const PointFactor& u, const PointFactor& v,
                                                double r, double c, double eps) {
  if (!(c > 0.0)) throw std::invalid_argument("pa_i_update: aggressiveness c must be positive");
  if (u.vec.size() != v.vec.size()) throw std::invalid_argument("pa_i_update: length mismatch");
  PointFactor un = u;
  PointFactor vn = v;

  auto half_step = [&](PointFactor& x, const PointFactor& partner) {
    const double resid = r - dot(x.vec, partner.vec);
    const double loss = std::max(0.0, std::abs(resid) - eps);
    if (loss == 0.0) return;
    const double norm2 = dot(partner.vec, partner.vec);
    if (norm2 == 0.0) return;
    const double tau = std::min(c, loss / norm2);
    const double sign = resid > 0.0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < x.vec.size(); ++k) x.vec[k] += sign * tau * partner.vec[k];
  };

  half_step(un, vn);
  half_step(vn, un);
  return {std::move(un), std::move(vn)};
}

std::pair<PointFactor, PointFactor> sgd_pmf_update(const PointFactor& u, const PointFactor& v,
                                                   double r, double eta, double lam_u,
                                                   double lam_v) {
  if (!(eta > 0.0)) throw std::invalid_argument("sgd_pmf_update: eta must be positive");
  if (lam_u < 0.0 || lam_v < 0.0) throw std::invalid_argument("sgd_pmf_update: negative regularizer");
  if (u.vec.size() != v.vec.size()) throw std::invalid_argument("sgd_pmf_update: length mismatch");
  const double e = r - dot(u.vec, v.vec);
  PointFactor un = u;
  PointFactor vn = v;
  for (std::size_t k = 0; k < u.vec.size(); ++k) {
    un.vec[k] = u.vec[k] + eta * (e * v.vec[k] - lam_u * u.vec[k]);
    vn.vec[k] = v.vec[k] + eta * (e * u.vec[k] - lam_v * v.vec[k]);
  }
  return {std::move(un), std::move(vn)};
}

// ---------------------------------------------------------------------------
// Online LDA

double OnlineLdaState::next_rho() const { return std::pow(tau0 + static_cast<double>(t), -kappa); }

void OnlineLdaState::validate() const {
  if (K < 1 || D < 1) throw std::invalid_argument("OnlineLdaState: K and D must be >= 1");
  if (lambda.size() != static_cast<std::size_t>(K) * D) throw std::invalid_argument("OnlineLdaState: bad lambda size");
  for (double x : lambda)
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("OnlineLdaState: lambda must be positive");
  if (kappa < 0.0) throw std::invalid_argument("OnlineLdaState: kappa must be >= 0");
  if (tau0 < 1.0) throw std::invalid_argument("OnlineLdaState: tau0 must be >= 1 so that rho_t <= 1");
  if (!(corpus_size > 0.0)) throw std::invalid_argument("OnlineLdaState: corpus_size must be positive");
}

OnlineLdaState make_online_lda(int K, int D, double corpus_size, double kappa, double tau0,
                               LambdaInit init, std::uint64_t seed) {
  OnlineLdaState s;
  s.K = K;
  s.D = D;
  s.kappa = kappa;
  s.tau0 = tau0;
  s.corpus_size = corpus_size;
  s.lambda.assign(static_cast<std::size_t>(K) * D, 1.0);
  if (init == LambdaInit::kRandomGamma) {
    auto rng = make_rng(seed, {0x1da});
    std::gamma_distribution<double> g(100.0, 0.01);
    for (auto& x : s.lambda) x = g(rng);
  }
  s.lambda_sum.assign(K, 0.0);
  for (int k = 0; k < K; ++k)
    for (int w = 0; w < D; ++w) s.lambda_sum[k] += s.lambda[static_cast<std::size_t>(k) * D + w];
  s.validate();
  return s;
}

EStepResult online_lda_estep(const OnlineLdaState& state, std::span<const std::int32_t> tokens,
                             double alpha) {
  using boost::math::digamma;
  if (tokens.empty()) throw std::invalid_argument("online_lda: empty document");
  const int K = state.K;

  std::map<std::int32_t, int> bag;
  for (auto w : tokens) {
    if (w < 0 || w >= state.D) throw std::invalid_argument("online_lda: token out of vocabulary range");
    ++bag[w];
  }
  EStepResult res;
  std::vector<double> cts;
  for (auto [w, c] : bag) {
    res.words.push_back(w);
    cts.push_back(c);
  }
  const std::size_t W = res.words.size();

  // exp(E[log beta_kw]) for the document's words.
  std::vector<double> eb(static_cast<std::size_t>(K) * W);
  for (int k = 0; k < K; ++k) {
    const double dsum = digamma(state.lambda_sum[k]);
    for (std::size_t i = 0; i < W; ++i)
      eb[k * W + i] =
          std::exp(digamma(state.lambda[static_cast<std::size_t>(k) * state.D + res.words[i]]) - dsum);
  }

  std::vector<double> gamma(K, alpha + static_cast<double>(tokens.size()) / K);
  std::vector<double> etheta(K);
  std::vector<double> phinorm(W);
  auto refresh = [&] {
    double gsum = 0.0;
    for (double g : gamma) gsum += g;
    const double dg = digamma(gsum);
    for (int k = 0; k < K; ++k) etheta[k] = std::exp(digamma(gamma[k]) - dg);
    for (std::size_t i = 0; i < W; ++i) {
      double s = 1e-100;
      for (int k = 0; k < K; ++k) s += etheta[k] * eb[k * W + i];
      phinorm[i] = s;
    }
  };

  refresh();
  for (int it = 0; it < kEStepMaxIter; ++it) {
    res.iterations = it + 1;
    std::vector<double> next(K);
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < W; ++i) acc += cts[i] * eb[k * W + i] / phinorm[i];
      next[k] = alpha + etheta[k] * acc;
    }
    double change = 0.0;
    for (int k = 0; k < K; ++k) change += std::abs(next[k] - gamma[k]);
    gamma = std::move(next);
    refresh();
    if (change / K < kEStepTol) break;
  }

  res.sstats.resize(static_cast<std::size_t>(K) * W);
  for (int k = 0; k < K; ++k)
    for (std::size_t i = 0; i < W; ++i) res.sstats[k * W + i] = etheta[k] * cts[i] * eb[k * W + i] / phinorm[i];
  res.gamma = std::move(gamma);
  return res;
}

std::vector<double> online_lda_step(OnlineLdaState& state, std::span<const std::int32_t> tokens,
                                    const HyperParams& hp) {
  if (hp.K != state.K) throw std::invalid_argument("online_lda_step: K mismatch");
  auto es = online_lda_estep(state, tokens, hp.alpha);
  const double rho = state.next_rho();
  kernels::blend_lambda(state.lambda, state.lambda_sum, state.K, state.D, rho, hp.beta,
                        state.corpus_size, es.words, es.sstats);
  state.rho_t = rho;
  ++state.t;
  return es.gamma;
}

}  // namespace obctr
