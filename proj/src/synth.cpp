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

#include "obctr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

#include "obctr/random.hpp"

namespace obctr {

using nlohmann::json;

SynthParams SynthParams::defaults() {
  SynthParams p;
  p.hp = HyperParams::with_topics(5);
  p.hp.beta = 0.1;
  p.hp.sigma_u2 = 1.0;
  p.hp.sigma_v2 = 1.0;
  p.hp.sigma_eps2 = 0.01;
  p.hp.sigma_r2 = 0.09;
  return p;
}

std::string synthetic_word(int w) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "w%04d", w);
  return buf;
}

json GroundTruth::to_json() const {
  return json{{"format", "obctr-ground-truth"},
              {"version", 1},
              {"K", K},
              {"D", D},
              {"phi", phi},
              {"theta", theta},
              {"eps", eps},
              {"u", u},
              {"v", v},
              {"z", z}};
}

namespace {

std::vector<double> dirichlet(int n, double a, Rng& rng) {
  std::gamma_distribution<double> g(a, 1.0);
  std::vector<double> x(n);
  double s = 0.0;
  for (auto& e : x) {
    e = g(rng);
    s += e;
  }
  if (s <= 0.0) {
    // Every draw underflowed (tiny a); put the mass on one random coordinate.
    std::fill(x.begin(), x.end(), 0.0);
    x[rng() % n] = 1.0;
    return x;
  }
  for (auto& e : x) e /= s;
  return x;
}

int categorical(std::span<const double> p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

struct DrawnDoc {
  std::vector<std::int32_t> words;
  std::vector<std::int32_t> z;
};

DrawnDoc draw_doc(std::span<const double> theta, const std::vector<std::vector<double>>& phi_rows,
                  double mean_len, Rng& rng) {
  std::poisson_distribution<int> len(mean_len);
  const int n = std::max(2, len(rng));
  DrawnDoc d;
  for (int i = 0; i < n; ++i) {
    const int k = categorical(theta, rng);
    d.z.push_back(k);
    d.words.push_back(categorical(phi_rows[k], rng));
  }
  return d;
}

}  // namespace

SyntheticData generate_synthetic(const SynthParams& params) {
  const auto& hp = params.hp;
  hp.validate();
  if (params.users < 1 || params.items < 1 || params.vocab < 1 || params.ratings < 0 ||
      params.doc_len <= 0.0 || params.heldout_docs < 0)
    throw std::invalid_argument("generate_synthetic: sizes must be positive");
  const int K = hp.K;
  const int D = params.vocab;
  Rng rng = make_rng(params.seed, {0x5e7});

  SyntheticData out;
  out.params = params;
  auto& gt = out.truth;
  gt.K = K;
  gt.D = D;

  std::vector<std::vector<double>> phi_rows(K);
  for (int k = 0; k < K; ++k) {
    phi_rows[k] = dirichlet(D, hp.beta, rng);
    gt.phi.insert(gt.phi.end(), phi_rows[k].begin(), phi_rows[k].end());
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_u = std::sqrt(hp.sigma_u2);
  const double sd_eps = std::sqrt(hp.sigma_eps2);
  const double sd_r = std::sqrt(hp.sigma_r2);

  out.corpus.vocabulary.resize(D);
  for (int w = 0; w < D; ++w) out.corpus.vocabulary[w] = synthetic_word(w);
  out.corpus.options.min_df = 1;
  out.corpus.options.max_vocab = D;
  out.corpus.options.remove_stopwords = false;

  for (int j = 0; j < params.items; ++j) {
    auto theta = dirichlet(K, hp.alpha, rng);
    std::vector<double> eps(K);
    std::vector<double> v(K);
    for (int k = 0; k < K; ++k) {
      eps[k] = sd_eps * normal(rng);
      v[k] = theta[k] + eps[k];
    }
    auto doc = draw_doc(theta, phi_rows, params.doc_len, rng);
    out.corpus.docs.emplace(j, doc.words);
    gt.z.push_back(std::move(doc.z));
    gt.theta.push_back(std::move(theta));
    gt.eps.push_back(std::move(eps));
    gt.v.push_back(std::move(v));
  }
  for (int i = 0; i < params.users; ++i) {
    std::vector<double> u(K);
    for (auto& x : u) x = sd_u * normal(rng);
    gt.u.push_back(std::move(u));
  }

  out.events.reserve(params.ratings);
  for (int t = 0; t < params.ratings; ++t) {
    const auto i = static_cast<std::int64_t>(rng() % params.users);
    const auto j = static_cast<std::int64_t>(rng() % params.items);
    double mean = 0.0;
    for (int k = 0; k < K; ++k) mean += gt.u[i][k] * gt.v[j][k];
    out.events.push_back({i, j, mean + sd_r * normal(rng), t});
  }

  for (int h = 0; h < params.heldout_docs; ++h) {
    const auto theta = dirichlet(K, hp.alpha, rng);
    out.heldout_docs.push_back(draw_doc(theta, phi_rows, params.doc_len, rng).words);
  }
  return out;
}

Dataset SyntheticData::dataset() const {
  Dataset ds = assemble_dataset(events, corpus);
  ds.heldout_docs = heldout_docs;
  return ds;
}

// ---------------------------------------------------------------------------
// Gaussian posterior oracle

std::vector<double> dense_inverse(std::span<const double> a, int n) {
  if (a.size() != static_cast<std::size_t>(n) * n) throw std::invalid_argument("dense_inverse: shape mismatch");
  // Augmented [A | I], reduced to [I | A^-1].
  const int m = 2 * n;
  std::vector<double> aug(static_cast<std::size_t>(n) * m, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug[i * m + j] = a[i * n + j];
    aug[i * m + n + i] = 1.0;
  }
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(aug[r * m + col]) > std::abs(aug[piv * m + col])) piv = r;
    if (std::abs(aug[piv * m + col]) <= 1e-300 + scale * 1e-15)
      throw std::domain_error("dense_inverse: singular matrix");
    if (piv != col)
      for (int j = 0; j < m; ++j) std::swap(aug[col * m + j], aug[piv * m + j]);
    const double d = aug[col * m + col];
    for (int j = 0; j < m; ++j) aug[col * m + j] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug[r * m + col];
      if (f == 0.0) continue;
      for (int j = 0; j < m; ++j) aug[r * m + j] -= f * aug[col * m + j];
    }
  }
  std::vector<double> inv(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inv[i * n + j] = aug[i * m + n + j];
  return inv;
}

namespace {

double norm1(std::span<const double> a, int n) {
  double best = 0.0;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::abs(a[i * n + j]);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

DenseGaussian gaussian_posterior_oracle(std::span<const double> prior_mean,
                                        std::span<const double> prior_cov,
                                        const std::vector<std::vector<double>>& obs_vectors,
                                        std::span<const double> obs_values,
                                        std::span<const double> obs_vars) {
  const int K = static_cast<int>(prior_mean.size());
  if (K < 1 || K > kOracleMaxDim) throw std::invalid_argument("gaussian_posterior_oracle: need 1 <= K <= 8");
  if (prior_cov.size() != static_cast<std::size_t>(K) * K)
    throw std::invalid_argument("gaussian_posterior_oracle: prior covariance shape mismatch");
  if (obs_vectors.size() != obs_values.size() || obs_values.size() != obs_vars.size())
    throw std::invalid_argument("gaussian_posterior_oracle: observation lengths differ");

  const auto prior_prec = dense_inverse(prior_cov, K);
  std::vector<double> prec = prior_prec;
  std::vector<double> rhs(K, 0.0);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) rhs[i] += prior_prec[i * K + j] * prior_mean[j];
  for (std::size_t o = 0; o < obs_vectors.size(); ++o) {
    const auto& a = obs_vectors[o];
    if (static_cast<int>(a.size()) != K) throw std::invalid_argument("gaussian_posterior_oracle: observation vector length != K");
    if (!(obs_vars[o] > 0.0)) throw std::invalid_argument("gaussian_posterior_oracle: observation variance must be positive");
    for (int i = 0; i < K; ++i) {
      rhs[i] += obs_values[o] * a[i] / obs_vars[o];
      for (int j = 0; j < K; ++j) prec[i * K + j] += a[i] * a[j] / obs_vars[o];
    }
  }
  DenseGaussian post;
  post.cov = dense_inverse(prec, K);
  const double cond = norm1(prec, K) * norm1(post.cov, K);
  if (cond > 1e10) std::cerr << "gaussian_posterior_oracle: ill-conditioned precision (cond ~ " << cond << ")\n";
  post.mean.assign(K, 0.0);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) post.mean[i] += post.cov[i * K + j] * rhs[j];
  return post;
}

// ---------------------------------------------------------------------------
// Gibbs enumeration oracle

std::size_t assignment_index(std::span<const std::int32_t> z, int K) {
  std::size_t idx = 0;
  std::size_t mul = 1;
  for (auto k : z) {
    idx += static_cast<std::size_t>(k) * mul;
    mul *= static_cast<std::size_t>(K);
  }
  return idx;
}

std::vector<double> gibbs_enumeration_oracle(const Document& doc, const GaussianFactor& v,
                                             const TopicState& topics, const HyperParams& hp) {
  const int K = hp.K;
  const std::size_t N = doc.tokens.size();
  if (N == 0) throw std::invalid_argument("gibbs_enumeration_oracle: empty document");
  std::size_t states = 1;
  for (std::size_t n = 0; n < N; ++n) {
    states *= static_cast<std::size_t>(K);
    if (states > kEnumerationMaxStates) throw std::invalid_argument("gibbs_enumeration_oracle: state space too large");
  }
  const int D = topics.vocab_size();
  // log Phi straight from the counts.
  std::vector<long double> log_phi(static_cast<std::size_t>(K) * N);
  for (int k = 0; k < K; ++k) {
    long double tot = 0.0L;
    for (int w = 0; w < D; ++w) tot += static_cast<long double>(topics.count(k, w));
    for (std::size_t n = 0; n < N; ++n)
      log_phi[k * N + n] = std::log((static_cast<long double>(topics.count(k, doc.tokens[n])) + hp.beta) /
                                    (tot + static_cast<long double>(D) * hp.beta));
  }

  // log target(z) = sum_k lgamma(alpha + C_k) + sum_n log Phi_{z_n, w_n}
  //                 - |m_v - C / N|^2 / (2 sigma_eps2)
  std::vector<long double> logp(states);
  std::vector<std::int32_t> z(N, 0);
  std::vector<int> counts(K);
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t rem = s;
    std::fill(counts.begin(), counts.end(), 0);
    long double lp = 0.0L;
    for (std::size_t n = 0; n < N; ++n) {
      z[n] = static_cast<std::int32_t>(rem % K);
      rem /= K;
      ++counts[z[n]];
      lp += log_phi[z[n] * N + n];
    }
    long double sq = 0.0L;
    for (int k = 0; k < K; ++k) {
      lp += std::lgamma(static_cast<long double>(hp.alpha) + counts[k]);
      const long double d = static_cast<long double>(v.mean[k]) - static_cast<long double>(counts[k]) / N;
      sq += d * d;
    }
    logp[s] = lp - sq / (2.0L * hp.sigma_eps2);
  }
  const long double mx = *std::max_element(logp.begin(), logp.end());
  long double tot = 0.0L;
  for (auto& x : logp) {
    x = std::exp(x - mx);
    tot += x;
  }
  std::vector<double> out(states);
  for (std::size_t s = 0; s < states; ++s) out[s] = static_cast<double>(logp[s] / tot);
  return out;
}

}  // namespace obctr
