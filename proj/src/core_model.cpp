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

#include "obctr/core_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace obctr {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

void HyperParams::validate() const {
  require(K >= 1, "HyperParams: K must be >= 1");
  require(positive_finite(alpha), "HyperParams: alpha must be positive");
  require(positive_finite(beta), "HyperParams: beta must be positive");
  require(positive_finite(sigma_u2), "HyperParams: sigma_u2 must be positive and finite");
  require(positive_finite(sigma_v2), "HyperParams: sigma_v2 must be positive and finite");
  require(positive_finite(sigma_eps2), "HyperParams: sigma_eps2 must be positive and finite");
  require(positive_finite(sigma_r2), "HyperParams: sigma_r2 must be positive and finite");
  require(sweeps >= 1, "HyperParams: sweeps must be >= 1");
  require(burn_in >= 0 && burn_in < sweeps, "HyperParams: need 0 <= burn_in < sweeps");
  require(inner_iters >= 1, "HyperParams: inner_iters must be >= 1");
}

HyperParams HyperParams::with_topics(int k) {
  HyperParams hp;
  hp.K = k;
  if (k >= 1) {
    hp.alpha = 1.0 / k;
    hp.beta = 1.0 / k;
  }
  return hp;
}

void GaussianFactor::validate() const {
  require(mean.size() == var.size(), "GaussianFactor: mean/var length mismatch");
  for (std::size_t k = 0; k < mean.size(); ++k) {
    require(std::isfinite(mean[k]), "GaussianFactor: non-finite mean");
    require(positive_finite(var[k]), "GaussianFactor: variance must be positive and finite");
  }
}

void Document::recount(int K) {
  topic_counts.assign(K, 0);
  for (auto k : z) ++topic_counts.at(k);
  zbar = frequencies();
}

std::vector<double> Document::frequencies() const {
  std::vector<double> f(topic_counts.size(), 0.0);
  if (tokens.empty()) return f;
  const double n = static_cast<double>(tokens.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = topic_counts[k] / n;
  return f;
}

void Document::validate(int K, int vocab_size) const {
  require(z.size() == tokens.size(), "Document: z/tokens length mismatch");
  require(static_cast<int>(topic_counts.size()) == K, "Document: topic_counts length != K");
  std::vector<std::int32_t> c(K, 0);
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    require(tokens[n] >= 0 && tokens[n] < vocab_size, "Document: token out of vocabulary");
    require(z[n] >= 0 && z[n] < K, "Document: topic assignment out of range");
    ++c[z[n]];
  }
  require(c == topic_counts, "Document: topic_counts inconsistent with z");
  if (!zbar.empty() && !tokens.empty()) {
    double s = 0.0;
    for (double x : zbar) {
      require(x >= 0.0 && x <= 1.0, "Document: zbar component outside [0,1]");
      s += x;
    }
    require(std::abs(s - 1.0) <= 1e-12, "Document: zbar does not sum to 1");
  }
}

TopicState::TopicState(int K, int D, double beta)
    : K_(K), D_(D), beta_(beta),
      counts_(static_cast<std::size_t>(K) * D, 0),
      totals_(K, 0),
      log_num_(static_cast<std::size_t>(K) * D, std::log(beta)),
      log_den_(K, std::log(D * beta)) {
  require(K >= 1 && D >= 1, "TopicState: K and D must be >= 1");
  require(positive_finite(beta), "TopicState: beta must be positive");
}

double TopicState::phi(int k, int w) const { return std::exp(log_phi(k, w)); }

std::vector<double> TopicState::phi_matrix() const {
  std::vector<double> out(counts_.size());
  for (int k = 0; k < K_; ++k) {
    const double den = static_cast<double>(totals_[k]) + D_ * beta_;
    for (int w = 0; w < D_; ++w) {
      const std::size_t i = static_cast<std::size_t>(k) * D_ + w;
      out[i] = (static_cast<double>(counts_[i]) + beta_) / den;
    }
  }
  return out;
}

void TopicState::refresh_cell(int k, int w) {
  const std::size_t i = static_cast<std::size_t>(k) * D_ + w;
  log_num_[i] = std::log(static_cast<double>(counts_[i]) + beta_);
}

void TopicState::refresh_den(int k) {
  log_den_[k] = std::log(static_cast<double>(totals_[k]) + D_ * beta_);
}

void TopicState::add(int k, int w, std::int64_t delta) {
  if (delta == 0) return;
  const std::size_t i = static_cast<std::size_t>(k) * D_ + w;
  if (counts_[i] + delta < 0) throw std::logic_error("TopicState: negative word-topic count");
  counts_[i] += delta;
  totals_[k] += delta;
  refresh_cell(k, w);
  refresh_den(k);
}

void TopicState::assign_counts(std::vector<std::int64_t> counts) {
  require(counts.size() == counts_.size(), "TopicState: count matrix has wrong size");
  counts_ = std::move(counts);
  for (int k = 0; k < K_; ++k) {
    std::int64_t t = 0;
    for (int w = 0; w < D_; ++w) {
      require(count(k, w) >= 0, "TopicState: negative count");
      t += count(k, w);
      refresh_cell(k, w);
    }
    totals_[k] = t;
    refresh_den(k);
  }
}

void TopicState::validate() const {
  for (int k = 0; k < K_; ++k) {
    std::int64_t t = 0;
    for (int w = 0; w < D_; ++w) {
      require(count(k, w) >= 0, "TopicState: negative count");
      t += count(k, w);
    }
    require(t == totals_[k], "TopicState: topic_totals inconsistent with counts");
  }
}

std::int64_t IdMap::intern(std::int64_t ext) {
  auto [it, inserted] = to_dense_.try_emplace(ext, static_cast<std::int64_t>(to_ext_.size()));
  if (inserted) to_ext_.push_back(ext);
  return it->second;
}

std::int64_t IdMap::find(std::int64_t ext) const {
  auto it = to_dense_.find(ext);
  return it == to_dense_.end() ? -1 : it->second;
}

IdMap IdMap::from_externals(std::vector<std::int64_t> ext) {
  IdMap m;
  for (auto e : ext) {
    if (m.find(e) >= 0) throw std::invalid_argument("IdMap: duplicate external id");
    m.intern(e);
  }
  return m;
}

GaussianFactor init_user_factor(const HyperParams& hp) {
  hp.validate();
  return {std::vector<double>(hp.K, 0.0), std::vector<double>(hp.K, hp.sigma_u2)};
}

GaussianFactor init_item_factor(const HyperParams& hp) {
  hp.validate();
  return {std::vector<double>(hp.K, 0.0), std::vector<double>(hp.K, hp.sigma_v2)};
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double predict(const GaussianFactor& u, const GaussianFactor& v) {
  if (u.dim() != v.dim()) throw std::invalid_argument("predict: factor length mismatch");
  return dot(u.mean, v.mean);
}

}  // namespace obctr
