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

#pragma once

// Shared domain types for the streaming collaborative topic regression engine
// and its baselines.
//
//   K  : number of topics == latent dimension of user/item factors
//   D  : vocabulary size
//   u_i: user factor, q(u_i) = N(mean, diag(var))
//   v_j: item factor, q(v_j) = N(mean, diag(var))
//   z_j: per-token topic assignments of item j's document
//
// All sigma_* hyperparameters are variances.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace obctr {

/// Lower bound applied to variances and probabilities.
inline constexpr double kNumericFloor = 1e-12;

struct HyperParams {
  int K = 5;
  double alpha = 0.2;
  double beta = 0.2;
  double sigma_u2 = 1.0;
  double sigma_v2 = 1.0;
  double sigma_eps2 = 1.0;
  double sigma_r2 = 1.0;
  int sweeps = 4;   // S
  int burn_in = 2;  // B, must be < S
  int inner_iters = 1;
  bool pmf_only_fallback = false;

  /// Throws std::invalid_argument when any invariant is violated.
  void validate() const;

  /// Defaults alpha = beta = 1/K for a given K.
  static HyperParams with_topics(int k);
};

struct GaussianFactor {
  std::vector<double> mean;
  std::vector<double> var;

  [[nodiscard]] std::size_t dim() const { return mean.size(); }
  void validate() const;
};

struct RatingEvent {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0.0;
  std::int64_t order_key = 0;

  friend bool operator==(const RatingEvent&, const RatingEvent&) = default;
};

/// Tokenized item text with its current topic assignments.
struct Document {
  std::int64_t item_id = 0;
  std::vector<std::int32_t> tokens;
  std::vector<std::int32_t> z;
  std::vector<std::int32_t> topic_counts;
  std::vector<double> zbar;

  [[nodiscard]] std::size_t length() const { return tokens.size(); }

  /// Rebuilds topic_counts and zbar from z.
  void recount(int K);

  /// Empirical topic frequency C_j^k / N_j of the current assignments.
  [[nodiscard]] std::vector<double> frequencies() const;

  void validate(int K, int vocab_size) const;
};

/// Global topic-word statistics. phi and log_phi are exposed through
/// accessors; log_phi(k, w) = log(C_k^w + beta) - log(T_k + D beta) is served
/// from a cached log-numerator matrix and a per-topic log-denominator so that
/// a count change refreshes only the touched cell and its row denominator.
class TopicState {
 public:
  TopicState() = default;
  TopicState(int K, int D, double beta);

  [[nodiscard]] int num_topics() const { return K_; }
  [[nodiscard]] int vocab_size() const { return D_; }
  [[nodiscard]] double beta() const { return beta_; }

  [[nodiscard]] std::int64_t count(int k, int w) const {
    return counts_[static_cast<std::size_t>(k) * D_ + w];
  }
  [[nodiscard]] std::int64_t total(int k) const { return totals_[k]; }
  [[nodiscard]] std::span<const std::int64_t> counts() const { return counts_; }
  [[nodiscard]] std::span<const std::int64_t> totals() const { return totals_; }

  [[nodiscard]] double log_phi(int k, int w) const {
    return log_num_[static_cast<std::size_t>(k) * D_ + w] - log_den_[k];
  }
  [[nodiscard]] double phi(int k, int w) const;

  /// Dense K x D row-major copy of phi.
  [[nodiscard]] std::vector<double> phi_matrix() const;

  /// Adds delta (possibly negative) to C_k^w. Throws if a count would go
  /// negative.
  void add(int k, int w, std::int64_t delta);

  /// Replaces all counts at once (checkpoint restore).
  void assign_counts(std::vector<std::int64_t> counts);

  void validate() const;

 private:
  void refresh_cell(int k, int w);
  void refresh_den(int k);

  int K_ = 0;
  int D_ = 0;
  double beta_ = 0.0;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> totals_;
  std::vector<double> log_num_;
  std::vector<double> log_den_;
};

/// Dense re-indexing of sparse external ids.
class IdMap {
 public:
  /// Returns the dense index for ext, inserting it if absent.
  std::int64_t intern(std::int64_t ext);
  /// Returns -1 when ext is unknown.
  [[nodiscard]] std::int64_t find(std::int64_t ext) const;
  [[nodiscard]] std::int64_t external(std::int64_t dense) const { return to_ext_.at(dense); }
  [[nodiscard]] std::size_t size() const { return to_ext_.size(); }
  [[nodiscard]] const std::vector<std::int64_t>& externals() const { return to_ext_; }
  static IdMap from_externals(std::vector<std::int64_t> ext);

 private:
  std::unordered_map<std::int64_t, std::int64_t> to_dense_;
  std::vector<std::int64_t> to_ext_;
};

GaussianFactor init_user_factor(const HyperParams& hp);
GaussianFactor init_item_factor(const HyperParams& hp);

/// E[u^T v] under independent q(u), q(v): the dot product of the means.
double predict(const GaussianFactor& u, const GaussianFactor& v);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace obctr
