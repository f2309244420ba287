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

// Online Bayesian collaborative topic regression.
//
// Per rating event (i, j, r, w_j):
//   1. r_hat = m_u^T m_v (predicted before any update)
//   2. S Gibbs sweeps over z_j with the item tether term, first B discarded,
//      zbar_j averaged over the rest
//   3. q(u_i) <- rank-1 Gaussian update against m_v
//   4. q(v_j) <- Gaussian update against m_u, tethered to zbar_j
//   5. global word-topic counts take the final sweep's assignments
//
// Covariances are kept diagonal. The tether between v_j and zbar_j is a
// Gaussian with variance sigma_eps2 and a pseudo-observation eps_j = 0.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "obctr/core_model.hpp"
#include "obctr/random.hpp"

namespace obctr {

/// q(z_jn = k | z_{j,-n}, v_j, Phi, w) for every k. counts_excl holds
/// C_{j,-n}^k, n_tokens is N_j.
std::vector<double> gibbs_conditional_excluding(std::span<const std::int32_t> counts_excl,
                                                std::size_t n_tokens, int word,
                                                const GaussianFactor& v,
                                                const TopicState& topics,
                                                const HyperParams& hp);

/// Same as above for position n of a consistent document; the position's own
/// current assignment is removed from the counts internally.
std::vector<double> gibbs_conditional(const Document& doc, std::size_t n, const GaussianFactor& v,
                                      const TopicState& topics, const HyperParams& hp);

/// Draws an index from a normalized probability vector by inverse CDF on one
/// uniform01 draw.
int sample_discrete(std::span<const double> probs, Rng& rng);

/// One sequential sweep resampling every position of doc. Global topic
/// counts are left untouched.
void gibbs_sweep(Document& doc, const GaussianFactor& v, const TopicState& topics,
                 const HyperParams& hp, Rng& rng);

/// Mean of the post-burn-in per-sweep frequency vectors.
std::vector<double> estimate_zbar(std::span<const std::vector<double>> frequencies, int burn_in);

/// Rank-1 Gaussian posterior update of a user factor against item mean m_v.
/// Only the diagonal of the posterior covariance is retained.
GaussianFactor update_user(const GaussianFactor& u_prior, const GaussianFactor& v, double r,
                           const HyperParams& hp);

/// Item update: prior q_t(v), tether N(zbar, sigma_eps2 I), rating against m_u.
GaussianFactor update_item(const GaussianFactor& v_prior, const GaussianFactor& u,
                           std::span<const double> zbar, double r, const HyperParams& hp);

/// theta_jk = (C_j^k + alpha) / (N_j + K alpha).
std::vector<double> topic_proportions(std::span<const std::int32_t> topic_counts, double alpha);

/// Moves the document's contribution in the global counts from previous_z to
/// doc.z and returns theta_j.
std::vector<double> update_topics(TopicState& state, const Document& doc,
                                  std::span<const std::int32_t> previous_z, const HyperParams& hp);

struct EngineState {
  HyperParams hp;
  std::uint64_t rng_seed = 0;
  std::vector<GaussianFactor> users;  // dense user index
  std::vector<GaussianFactor> items;  // dense item index
  std::map<std::int64_t, Document> docs;
  TopicState topics;
  std::vector<std::uint64_t> item_event_count;
  std::uint64_t events_processed = 0;
  std::uint64_t events_rejected = 0;
};

struct EventResult {
  double prediction = 0.0;
  bool accepted = true;
};

/// Single-writer engine. All randomness is derived from (seed, item id,
/// per-item event counter), so events on disjoint items draw the same numbers
/// regardless of interleaving.
class ObctrEngine {
 public:
  ObctrEngine(HyperParams hp, int vocab_size, std::uint64_t seed);
  explicit ObctrEngine(EngineState state);

  /// Adds an item document with uniformly random initial assignments and
  /// folds it into the global counts. Throws on empty or re-registered docs.
  void register_document(std::int64_t item, std::vector<std::int32_t> tokens);
  [[nodiscard]] bool has_document(std::int64_t item) const;

  EventResult process_event(const RatingEvent& ev);

  [[nodiscard]] double predict(std::int64_t user, std::int64_t item) const;
  [[nodiscard]] const EngineState& state() const { return state_; }
  [[nodiscard]] EngineState snapshot() const { return state_; }

  /// theta_j from the item's current assignments.
  [[nodiscard]] std::vector<double> theta(std::int64_t item) const;

  /// Throws std::logic_error when global counts differ from the aggregate of
  /// per-document counts.
  void check_consistency() const;

 private:
  GaussianFactor& user(std::int64_t id);
  GaussianFactor& item(std::int64_t id);

  EngineState state_;
};

}  // namespace obctr
