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

// Synthetic data from the collaborative topic regression generative process,
// plus brute-force oracles used to validate the engine. The oracles share no
// numerical code with the engine.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "obctr/core_model.hpp"
#include "obctr/ingestion.hpp"

namespace obctr {

struct SynthParams {
  HyperParams hp;          // K, alpha, beta and the sigma_* variances
  int users = 200;
  int items = 100;
  int vocab = 500;
  double doc_len = 60.0;   // Poisson mean of N_j
  int ratings = 20000;
  int heldout_docs = 50;   // extra documents drawn from the same topics
  std::uint64_t seed = 1;

  /// Default acceptance-scale set: K=5, rating noise std 0.3.
  static SynthParams defaults();
};

struct GroundTruth {
  int K = 0;
  int D = 0;
  std::vector<double> phi;                 // K x D
  std::vector<std::vector<double>> theta;  // per item
  std::vector<std::vector<double>> eps;    // per item
  std::vector<std::vector<double>> u;      // per user
  std::vector<std::vector<double>> v;      // per item, theta + eps
  std::vector<std::vector<std::int32_t>> z;  // per item token assignments

  [[nodiscard]] nlohmann::json to_json() const;
};

struct SyntheticData {
  Corpus corpus;  // item id == dense index, words "w0000".."w{D-1}"
  std::vector<RatingEvent> events;
  std::vector<std::vector<std::int32_t>> heldout_docs;
  GroundTruth truth;
  SynthParams params;

  /// Dense-id dataset ready for a model run.
  [[nodiscard]] Dataset dataset() const;
};

SyntheticData generate_synthetic(const SynthParams& params);

std::string synthetic_word(int w);

// ---------------------------------------------------------------------------
// Oracles

struct DenseGaussian {
  std::vector<double> mean;
  std::vector<double> cov;  // K x K row-major
};

inline constexpr int kOracleMaxDim = 8;

/// Canonical Gaussian posterior by completing the square with explicit dense
/// inversion: P = S0^-1 + sum_m a_m a_m^T / s_m, mean = P^-1 (S0^-1 m0 +
/// sum_m r_m a_m / s_m). Warns on stderr when cond(P) > 1e10; throws on a
/// singular precision.
DenseGaussian gaussian_posterior_oracle(std::span<const double> prior_mean,
                                        std::span<const double> prior_cov,
                                        const std::vector<std::vector<double>>& obs_vectors,
                                        std::span<const double> obs_values,
                                        std::span<const double> obs_vars);

/// Gauss-Jordan inverse with partial pivoting; throws on singular input.
std::vector<double> dense_inverse(std::span<const double> a, int n);

inline constexpr std::size_t kEnumerationMaxStates = 1000000;

/// Exact target distribution over all K^N assignments of doc.z implied by the
/// Gibbs conditional. Index of an assignment = sum_n z_n K^n.
std::vector<double> gibbs_enumeration_oracle(const Document& doc, const GaussianFactor& v,
                                             const TopicState& topics, const HyperParams& hp);

std::size_t assignment_index(std::span<const std::int32_t> z, int K);

}  // namespace obctr
