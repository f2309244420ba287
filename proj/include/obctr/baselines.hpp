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

// Comparison systems: passive-aggressive CF (PA-I), SGD matrix factorization,
// online variational LDA and the loosely coupled OCTR composition.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "obctr/core_model.hpp"
#include "obctr/random.hpp"

namespace obctr {

struct PointFactor {
  std::vector<double> vec;
};

/// Small random point factor, N(0, init_std^2) per coordinate.
PointFactor random_point_factor(int K, double init_std, Rng& rng);

/// PA-I on the epsilon-insensitive loss. Alternates a u step against v and a
/// v step against the updated u; a zero-norm partner skips its half-step.
std::pair<PointFactor, PointFactor> pa_i_update(const PointFactor& u, const PointFactor& v,
                                                double r, double c, double eps);

/// Simultaneous SGD step on 0.5 e^2 + 0.5 lam_u |u|^2 + 0.5 lam_v |v|^2.
std::pair<PointFactor, PointFactor> sgd_pmf_update(const PointFactor& u, const PointFactor& v,
                                                   double r, double eta, double lam_u,
                                                   double lam_v);
inline std::pair<PointFactor, PointFactor> sgd_pmf_update(const PointFactor& u,
                                                          const PointFactor& v, double r,
                                                          double eta, double lam) {
  return sgd_pmf_update(u, v, r, eta, lam, lam);
}

enum class LambdaInit { kRandomGamma, kSymmetric };

/// Global state of stochastic variational LDA.
struct OnlineLdaState {
  int K = 0;
  int D = 0;
  std::vector<double> lambda;      // K x D row-major
  std::vector<double> lambda_sum;  // row sums
  std::uint64_t t = 0;
  double kappa = 0.7;
  double tau0 = 64.0;
  double rho_t = 1.0;  // step size used by the most recent update
  double corpus_size = 1.0;

  [[nodiscard]] double next_rho() const;
  [[nodiscard]] double expected_phi(int k, int w) const {
    return lambda[static_cast<std::size_t>(k) * D + w] / lambda_sum[k];
  }
  void validate() const;
};

OnlineLdaState make_online_lda(int K, int D, double corpus_size, double kappa, double tau0,
                               LambdaInit init, std::uint64_t seed);

struct EStepResult {
  std::vector<double> gamma;       // length K
  std::vector<std::int32_t> words; // distinct word ids of the document
  std::vector<double> sstats;      // K x words.size(), row-major
  int iterations = 0;
};

inline constexpr int kEStepMaxIter = 50;
inline constexpr double kEStepTol = 1e-4;

/// Per-document variational E-step against E_q[log Phi] of the given state.
EStepResult online_lda_estep(const OnlineLdaState& state, std::span<const std::int32_t> tokens,
                             double alpha);

/// One stochastic update: E-step on doc, then
/// lambda <- (1 - rho_t) lambda + rho_t (beta + corpus_size * sstats).
/// Returns gamma_j.
std::vector<double> online_lda_step(OnlineLdaState& state, std::span<const std::int32_t> tokens,
                                    const HyperParams& hp);

}  // namespace obctr
