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

// Data-parallel kernels. Each OpenMP kernel has a *_serial twin with the same
// per-element arithmetic; reductions are done serially over a per-element
// buffer, so both variants return bit-identical results for any thread count.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "obctr/core_model.hpp"

namespace obctr::kernels {

/// lambda <- (1 - rho) lambda + rho (beta + corpus_size * sstats); sstats is
/// sparse over `words` (K x words.size(), row-major). Row sums recomputed.
void blend_lambda(std::vector<double>& lambda, std::vector<double>& lambda_sum, int K, int D,
                  double rho, double beta, double corpus_size, std::span<const std::int32_t> words,
                  std::span<const double> sstats);
void blend_lambda_serial(std::vector<double>& lambda, std::vector<double>& lambda_sum, int K,
                         int D, double rho, double beta, double corpus_size,
                         std::span<const std::int32_t> words, std::span<const double> sstats);

using PredictFn = std::function<double(std::int64_t user, std::int64_t item)>;

/// Model predictions for every event. predict must be safe to call
/// concurrently (const access to an immutable model).
std::vector<double> predict_batch(std::span<const RatingEvent> events, const PredictFn& predict);
std::vector<double> predict_batch_serial(std::span<const RatingEvent> events,
                                         const PredictFn& predict);

/// Root mean squared residual; throws on empty input.
double rmse_from(std::span<const double> predictions, std::span<const RatingEvent> events);

/// Estimates theta for a document prefix; the seed makes it reproducible.
using FoldInFn =
    std::function<std::vector<double>(std::span<const std::int32_t> observed, std::uint64_t seed)>;

struct HeldoutScore {
  double log_likelihood = 0.0;  // summed over scored tokens
  std::int64_t tokens = 0;
};

/// For every doc: theta from the first half via fold_in, then
/// sum over the second half of log sum_k theta_k phi_kw. phi is K x D.
HeldoutScore heldout_loglik(std::span<const std::vector<std::int32_t>> docs, int K, int D,
                            std::span<const double> phi, const FoldInFn& fold_in,
                            std::uint64_t seed);
HeldoutScore heldout_loglik_serial(std::span<const std::vector<std::int32_t>> docs, int K, int D,
                                   std::span<const double> phi, const FoldInFn& fold_in,
                                   std::uint64_t seed);

/// Number of threads OpenMP would use (1 without OpenMP).
int max_threads();

}  // namespace obctr::kernels
