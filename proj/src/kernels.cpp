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

#include "obctr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "obctr/random.hpp"

namespace obctr::kernels {

namespace {

inline void blend_row(double* row, double& row_sum, int k, int D, double rho, double beta,
                      double corpus_size, std::span<const std::int32_t> words,
                      std::span<const double> sstats) {
  const double keep = 1.0 - rho;
  const double base = rho * beta;
  for (int w = 0; w < D; ++w) row[w] = keep * row[w] + base;
  const std::size_t W = words.size();
  const double scale = rho * corpus_size;
  for (std::size_t i = 0; i < W; ++i) row[words[i]] += scale * sstats[k * W + i];
  double s = 0.0;
  for (int w = 0; w < D; ++w) s += row[w];
  row_sum = s;
}

void check_blend(const std::vector<double>& lambda, const std::vector<double>& lambda_sum, int K,
                 int D, std::span<const std::int32_t> words, std::span<const double> sstats) {
  if (lambda.size() != static_cast<std::size_t>(K) * D || lambda_sum.size() != static_cast<std::size_t>(K))
    throw std::invalid_argument("blend_lambda: shape mismatch");
  if (sstats.size() != static_cast<std::size_t>(K) * words.size())
    throw std::invalid_argument("blend_lambda: sstats shape mismatch");
}

// Log-likelihood of one document's held-out half. Runs inside parallel
// regions, so all validation happens up front in check_heldout.
HeldoutScore score_doc(std::span<const std::int32_t> doc, std::size_t index, int K, int D,
                       std::span<const double> phi, const FoldInFn& fold_in, std::uint64_t seed) {
  const std::size_t half = doc.size() / 2;
  const auto theta = fold_in(doc.subspan(0, half), derive_seed(seed, {index}));
  HeldoutScore s;
  for (std::size_t n = half; n < doc.size(); ++n) {
    const int w = doc[n];
    double p = 0.0;
    for (int k = 0; k < K; ++k) p += theta[k] * phi[static_cast<std::size_t>(k) * D + w];
    s.log_likelihood += std::log(std::max(p, kNumericFloor));
    ++s.tokens;
  }
  return s;
}

HeldoutScore reduce(const std::vector<HeldoutScore>& parts) {
  HeldoutScore total;
  for (const auto& p : parts) {
    total.log_likelihood += p.log_likelihood;
    total.tokens += p.tokens;
  }
  return total;
}

void check_heldout(std::span<const std::vector<std::int32_t>> docs, int K, int D,
                   std::span<const double> phi) {
  if (docs.empty()) throw std::invalid_argument("heldout_loglik: empty held-out set");
  if (phi.size() != static_cast<std::size_t>(K) * D) throw std::invalid_argument("heldout_loglik: phi shape mismatch");
  for (const auto& d : docs) {
    if (d.size() < 2) throw std::invalid_argument("heldout_loglik: held-out documents need >= 2 tokens");
    for (auto w : d)
      if (w < 0 || w >= D) throw std::invalid_argument("heldout_loglik: token out of vocabulary range");
  }
}

}  // namespace

void blend_lambda(std::vector<double>& lambda, std::vector<double>& lambda_sum, int K, int D,
                  double rho, double beta, double corpus_size, std::span<const std::int32_t> words,
                  std::span<const double> sstats) {
  check_blend(lambda, lambda_sum, K, D, words, sstats);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k)
    blend_row(lambda.data() + static_cast<std::size_t>(k) * D, lambda_sum[k], k, D, rho, beta,
              corpus_size, words, sstats);
}

void blend_lambda_serial(std::vector<double>& lambda, std::vector<double>& lambda_sum, int K,
                         int D, double rho, double beta, double corpus_size,
                         std::span<const std::int32_t> words, std::span<const double> sstats) {
  check_blend(lambda, lambda_sum, K, D, words, sstats);
  for (int k = 0; k < K; ++k)
    blend_row(lambda.data() + static_cast<std::size_t>(k) * D, lambda_sum[k], k, D, rho, beta,
              corpus_size, words, sstats);
}

std::vector<double> predict_batch(std::span<const RatingEvent> events, const PredictFn& predict) {
  std::vector<double> out(events.size());
  const auto n = static_cast<std::int64_t>(events.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = predict(events[i].user_id, events[i].item_id);
  return out;
}

std::vector<double> predict_batch_serial(std::span<const RatingEvent> events,
                                         const PredictFn& predict) {
  std::vector<double> out(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) out[i] = predict(events[i].user_id, events[i].item_id);
  return out;
}

double rmse_from(std::span<const double> predictions, std::span<const RatingEvent> events) {
  if (events.empty()) throw std::invalid_argument("rmse: empty input");
  if (predictions.size() != events.size()) throw std::invalid_argument("rmse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double e = events[i].rating - predictions[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(events.size()));
}

HeldoutScore heldout_loglik(std::span<const std::vector<std::int32_t>> docs, int K, int D,
                            std::span<const double> phi, const FoldInFn& fold_in,
                            std::uint64_t seed) {
  check_heldout(docs, K, D, phi);
  std::vector<HeldoutScore> parts(docs.size());
  const auto n = static_cast<std::int64_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) parts[i] = score_doc(docs[i], i, K, D, phi, fold_in, seed);
  return reduce(parts);
}

HeldoutScore heldout_loglik_serial(std::span<const std::vector<std::int32_t>> docs, int K, int D,
                                   std::span<const double> phi, const FoldInFn& fold_in,
                                   std::uint64_t seed) {
  check_heldout(docs, K, D, phi);
  std::vector<HeldoutScore> parts(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) parts[i] = score_doc(docs[i], i, K, D, phi, fold_in, seed);
  return reduce(parts);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace obctr::kernels
