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


// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// thread count of interest.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "obctr/kernels.hpp"
#include "obctr/random.hpp"

using namespace obctr;
using namespace obctr::kernels;

namespace {

struct LambdaCase {
  int K, D;
  std::vector<double> lambda, sum, sstats;
  std::vector<std::int32_t> words;

  LambdaCase(int k, int d) : K(k), D(d), lambda(static_cast<std::size_t>(k) * d), sum(k) {
    Rng rng(1);
    for (auto& x : lambda) x = 0.5 + uniform01(rng);
    for (int w = 0; w < D; w += 37) words.push_back(w);
    sstats.resize(static_cast<std::size_t>(K) * words.size());
    for (auto& x : sstats) x = uniform01(rng);
  }
};

template <bool Serial>
void BM_BlendLambda(benchmark::State& state) {
  LambdaCase c(static_cast<int>(state.range(0)), 8000);
  for (auto _ : state) {
    if constexpr (Serial)
      blend_lambda_serial(c.lambda, c.sum, c.K, c.D, 0.01, 0.1, 1000.0, c.words, c.sstats);
    else
      blend_lambda(c.lambda, c.sum, c.K, c.D, 0.01, 0.1, 1000.0, c.words, c.sstats);
    benchmark::DoNotOptimize(c.lambda.data());
  }
  state.SetItemsProcessed(state.iterations() * c.K * c.D);
}

template <bool Serial>
void BM_PredictBatch(benchmark::State& state) {
  const int K = 20;
  std::vector<double> u(1000 * K), v(1000 * K);
  Rng rng(2);
  for (auto& x : u) x = uniform01(rng);
  for (auto& x : v) x = uniform01(rng);
  std::vector<RatingEvent> events(static_cast<std::size_t>(state.range(0)));
  for (auto& e : events) e = {static_cast<std::int64_t>(rng() % 1000), static_cast<std::int64_t>(rng() % 1000), 0.0};
  const PredictFn f = [&](std::int64_t a, std::int64_t b) {
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += u[a * K + k] * v[b * K + k];
    return s;
  };
  for (auto _ : state) {
    auto p = Serial ? predict_batch_serial(events, f) : predict_batch(events, f);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Serial>
void BM_HeldoutLoglik(benchmark::State& state) {
  const int K = 20, D = 2000;
  Rng rng(3);
  std::vector<double> phi(static_cast<std::size_t>(K) * D);
  for (int k = 0; k < K; ++k) {
    double s = 0.0;
    for (int w = 0; w < D; ++w) s += phi[k * D + w] = uniform01(rng);
    for (int w = 0; w < D; ++w) phi[k * D + w] /= s;
  }
  std::vector<std::vector<std::int32_t>> docs(static_cast<std::size_t>(state.range(0)));
  for (auto& d : docs) {
    d.resize(100);
    for (auto& w : d) w = static_cast<std::int32_t>(rng() % D);
  }
  // stand-in fold-in with some work per call
  const FoldInFn fold = [&](std::span<const std::int32_t> obs, std::uint64_t) {
    std::vector<double> theta(K, 1.0);
    for (int it = 0; it < 20; ++it)
      for (auto w : obs)
        for (int k = 0; k < K; ++k) theta[k] += 1e-3 * phi[k * D + w];
    double s = 0.0;
    for (double x : theta) s += x;
    for (auto& x : theta) x /= s;
    return theta;
  };
  for (auto _ : state) {
    auto r = Serial ? heldout_loglik_serial(docs, K, D, phi, fold, 1) : heldout_loglik(docs, K, D, phi, fold, 1);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BlendLambda<true>)->Name("blend_lambda/serial")->Arg(10)->Arg(50)->Arg(100);
BENCHMARK(BM_BlendLambda<false>)->Name("blend_lambda/openmp")->Arg(10)->Arg(50)->Arg(100);
BENCHMARK(BM_PredictBatch<true>)->Name("predict_batch/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_PredictBatch<false>)->Name("predict_batch/openmp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_HeldoutLoglik<true>)->Name("heldout_loglik/serial")->Arg(100)->Arg(1000);
BENCHMARK(BM_HeldoutLoglik<false>)->Name("heldout_loglik/openmp")->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
