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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "obctr/ingestion.hpp"
#include "obctr/models.hpp"

namespace obctr {

double rmse(std::span<const std::pair<double, double>> pairs);  // (r_hat, r)

/// Mean and sample standard deviation (n - 1 denominator) over repeated runs.
/// This is a std-dev of the runs, not a standard error of the mean.
struct RunSummary {
  double mean = 0.0;
  double std_dev = 0.0;  // 0 for a single run
  std::size_t runs = 0;
};
RunSummary summarize_runs(std::span<const double> values);

/// Test-set RMSE of a model; evaluates predictions with the parallel kernel.
double test_rmse(const StreamModel& model, std::span<const RatingEvent> test);

/// Average per-word log-likelihood of the second half of every held-out
/// document given theta folded in from its first half. Always <= 0.
double predictive_log_likelihood(const TopicSnapshot& snapshot,
                                 std::span<const std::vector<std::int32_t>> heldout_docs,
                                 std::uint64_t seed);

struct MetricPoint {
  std::int64_t events_seen = 0;
  double rmse_test = 0.0;
  double rmse_progressive = 0.0;
  double pred_ll = 0.0;
  double wall_time = 0.0;  // seconds since the run started
};

struct MetricTrace {
  std::string algorithm;
  std::vector<MetricPoint> points;

  /// Throws std::logic_error unless events_seen strictly increases.
  void append(const MetricPoint& p);
};

/// Append-only CSV sink flushed after every row. Wall time is written only
/// when requested, since it is the one non-deterministic column.
class TraceCsvWriter {
 public:
  TraceCsvWriter(std::ostream& out, bool include_wall_time);
  void write(const MetricPoint& p);

 private:
  std::ostream& out_;
  bool wall_;
};

std::string trace_csv(const MetricTrace& trace, bool include_wall_time = false);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::int64_t eval_every = 50000;
  std::span<const RatingEvent> test;
  std::span<const std::vector<std::int32_t>> heldout_docs;
  std::uint64_t seed = 1;
  std::int64_t progress_every = 0;  // 0 disables stderr progress
  TraceCsvWriter* sink = nullptr;
};

struct RunResult {
  MetricTrace trace;
  double final_test_rmse = 0.0;  // NaN when the model does not predict or test is empty
  double progressive_rmse = 0.0;
  double final_pred_ll = 0.0;    // NaN without held-out docs or a topic side
  std::uint64_t rejected = 0;
};

/// Registers every document of the dataset with the model.
void register_documents(StreamModel& model, const Dataset& ds);

/// Single pass over the training stream with progressive validation and a
/// test evaluation every eval_every events plus one at the end.
RunResult run_stream(StreamModel& model, std::span<const RatingEvent> train, const RunOptions& opts);

// ---------------------------------------------------------------------------
// Grid search

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

/// Sets one named hyperparameter on a config. Names: sigma_eps, sigma_r,
/// sigma_u, sigma_v (precision scales, see README), K, c, rho,
/// and raw fields sigma_eps2, sigma_r2, sigma_u2, sigma_v2, lam_u, lam_v.
void apply_axis(ModelConfig& config, const std::string& name, double value);

/// The published grid ranges for an algorithm.
std::vector<GridAxis> published_grid(const std::string& algo);

/// Cartesian product in lexicographic order (first axis slowest, each axis
/// sorted ascending).
std::vector<std::vector<double>> enumerate_grid(const std::vector<GridAxis>& axes);

struct GridCell {
  std::vector<double> values;
  ModelConfig config;
  double validation_rmse = 0.0;
  double test_rmse = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  std::vector<GridAxis> axes;
  std::vector<GridCell> cells;
  std::optional<std::size_t> best;  // index into cells
};

/// Trains one model per cell on split.train, scores it on split.validation
/// and split.test. Cells run on up to `jobs` threads; failures are recorded
/// and the search continues.
GridResult grid_search(const ModelConfig& base, const std::vector<GridAxis>& axes,
                       const Dataset& ds, const StreamSplit& split, int jobs = 1);

std::string grid_csv(const GridResult& result);

// ---------------------------------------------------------------------------
// Runtime profile

struct RuntimeRow {
  int K = 0;
  double seconds = 0.0;
  double ratio = 1.0;  // seconds / seconds at the smallest K
};

/// Minimum wall time over `repeats` single passes for each K.
std::vector<RuntimeRow> runtime_profile(const ModelConfig& base, const std::vector<int>& K_values,
                                        const Dataset& ds, std::span<const RatingEvent> stream,
                                        int repeats = 1);

/// Reference ratios published for OBCTR at K = 5, 10, 20, 50, 100.
std::vector<std::pair<int, double>> published_runtime_ratios();

}  // namespace obctr
