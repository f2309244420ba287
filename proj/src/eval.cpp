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

#include "obctr/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "obctr/kernels.hpp"

namespace obctr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

double rmse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("rmse: empty input");
  double s = 0.0;
  for (const auto& [pred, r] : pairs) s += (r - pred) * (r - pred);
  return std::sqrt(s / static_cast<double>(pairs.size()));
}

RunSummary summarize_runs(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize_runs: no values");
  RunSummary s;
  s.runs = values.size();
  for (double x : values) s.mean += x;
  s.mean /= static_cast<double>(s.runs);
  if (s.runs > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(s.runs - 1));
  }
  return s;
}

double test_rmse(const StreamModel& model, std::span<const RatingEvent> test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  const auto preds = kernels::predict_batch(
      test, [&model](std::int64_t u, std::int64_t i) { return model.predict(u, i); });
  return kernels::rmse_from(preds, test);
}

double predictive_log_likelihood(const TopicSnapshot& snapshot,
                                 std::span<const std::vector<std::int32_t>> heldout_docs,
                                 std::uint64_t seed) {
  const auto score = kernels::heldout_loglik(heldout_docs, snapshot.K, snapshot.D, snapshot.phi,
                                             snapshot.fold_in, seed);
  if (score.tokens == 0) throw std::invalid_argument("predictive_log_likelihood: no held-out tokens");
  return score.log_likelihood / static_cast<double>(score.tokens);
}

void MetricTrace::append(const MetricPoint& p) {
  if (!points.empty() && p.events_seen <= points.back().events_seen)
    throw std::logic_error("MetricTrace: events_seen must strictly increase");
  points.push_back(p);
}

TraceCsvWriter::TraceCsvWriter(std::ostream& out, bool include_wall_time) : out_(out), wall_(include_wall_time) {
  out_ << "events_seen,rmse_test,rmse_progressive,pred_ll";
  if (wall_) out_ << ",wall_time";
  out_ << '\n';
  out_.flush();
}

void TraceCsvWriter::write(const MetricPoint& p) {
  out_ << p.events_seen << ',' << fmt_double(p.rmse_test) << ',' << fmt_double(p.rmse_progressive) << ','
       << fmt_double(p.pred_ll);
  if (wall_) out_ << ',' << fmt_double(p.wall_time);
  out_ << '\n';
  out_.flush();
}

std::string trace_csv(const MetricTrace& trace, bool include_wall_time) {
  std::ostringstream os;
  TraceCsvWriter w(os, include_wall_time);
  for (const auto& p : trace.points) w.write(p);
  return os.str();
}

void register_documents(StreamModel& model, const Dataset& ds) {
  for (const auto& [item, tokens] : ds.docs) model.register_document(item, tokens);
}

RunResult run_stream(StreamModel& model, std::span<const RatingEvent> train, const RunOptions& opts) {
  if (opts.eval_every < 1) throw std::invalid_argument("run_stream: eval_every must be >= 1");
  RunResult res;
  res.trace.algorithm = model.name();
  const auto t0 = Clock::now();
  const bool predicts = model.predicts_ratings();
  double sq = 0.0;
  std::int64_t n_pred = 0;

  auto evaluate = [&](std::int64_t seen) {
    MetricPoint p;
    p.events_seen = seen;
    p.rmse_test = (predicts && !opts.test.empty()) ? test_rmse(model, opts.test) : kNaN;
    p.rmse_progressive = n_pred > 0 ? std::sqrt(sq / static_cast<double>(n_pred)) : kNaN;
    p.pred_ll = kNaN;
    if (!opts.heldout_docs.empty())
      if (auto snap = model.topic_snapshot()) p.pred_ll = predictive_log_likelihood(*snap, opts.heldout_docs, opts.seed);
    p.wall_time = seconds_since(t0);
    res.trace.append(p);
    if (opts.sink) opts.sink->write(p);
    if (predicts && !opts.test.empty() && !std::isfinite(p.rmse_test))
      throw DivergenceError("non-finite test RMSE after " + std::to_string(seen) + " events");
  };

  std::int64_t seen = 0;
  for (const auto& ev : train) {
    const auto r = model.process_event(ev);
    ++seen;
    if (predicts && r.accepted) {
      if (!std::isfinite(r.prediction))
        throw DivergenceError("non-finite prediction at event " + std::to_string(seen));
      sq += (ev.rating - r.prediction) * (ev.rating - r.prediction);
      ++n_pred;
    }
    if (seen % opts.eval_every == 0) evaluate(seen);
    if (opts.progress_every > 0 && seen % opts.progress_every == 0)
      std::cerr << model.name() << ": " << seen << "/" << train.size() << " events\n";
  }
  if (seen == 0 || seen % opts.eval_every != 0) evaluate(seen == 0 ? 0 : seen);

  const auto& last = res.trace.points.back();
  res.final_test_rmse = last.rmse_test;
  res.progressive_rmse = last.rmse_progressive;
  res.final_pred_ll = last.pred_ll;
  res.rejected = model.rejected_events();
  return res;
}

// ---------------------------------------------------------------------------
// Grid search

void apply_axis(ModelConfig& c, const std::string& name, double value) {
  // Grid sigma values are precisions: N(0, 1/sigma^2).
  if (name == "sigma_eps") c.hp.sigma_eps2 = 1.0 / (value * value);
  else if (name == "sigma_r") c.hp.sigma_r2 = 1.0 / (value * value);
  else if (name == "sigma_u") c.sgd_lam_u = value * value, c.hp.sigma_u2 = 1.0 / (value * value);
  else if (name == "sigma_v") c.sgd_lam_v = value * value, c.hp.sigma_v2 = 1.0 / (value * value);
  else if (name == "K") {
    const int k = static_cast<int>(std::lround(value));
    c.hp.K = k;
    c.hp.alpha = 1.0 / k;
    c.hp.beta = 1.0 / k;
  } else if (name == "c") c.pa_c = value;
  else if (name == "rho") c.sgd_eta = value;
  else if (name == "sigma_eps2") c.hp.sigma_eps2 = value;
  else if (name == "sigma_r2") c.hp.sigma_r2 = value;
  else if (name == "sigma_u2") c.hp.sigma_u2 = value;
  else if (name == "sigma_v2") c.hp.sigma_v2 = value;
  else if (name == "lam_u") c.sgd_lam_u = value;
  else if (name == "lam_v") c.sgd_lam_v = value;
  else throw std::invalid_argument("unknown grid axis '" + name + "'");
}

std::vector<GridAxis> published_grid(const std::string& algo) {
  const std::vector<double> sig{0.5, 1, 2, 4, 8, 16, 32};
  const std::vector<double> ks{5, 10, 20};
  const std::vector<double> uv{0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  const std::vector<double> rho{0.01, 0.05, 0.1, 0.2, 0.5};
  if (algo == "obctr") return {{"sigma_eps", sig}, {"sigma_r", sig}, {"K", ks}};
  if (algo == "pa-i") return {{"c", {0.01, 0.1, 0.2, 0.5, 1}}, {"K", ks}};
  if (algo == "octr" || algo == "sgd-pmf") return {{"rho", rho}, {"sigma_u", uv}, {"sigma_v", uv}, {"K", ks}};
  throw std::invalid_argument("no rating-prediction grid for algorithm '" + algo + "'");
}

std::vector<std::vector<double>> enumerate_grid(const std::vector<GridAxis>& axes) {
  std::vector<std::vector<double>> sorted;
  for (const auto& a : axes) {
    if (a.values.empty()) throw std::invalid_argument("grid axis '" + a.name + "' has no values");
    auto v = a.values;
    std::sort(v.begin(), v.end());
    sorted.push_back(std::move(v));
  }
  std::vector<std::vector<double>> cells{{}};
  for (const auto& vals : sorted) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : cells)
      for (double x : vals) {
        auto c = prefix;
        c.push_back(x);
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }
  return cells;
}

GridResult grid_search(const ModelConfig& base, const std::vector<GridAxis>& axes,
                       const Dataset& ds, const StreamSplit& split, int jobs) {
  if (split.validation.empty()) throw std::invalid_argument("grid_search: empty validation split");
  GridResult res;
  res.axes = axes;
  for (auto& vals : enumerate_grid(axes)) {
    GridCell cell;
    cell.config = base;
    for (std::size_t a = 0; a < axes.size(); ++a) apply_axis(cell.config, axes[a].name, vals[a]);
    cell.values = std::move(vals);
    res.cells.push_back(std::move(cell));
  }

  const auto n = static_cast<std::int64_t>(res.cells.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(jobs, 1))
  for (std::int64_t i = 0; i < n; ++i) {
    auto& cell = res.cells[i];
    try {
      auto model = make_model(cell.config, ds.vocab_size(), ds.corpus_size());
      if (!model->predicts_ratings()) throw std::invalid_argument("algorithm does not predict ratings");
      register_documents(*model, ds);
      RunOptions opts;
      opts.eval_every = std::numeric_limits<std::int64_t>::max();
      run_stream(*model, split.train, opts);
      cell.validation_rmse = test_rmse(*model, split.validation);
      cell.test_rmse = split.test.empty() ? kNaN : test_rmse(*model, split.test);
      if (!std::isfinite(cell.validation_rmse)) throw DivergenceError("non-finite validation RMSE");
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  }

  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const auto& c = res.cells[i];
    if (c.failed) continue;
    if (!res.best || c.validation_rmse < res.cells[*res.best].validation_rmse) res.best = i;
  }
  return res;
}

std::string grid_csv(const GridResult& result) {
  std::ostringstream os;
  for (const auto& a : result.axes) os << a.name << ',';
  os << "validation_rmse,test_rmse,failed,best\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    for (double v : c.values) os << fmt_double(v) << ',';
    os << (c.failed ? "nan" : fmt_double(c.validation_rmse)) << ',' << (c.failed ? "nan" : fmt_double(c.test_rmse))
       << ',' << (c.failed ? 1 : 0) << ',' << (result.best == i ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Runtime profile

std::vector<RuntimeRow> runtime_profile(const ModelConfig& base, const std::vector<int>& K_values,
                                        const Dataset& ds, std::span<const RatingEvent> stream,
                                        int repeats) {
  if (K_values.empty()) throw std::invalid_argument("runtime_profile: no K values");
  std::vector<RuntimeRow> rows;
  for (int K : K_values) {
    ModelConfig c = base;
    apply_axis(c, "K", K);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < std::max(repeats, 1); ++rep) {
      auto model = make_model(c, ds.vocab_size(), ds.corpus_size());
      register_documents(*model, ds);
      const auto t0 = Clock::now();
      for (const auto& ev : stream) model->process_event(ev);
      best = std::min(best, seconds_since(t0));
    }
    rows.push_back({K, best, 1.0});
  }
  const auto smallest = std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.K < b.K; });
  const double base_t = smallest->seconds;
  for (auto& r : rows) r.ratio = base_t > 0.0 ? r.seconds / base_t : 1.0;
  return rows;
}

std::vector<std::pair<int, double>> published_runtime_ratios() {
  return {{5, 1.00}, {10, 1.29}, {20, 2.62}, {50, 5.64}, {100, 11.43}};
}

}  // namespace obctr
