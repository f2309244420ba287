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


#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "obctr/eval.hpp"
#include "obctr/synth.hpp"

using namespace obctr;

namespace {

const SyntheticData& small_data() {
  static const SyntheticData d = [] {
    auto p = SynthParams::defaults();
    p.users = 30;
    p.items = 20;
    p.vocab = 40;
    p.doc_len = 20;
    p.ratings = 1000;
    p.heldout_docs = 6;
    p.seed = 11;
    return generate_synthetic(p);
  }();
  return d;
}

ModelConfig config_for(const std::string& algo, int K = 5) {
  ModelConfig c;
  c.algo = algo;
  c.hp = HyperParams::with_topics(K);
  c.seed = 3;
  return c;
}

std::unique_ptr<StreamModel> fresh(const ModelConfig& c, const Dataset& ds) {
  auto m = make_model(c, ds.vocab_size(), ds.corpus_size());
  register_documents(*m, ds);
  return m;
}

TopicSnapshot fixed_snapshot(int K, int D, std::vector<double> phi, std::vector<double> theta) {
  TopicSnapshot s;
  s.K = K;
  s.D = D;
  s.phi = std::move(phi);
  s.fold_in = [theta](std::span<const std::int32_t>, std::uint64_t) { return theta; };
  return s;
}

}  // namespace

TEST_CASE("rmse") {
  const std::vector<std::pair<double, double>> p{{0, 1}, {0, -1}, {0, 1}, {0, -1}};
  CHECK(rmse(p) == 1.0);
  const std::vector<std::pair<double, double>> q{{1, 4}, {2, 2}};
  CHECK(rmse(q) == doctest::Approx(std::sqrt(4.5)));
  CHECK_THROWS_AS(rmse(std::vector<std::pair<double, double>>{}), std::invalid_argument);
  const auto m = make_model(config_for("pa-i"), 1, 0);
  CHECK_THROWS_WITH_AS(test_rmse(*m, {}), "empty test set", std::invalid_argument);
}

TEST_CASE("run summary uses the sample std-dev") {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = summarize_runs(x);
  CHECK(s.runs == 8u);
  CHECK(s.mean == 5.0);
  CHECK(s.std_dev == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-15));
  const std::vector<double> one{0.4};
  CHECK(summarize_runs(one).std_dev == 0.0);
  CHECK_THROWS(summarize_runs(std::vector<double>{}));
}

TEST_CASE("predictive likelihood on fixed snapshots") {
  SUBCASE("one word") {
    const auto s = fixed_snapshot(1, 1, {1.0}, {1.0});
    const std::vector<std::vector<std::int32_t>> docs{{0, 0, 0, 0}};
    CHECK(predictive_log_likelihood(s, docs, 1) == 0.0);
  }
  SUBCASE("uniform topics") {
    const auto s = fixed_snapshot(2, 10, std::vector<double>(20, 0.1), {0.4, 0.6});
    const std::vector<std::vector<std::int32_t>> docs{{0, 3, 9, 2, 5}, {7, 7}};
    CHECK(predictive_log_likelihood(s, docs, 1) == doctest::Approx(std::log(0.1)).epsilon(1e-14));
  }
  SUBCASE("hand computed mixture") {
    const auto s = fixed_snapshot(2, 3, {0.5, 0.25, 0.25, 0.1, 0.1, 0.8}, {0.3, 0.7});
    // scored halves: {2, 2} and {0, 0}
    const std::vector<std::vector<std::int32_t>> docs{{0, 1, 2, 2}, {1, 0, 0}};
    const double expect = (2 * std::log(0.3 * 0.25 + 0.7 * 0.8) + 2 * std::log(0.3 * 0.5 + 0.7 * 0.1)) / 4;
    CHECK(predictive_log_likelihood(s, docs, 1) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("fold-in sees the first half and distinct seeds") {
    std::vector<std::size_t> seen_len;
    std::set<std::uint64_t> seeds;
    TopicSnapshot s = fixed_snapshot(1, 2, {0.5, 0.5}, {1.0});
    s.fold_in = [&](std::span<const std::int32_t> obs, std::uint64_t seed) {
      seen_len.push_back(obs.size());
      seeds.insert(seed);
      return std::vector<double>{1.0};
    };
    const std::vector<std::vector<std::int32_t>> docs{{0, 1, 0, 1, 1}, {1, 1}, {0, 0, 0}};
    predictive_log_likelihood(s, docs, 9);
    std::sort(seen_len.begin(), seen_len.end());
    CHECK(seen_len == std::vector<std::size_t>{1, 1, 2});
    CHECK(seeds.size() == 3u);
  }
  SUBCASE("errors") {
    const auto s = fixed_snapshot(1, 2, {0.5, 0.5}, {1.0});
    CHECK_THROWS(predictive_log_likelihood(s, {}, 1));
    const std::vector<std::vector<std::int32_t>> short_doc{{1}};
    CHECK_THROWS(predictive_log_likelihood(s, short_doc, 1));
    const std::vector<std::vector<std::int32_t>> bad_word{{0, 2}};
    CHECK_THROWS(predictive_log_likelihood(s, bad_word, 1));
  }
}

TEST_CASE("model predictive likelihood is a proper log-probability") {
  const auto ds = small_data().dataset();
  for (const char* algo : {"obctr", "online-lda", "octr"}) {
    auto m = fresh(config_for(algo), ds);
    const auto split = split_stream(ds.events, 1);
    run_stream(*m, split.train, {});
    const auto snap = m->topic_snapshot();
    REQUIRE(snap.has_value());
    const double ll = predictive_log_likelihood(*snap, ds.heldout_docs, 4);
    CHECK(ll <= 0.0);
    CHECK(ll >= std::log(1e-300));
    CHECK(predictive_log_likelihood(*snap, ds.heldout_docs, 4) == ll);
  }
  CHECK_FALSE(make_model(config_for("pa-i"), 1, 0)->topic_snapshot().has_value());
}

TEST_CASE("metric trace and csv") {
  MetricTrace t;
  t.append({10, 1.0, 1.5, -2.0, 0.1});
  CHECK_THROWS_AS(t.append({10, 1.0, 1.0, 0.0, 0.0}), std::logic_error);
  t.append({20, 0.5, std::numeric_limits<double>::quiet_NaN(), -1.25, 0.2});
  CHECK(trace_csv(t) ==
        "events_seen,rmse_test,rmse_progressive,pred_ll\n"
        "10,1,1.5,-2\n"
        "20,0.5,nan,-1.25\n");
  CHECK(trace_csv(t, true).rfind("events_seen,rmse_test,rmse_progressive,pred_ll,wall_time\n10,1,1.5,-2,0.1\n", 0) == 0);

  std::ostringstream os;
  TraceCsvWriter w(os, false);
  for (const auto& p : t.points) w.write(p);
  CHECK(os.str() == trace_csv(t));
}

TEST_CASE("run_stream cadence") {
  const auto ds = small_data().dataset();
  const auto split = split_stream(ds.events, 1);
  std::vector<RatingEvent> train(split.train.begin(), split.train.begin() + 700);
  auto check_points = [&](std::int64_t every, std::vector<std::int64_t> expect) {
    auto m = fresh(config_for("pa-i"), ds);
    RunOptions o;
    o.eval_every = every;
    o.test = split.test;
    const auto res = run_stream(*m, train, o);
    std::vector<std::int64_t> got;
    for (const auto& p : res.trace.points) got.push_back(p.events_seen);
    CHECK(got == expect);
  };
  check_points(300, {300, 600, 700});
  check_points(350, {350, 700});
  check_points(1000000, {700});

  auto m = fresh(config_for("pa-i"), ds);
  const auto empty = run_stream(*m, {}, RunOptions{});
  REQUIRE(empty.trace.points.size() == 1u);
  CHECK(empty.trace.points[0].events_seen == 0);
  CHECK(std::isnan(empty.progressive_rmse));
  CHECK(std::isnan(empty.final_test_rmse));
  RunOptions bad;
  bad.eval_every = 0;
  CHECK_THROWS(run_stream(*m, train, bad));
}

TEST_CASE("progressive rmse uses predictions made before each update") {
  const auto ds = small_data().dataset();
  const auto split = split_stream(ds.events, 2);
  for (const char* algo : {"obctr", "pa-i", "sgd-pmf", "octr"}) {
    auto a = fresh(config_for(algo), ds);
    auto b = a->clone();
    RunOptions o;
    o.test = split.test;
    const auto res = run_stream(*a, split.train, o);

    double sq = 0.0;
    for (const auto& ev : split.train) {
      const double p = b->predict(ev.user_id, ev.item_id);
      b->process_event(ev);
      sq += (ev.rating - p) * (ev.rating - p);
    }
    CHECK(res.progressive_rmse == doctest::Approx(std::sqrt(sq / split.train.size())).epsilon(1e-12));
    double tq = 0.0;
    for (const auto& ev : split.test) {
      const double p = b->predict(ev.user_id, ev.item_id);
      tq += (ev.rating - p) * (ev.rating - p);
    }
    CHECK(res.final_test_rmse == doctest::Approx(std::sqrt(tq / split.test.size())).epsilon(1e-12));
  }
}

TEST_CASE("runs are deterministic and sinks match the trace") {
  const auto ds = small_data().dataset();
  const auto split = split_stream(ds.events, 3);
  for (const char* algo : {"obctr", "octr", "online-lda"}) {
    std::string csv[2];
    for (auto& out : csv) {
      auto m = fresh(config_for(algo), ds);
      std::ostringstream os;
      TraceCsvWriter w(os, false);
      RunOptions o;
      o.eval_every = 200;
      o.test = split.test;
      o.heldout_docs = ds.heldout_docs;
      o.sink = &w;
      const auto res = run_stream(*m, split.train, o);
      CHECK(os.str() == trace_csv(res.trace));
      out = os.str();
    }
    CHECK(csv[0] == csv[1]);
  }
}

TEST_CASE("evaluation leaves the model untouched") {
  const auto ds = small_data().dataset();
  const auto split = split_stream(ds.events, 4);
  auto m = fresh(config_for("obctr"), ds);
  run_stream(*m, split.train, {});
  const auto before = m->state_json();
  test_rmse(*m, split.test);
  predictive_log_likelihood(*m->topic_snapshot(), ds.heldout_docs, 1);
  CHECK(m->state_json() == before);
}

// ---------------------------------------------------------------------------
// Grid search

TEST_CASE("axis mapping") {
  ModelConfig c = config_for("octr");
  apply_axis(c, "sigma_eps", 2.0);
  CHECK(c.hp.sigma_eps2 == 0.25);
  apply_axis(c, "sigma_r", 0.5);
  CHECK(c.hp.sigma_r2 == 4.0);
  apply_axis(c, "sigma_u", 0.1);
  CHECK(c.sgd_lam_u == doctest::Approx(0.01));
  CHECK(c.hp.sigma_u2 == doctest::Approx(100.0));
  apply_axis(c, "K", 20);
  CHECK(c.hp.K == 20);
  CHECK(c.hp.alpha == 0.05);
  apply_axis(c, "rho", 0.2);
  CHECK(c.sgd_eta == 0.2);
  apply_axis(c, "c", 0.5);
  CHECK(c.pa_c == 0.5);
  CHECK_THROWS_AS(apply_axis(c, "gamma", 1.0), std::invalid_argument);
}

TEST_CASE("published grids") {
  CHECK(enumerate_grid(published_grid("obctr")).size() == 147u);
  CHECK(enumerate_grid(published_grid("pa-i")).size() == 15u);
  CHECK(enumerate_grid(published_grid("octr")).size() == 540u);
  CHECK(enumerate_grid(published_grid("sgd-pmf")).size() == 540u);
  CHECK_THROWS(published_grid("online-lda"));

  const auto cells = enumerate_grid({{"a", {2, 1}}, {"b", {30, 10, 20}}});
  const std::vector<std::vector<double>> expect{{1, 10}, {1, 20}, {1, 30}, {2, 10}, {2, 20}, {2, 30}};
  CHECK(cells == expect);
  CHECK_THROWS(enumerate_grid({{"a", {}}}));
}

TEST_CASE("grid search") {
  const auto ds = small_data().dataset();
  const auto split = split_stream(ds.events, 5);

  SUBCASE("single cell equals a direct run") {
    const auto g = grid_search(config_for("pa-i"), {{"c", {0.2}}}, ds, split);
    REQUIRE(g.best == std::optional<std::size_t>(0));
    auto cfg = config_for("pa-i");
    cfg.pa_c = 0.2;
    auto m = fresh(cfg, ds);
    run_stream(*m, split.train, {});
    CHECK(g.cells[0].validation_rmse == test_rmse(*m, split.validation));
    CHECK(g.cells[0].test_rmse == test_rmse(*m, split.test));
  }
  SUBCASE("ties go to the first cell") {
    // PA-I ignores lam_u, so both cells score the same.
    const auto g = grid_search(config_for("pa-i"), {{"lam_u", {0.1, 0.2}}}, ds, split);
    REQUIRE(g.cells.size() == 2u);
    CHECK(g.cells[0].validation_rmse == g.cells[1].validation_rmse);
    CHECK(g.best == std::optional<std::size_t>(0));
  }
  SUBCASE("failed cells are recorded") {
    const auto g = grid_search(config_for("pa-i"), {{"K", {0, 2}}}, ds, split);
    CHECK(g.cells[0].failed);
    CHECK_FALSE(g.cells[0].error.empty());
    CHECK_FALSE(g.cells[1].failed);
    CHECK(g.best == std::optional<std::size_t>(1));
    const auto csv = grid_csv(g);
    CHECK(csv.rfind("K,validation_rmse,test_rmse,failed,best\n0,nan,nan,1,0\n2,", 0) == 0);

    const auto none = grid_search(config_for("pa-i"), {{"K", {0}}}, ds, split);
    CHECK_FALSE(none.best.has_value());
  }
  SUBCASE("thread count does not change results") {
    const std::vector<GridAxis> axes{{"sigma_eps", {1, 4}}, {"sigma_r", {2, 4}}};
    const auto a = grid_search(config_for("obctr"), axes, ds, split, 1);
    const auto b = grid_search(config_for("obctr"), axes, ds, split, 4);
    CHECK(grid_csv(a) == grid_csv(b));
  }
  SUBCASE("errors") {
    StreamSplit empty = split;
    empty.validation.clear();
    CHECK_THROWS(grid_search(config_for("pa-i"), {{"c", {0.1}}}, ds, empty));
    const auto g = grid_search(config_for("online-lda"), {{"K", {5}}}, ds, split);
    CHECK(g.cells[0].failed);
  }
}

// ---------------------------------------------------------------------------
// Runtime

TEST_CASE("runtime profile") {
  const auto ds = small_data().dataset();
  const std::vector<RatingEvent> stream(ds.events.begin(), ds.events.begin() + 200);
  const auto one = runtime_profile(config_for("obctr"), {5}, ds, stream);
  REQUIRE(one.size() == 1u);
  CHECK(one[0].ratio == 1.0);
  CHECK(one[0].seconds > 0.0);

  const auto two = runtime_profile(config_for("obctr"), {5, 50}, ds, stream, 2);
  CHECK(two[1].ratio > 1.0);
  CHECK_THROWS(runtime_profile(config_for("obctr"), {}, ds, stream));

  const auto pub = published_runtime_ratios();
  REQUIRE(pub.size() == 5u);
  CHECK(pub[0] == std::pair<int, double>{5, 1.00});
  CHECK(pub[4] == std::pair<int, double>{100, 11.43});
}
