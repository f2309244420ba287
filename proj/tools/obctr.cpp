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

// obctr: command line front end.
//
//   obctr train --algo obctr --ratings r.dat --docs d.tsv --k 10 --seed 7 --out run/
//   obctr eval  --checkpoint run/checkpoint.json --ratings run/test.dat
//   obctr grid  --algo obctr --ratings r.dat --docs d.tsv --paper-ranges --jobs 4
//   obctr synth --k 5 --users 200 --items 100 --seed 1 --out data/
//   obctr train --config run.ini --seed 3
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "obctr/checkpoint.hpp"
#include "obctr/eval.hpp"
#include "obctr/ingestion.hpp"
#include "obctr/models.hpp"
#include "obctr/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace obctr;

namespace {

constexpr int kConfigVersion = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// INI reader that accepts snake_case keys for the dashed option names.
class SnakeCaseIni : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) std::replace(item.name.begin(), item.name.end(), '_', '-');
    return items;
  }
};

// Relative input paths missing from the working directory are looked up
// under $OBCTR_DATA_DIR.
fs::path resolve_input(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* dir = std::getenv("OBCTR_DATA_DIR"); dir && *dir) {
    fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt;
  }
  return path;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

std::vector<std::vector<std::int32_t>> read_heldout(const fs::path& path, const std::vector<std::string>& vocab,
                                                    const CorpusOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read held-out documents " + path.string());
  std::vector<std::vector<std::int32_t>> docs;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    auto tokens = encode_with_vocabulary(tab == std::string::npos ? line : line.substr(tab + 1), vocab, opts);
    if (tokens.size() >= 2) docs.push_back(std::move(tokens));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Shared option blocks

struct ModelFlags {
  std::string algo = "obctr";
  int k = 5;
  double alpha = 0.0;
  double beta = 0.0;
  HyperParams hp;
  ModelConfig mc;
  std::uint64_t seed = 1;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* beta_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--algo", algo, "Algorithm")->check(CLI::IsMember(algorithm_names()))->capture_default_str();
    app->add_option("--k", k, "Number of topics / latent dimensions")->check(CLI::PositiveNumber)->capture_default_str();
    alpha_opt = app->add_option("--alpha", alpha, "Dirichlet prior on topic proportions (default 1/K)");
    beta_opt = app->add_option("--beta", beta, "Dirichlet prior on topic-word distributions (default 1/K)");
    app->add_option("--sigma-u2", hp.sigma_u2, "User prior variance")->capture_default_str();
    app->add_option("--sigma-v2", hp.sigma_v2, "Item prior variance")->capture_default_str();
    app->add_option("--sigma-eps2", hp.sigma_eps2, "Item/topic coupling variance")->capture_default_str();
    app->add_option("--sigma-r2", hp.sigma_r2, "Rating noise variance")->capture_default_str();
    app->add_option("--sweeps", hp.sweeps, "Gibbs sweeps per event")->capture_default_str();
    app->add_option("--burn-in", hp.burn_in, "Discarded Gibbs sweeps")->capture_default_str();
    app->add_option("--inner-iters", hp.inner_iters, "u/v alternations per event")->capture_default_str();
    app->add_flag("--pmf-only-fallback", hp.pmf_only_fallback, "Update items without text by PMF rules");
    app->add_option("--pa-c", mc.pa_c, "PA-I aggressiveness")->capture_default_str();
    app->add_option("--pa-eps", mc.pa_eps, "PA-I insensitivity")->capture_default_str();
    app->add_option("--sgd-eta", mc.sgd_eta, "SGD step size")->capture_default_str();
    app->add_option("--sgd-lam-u", mc.sgd_lam_u, "SGD user regularizer")->capture_default_str();
    app->add_option("--sgd-lam-v", mc.sgd_lam_v, "SGD item regularizer")->capture_default_str();
    app->add_option("--init-std", mc.init_std, "Point-factor init std")->capture_default_str();
    app->add_option("--lda-kappa", mc.lda_kappa, "Online LDA forgetting rate")->capture_default_str();
    app->add_option("--lda-tau0", mc.lda_tau0, "Online LDA delay")->capture_default_str();
    app->add_option("--seed", seed, "Root seed for every random choice")->capture_default_str();
  }

  ModelConfig config() const {
    ModelConfig c = mc;
    c.algo = algo;
    c.hp = hp;
    c.hp.K = k;
    c.hp.alpha = alpha_opt->count() ? alpha : 1.0 / k;
    c.hp.beta = beta_opt->count() ? beta : 1.0 / k;
    c.seed = seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

struct DataFlags {
  std::string ratings;
  std::string docs;
  std::string heldout;
  bool strict = false;
  CorpusOptions corpus;
  bool keep_stopwords = false;

  void add(CLI::App* app) {
    app->add_option("--ratings", ratings, "Ratings file (user::item::rating::timestamp)")->required();
    app->add_option("--docs", docs, "Item documents TSV (item_id<TAB>text)")->required();
    app->add_option("--heldout-docs", heldout, "Held-out documents TSV for predictive likelihood");
    app->add_flag("--strict", strict, "Fail on malformed rating lines");
    app->add_option("--min-df", corpus.min_df, "Minimum document frequency")->capture_default_str();
    app->add_option("--max-vocab", corpus.max_vocab, "Vocabulary size cap")->capture_default_str();
    app->add_option("--min-token-length", corpus.min_token_length, "Shortest kept token")->capture_default_str();
    app->add_flag("--keep-stopwords", keep_stopwords, "Do not remove stopwords");
  }

  struct Loaded {
    Corpus corpus;
    Dataset ds;
    std::size_t malformed = 0;
  };

  Loaded load() {
    corpus.remove_stopwords = !keep_stopwords;
    Loaded l;
    auto parsed = parse_ratings(resolve_input(ratings), strict);
    l.malformed = parsed.malformed;
    l.corpus = build_corpus(resolve_input(docs), corpus);
    l.ds = assemble_dataset(parsed.events, l.corpus);
    if (!heldout.empty()) l.ds.heldout_docs = read_heldout(resolve_input(heldout), l.corpus.vocabulary, corpus);
    std::cerr << "loaded " << l.ds.events.size() << " ratings (" << parsed.malformed << " malformed, "
              << l.ds.events_without_text << " without text), " << l.corpus.docs.size() << " documents ("
              << l.corpus.dropped_docs << " dropped), D=" << l.corpus.vocab_size() << '\n';
    return l;
  }
};

std::vector<RatingEvent> to_external(std::span<const RatingEvent> events, const Dataset& ds) {
  std::vector<RatingEvent> out;
  out.reserve(events.size());
  for (auto e : events) {
    e.user_id = ds.users.external(e.user_id);
    e.item_id = ds.items.external(e.item_id);
    out.push_back(e);
  }
  return out;
}

json nan_to_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------
// Commands

int cmd_train(ModelFlags& mf, DataFlags& df, const std::string& out_dir, std::int64_t eval_every,
              std::int64_t progress_every, bool wall_time, const json& provenance) {
  const ModelConfig config = mf.config();
  auto data = df.load();
  const auto split = split_stream(data.ds.events, config.seed);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const json config_json = config;

  auto model = make_model(config, data.ds.vocab_size(), data.ds.corpus_size());
  register_documents(*model, data.ds);

  auto trace_out = open_out(out / "trace.csv");
  trace_out << "# config: " << config_json.dump() << '\n';
  TraceCsvWriter sink(trace_out, wall_time);
  RunOptions opts;
  opts.eval_every = eval_every;
  opts.test = split.test;
  opts.heldout_docs = data.ds.heldout_docs;
  opts.seed = config.seed;
  opts.progress_every = progress_every;
  opts.sink = &sink;
  const auto result = run_stream(*model, split.train, opts);

  {
    auto t = open_out(out / "test.dat");
    write_ratings(t, to_external(split.test, data.ds));
  }
  save_checkpoint(out / "checkpoint.json", checkpoint_json(*model, data.ds, df.corpus, provenance));
  write_json(out / "corpus_manifest.json", data.corpus.manifest());

  const json summary{{"config", config_json},
                     {"provenance", provenance},
                     {"events", {{"train", split.train.size()},
                                 {"validation", split.validation.size()},
                                 {"test", split.test.size()},
                                 {"malformed", data.malformed},
                                 {"without_text", data.ds.events_without_text},
                                 {"rejected", result.rejected}}},
                     {"final_test_rmse", nan_to_null(result.final_test_rmse)},
                     {"progressive_rmse", nan_to_null(result.progressive_rmse)},
                     {"final_pred_ll", nan_to_null(result.final_pred_ll)}};
  write_json(out / "summary.json", summary);
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& ratings_path, const std::string& heldout_path,
             const std::string& out_csv) {
  auto ck = load_checkpoint(resolve_input(checkpoint_path));
  const auto parsed = parse_ratings(resolve_input(ratings_path));
  const auto events = reindex_events(parsed.events, ck.users, ck.items);
  if (events.empty()) throw std::runtime_error("empty test set");

  json metrics{{"algorithm", ck.model->name()}, {"events", events.size()}};
  metrics["rmse"] = ck.model->predicts_ratings() ? nan_to_null(test_rmse(*ck.model, events)) : json(nullptr);
  metrics["pred_ll"] = nullptr;
  if (!heldout_path.empty()) {
    const auto docs = read_heldout(resolve_input(heldout_path), ck.vocabulary, ck.corpus_options);
    if (auto snap = ck.model->topic_snapshot())
      metrics["pred_ll"] = predictive_log_likelihood(*snap, docs, ck.model->config().seed);
  }
  if (!out_csv.empty()) {
    auto out = open_out(out_csv);
    auto field = [](const json& v) { return v.is_null() ? std::string("nan") : v.dump(); };
    out << "algorithm,events,rmse,pred_ll\n"
        << ck.model->name() << ',' << events.size() << ',' << field(metrics["rmse"]) << ','
        << field(metrics["pred_ll"]) << '\n';
  }
  std::cout << metrics.dump() << '\n';
  return 0;
}

GridAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("axis must look like name=v1,v2,...: " + spec);
  GridAxis axis{spec.substr(0, eq), {}};
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      axis.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad value '" + item + "' in axis " + axis.name);
    }
  }
  if (axis.values.empty()) throw UsageError("axis " + axis.name + " has no values");
  return axis;
}

int cmd_grid(ModelFlags& mf, DataFlags& df, bool paper_ranges, const std::vector<std::string>& axis_specs, int jobs,
             const std::string& out_csv) {
  const ModelConfig base = mf.config();
  std::vector<GridAxis> axes;
  if (paper_ranges) {
    try {
      axes = published_grid(base.algo);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  for (const auto& s : axis_specs) {
    auto axis = parse_axis(s);
    ModelConfig probe = base;
    try {
      apply_axis(probe, axis.name, axis.values.front());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    auto same = std::find_if(axes.begin(), axes.end(), [&](const GridAxis& a) { return a.name == axis.name; });
    if (same != axes.end()) *same = std::move(axis);
    else axes.push_back(std::move(axis));
  }

  auto data = df.load();
  const auto split = split_stream(data.ds.events, base.seed);
  std::cerr << "grid: " << enumerate_grid(axes).size() << " cells on " << jobs << " job(s)\n";
  const auto result = grid_search(base, axes, data.ds, split, jobs);
  const std::string table = "# config: " + json(base).dump() + '\n' + grid_csv(result);
  if (out_csv.empty()) std::cout << table;
  else open_out(out_csv) << table;

  std::size_t failed = 0;
  for (const auto& c : result.cells) {
    if (!c.failed) continue;
    ++failed;
    std::cerr << "cell failed: " << c.error << '\n';
  }
  if (!result.best) {
    std::cerr << "grid: every cell failed\n";
    return 1;
  }
  const auto& best = result.cells[*result.best];
  json summary{{"cells", result.cells.size()},
               {"failed", failed},
               {"best", best.values},
               {"validation_rmse", best.validation_rmse},
               {"test_rmse", nan_to_null(best.test_rmse)},
               {"config", best.config}};
  std::cerr << summary.dump() << '\n';
  return 0;
}

int cmd_synth(SynthParams p, const std::string& out_dir) {
  p.hp.validate();
  if (p.users < 1 || p.items < 1 || p.vocab < 1 || p.ratings < 1 || p.doc_len <= 0 || p.heldout_docs < 0)
    throw UsageError("synthetic sizes must be positive");
  const auto data = generate_synthetic(p);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  {
    auto r = open_out(out / "ratings.dat");
    write_ratings(r, data.events);
  }
  auto write_docs = [&](const fs::path& path, auto&& each) {
    auto d = open_out(path);
    each(d);
  };
  write_docs(out / "docs.tsv", [&](std::ostream& d) {
    for (const auto& [item, tokens] : data.corpus.docs) {
      d << item << '\t';
      for (std::size_t n = 0; n < tokens.size(); ++n)
        d << (n ? " " : "") << data.corpus.vocabulary[tokens[n]];
      d << '\n';
    }
  });
  write_docs(out / "heldout.tsv", [&](std::ostream& d) {
    for (std::size_t i = 0; i < data.heldout_docs.size(); ++i) {
      d << i << '\t';
      for (std::size_t n = 0; n < data.heldout_docs[i].size(); ++n)
        d << (n ? " " : "") << data.corpus.vocabulary[data.heldout_docs[i][n]];
      d << '\n';
    }
  });
  json params{{"hp", p.hp},           {"users", p.users},     {"items", p.items},
              {"vocab", p.vocab},     {"doc_len", p.doc_len}, {"ratings", p.ratings},
              {"heldout_docs", p.heldout_docs}, {"seed", p.seed}};
  json truth = data.truth.to_json();
  truth["params"] = params;
  write_json(out / "ground_truth.json", truth);
  std::cout << json{{"out", out.string()}, {"ratings", data.events.size()}, {"docs", data.corpus.docs.size()},
                    {"heldout_docs", data.heldout_docs.size()}, {"params", params}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online Bayesian collaborative topic regression and baselines"};
  app.require_subcommand(1);

  json provenance{{"argv", json::array()}};
  for (int i = 1; i < argc; ++i) provenance["argv"].push_back(argv[i]);

  // Config file: INI with one section per subcommand, e.g.
  //   config_version = 1
  //   [train]
  //   algo = "obctr"
  //   k = 10
  int config_version = kConfigVersion;
  app.fallthrough();
  app.config_formatter(std::make_shared<SnakeCaseIni>());
  app.set_config("--config", "", "Key-value config file, one [section] per command; flags win");
  app.add_option("--config-version", config_version, "Config format version")
      ->check(CLI::IsMember({kConfigVersion}));

  // train
  auto* train = app.add_subcommand("train", "Single pass over a rating stream; writes checkpoint and trace");
  ModelFlags train_model;
  DataFlags train_data;
  std::string train_out = "obctr-run";
  std::int64_t eval_every = 50000;
  std::int64_t progress_every = 10000;
  bool wall_time = false;
  train_model.add(train);
  train_data.add(train);
  train->add_option("--out", train_out, "Output directory")->capture_default_str();
  train->add_option("--eval-every", eval_every, "Test-set evaluation cadence in events")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--progress-every", progress_every, "Progress line to stderr every N events (0 = off)")
      ->capture_default_str();
  train->add_flag("--wall-time", wall_time, "Add a wall_time column to the trace");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a rating file");
  std::string ck_path, eval_ratings, eval_heldout, eval_out;
  eval->add_option("--checkpoint", ck_path, "Checkpoint written by train")->required();
  eval->add_option("--ratings", eval_ratings, "Test ratings file")->required();
  eval->add_option("--heldout-docs", eval_heldout, "Held-out documents TSV");
  eval->add_option("--out", eval_out, "Metrics CSV");

  // grid
  auto* grid = app.add_subcommand("grid", "Validation grid search, one single-pass run per cell");
  ModelFlags grid_model;
  DataFlags grid_data;
  bool paper_ranges = false;
  std::vector<std::string> axis_specs;
  int jobs = 1;
  std::string grid_out;
  grid_model.add(grid);
  grid_data.add(grid);
  grid->add_flag("--paper-ranges", paper_ranges, "Use the published grid for the algorithm");
  grid->add_option("--axis", axis_specs, "Extra axis name=v1,v2,... (repeatable)");
  grid->add_option("--jobs", jobs, "Parallel cells")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--out", grid_out, "Grid table CSV (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Sample a synthetic dataset with ground truth");
  SynthParams sp = SynthParams::defaults();
  std::string synth_out = "obctr-synth";
  CLI::Option* synth_alpha = nullptr;
  synth->add_option("--k", sp.hp.K, "Topics")->check(CLI::PositiveNumber)->capture_default_str();
  synth_alpha = synth->add_option("--alpha", sp.hp.alpha, "Dirichlet prior on theta (default 1/K)");
  synth->add_option("--beta", sp.hp.beta, "Dirichlet prior on topics")->capture_default_str();
  synth->add_option("--sigma-u2", sp.hp.sigma_u2, "User factor variance")->capture_default_str();
  synth->add_option("--sigma-eps2", sp.hp.sigma_eps2, "Item offset variance")->capture_default_str();
  synth->add_option("--sigma-r2", sp.hp.sigma_r2, "Rating noise variance")->capture_default_str();
  synth->add_option("--users", sp.users, "Users")->capture_default_str();
  synth->add_option("--items", sp.items, "Items")->capture_default_str();
  synth->add_option("--vocab", sp.vocab, "Vocabulary size")->capture_default_str();
  synth->add_option("--doc-len", sp.doc_len, "Mean document length")->capture_default_str();
  synth->add_option("--ratings", sp.ratings, "Number of ratings")->capture_default_str();
  synth->add_option("--heldout-docs", sp.heldout_docs, "Extra held-out documents")->capture_default_str();
  synth->add_option("--seed", sp.seed, "Seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_model, train_data, train_out, eval_every, progress_every, wall_time, provenance);
    if (*eval) return cmd_eval(ck_path, eval_ratings, eval_heldout, eval_out);
    if (*grid) return cmd_grid(grid_model, grid_data, paper_ranges, axis_specs, jobs, grid_out);
    if (*synth) {
      if (!synth_alpha->count()) sp.hp.alpha = 1.0 / sp.hp.K;
      return cmd_synth(sp, synth_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
