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

#include "obctr/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "obctr/random.hpp"

namespace obctr {

using nlohmann::json;

void to_json(json& j, const HyperParams& hp) {
  j = json{{"K", hp.K},
           {"alpha", hp.alpha},
           {"beta", hp.beta},
           {"sigma_u2", hp.sigma_u2},
           {"sigma_v2", hp.sigma_v2},
           {"sigma_eps2", hp.sigma_eps2},
           {"sigma_r2", hp.sigma_r2},
           {"sweeps", hp.sweeps},
           {"burn_in", hp.burn_in},
           {"inner_iters", hp.inner_iters},
           {"pmf_only_fallback", hp.pmf_only_fallback}};
}

void from_json(const json& j, HyperParams& hp) {
  j.at("K").get_to(hp.K);
  j.at("alpha").get_to(hp.alpha);
  j.at("beta").get_to(hp.beta);
  j.at("sigma_u2").get_to(hp.sigma_u2);
  j.at("sigma_v2").get_to(hp.sigma_v2);
  j.at("sigma_eps2").get_to(hp.sigma_eps2);
  j.at("sigma_r2").get_to(hp.sigma_r2);
  j.at("sweeps").get_to(hp.sweeps);
  j.at("burn_in").get_to(hp.burn_in);
  j.at("inner_iters").get_to(hp.inner_iters);
  j.at("pmf_only_fallback").get_to(hp.pmf_only_fallback);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"algo", c.algo},           {"hp", c.hp},
           {"pa_c", c.pa_c},           {"pa_eps", c.pa_eps},
           {"sgd_eta", c.sgd_eta},     {"sgd_lam_u", c.sgd_lam_u},
           {"sgd_lam_v", c.sgd_lam_v}, {"init_std", c.init_std},
           {"lda_kappa", c.lda_kappa}, {"lda_tau0", c.lda_tau0},
           {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  j.at("algo").get_to(c.algo);
  j.at("hp").get_to(c.hp);
  j.at("pa_c").get_to(c.pa_c);
  j.at("pa_eps").get_to(c.pa_eps);
  j.at("sgd_eta").get_to(c.sgd_eta);
  j.at("sgd_lam_u").get_to(c.sgd_lam_u);
  j.at("sgd_lam_v").get_to(c.sgd_lam_v);
  j.at("init_std").get_to(c.init_std);
  j.at("lda_kappa").get_to(c.lda_kappa);
  j.at("lda_tau0").get_to(c.lda_tau0);
  j.at("seed").get_to(c.seed);
}

void ModelConfig::validate() const {
  if (std::find(algorithm_names().begin(), algorithm_names().end(), algo) == algorithm_names().end())
    throw std::invalid_argument("unknown algorithm '" + algo + "'");
  hp.validate();
  if (!(pa_c > 0.0)) throw std::invalid_argument("pa_c must be positive");
  if (pa_eps < 0.0) throw std::invalid_argument("pa_eps must be >= 0");
  if (!(sgd_eta > 0.0)) throw std::invalid_argument("sgd_eta must be positive");
  if (sgd_lam_u < 0.0 || sgd_lam_v < 0.0) throw std::invalid_argument("sgd regularizers must be >= 0");
  if (!(init_std >= 0.0)) throw std::invalid_argument("init_std must be >= 0");
  if (lda_kappa < 0.0 || lda_tau0 < 1.0) throw std::invalid_argument("need lda_kappa >= 0 and lda_tau0 >= 1");
}

std::unique_ptr<StreamModel> make_model(const ModelConfig& config, int vocab_size,
                                        int corpus_size) {
  config.validate();
  if (config.algo == "obctr") return std::make_unique<ObctrModel>(config, vocab_size);
  if (config.algo == "pa-i") return std::make_unique<PaModel>(config);
  if (config.algo == "sgd-pmf") return std::make_unique<SgdPmfModel>(config);
  if (config.algo == "online-lda") return std::make_unique<OnlineLdaModel>(config, vocab_size, corpus_size);
  if (config.algo == "octr") return std::make_unique<OctrModel>(config, vocab_size, corpus_size);
  throw std::invalid_argument("unknown algorithm '" + config.algo + "'");
}

// ---------------------------------------------------------------------------
// Topic snapshots

TopicSnapshot gibbs_snapshot(const TopicState& topics, double alpha) {
  TopicSnapshot s;
  s.K = topics.num_topics();
  s.D = topics.vocab_size();
  s.phi = topics.phi_matrix();
  auto phi = std::make_shared<const std::vector<double>>(s.phi);
  const int K = s.K;
  const int D = s.D;
  // Plain collapsed-LDA fold-in against a frozen phi; theta averaged over the
  // second half of the sweeps.
  s.fold_in = [phi, K, D, alpha](std::span<const std::int32_t> obs, std::uint64_t seed) {
    std::vector<double> theta(K, 0.0);
    if (obs.empty()) {
      std::fill(theta.begin(), theta.end(), 1.0 / K);
      return theta;
    }
    Rng rng(seed);
    std::vector<std::int32_t> z(obs.size());
    std::vector<std::int32_t> counts(K, 0);
    for (auto& k : z) {
      k = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(K));
      ++counts[k];
    }
    std::vector<double> p(K);
    const double denom = static_cast<double>(obs.size()) + K * alpha;
    int kept = 0;
    for (int sweep = 0; sweep < kFoldInSweeps; ++sweep) {
      for (std::size_t n = 0; n < obs.size(); ++n) {
        --counts[z[n]];
        double tot = 0.0;
        for (int k = 0; k < K; ++k) {
          p[k] = (alpha + counts[k]) * (*phi)[static_cast<std::size_t>(k) * D + obs[n]];
          tot += p[k];
        }
        for (auto& x : p) x /= tot;
        z[n] = sample_discrete(p, rng);
        ++counts[z[n]];
      }
      if (sweep >= kFoldInSweeps / 2) {
        for (int k = 0; k < K; ++k) theta[k] += (counts[k] + alpha) / denom;
        ++kept;
      }
    }
    for (auto& x : theta) x /= kept;
    return theta;
  };
  return s;
}

TopicSnapshot online_lda_snapshot(const OnlineLdaState& lda, double alpha) {
  TopicSnapshot s;
  s.K = lda.K;
  s.D = lda.D;
  s.phi.resize(lda.lambda.size());
  for (int k = 0; k < lda.K; ++k)
    for (int w = 0; w < lda.D; ++w) s.phi[static_cast<std::size_t>(k) * lda.D + w] = lda.expected_phi(k, w);
  auto state = std::make_shared<const OnlineLdaState>(lda);
  s.fold_in = [state, alpha](std::span<const std::int32_t> obs, std::uint64_t) {
    std::vector<double> theta(state->K, 1.0 / state->K);
    if (obs.empty()) return theta;
    const auto es = online_lda_estep(*state, obs, alpha);
    double sum = 0.0;
    for (double g : es.gamma) sum += g;
    for (int k = 0; k < state->K; ++k) theta[k] = es.gamma[k] / sum;
    return theta;
  };
  return s;
}

// ---------------------------------------------------------------------------
// OBCTR

ObctrModel::ObctrModel(const ModelConfig& c, int vocab_size)
    : StreamModel(c), engine_(c.hp, vocab_size, c.seed) {}

void ObctrModel::register_document(std::int64_t item, std::vector<std::int32_t> tokens) {
  engine_.register_document(item, std::move(tokens));
}

EventResult ObctrModel::process_event(const RatingEvent& ev) {
  auto res = engine_.process_event(ev);
  rejected_ = engine_.state().events_rejected;
  return res;
}

double ObctrModel::predict(std::int64_t user, std::int64_t item) const { return engine_.predict(user, item); }

std::optional<TopicSnapshot> ObctrModel::topic_snapshot() const {
  return gibbs_snapshot(engine_.state().topics, config_.hp.alpha);
}

namespace {

json factors_json(const std::vector<GaussianFactor>& fs) {
  json arr = json::array();
  for (const auto& f : fs) arr.push_back(json{{"mean", f.mean}, {"var", f.var}});
  return arr;
}

std::vector<GaussianFactor> factors_from(const json& arr) {
  std::vector<GaussianFactor> out;
  for (const auto& e : arr) {
    GaussianFactor f{e.at("mean").get<std::vector<double>>(), e.at("var").get<std::vector<double>>()};
    f.validate();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

json ObctrModel::state_json() const {
  const auto& st = engine_.state();
  json docs = json::array();
  for (const auto& [id, d] : st.docs)
    docs.push_back(json{{"item", id}, {"tokens", d.tokens}, {"z", d.z}, {"zbar", d.zbar}});
  return json{{"rng_seed", st.rng_seed},
              {"users", factors_json(st.users)},
              {"items", factors_json(st.items)},
              {"docs", docs},
              {"vocab_size", st.topics.vocab_size()},
              {"word_topic_counts", st.topics.counts()},
              {"item_event_count", st.item_event_count},
              {"events_processed", st.events_processed},
              {"events_rejected", st.events_rejected}};
}

void ObctrModel::load_state_json(const json& j) {
  EngineState st;
  st.hp = config_.hp;
  st.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  st.users = factors_from(j.at("users"));
  st.items = factors_from(j.at("items"));
  for (const auto& e : j.at("docs")) {
    Document d;
    d.item_id = e.at("item").get<std::int64_t>();
    d.tokens = e.at("tokens").get<std::vector<std::int32_t>>();
    d.z = e.at("z").get<std::vector<std::int32_t>>();
    d.recount(st.hp.K);
    d.zbar = e.at("zbar").get<std::vector<double>>();
    st.docs.emplace(d.item_id, std::move(d));
  }
  st.topics = TopicState(st.hp.K, j.at("vocab_size").get<int>(), st.hp.beta);
  st.topics.assign_counts(j.at("word_topic_counts").get<std::vector<std::int64_t>>());
  st.item_event_count = j.at("item_event_count").get<std::vector<std::uint64_t>>();
  st.events_processed = j.at("events_processed").get<std::uint64_t>();
  st.events_rejected = j.at("events_rejected").get<std::uint64_t>();
  engine_ = ObctrEngine(std::move(st));
  rejected_ = engine_.state().events_rejected;
}

std::unique_ptr<StreamModel> ObctrModel::clone() const { return std::make_unique<ObctrModel>(*this); }

// ---------------------------------------------------------------------------
// Point-factor tables

PointFactor PointFactorTable::initial(std::int64_t id) const {
  auto rng = make_rng(seed_, {side_, static_cast<std::uint64_t>(id)});
  return random_point_factor(K_, init_std_, rng);
}

PointFactor& PointFactorTable::at(std::int64_t id) {
  if (id < 0) throw std::invalid_argument("negative id");
  if (static_cast<std::size_t>(id) >= rows_.size()) rows_.resize(id + 1);
  auto& row = rows_[id];
  if (row.vec.empty()) row = initial(id);
  return row;
}

PointFactor PointFactorTable::peek(std::int64_t id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < rows_.size() && !rows_[id].vec.empty()) return rows_[id];
  return initial(id);
}

json PointFactorTable::to_json() const {
  json arr = json::array();
  for (const auto& r : rows_) arr.push_back(r.vec);
  return arr;
}

void PointFactorTable::load(const json& j) {
  rows_.clear();
  for (const auto& e : j) {
    PointFactor f{e.get<std::vector<double>>()};
    if (!f.vec.empty() && static_cast<int>(f.vec.size()) != K_)
      throw std::invalid_argument("checkpoint: point factor length != K");
    rows_.push_back(std::move(f));
  }
}

namespace {
constexpr std::uint64_t kUserSide = 0x05e1;
constexpr std::uint64_t kItemSide = 0x17e3;
}  // namespace

// ---------------------------------------------------------------------------
// PA-I

PaModel::PaModel(const ModelConfig& c)
    : StreamModel(c),
      users_(c.hp.K, c.init_std, c.seed, kUserSide),
      items_(c.hp.K, c.init_std, c.seed, kItemSide) {}

EventResult PaModel::process_event(const RatingEvent& ev) {
  auto& u = users_.at(ev.user_id);
  auto& v = items_.at(ev.item_id);
  const double pred = dot(u.vec, v.vec);
  auto [un, vn] = pa_i_update(u, v, ev.rating, config_.pa_c, config_.pa_eps);
  u = std::move(un);
  v = std::move(vn);
  return {pred, true};
}

double PaModel::predict(std::int64_t user, std::int64_t item) const {
  return dot(users_.peek(user).vec, items_.peek(item).vec);
}

json PaModel::state_json() const { return json{{"users", users_.to_json()}, {"items", items_.to_json()}}; }

void PaModel::load_state_json(const json& j) {
  users_.load(j.at("users"));
  items_.load(j.at("items"));
}

std::unique_ptr<StreamModel> PaModel::clone() const { return std::make_unique<PaModel>(*this); }

// ---------------------------------------------------------------------------
// SGD-PMF

SgdPmfModel::SgdPmfModel(const ModelConfig& c)
    : StreamModel(c),
      users_(c.hp.K, c.init_std, c.seed, kUserSide),
      items_(c.hp.K, c.init_std, c.seed, kItemSide) {}

EventResult SgdPmfModel::process_event(const RatingEvent& ev) {
  auto& u = users_.at(ev.user_id);
  auto& v = items_.at(ev.item_id);
  const double pred = dot(u.vec, v.vec);
  auto [un, vn] = sgd_pmf_update(u, v, ev.rating, config_.sgd_eta, config_.sgd_lam_u, config_.sgd_lam_v);
  u = std::move(un);
  v = std::move(vn);
  return {pred, true};
}

double SgdPmfModel::predict(std::int64_t user, std::int64_t item) const {
  return dot(users_.peek(user).vec, items_.peek(item).vec);
}

json SgdPmfModel::state_json() const { return json{{"users", users_.to_json()}, {"items", items_.to_json()}}; }

void SgdPmfModel::load_state_json(const json& j) {
  users_.load(j.at("users"));
  items_.load(j.at("items"));
}

std::unique_ptr<StreamModel> SgdPmfModel::clone() const { return std::make_unique<SgdPmfModel>(*this); }

// ---------------------------------------------------------------------------
// Online LDA

namespace {

json lda_json(const OnlineLdaState& s) {
  return json{{"K", s.K},         {"D", s.D},         {"lambda", s.lambda}, {"t", s.t},
              {"kappa", s.kappa}, {"tau0", s.tau0},   {"rho_t", s.rho_t},   {"corpus_size", s.corpus_size}};
}

OnlineLdaState lda_from(const json& j) {
  OnlineLdaState s;
  j.at("K").get_to(s.K);
  j.at("D").get_to(s.D);
  j.at("lambda").get_to(s.lambda);
  j.at("t").get_to(s.t);
  j.at("kappa").get_to(s.kappa);
  j.at("tau0").get_to(s.tau0);
  j.at("rho_t").get_to(s.rho_t);
  j.at("corpus_size").get_to(s.corpus_size);
  s.lambda_sum.assign(s.K, 0.0);
  if (s.lambda.size() != static_cast<std::size_t>(s.K) * s.D) throw std::invalid_argument("checkpoint: bad lambda size");
  for (int k = 0; k < s.K; ++k)
    for (int w = 0; w < s.D; ++w) s.lambda_sum[k] += s.lambda[static_cast<std::size_t>(k) * s.D + w];
  s.validate();
  return s;
}

json docs_json(const std::map<std::int64_t, std::vector<std::int32_t>>& docs) {
  json arr = json::array();
  for (const auto& [id, t] : docs) arr.push_back(json{{"item", id}, {"tokens", t}});
  return arr;
}

std::map<std::int64_t, std::vector<std::int32_t>> docs_from(const json& arr) {
  std::map<std::int64_t, std::vector<std::int32_t>> out;
  for (const auto& e : arr) out[e.at("item").get<std::int64_t>()] = e.at("tokens").get<std::vector<std::int32_t>>();
  return out;
}

void add_doc(std::map<std::int64_t, std::vector<std::int32_t>>& docs, std::int64_t item,
             std::vector<std::int32_t> tokens, int D) {
  if (tokens.empty()) throw std::invalid_argument("register_document: empty document");
  for (auto w : tokens)
    if (w < 0 || w >= D) throw std::invalid_argument("register_document: token id out of vocabulary range");
  if (!docs.emplace(item, std::move(tokens)).second)
    throw std::invalid_argument("register_document: item already has a document");
}

}  // namespace

OnlineLdaModel::OnlineLdaModel(const ModelConfig& c, int vocab_size, int corpus_size)
    : StreamModel(c),
      lda_(make_online_lda(c.hp.K, vocab_size, std::max(corpus_size, 1), c.lda_kappa, c.lda_tau0,
                           LambdaInit::kRandomGamma, c.seed)) {}

void OnlineLdaModel::register_document(std::int64_t item, std::vector<std::int32_t> tokens) {
  add_doc(docs_, item, std::move(tokens), lda_.D);
}

EventResult OnlineLdaModel::process_event(const RatingEvent& ev) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto it = docs_.find(ev.item_id);
  if (it == docs_.end()) {
    ++rejected_;
    return {nan, false};
  }
  online_lda_step(lda_, it->second, config_.hp);
  return {nan, true};
}

double OnlineLdaModel::predict(std::int64_t, std::int64_t) const { return std::numeric_limits<double>::quiet_NaN(); }

std::optional<TopicSnapshot> OnlineLdaModel::topic_snapshot() const {
  return online_lda_snapshot(lda_, config_.hp.alpha);
}

json OnlineLdaModel::state_json() const {
  return json{{"lda", lda_json(lda_)}, {"docs", docs_json(docs_)}, {"rejected", rejected_}};
}

void OnlineLdaModel::load_state_json(const json& j) {
  lda_ = lda_from(j.at("lda"));
  docs_ = docs_from(j.at("docs"));
  rejected_ = j.at("rejected").get<std::uint64_t>();
}

std::unique_ptr<StreamModel> OnlineLdaModel::clone() const { return std::make_unique<OnlineLdaModel>(*this); }

// ---------------------------------------------------------------------------
// OCTR

OctrModel::OctrModel(const ModelConfig& c, int vocab_size, int corpus_size)
    : StreamModel(c),
      lda_(make_online_lda(c.hp.K, vocab_size, std::max(corpus_size, 1), c.lda_kappa, c.lda_tau0,
                           LambdaInit::kRandomGamma, c.seed)),
      users_(c.hp.K, c.init_std, c.seed, kUserSide) {}

void OctrModel::register_document(std::int64_t item, std::vector<std::int32_t> tokens) {
  add_doc(docs_, item, std::move(tokens), lda_.D);
}

std::vector<double> OctrModel::theta_hat(std::int64_t item) const {
  auto it = theta_.find(item);
  if (it != theta_.end()) return it->second;
  // Before the first LDA step on an item: uniform proportions, or none at all
  // for text-less items.
  const bool has_doc = docs_.contains(item);
  return std::vector<double>(config_.hp.K, has_doc ? 1.0 / config_.hp.K : 0.0);
}

std::vector<double> OctrModel::item_vector(std::int64_t item) const {
  auto v = theta_hat(item);
  if (item >= 0 && static_cast<std::size_t>(item) < offsets_.size() && !offsets_[item].empty())
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += offsets_[item][k];
  return v;
}

double OctrModel::predict(std::int64_t user, std::int64_t item) const {
  return dot(users_.peek(user).vec, item_vector(item));
}

void OctrModel::observe_document(std::int64_t item) {
  auto it = docs_.find(item);
  if (it == docs_.end()) throw std::invalid_argument("observe_document: item has no document");
  const auto gamma = online_lda_step(lda_, it->second, config_.hp);
  double sum = 0.0;
  for (double g : gamma) sum += g;
  std::vector<double> theta(gamma.size());
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = gamma[k] / sum;
  theta_[item] = std::move(theta);
}

EventResult OctrModel::process_event(const RatingEvent& ev) {
  const bool has_doc = docs_.contains(ev.item_id);
  if (!has_doc && !config_.hp.pmf_only_fallback) {
    ++rejected_;
    return {predict(ev.user_id, ev.item_id), false};
  }
  const double pred = predict(ev.user_id, ev.item_id);
  if (has_doc) observe_document(ev.item_id);

  const int K = config_.hp.K;
  if (ev.item_id < 0) throw std::invalid_argument("negative item id");
  if (static_cast<std::size_t>(ev.item_id) >= offsets_.size()) offsets_.resize(ev.item_id + 1);
  auto& eps = offsets_[ev.item_id];
  if (eps.empty()) eps.assign(K, 0.0);
  auto& u = users_.at(ev.user_id);

  const auto theta = theta_hat(ev.item_id);
  std::vector<double> v(K);
  for (int k = 0; k < K; ++k) v[k] = theta[k] + eps[k];
  const double e = ev.rating - dot(u.vec, v);
  const double eta = config_.sgd_eta;
  for (int k = 0; k < K; ++k) {
    const double uk = u.vec[k];
    u.vec[k] = uk + eta * (e * v[k] - config_.sgd_lam_u * uk);
    eps[k] = eps[k] + eta * (e * uk - config_.sgd_lam_v * eps[k]);
  }
  return {pred, true};
}

std::optional<TopicSnapshot> OctrModel::topic_snapshot() const {
  return online_lda_snapshot(lda_, config_.hp.alpha);
}

json OctrModel::state_json() const {
  json theta = json::array();
  for (const auto& [id, t] : theta_) theta.push_back(json{{"item", id}, {"theta", t}});
  return json{{"lda", lda_json(lda_)}, {"docs", docs_json(docs_)},   {"theta", theta},
              {"users", users_.to_json()}, {"offsets", offsets_}, {"rejected", rejected_}};
}

void OctrModel::load_state_json(const json& j) {
  lda_ = lda_from(j.at("lda"));
  docs_ = docs_from(j.at("docs"));
  theta_.clear();
  for (const auto& e : j.at("theta")) theta_[e.at("item").get<std::int64_t>()] = e.at("theta").get<std::vector<double>>();
  users_.load(j.at("users"));
  offsets_ = j.at("offsets").get<std::vector<std::vector<double>>>();
  rejected_ = j.at("rejected").get<std::uint64_t>();
}

std::unique_ptr<StreamModel> OctrModel::clone() const { return std::make_unique<OctrModel>(*this); }

}  // namespace obctr
