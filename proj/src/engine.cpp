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

#include "obctr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace obctr {

namespace {

void check_factor_dims(const GaussianFactor& f, int K, const char* who) {
  if (static_cast<int>(f.mean.size()) != K || static_cast<int>(f.var.size()) != K)
    throw std::invalid_argument(std::string(who) + ": factor length != K");
  for (double s : f.var)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument(std::string(who) + ": non-positive prior variance");
}

double floored(double x) { return std::max(x, kNumericFloor); }

}  // namespace

std::vector<double> gibbs_conditional_excluding(std::span<const std::int32_t> counts_excl,
                                                std::size_t n_tokens, int word,
                                                const GaussianFactor& v,
                                                const TopicState& topics,
                                                const HyperParams& hp) {
  const int K = hp.K;
  if (n_tokens == 0) throw std::invalid_argument("gibbs_conditional: empty document");
  if (word < 0 || word >= topics.vocab_size())
    throw std::invalid_argument("gibbs_conditional: token id out of vocabulary range");
  if (static_cast<int>(counts_excl.size()) != K || static_cast<int>(v.mean.size()) != K)
    throw std::invalid_argument("gibbs_conditional: length != K");

  const double n = static_cast<double>(n_tokens);
  const double tether = 1.0 / (2.0 * hp.sigma_eps2 * n);
  std::vector<double> logw(K);
  for (int k = 0; k < K; ++k) {
    const double c = counts_excl[k];
    logw[k] = std::log(hp.alpha + c) + topics.log_phi(k, word) +
              tether * (2.0 * v.mean[k] - (1.0 + 2.0 * c) / n);
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (auto& x : logw) {
    x = std::exp(x - mx);
    total += x;
  }
  for (auto& x : logw) x /= total;
  return logw;
}

std::vector<double> gibbs_conditional(const Document& doc, std::size_t n, const GaussianFactor& v,
                                      const TopicState& topics, const HyperParams& hp) {
  if (doc.length() == 0) throw std::invalid_argument("gibbs_conditional: empty document");
  if (n >= doc.length()) throw std::out_of_range("gibbs_conditional: position out of range");
  std::vector<std::int32_t> counts(doc.topic_counts.begin(), doc.topic_counts.end());
  --counts.at(doc.z[n]);
  return gibbs_conditional_excluding(counts, doc.length(), doc.tokens[n], v, topics, hp);
}

int sample_discrete(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // u landed in the rounding gap above the last partial sum.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return static_cast<int>(k);
  return static_cast<int>(probs.size()) - 1;
}

void gibbs_sweep(Document& doc, const GaussianFactor& v, const TopicState& topics,
                 const HyperParams& hp, Rng& rng) {
  if (doc.length() == 0) throw std::invalid_argument("gibbs_sweep: empty document");
  auto& counts = doc.topic_counts;
  for (std::size_t n = 0; n < doc.length(); ++n) {
    --counts[doc.z[n]];
    const auto p = gibbs_conditional_excluding(counts, doc.length(), doc.tokens[n], v, topics, hp);
    const int k = sample_discrete(p, rng);
    doc.z[n] = k;
    ++counts[k];
  }
  doc.zbar = doc.frequencies();
}

std::vector<double> estimate_zbar(std::span<const std::vector<double>> frequencies, int burn_in) {
  if (burn_in < 0 || frequencies.size() <= static_cast<std::size_t>(burn_in))
    throw std::invalid_argument("estimate_zbar: need more sweeps than burn-in");
  const std::size_t K = frequencies.front().size();
  std::vector<double> out(K, 0.0);
  for (std::size_t t = burn_in; t < frequencies.size(); ++t) {
    if (frequencies[t].size() != K) throw std::invalid_argument("estimate_zbar: ragged samples");
    for (std::size_t k = 0; k < K; ++k) out[k] += frequencies[t][k];
  }
  const double kept = static_cast<double>(frequencies.size() - burn_in);
  for (auto& x : out) x /= kept;
  return out;
}

GaussianFactor update_user(const GaussianFactor& u_prior, const GaussianFactor& v, double r,
                           const HyperParams& hp) {
  const int K = hp.K;
  check_factor_dims(u_prior, K, "update_user");
  if (static_cast<int>(v.mean.size()) != K) throw std::invalid_argument("update_user: v length != K");

  const auto& m = u_prior.mean;
  const auto& s = u_prior.var;
  const auto& mv = v.mean;

  // sigma_r^2 + m_v^T Sigma m_v with diagonal Sigma.
  double denom = hp.sigma_r2;
  for (int k = 0; k < K; ++k) denom += mv[k] * s[k] * mv[k];
  const double innovation = (r - dot(mv, m)) / denom;

  GaussianFactor out;
  out.mean.resize(K);
  out.var.resize(K);
  for (int k = 0; k < K; ++k) {
    const double sm = s[k] * mv[k];
    out.mean[k] = m[k] + innovation * sm;
    // Diagonal of (Sigma^-1 + m_v m_v^T / sigma_r^2)^-1 via Sherman-Morrison.
    out.var[k] = floored(s[k] - sm * sm / denom);
  }
  return out;
}

GaussianFactor update_item(const GaussianFactor& v_prior, const GaussianFactor& u,
                           std::span<const double> zbar, double r, const HyperParams& hp) {
  const int K = hp.K;
  check_factor_dims(v_prior, K, "update_item");
  if (static_cast<int>(u.mean.size()) != K) throw std::invalid_argument("update_item: u length != K");
  if (static_cast<int>(zbar.size()) != K) throw std::invalid_argument("update_item: zbar length != K");

  const auto& m = v_prior.mean;
  const auto& s = v_prior.var;
  const auto& mu = u.mean;
  const double inv_eps = 1.0 / hp.sigma_eps2;
  const double inv_r = 1.0 / hp.sigma_r2;

  // Sigma_mix = (Sigma^-1 + I / sigma_eps^2)^-1, diagonal.
  std::vector<double> mix(K);
  // a = Sigma_mix (Sigma^-1 m + zbar / sigma_eps^2)
  std::vector<double> a(K);
  for (int k = 0; k < K; ++k) {
    mix[k] = 1.0 / (1.0 / s[k] + inv_eps);
    a[k] = mix[k] * (m[k] / s[k] + zbar[k] / hp.sigma_eps2);
  }
  double u_mix_u = 0.0;
  for (int k = 0; k < K; ++k) u_mix_u += mu[k] * mix[k] * mu[k];

  // m* = a - Sigma_mix m_u / sigma_r^2 * (m_u^T a - r) / (1 + m_u^T Sigma_mix m_u / sigma_r^2)
  const double scale = (dot(mu, a) - r) / (1.0 + u_mix_u * inv_r);
  GaussianFactor out;
  out.mean.resize(K);
  out.var.resize(K);
  const double denom = hp.sigma_r2 + u_mix_u;
  for (int k = 0; k < K; ++k) {
    out.mean[k] = a[k] - mix[k] * inv_r * mu[k] * scale;
    const double sm = mix[k] * mu[k];
    out.var[k] = floored(mix[k] - sm * sm / denom);
  }
  return out;
}

std::vector<double> topic_proportions(std::span<const std::int32_t> topic_counts, double alpha) {
  const double K = static_cast<double>(topic_counts.size());
  double n = 0.0;
  for (auto c : topic_counts) n += c;
  std::vector<double> theta(topic_counts.size());
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = (topic_counts[k] + alpha) / (n + K * alpha);
  return theta;
}

std::vector<double> update_topics(TopicState& state, const Document& doc,
                                  std::span<const std::int32_t> previous_z, const HyperParams& hp) {
  if (previous_z.size() != doc.length())
    throw std::invalid_argument("update_topics: previous assignment length mismatch");
  for (std::size_t n = 0; n < doc.length(); ++n) {
    if (previous_z[n] == doc.z[n]) continue;
    state.add(previous_z[n], doc.tokens[n], -1);
    state.add(doc.z[n], doc.tokens[n], +1);
  }
  return topic_proportions(doc.topic_counts, hp.alpha);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kInitStream = 0x1f17;
constexpr std::uint64_t kEventStream = 0xe7e7;
}  // namespace

ObctrEngine::ObctrEngine(HyperParams hp, int vocab_size, std::uint64_t seed) {
  hp.validate();
  state_.hp = hp;
  state_.rng_seed = seed;
  state_.topics = TopicState(hp.K, vocab_size, hp.beta);
}

ObctrEngine::ObctrEngine(EngineState state) : state_(std::move(state)) {
  state_.hp.validate();
  check_consistency();
}

bool ObctrEngine::has_document(std::int64_t item) const { return state_.docs.contains(item); }

void ObctrEngine::register_document(std::int64_t item, std::vector<std::int32_t> tokens) {
  if (tokens.empty()) throw std::invalid_argument("register_document: empty document");
  if (has_document(item)) throw std::invalid_argument("register_document: item already has a document");
  const int K = state_.hp.K;
  const int D = state_.topics.vocab_size();
  for (auto w : tokens)
    if (w < 0 || w >= D) throw std::invalid_argument("register_document: token id out of vocabulary range");

  Document doc;
  doc.item_id = item;
  doc.tokens = std::move(tokens);
  doc.z.resize(doc.tokens.size());
  auto rng = make_rng(state_.rng_seed, {kInitStream, static_cast<std::uint64_t>(item)});
  for (auto& k : doc.z) k = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(K));
  doc.recount(K);
  for (std::size_t n = 0; n < doc.length(); ++n) state_.topics.add(doc.z[n], doc.tokens[n], +1);
  state_.docs.emplace(item, std::move(doc));
}

GaussianFactor& ObctrEngine::user(std::int64_t id) {
  if (id < 0) throw std::invalid_argument("negative user id");
  auto& users = state_.users;
  if (static_cast<std::size_t>(id) >= users.size())
    users.resize(id + 1, init_user_factor(state_.hp));
  return users[id];
}

GaussianFactor& ObctrEngine::item(std::int64_t id) {
  if (id < 0) throw std::invalid_argument("negative item id");
  auto& items = state_.items;
  if (static_cast<std::size_t>(id) >= items.size()) {
    items.resize(id + 1, init_item_factor(state_.hp));
    state_.item_event_count.resize(id + 1, 0);
  }
  return items[id];
}

EventResult ObctrEngine::process_event(const RatingEvent& ev) {
  if (!std::isfinite(ev.rating)) throw std::invalid_argument("process_event: non-finite rating");
  const auto& hp = state_.hp;
  auto doc_it = state_.docs.find(ev.item_id);
  const bool has_doc = doc_it != state_.docs.end();
  if (!has_doc && !hp.pmf_only_fallback) {
    ++state_.events_rejected;
    return {predict(ev.user_id, ev.item_id), false};
  }

  GaussianFactor& u = user(ev.user_id);
  GaussianFactor& v = item(ev.item_id);
  EventResult result{dot(u.mean, v.mean), true};

  const GaussianFactor u_prior = u;
  const GaussianFactor v_prior = v;
  auto& counter = state_.item_event_count[ev.item_id];

  if (has_doc) {
    Document& doc = doc_it->second;
    auto rng = make_rng(state_.rng_seed,
                        {kEventStream, static_cast<std::uint64_t>(ev.item_id), counter});
    const std::vector<std::int32_t> previous_z = doc.z;
    std::vector<std::vector<double>> freq;
    freq.reserve(hp.sweeps);
    for (int s = 0; s < hp.sweeps; ++s) {
      gibbs_sweep(doc, v_prior, state_.topics, hp, rng);
      freq.push_back(doc.frequencies());
    }
    const auto zbar = estimate_zbar(freq, hp.burn_in);

    GaussianFactor u_new = u_prior;
    GaussianFactor v_new = v_prior;
    for (int it = 0; it < hp.inner_iters; ++it) {
      u_new = update_user(u_prior, v_new, ev.rating, hp);
      v_new = update_item(v_prior, u_new, zbar, ev.rating, hp);
    }
    u = std::move(u_new);
    v = std::move(v_new);

    update_topics(state_.topics, doc, previous_z, hp);
    doc.zbar = zbar;
  } else {
    GaussianFactor u_new = u_prior;
    GaussianFactor v_new = v_prior;
    for (int it = 0; it < hp.inner_iters; ++it) {
      u_new = update_user(u_prior, v_new, ev.rating, hp);
      v_new = update_user(v_prior, u_new, ev.rating, hp);
    }
    u = std::move(u_new);
    v = std::move(v_new);
  }
  ++counter;
  ++state_.events_processed;
  return result;
}

double ObctrEngine::predict(std::int64_t user, std::int64_t item) const {
  const auto& users = state_.users;
  const auto& items = state_.items;
  if (user < 0 || item < 0 || static_cast<std::size_t>(user) >= users.size() ||
      static_cast<std::size_t>(item) >= items.size())
    return 0.0;  // an unseen side has prior mean zero
  return dot(users[user].mean, items[item].mean);
}

std::vector<double> ObctrEngine::theta(std::int64_t item) const {
  auto it = state_.docs.find(item);
  if (it == state_.docs.end()) return std::vector<double>(state_.hp.K, 1.0 / state_.hp.K);
  return topic_proportions(it->second.topic_counts, state_.hp.alpha);
}

void ObctrEngine::check_consistency() const {
  const auto& t = state_.topics;
  std::vector<std::int64_t> agg(static_cast<std::size_t>(t.num_topics()) * t.vocab_size(), 0);
  for (const auto& [id, doc] : state_.docs) {
    doc.validate(state_.hp.K, t.vocab_size());
    for (std::size_t n = 0; n < doc.length(); ++n)
      ++agg[static_cast<std::size_t>(doc.z[n]) * t.vocab_size() + doc.tokens[n]];
  }
  if (!std::equal(agg.begin(), agg.end(), t.counts().begin()))
    throw std::logic_error("EngineState: global counts differ from per-document aggregate");
  t.validate();
}

}  // namespace obctr
