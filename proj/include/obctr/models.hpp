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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obctr/baselines.hpp"
#include "obctr/core_model.hpp"
#include "obctr/engine.hpp"
#include "obctr/kernels.hpp"

namespace obctr {

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names{"obctr", "octr", "pa-i", "sgd-pmf", "online-lda"};
  return names;
}

struct ModelConfig {
  std::string algo = "obctr";
  HyperParams hp;
  double pa_c = 0.1;
  double pa_eps = 0.0;
  double sgd_eta = 0.01;
  double sgd_lam_u = 0.01;
  double sgd_lam_v = 0.01;
  double init_std = 0.1;
  double lda_kappa = 0.7;
  double lda_tau0 = 64.0;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const HyperParams& hp);
void from_json(const nlohmann::json& j, HyperParams& hp);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Read-only view of a model's topic side used for predictive likelihood.
struct TopicSnapshot {
  int K = 0;
  int D = 0;
  std::vector<double> phi;  // K x D
  kernels::FoldInFn fold_in;
};

inline constexpr int kFoldInSweeps = 20;

/// Common surface of the streaming algorithms. One writer at a time;
/// const members are safe to call concurrently.
class StreamModel {
 public:
  virtual ~StreamModel() = default;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const std::string& name() const { return config_.algo; }

  virtual void register_document(std::int64_t item, std::vector<std::int32_t> tokens) = 0;
  /// Prediction for the event made before updating, then the update itself.
  virtual EventResult process_event(const RatingEvent& ev) = 0;
  [[nodiscard]] virtual double predict(std::int64_t user, std::int64_t item) const = 0;
  [[nodiscard]] virtual bool predicts_ratings() const { return true; }
  [[nodiscard]] virtual std::optional<TopicSnapshot> topic_snapshot() const { return std::nullopt; }

  [[nodiscard]] virtual nlohmann::json state_json() const = 0;
  virtual void load_state_json(const nlohmann::json& j) = 0;
  [[nodiscard]] virtual std::unique_ptr<StreamModel> clone() const = 0;

  [[nodiscard]] std::uint64_t rejected_events() const { return rejected_; }

 protected:
  explicit StreamModel(ModelConfig c) : config_(std::move(c)) {}
  ModelConfig config_;
  std::uint64_t rejected_ = 0;
};

/// Builds a fresh model. vocab_size is D; corpus_size (number of documents)
/// scales the online-LDA sufficient statistics.
std::unique_ptr<StreamModel> make_model(const ModelConfig& config, int vocab_size,
                                        int corpus_size);

// Concrete models are exposed for tests that need their internals.

class ObctrModel final : public StreamModel {
 public:
  ObctrModel(const ModelConfig& c, int vocab_size);
  void register_document(std::int64_t item, std::vector<std::int32_t> tokens) override;
  EventResult process_event(const RatingEvent& ev) override;
  [[nodiscard]] double predict(std::int64_t user, std::int64_t item) const override;
  [[nodiscard]] std::optional<TopicSnapshot> topic_snapshot() const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state_json(const nlohmann::json& j) override;
  [[nodiscard]] std::unique_ptr<StreamModel> clone() const override;
  [[nodiscard]] const ObctrEngine& engine() const { return engine_; }

 private:
  ObctrEngine engine_;
};

/// Lazily initialized point factors keyed by dense id.
class PointFactorTable {
 public:
  PointFactorTable(int K, double init_std, std::uint64_t seed, std::uint64_t side)
      : K_(K), init_std_(init_std), seed_(seed), side_(side) {}
  PointFactor& at(std::int64_t id);
  /// Stored factor, or the deterministic initial draw for an unseen id.
  [[nodiscard]] PointFactor peek(std::int64_t id) const;
  [[nodiscard]] nlohmann::json to_json() const;
  void load(const nlohmann::json& j);

 private:
  [[nodiscard]] PointFactor initial(std::int64_t id) const;
  int K_;
  double init_std_;
  std::uint64_t seed_;
  std::uint64_t side_;
  std::vector<PointFactor> rows_;  // empty vec == not materialized
};

class PaModel final : public StreamModel {
 public:
  explicit PaModel(const ModelConfig& c);
  void register_document(std::int64_t, std::vector<std::int32_t>) override {}
  EventResult process_event(const RatingEvent& ev) override;
  [[nodiscard]] double predict(std::int64_t user, std::int64_t item) const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state_json(const nlohmann::json& j) override;
  [[nodiscard]] std::unique_ptr<StreamModel> clone() const override;

 private:
  PointFactorTable users_;
  PointFactorTable items_;
};

class SgdPmfModel final : public StreamModel {
 public:
  explicit SgdPmfModel(const ModelConfig& c);
  void register_document(std::int64_t, std::vector<std::int32_t>) override {}
  EventResult process_event(const RatingEvent& ev) override;
  [[nodiscard]] double predict(std::int64_t user, std::int64_t item) const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state_json(const nlohmann::json& j) override;
  [[nodiscard]] std::unique_ptr<StreamModel> clone() const override;

 private:
  PointFactorTable users_;
  PointFactorTable items_;
};

class OnlineLdaModel final : public StreamModel {
 public:
  OnlineLdaModel(const ModelConfig& c, int vocab_size, int corpus_size);
  void register_document(std::int64_t item, std::vector<std::int32_t> tokens) override;
  /// Runs one stochastic step on the event item's document; never predicts.
  EventResult process_event(const RatingEvent& ev) override;
  [[nodiscard]] double predict(std::int64_t, std::int64_t) const override;
  [[nodiscard]] bool predicts_ratings() const override { return false; }
  [[nodiscard]] std::optional<TopicSnapshot> topic_snapshot() const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state_json(const nlohmann::json& j) override;
  [[nodiscard]] std::unique_ptr<StreamModel> clone() const override;
  [[nodiscard]] const OnlineLdaState& lda() const { return lda_; }

 private:
  OnlineLdaState lda_;
  std::map<std::int64_t, std::vector<std::int32_t>> docs_;
};

/// Online LDA feeding topic proportions one way into SGD matrix
/// factorization with item vector v_j = theta_j + eps_j.
class OctrModel final : public StreamModel {
 public:
  OctrModel(const ModelConfig& c, int vocab_size, int corpus_size);
  void register_document(std::int64_t item, std::vector<std::int32_t> tokens) override;
  EventResult process_event(const RatingEvent& ev) override;
  /// LDA step only, no rating.
  void observe_document(std::int64_t item);
  [[nodiscard]] double predict(std::int64_t user, std::int64_t item) const override;
  [[nodiscard]] std::optional<TopicSnapshot> topic_snapshot() const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state_json(const nlohmann::json& j) override;
  [[nodiscard]] std::unique_ptr<StreamModel> clone() const override;
  [[nodiscard]] const OnlineLdaState& lda() const { return lda_; }
  [[nodiscard]] std::vector<double> item_vector(std::int64_t item) const;
  [[nodiscard]] PointFactor user_factor(std::int64_t user) const { return users_.peek(user); }

 private:
  [[nodiscard]] std::vector<double> theta_hat(std::int64_t item) const;
  OnlineLdaState lda_;
  std::map<std::int64_t, std::vector<std::int32_t>> docs_;
  std::map<std::int64_t, std::vector<double>> theta_;
  PointFactorTable users_;
  std::vector<std::vector<double>> offsets_;  // eps_j, zero until touched
};

TopicSnapshot online_lda_snapshot(const OnlineLdaState& lda, double alpha);
TopicSnapshot gibbs_snapshot(const TopicState& topics, double alpha);

}  // namespace obctr
