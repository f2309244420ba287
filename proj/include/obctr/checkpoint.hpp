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

// Self-describing JSON checkpoint:
//   { "format": "obctr-checkpoint", "version": 1, "algorithm": ...,
//     "config": ModelConfig, "vocab_size", "corpus_size",
//     "id_maps": {"users": [...], "items": [...]}, "vocabulary": [...],
//     "corpus_options": {...}, "provenance": {...}, "state": model state }
// Doubles are written in shortest round-trip form, so reloading is bit-exact.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "obctr/ingestion.hpp"
#include "obctr/models.hpp"

namespace obctr {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::unique_ptr<StreamModel> model;
  IdMap users;
  IdMap items;
  std::vector<std::string> vocabulary;
  CorpusOptions corpus_options;
  int corpus_size = 0;
  nlohmann::json provenance;
};

nlohmann::json checkpoint_json(const StreamModel& model, const Dataset& ds,
                               const CorpusOptions& corpus_options,
                               const nlohmann::json& provenance);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& j);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace obctr
