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

#include "obctr/checkpoint.hpp"

#include <fstream>

namespace obctr {

using nlohmann::json;

json checkpoint_json(const StreamModel& model, const Dataset& ds, const CorpusOptions& corpus_options,
                     const json& provenance) {
  return json{{"format", "obctr-checkpoint"},
              {"version", kCheckpointVersion},
              {"algorithm", model.name()},
              {"config", model.config()},
              {"vocab_size", ds.vocab_size()},
              {"corpus_size", ds.corpus_size()},
              {"id_maps", {{"users", ds.users.externals()}, {"items", ds.items.externals()}}},
              {"vocabulary", ds.vocabulary},
              {"corpus_options", corpus_options},
              {"provenance", provenance},
              {"state", model.state_json()}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string{}) != "obctr-checkpoint") throw CheckpointError("not an obctr checkpoint");
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  try {
    Checkpoint c;
    const auto config = j.at("config").get<ModelConfig>();
    if (config.algo != j.at("algorithm").get<std::string>()) throw CheckpointError("algorithm tag does not match config");
    c.corpus_size = j.at("corpus_size").get<int>();
    c.model = make_model(config, j.at("vocab_size").get<int>(), c.corpus_size);
    c.model->load_state_json(j.at("state"));
    c.users = IdMap::from_externals(j.at("id_maps").at("users").get<std::vector<std::int64_t>>());
    c.items = IdMap::from_externals(j.at("id_maps").at("items").get<std::vector<std::int64_t>>());
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    c.corpus_options = j.at("corpus_options").get<CorpusOptions>();
    c.provenance = j.value("provenance", json::object());
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace obctr
