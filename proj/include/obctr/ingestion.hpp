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

// Input formats:
//   ratings   MovieLens "user::item::rating::timestamp", one per line
//   documents UTF-8 TSV "item_id<TAB>text", one item per line
//   manifest  JSON describing the vocabulary and preprocessing options

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "obctr/core_model.hpp"

namespace obctr {

inline constexpr int kCorpusManifestVersion = 1;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " at line " + std::to_string(line)), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct RatingsParse {
  std::vector<RatingEvent> events;  // external ids, file order
  std::size_t malformed = 0;
};

RatingsParse parse_ratings(std::istream& in, bool strict = false);
RatingsParse parse_ratings(const std::filesystem::path& path, bool strict = false);
void write_ratings(std::ostream& out, const std::vector<RatingEvent>& events);

struct CorpusOptions {
  int min_df = 1;
  int max_vocab = 8000;
  bool remove_stopwords = true;
  int min_token_length = 2;
};

void to_json(nlohmann::json& j, const CorpusOptions& o);
void from_json(const nlohmann::json& j, CorpusOptions& o);

struct Corpus {
  std::vector<std::string> vocabulary;                  // id -> word, ids dense in [0, D)
  std::map<std::int64_t, std::vector<std::int32_t>> docs;  // external item id -> tokens
  std::size_t dropped_docs = 0;
  CorpusOptions options;

  [[nodiscard]] int vocab_size() const { return static_cast<int>(vocabulary.size()); }
  [[nodiscard]] std::size_t num_tokens() const;
  [[nodiscard]] nlohmann::json manifest() const;
};

/// Lowercased alphanumeric runs, punctuation as separators, stopwords and
/// short tokens removed per options.
std::vector<std::string> tokenize(const std::string& text, const CorpusOptions& options);

Corpus build_corpus(std::istream& tsv, const CorpusOptions& options);
Corpus build_corpus(const std::filesystem::path& tsv, const CorpusOptions& options);

/// Maps text onto an existing vocabulary; unknown words are dropped.
std::vector<std::int32_t> encode_with_vocabulary(const std::string& text,
                                                 const std::vector<std::string>& vocabulary,
                                                 const CorpusOptions& options);

struct StreamSplit {
  std::vector<RatingEvent> train;       // used for learning
  std::vector<RatingEvent> validation;  // 5% of the 90% training share
  std::vector<RatingEvent> test;        // 10%
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinSplitEvents = 20;

/// Deterministic shuffle, then 90/10 train/test with 5% of the training share
/// held out as validation. The three parts are disjoint.
StreamSplit split_stream(std::vector<RatingEvent> events, std::uint64_t seed);

/// Ratings and documents joined on dense ids.
struct Dataset {
  IdMap users;
  IdMap items;
  std::vector<std::string> vocabulary;
  std::map<std::int64_t, std::vector<std::int32_t>> docs;  // dense item id -> tokens
  std::vector<RatingEvent> events;                         // dense ids
  std::size_t events_without_text = 0;
  std::vector<std::vector<std::int32_t>> heldout_docs;

  [[nodiscard]] int vocab_size() const { return static_cast<int>(vocabulary.size()); }
  [[nodiscard]] int corpus_size() const { return static_cast<int>(docs.size()); }
};

/// Items with documents are indexed first in ascending external id order,
/// then users and remaining items in stream order.
Dataset assemble_dataset(const std::vector<RatingEvent>& external_events, const Corpus& corpus);

/// Re-indexes events with existing id maps; unknown ids get fresh dense ids
/// past the end so they hit the model's prior.
std::vector<RatingEvent> reindex_events(const std::vector<RatingEvent>& external_events,
                                        const IdMap& users, const IdMap& items);

}  // namespace obctr
