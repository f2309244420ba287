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

#include "obctr/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "obctr/random.hpp"

namespace obctr {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words{
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
      "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
      "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
      "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
      "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
      "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
      "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
      "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
      "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
      "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
      "yourselves", "also", "may", "might", "must", "shall", "us", "upon", "yet", "however",
      "within", "without", "among", "around", "across", "s", "t", "don", "doesn", "didn", "isn",
      "wasn", "aren", "weren", "won", "ll", "re", "ve", "d", "m", "o", "y"};
  return words;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      parts.push_back(line.substr(pos));
      return parts;
    }
    parts.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Ratings

RatingsParse parse_ratings(std::istream& in, bool strict) {
  RatingsParse out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto f = split_on(line, "::");
    RatingEvent ev;
    const bool ok = f.size() == 4 && parse_number(f[0], ev.user_id) && parse_number(f[1], ev.item_id) &&
                    parse_number(f[2], ev.rating) && std::isfinite(ev.rating) &&
                    parse_number(f[3], ev.order_key);
    if (!ok) {
      if (strict) throw ParseError("malformed rating line", line_no);
      ++out.malformed;
      continue;
    }
    out.events.push_back(ev);
  }
  return out;
}

RatingsParse parse_ratings(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read ratings file " + path.string());
  return parse_ratings(in, strict);
}

void write_ratings(std::ostream& out, const std::vector<RatingEvent>& events) {
  for (const auto& e : events) {
    // Shortest round-trip form of the rating.
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), e.rating);
    out << e.user_id << "::" << e.item_id << "::" << std::string_view(buf, p - buf) << "::" << e.order_key
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Corpus

void to_json(json& j, const CorpusOptions& o) {
  j = json{{"min_df", o.min_df},
           {"max_vocab", o.max_vocab},
           {"remove_stopwords", o.remove_stopwords},
           {"min_token_length", o.min_token_length}};
}

void from_json(const json& j, CorpusOptions& o) {
  j.at("min_df").get_to(o.min_df);
  j.at("max_vocab").get_to(o.max_vocab);
  j.at("remove_stopwords").get_to(o.remove_stopwords);
  j.at("min_token_length").get_to(o.min_token_length);
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& [id, d] : docs) n += d.size();
  return n;
}

json Corpus::manifest() const {
  const json opts = options;
  std::ostringstream hash;
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : opts.dump()) h = (h ^ c) * 0x100000001b3ULL;
  hash << std::hex << std::setw(16) << std::setfill('0') << h;
  return json{{"format", "obctr-corpus"},
              {"version", kCorpusManifestVersion},
              {"options", opts},
              {"options_hash", hash.str()},
              {"vocab_size", vocab_size()},
              {"num_docs", docs.size()},
              {"num_tokens", num_tokens()},
              {"dropped_docs", dropped_docs},
              {"vocabulary", vocabulary}};
}

std::vector<std::string> tokenize(const std::string& text, const CorpusOptions& options) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (static_cast<int>(cur.size()) >= options.min_token_length &&
        !(options.remove_stopwords && stopwords().contains(cur)))
      out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c >= 0x80) {
      // Non-ASCII UTF-8 bytes are kept inside words.
      cur.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Corpus build_corpus(std::istream& tsv, const CorpusOptions& options) {
  if (options.min_df < 1 || options.max_vocab < 1) throw std::invalid_argument("corpus options: min_df and max_vocab must be >= 1");
  std::map<std::int64_t, std::vector<std::string>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(tsv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    std::int64_t id = 0;
    if (tab == std::string::npos || !parse_number(std::string_view(line).substr(0, tab), id))
      throw ParseError("malformed document line (expected item_id<TAB>text)", line_no);
    if (raw.contains(id)) throw ParseError("duplicate item_id " + std::to_string(id), line_no);
    raw.emplace(id, tokenize(line.substr(tab + 1), options));
  }

  // Document frequency and total term frequency.
  std::map<std::string, std::pair<int, std::int64_t>> stats;  // word -> (df, tf)
  for (const auto& [id, words] : raw) {
    std::set<std::string_view> seen;
    for (const auto& w : words) {
      auto& s = stats[w];
      ++s.second;
      if (seen.insert(w).second) ++s.first;
    }
  }
  const double n_docs = static_cast<double>(raw.size());
  struct Scored {
    double score;
    const std::string* word;
  };
  std::vector<Scored> cand;
  for (const auto& [w, s] : stats) {
    if (s.first < options.min_df) continue;
    cand.push_back({static_cast<double>(s.second) * std::log(n_docs / s.first), &w});
  }
  // Highest tf-idf first; lexicographic among equal scores.
  std::stable_sort(cand.begin(), cand.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (static_cast<int>(cand.size()) > options.max_vocab) cand.resize(options.max_vocab);

  Corpus corpus;
  corpus.options = options;
  for (const auto& c : cand) corpus.vocabulary.push_back(*c.word);
  std::sort(corpus.vocabulary.begin(), corpus.vocabulary.end());
  std::unordered_map<std::string, std::int32_t> index;
  for (std::size_t i = 0; i < corpus.vocabulary.size(); ++i) index.emplace(corpus.vocabulary[i], static_cast<std::int32_t>(i));

  for (const auto& [id, words] : raw) {
    std::vector<std::int32_t> toks;
    for (const auto& w : words)
      if (auto it = index.find(w); it != index.end()) toks.push_back(it->second);
    if (toks.empty()) {
      ++corpus.dropped_docs;
      continue;
    }
    corpus.docs.emplace(id, std::move(toks));
  }
  return corpus;
}

Corpus build_corpus(const std::filesystem::path& tsv, const CorpusOptions& options) {
  std::ifstream in(tsv);
  if (!in) throw std::runtime_error("cannot read documents file " + tsv.string());
  return build_corpus(in, options);
}

std::vector<std::int32_t> encode_with_vocabulary(const std::string& text,
                                                 const std::vector<std::string>& vocabulary,
                                                 const CorpusOptions& options) {
  std::vector<std::int32_t> out;
  for (const auto& w : tokenize(text, options)) {
    auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), w);
    if (it != vocabulary.end() && *it == w) out.push_back(static_cast<std::int32_t>(it - vocabulary.begin()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits and dataset assembly

StreamSplit split_stream(std::vector<RatingEvent> events, std::uint64_t seed) {
  if (events.size() < kMinSplitEvents)
    throw std::invalid_argument("split_stream: need at least " + std::to_string(kMinSplitEvents) + " events");
  // Fisher-Yates on raw 64-bit draws keeps the permutation identical across
  // standard library implementations.
  Rng rng = make_rng(seed, {0x5911});
  for (std::size_t i = events.size() - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(events[i], events[j]);
  }
  const std::size_t n = events.size();
  const std::size_t train_share = (9 * n + 5) / 10;
  const std::size_t n_valid = (train_share + 10) / 20;

  StreamSplit s;
  s.seed = seed;
  s.validation.assign(events.begin(), events.begin() + n_valid);
  s.train.assign(events.begin() + n_valid, events.begin() + train_share);
  s.test.assign(events.begin() + train_share, events.end());
  return s;
}

Dataset assemble_dataset(const std::vector<RatingEvent>& external_events, const Corpus& corpus) {
  Dataset ds;
  ds.vocabulary = corpus.vocabulary;
  for (const auto& [ext, toks] : corpus.docs) ds.docs.emplace(ds.items.intern(ext), toks);
  ds.events.reserve(external_events.size());
  for (const auto& e : external_events) {
    RatingEvent d = e;
    d.user_id = ds.users.intern(e.user_id);
    d.item_id = ds.items.intern(e.item_id);
    if (!ds.docs.contains(d.item_id)) ++ds.events_without_text;
    ds.events.push_back(d);
  }
  return ds;
}

std::vector<RatingEvent> reindex_events(const std::vector<RatingEvent>& external_events,
                                        const IdMap& users, const IdMap& items) {
  IdMap extra_users;
  IdMap extra_items;
  std::vector<RatingEvent> out;
  out.reserve(external_events.size());
  for (const auto& e : external_events) {
    RatingEvent d = e;
    d.user_id = users.find(e.user_id);
    if (d.user_id < 0) d.user_id = static_cast<std::int64_t>(users.size()) + extra_users.intern(e.user_id);
    d.item_id = items.find(e.item_id);
    if (d.item_id < 0) d.item_id = static_cast<std::int64_t>(items.size()) + extra_items.intern(e.item_id);
    out.push_back(d);
  }
  return out;
}

}  // namespace obctr
