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


#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "obctr/ingestion.hpp"

using namespace obctr;

namespace {

std::vector<RatingEvent> numbered_events(int n) {
  std::vector<RatingEvent> ev;
  for (int i = 0; i < n; ++i) ev.push_back({i % 37, i % 11, 0.5 * (i % 10), i});
  return ev;
}

bool event_less(const RatingEvent& a, const RatingEvent& b) { return a.order_key < b.order_key; }

}  // namespace

// ---------------------------------------------------------------------------
// Ratings

TEST_CASE("rating line maps field by field") {
  std::istringstream in("1::122::5::838985046\n");
  const auto p = parse_ratings(in);
  REQUIRE(p.events.size() == 1);
  CHECK(p.events[0].user_id == 1);
  CHECK(p.events[0].item_id == 122);
  CHECK(p.events[0].rating == 5.0);
  CHECK(p.events[0].order_key == 838985046);
  CHECK(p.malformed == 0);
}

TEST_CASE("empty ratings input") {
  std::istringstream in("");
  CHECK(parse_ratings(in).events.empty());
  std::istringstream blank("\n\n");
  CHECK(parse_ratings(blank, true).events.empty());
}

TEST_CASE("strict parse reports the failing line") {
  const std::string text = "1::122::5::838985046\n1::185::4.5::838983525\n1::122::abc::0\n";
  std::istringstream strict(text);
  try {
    parse_ratings(strict, true);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream lenient(text);
  const auto p = parse_ratings(lenient);
  CHECK(p.events.size() == 2);
  CHECK(p.malformed == 1);
}

TEST_CASE("malformed ratings are counted and skipped") {
  std::istringstream in("1::2::3\n1::2::3::4::5\n1::2::nan::4\n1::2::inf::4\nx::2::3::4\n1::2::3.5::4\r\n");
  const auto p = parse_ratings(in);
  CHECK(p.malformed == 5);
  REQUIRE(p.events.size() == 1);
  CHECK(p.events[0].rating == 3.5);
  CHECK_THROWS(parse_ratings(std::filesystem::path("/nonexistent/ratings.dat")));
}

TEST_CASE("ratings round-trip through the writer") {
  const std::vector<RatingEvent> ev{{3, 4, 0.1 + 0.2, 7}, {-1, 9, -2.5e-7, 8}};
  std::ostringstream out;
  write_ratings(out, ev);
  std::istringstream in(out.str());
  CHECK(parse_ratings(in, true).events == ev);
}

// ---------------------------------------------------------------------------
// Corpus

TEST_CASE("tokenizer") {
  CorpusOptions o;
  CHECK(tokenize("The Matrix: a hacker's WAR!", o) == std::vector<std::string>{"matrix", "hacker", "war"});
  o.remove_stopwords = false;
  o.min_token_length = 1;
  CHECK(tokenize("The a-b", o) == std::vector<std::string>{"the", "a", "b"});
  CHECK(tokenize("caf\xc3\xa9 noir", o) == std::vector<std::string>{"caf\xc3\xa9", "noir"});
}

TEST_CASE("two documents sharing every word") {
  std::istringstream in("1\tspace pirate rebellion\n2\trebellion pirate space space\n");
  const auto c = build_corpus(in, CorpusOptions{});
  CHECK(c.vocab_size() == 3);
  CHECK(c.vocabulary == std::vector<std::string>{"pirate", "rebellion", "space"});
  CHECK(c.docs.at(2) == std::vector<std::int32_t>{1, 0, 2, 2});
}

TEST_CASE("stopword-only document is dropped") {
  std::istringstream in("1\tthe and of it\n2\tdragon castle\n");
  const auto c = build_corpus(in, CorpusOptions{});
  CHECK(c.dropped_docs == 1);
  CHECK(c.docs.size() == 1);
  CHECK_FALSE(c.docs.contains(1));
}

TEST_CASE("document frequency threshold") {
  std::istringstream in("1\tdragon castle knight\n2\tdragon castle\n3\tcastle wizard\n");
  CorpusOptions o;
  o.min_df = 2;
  const auto c = build_corpus(in, o);
  CHECK(c.vocabulary == std::vector<std::string>{"castle", "dragon"});
  CHECK(c.docs.at(3) == std::vector<std::int32_t>{0});
}

TEST_CASE("vocabulary cap keeps the highest tf-idf words with lexicographic ties") {
  std::istringstream in("1\tzebra apple shared\n2\tmango shared\n3\tshared kiwi kiwi\n");
  CorpusOptions o;
  o.max_vocab = 2;
  const auto c = build_corpus(in, o);
  // kiwi has tf 2; apple, mango and zebra tie at tf 1, apple wins the tie.
  CHECK(c.vocabulary == std::vector<std::string>{"apple", "kiwi"});
  CHECK(c.dropped_docs == 1);  // doc 2 keeps nothing
}

TEST_CASE("corpus errors") {
  std::istringstream dup("1\tone word\n1\tanother word\n");
  CHECK_THROWS_AS(build_corpus(dup, CorpusOptions{}), ParseError);
  std::istringstream notab("1 no tab here\n");
  CHECK_THROWS_AS(build_corpus(notab, CorpusOptions{}), ParseError);
  CHECK_THROWS(build_corpus(std::filesystem::path("/nonexistent/docs.tsv"), CorpusOptions{}));
}

TEST_CASE("corpus building is deterministic") {
  const std::string text = "5\tblue river stone\n3\triver song\n9\tstone stone blue sky\n";
  std::istringstream a(text), b(text);
  const auto ca = build_corpus(a, CorpusOptions{});
  const auto cb = build_corpus(b, CorpusOptions{});
  CHECK(ca.vocabulary == cb.vocabulary);
  CHECK(ca.docs == cb.docs);
  CHECK(ca.manifest().dump() == cb.manifest().dump());
  CHECK(ca.manifest().at("version") == kCorpusManifestVersion);
  CHECK(ca.manifest().at("num_tokens") == ca.num_tokens());
  CorpusOptions other;
  other.min_df = 2;
  std::istringstream c(text);
  CHECK(build_corpus(c, other).manifest().at("options_hash") != ca.manifest().at("options_hash"));
}

TEST_CASE("encoding new text against a vocabulary") {
  const std::vector<std::string> vocab{"blue", "river", "stone"};
  CHECK(encode_with_vocabulary("The blue unknown RIVER", vocab, CorpusOptions{}) ==
        std::vector<std::int32_t>{0, 1});
}

// ---------------------------------------------------------------------------
// Splits

TEST_CASE("split proportions for 1000 events") {
  const auto s = split_stream(numbered_events(1000), 1);
  CHECK(s.train.size() + s.validation.size() == 900);
  CHECK(s.validation.size() == 45);
  CHECK(s.test.size() == 100);
}

TEST_CASE("split proportions stay within one event") {
  for (int n : {20, 21, 99, 101, 777, 1234}) {
    const auto s = split_stream(numbered_events(n), 3);
    const double share = 0.9 * n;
    CHECK(std::abs(static_cast<double>(s.train.size() + s.validation.size()) - share) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.validation.size()) - 0.05 * (s.train.size() + s.validation.size())) <= 1.0);
  }
}

TEST_CASE("split is deterministic and a partition") {
  const auto ev = numbered_events(500);
  const auto a = split_stream(ev, 42);
  const auto b = split_stream(ev, 42);
  const auto c = split_stream(ev, 43);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);

  std::vector<RatingEvent> all = a.train;
  all.insert(all.end(), a.validation.begin(), a.validation.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end(), event_less);
  CHECK(all == ev);
  CHECK_THROWS_AS(split_stream(numbered_events(19), 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Dataset assembly

TEST_CASE("dataset joins ratings and documents on dense ids") {
  Corpus c;
  c.vocabulary = {"a1", "b2"};
  c.docs = {{50, {0, 1}}, {10, {1}}};
  const std::vector<RatingEvent> ev{{7, 99, 1.0, 0}, {8, 50, 2.0, 1}, {7, 10, 3.0, 2}};
  const auto ds = assemble_dataset(ev, c);
  // Document items first, ascending external id.
  CHECK(ds.items.find(10) == 0);
  CHECK(ds.items.find(50) == 1);
  CHECK(ds.items.find(99) == 2);
  CHECK(ds.users.find(7) == 0);
  CHECK(ds.events_without_text == 1);
  CHECK(ds.corpus_size() == 2);
  CHECK(ds.events[1].item_id == 1);

  const auto re = reindex_events({{8, 10, 1.0, 0}, {123, 456, 1.0, 1}, {124, 456, 1.0, 2}}, ds.users, ds.items);
  CHECK(re[0].user_id == 1);
  CHECK(re[0].item_id == 0);
  CHECK(re[1].user_id == 2);
  CHECK(re[1].item_id == 3);
  CHECK(re[2].user_id == 3);
  CHECK(re[2].item_id == 3);
}
