// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <set>

#include "medre/corpus_stats.hpp"
#include "medre/error.hpp"
#include "medre/standoff.hpp"
#include "medre/synthgen.hpp"
#include "medre/utf8.hpp"

using namespace medre;

namespace {

GenConfig config(std::uint64_t seed, std::size_t docs,
                 const std::string &schema = "corp-hus") {
  GenConfig c;
  c.seed = seed;
  c.doc_count = docs;
  c.schema = schema;
  return c;
}

} // namespace

TEST_CASE("empty corpus") {
  const auto g = generate_corpus(config(1, 0));
  CHECK(g.docs.empty());
  CHECK(g.frames.empty());
}

TEST_CASE("config validation") {
  auto c = config(1, 3);
  c.multi_frame_rate = 1.5;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = config(1, 3, "i2b2");
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = config(1, 3);
  c.vocab.routes.clear();
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
}

TEST_CASE("generated documents are valid with exact offsets") {
  for (const char *schema : {"corp-hus", "n2c2"}) {
    CAPTURE(schema);
    const auto profile = builtin_profile(schema);
    auto cfg = config(3, 200, schema);
    cfg.multi_frame_rate = 0.2;
    const auto g = generate_corpus(cfg);
    bool non_ascii = false;
    for (const auto &doc : g.docs) {
      CHECK(validate_document(doc, profile).empty());
      const utf8::Index index(doc.text);
      for (const auto &e : doc.entities)
        CHECK(index.slice(e.start, e.end) == e.surface);
      non_ascii |= doc.text.size() != doc.text_length();
    }
    CHECK(non_ascii);
  }
}

TEST_CASE("multi_frame_rate = 1 gives every drug two frames") {
  for (const char *schema : {"corp-hus", "n2c2"}) {
    auto cfg = config(5, 30, schema);
    cfg.multi_frame_rate = 1.0;
    const auto g = generate_corpus(cfg);
    for (const auto &fs : g.frames) {
      CHECK(fs.drugs() > 0);
      CHECK(fs.multi_frame_drugs() == fs.drugs());
      CHECK(fs.frames.size() == 2 * fs.drugs());
    }
  }
}

TEST_CASE("default corpus proportions") {
  const auto g = generate_corpus(config(7, 200));
  const auto stats = corpus_stats(g.docs, corp_hus_profile());
  const std::size_t same = stats.relation_count.count(std::string(kSameFrame))
                               ? stats.relation_count.at(std::string(kSameFrame))
                               : 0;
  const double refer = static_cast<double>(stats.relation_count.at("Refer_to"));
  CHECK(refer / static_cast<double>(stats.relation_total - same) > 0.5);
  CHECK(stats.multi_frame_drug_fraction() > 0.005);
  CHECK(stats.multi_frame_drug_fraction() < 0.1);
  // Several contextual relation types appear.
  for (const char *t : {"Start", "Stop", "Ongoing", "Coref"})
    CHECK(stats.relation_count.count(t) == 1);
}

TEST_CASE("gold frames round-trip through relations") {
  auto cfg = config(9, 100);
  cfg.multi_frame_rate = 0.3;
  const auto g = generate_corpus(cfg);
  const auto schema = corp_hus_profile();
  for (std::size_t d = 0; d < g.docs.size(); ++d) {
    auto rels = dedupe_relations(frames_to_relations(g.frames[d], true));
    auto back = decode_frames(g.docs[d].entities, rels, schema);
    back.doc_id = g.frames[d].doc_id;
    CHECK(back == g.frames[d]);
  }
}

TEST_CASE("generation is deterministic") {
  const auto a = generate_corpus(config(11, 20));
  const auto b = generate_corpus(config(11, 20));
  const auto c = generate_corpus(config(12, 20));
  REQUIRE(a.docs.size() == b.docs.size());
  bool differs = false;
  for (std::size_t d = 0; d < a.docs.size(); ++d) {
    CHECK(serialize_standoff(a.docs[d]) == serialize_standoff(b.docs[d]));
    differs |= a.docs[d].text != c.docs[d].text;
  }
  CHECK(differs);

  const auto tmp = std::filesystem::temp_directory_path() / "medre_gen_test";
  std::filesystem::remove_all(tmp);
  write_generated(tmp / "x", a, config(11, 20));
  write_generated(tmp / "y", b, config(11, 20));
  std::size_t files = 0;
  for (const auto &entry : std::filesystem::directory_iterator(tmp / "x")) {
    const auto name = entry.path().filename();
    CHECK(read_file(entry.path()) == read_file(tmp / "y" / name));
    ++files;
  }
  CHECK(files == 41);
  const auto loaded = load_corpus(tmp / "x", corp_hus_profile());
  CHECK(loaded.size() == 20);
  std::filesystem::remove_all(tmp);
}

TEST_CASE("corpus split") {
  const auto g = generate_corpus(config(2, 10));
  const auto [train, test] = corpus_split(g.docs, 0.5, 4);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
  std::set<std::string> ids;
  for (const auto &d : train)
    ids.insert(d.doc_id);
  for (const auto &d : test)
    CHECK(ids.insert(d.doc_id).second);
  CHECK(ids.size() == 10);
  const auto again = corpus_split(g.docs, 0.5, 4);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(again.first[k].doc_id == train[k].doc_id);
  CHECK_THROWS_AS(corpus_split(g.docs, 1.0, 4), ConfigError);
  CHECK(corpus_split(generate_corpus(config(2, 200)).docs, 0.8, 1).first.size() == 160);
}
