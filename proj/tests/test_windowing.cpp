// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>
#include <tuple>
#include <algorithm>

#include "medre/error.hpp"
#include "medre/standoff.hpp"
#include "medre/windowing.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace medre;

TEST_CASE("tokenize") {
  CHECK(tokenize("").empty());

  const auto t = tokenize("aspirin 500 mg\n");
  REQUIRE(t.size() == 4);
  CHECK(t[0] == Token{"aspirin", 0, 7});
  CHECK(t[1] == Token{"500", 8, 11});
  CHECK(t[2] == Token{"mg", 12, 14});
  CHECK(t[3] == Token{"\n", 14, 15});

  CHECK(tokenize("every 4 weeks from July to October").size() == 7);

  const auto p = tokenize("débuté le 12/03, arrêté.");
  std::vector<std::string> s;
  for (const auto &tok : p)
    s.push_back(tok.surface);
  CHECK(s == std::vector<std::string>{"débuté", "le", "12", "/", "03", ",",
                                      "arrêté", "."});
  CHECK(p[0].end == 6);
}

TEST_CASE("tokens cover the text without overlap") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto doc = testing::random_document(rng, 60);
    const auto toks = tokenize(doc.text);
    const auto cps = utf8::decode(doc.text);
    std::size_t pos = 0;
    for (const auto &t : toks) {
      CHECK(t.start >= pos);
      for (std::size_t k = pos; k < t.start; ++k)
        CHECK((cps[k] == U' ' || cps[k] == U'\t'));
      CHECK(utf8::encode(std::u32string_view(cps).substr(t.start, t.end - t.start)) ==
            t.surface);
      pos = t.end;
    }
  }
}

TEST_CASE("make_segments basic contracts") {
  const auto schema = corp_hus_profile();
  auto one = parse_standoff("aspirin", "T1\tDrug 0 7\taspirin", schema);
  SegmentReport rep;
  CHECK(make_segments(one, {300, 150}, &rep).empty());
  CHECK(rep.segments_excluded == 1);

  std::string text(250, 'x');
  text.replace(0, 7, "aspirin");
  text[7] = ' ';
  text.replace(8, 2, "IV");
  text[10] = ' ';
  auto doc = parse_standoff(text, "T1\tDrug 0 7\taspirin\nT2\tRoute 8 10\tIV\n"
                                  "R1\tRefer_to Arg1:T2 Arg2:T1",
                            schema);
  const auto segs = make_segments(doc, {300, 150});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].window_start == 0);
  CHECK(segs[0].window_end == 250);
  CHECK(make_segments(doc, {300, 300}) == segs);

  CHECK_THROWS_AS(make_segments(doc, {300, 0}), ConfigError);
  CHECK_THROWS_AS(make_segments(doc, {100, 200}), ConfigError);
}

TEST_CASE("make_segments matches the brute-force window enumerator") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto doc = testing::random_document(rng, 40 + trial * 3, false);
    for (const auto &[n, stride] : {std::pair<std::size_t, std::size_t>{300, 150},
                                    {200, 100},
                                    {120, 120},
                                    {90, 37}}) {
      SegmentReport rep;
      const auto segs = make_segments(doc, {n, stride}, &rep);
      const auto o = testing::window_oracle(doc, n, stride);
      CHECK(segs.size() == o.segments);
      CHECK(rep.segments_emitted == o.segments);
      CHECK(rep.unreachable_relations == o.unreachable);
      for (const auto &s : segs) {
        CHECK(s.entity_refs.size() >= 2);
        CHECK(s.window_end - s.window_start <= n);
        for (auto k : s.entity_refs) {
          CHECK(doc.entities[k].start >= s.window_start);
          CHECK(doc.entities[k].end <= s.window_end);
        }
      }
      // Determinism.
      CHECK(make_segments(doc, {n, stride}) == segs);
    }
  }
}

TEST_CASE("every token lands in some window") {
  // Every token is an entity, so no window is filtered out.
  const auto schema = corp_hus_profile();
  Document doc;
  doc.doc_id = "cover";
  std::mt19937_64 rng(4);
  for (int w = 0; w < 150; ++w) {
    if (w)
      doc.text += ' ';
    doc.text += std::string(1 + rng() % 9, 'a' + static_cast<char>(w % 26));
  }
  for (const auto &t : tokenize(doc.text))
    doc.entities.push_back({"T" + std::to_string(doc.entities.size() + 1), "Date",
                            t.start, t.end, t.surface});
  REQUIRE(validate_document(doc, schema).empty());
  const auto segs = make_segments(doc, {60, 30});
  std::set<std::size_t> seen;
  for (const auto &s : segs)
    seen.insert(s.entity_refs.begin(), s.entity_refs.end());
  CHECK(seen.size() == doc.entities.size());
}

TEST_CASE("align_labels") {
  const auto schema = corp_hus_profile();
  auto doc = parse_standoff("tocilizumab IV every 4 weeks",
                            "T1\tDrug 0 11\ttocilizumab\nT2\tRoute 12 14\tIV\n"
                            "T3\tFrequency 15 28\tevery 4 weeks\n",
                            schema);
  auto segs = make_segments(doc, {300, 150});
  REQUIRE(segs.size() == 1);
  align_labels(segs[0], doc, schema);
  const int drug = *schema.label_id("Drug");
  const int route = *schema.label_id("Route");
  const int freq = *schema.label_id("Frequency");
  CHECK(segs[0].labels == std::vector<int>{drug, route, freq, freq, freq});
  CHECK(segs[0].heads == std::vector<std::size_t>{0, 1, 2});

  // Overlaps are reported with both ids.
  Segment bad = segs[0];
  Document overlap = doc;
  overlap.entities[2].start = 12;
  overlap.entities[2].surface = "IV every 4 weeks";
  try {
    align_labels(bad, overlap, schema);
    FAIL("expected overlap error");
  } catch (const ValidationError &e) {
    CHECK(std::string(e.what()).find("T2") != std::string::npos);
    CHECK(std::string(e.what()).find("T3") != std::string::npos);
  }
}

TEST_CASE("build_pair_targets") {
  const auto schema = corp_hus_profile();
  const ClassMap classes(schema, false);
  auto doc = parse_standoff("aspirin IV", "T1\tDrug 0 7\taspirin\nT2\tRoute 8 10\tIV\n"
                                          "R1\tRefer_to Arg1:T2 Arg2:T1",
                            schema);
  auto segs = make_segments(doc, {300, 150});
  align_labels(segs[0], doc, schema);
  auto targets = build_pair_targets(segs[0], doc, classes);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].class_id == kNullRel); // T1 -> T2
  CHECK(targets[1].class_id == classes.id("Refer_to"));
  CHECK(targets[1].i == 1);
  CHECK(targets[1].j == 0);

  doc = parse_standoff("aspirin IV daily 5 days since May",
                       "T1\tDrug 0 7\taspirin\nT2\tRoute 8 10\tIV\nT3\tFrequency 11 16\tdaily\n"
                       "T4\tDuration 17 23\t5 days\nT5\tDate 24 33\tsince May\n"
                       "R1\tRefer_to Arg1:T2 Arg2:T1\nR2\tRefer_to Arg1:T3 Arg2:T1\n"
                       "R3\tStart Arg1:T5 Arg2:T1\n",
                       schema);
  segs = make_segments(doc, {300, 150});
  align_labels(segs[0], doc, schema);
  targets = build_pair_targets(segs[0], doc, classes);
  CHECK(targets.size() == 20);
  CHECK(std::count_if(targets.begin(), targets.end(),
                      [](const PairTarget &t) { return t.class_id != kNullRel; }) == 3);

  doc.relations.push_back({"R4", "Stop", "T5", "T1"});
  CHECK_THROWS_AS(build_pair_targets(segs[0], doc, classes), ValidationError);

  // SAME_FRAME only counts when the class map carries it.
  doc.relations.pop_back();
  doc.relations.push_back({"R4", std::string(kSameFrame), "T2", "T3"});
  const ClassMap with_frames(schema, true);
  CHECK(with_frames.size() == classes.size() + 1);
  auto t2 = build_pair_targets(segs[0], doc, with_frames);
  CHECK(std::count_if(t2.begin(), t2.end(), [](const PairTarget &t) {
          return t.class_id != kNullRel;
        }) == 4);
  t2 = build_pair_targets(segs[0], doc, classes);
  CHECK(std::count_if(t2.begin(), t2.end(), [](const PairTarget &t) {
          return t.class_id != kNullRel;
        }) == 3);
}

TEST_CASE("pair-target cardinality and reachable relations on random corpora") {
  const auto schema = corp_hus_profile();
  const ClassMap classes(schema, true);
  std::mt19937_64 rng(31);
  std::vector<Document> corpus;
  for (int i = 0; i < 40; ++i)
    corpus.push_back(testing::random_document(rng, 80));
  const auto vocab = Vocabulary::build(corpus);
  SegmentReport rep;
  const auto enc = encode_corpus(corpus, schema, vocab, classes, {120, 60}, &rep);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> typed;
  for (const auto &s : enc) {
    const auto m = s.entity_count();
    CHECK(s.targets.size() == m * (m - 1));
    CHECK(s.token_ids.size() == s.label_ids.size());
    for (const auto &t : s.targets)
      if (t.class_id != kNullRel)
        typed.emplace(s.doc_index, t.source_entity, t.target_entity);
  }
  std::size_t gold = 0;
  for (const auto &d : corpus)
    gold += d.relations.size();
  CHECK(typed.size() == gold - rep.unreachable_relations);
}

TEST_CASE("vocabulary") {
  std::vector<Document> corpus(1);
  corpus[0].text = "Aspirin aspirin IV";
  const auto v = Vocabulary::build(corpus);
  CHECK(v.size() == Vocabulary::kReserved + 2);
  CHECK(v.id("ASPIRIN") == v.id("aspirin"));
  CHECK(v.id("heparin") == Vocabulary::kUnk);
  CHECK(Vocabulary::from_words(v.words()).words() == v.words());
}
