// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>

#include "medre/corpus_stats.hpp"
#include "medre/error.hpp"
#include "medre/standoff.hpp"
#include "test_support.hpp"

using namespace medre;

namespace {

// Compares two documents modulo entity/relation id renaming.
bool same_up_to_ids(const Document &a, const Document &b) {
  if (a.text != b.text || a.entities.size() != b.entities.size() ||
      a.relations.size() != b.relations.size())
    return false;
  std::map<std::string, std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.entities.size(); ++i) {
    const auto &x = a.entities[i], &y = b.entities[i];
    if (x.etype != y.etype || x.start != y.start || x.end != y.end ||
        x.surface != y.surface)
      return false;
    ia[x.id] = i;
    ib[y.id] = i;
  }
  for (std::size_t i = 0; i < a.relations.size(); ++i) {
    const auto &x = a.relations[i], &y = b.relations[i];
    if (x.rtype != y.rtype || ia.at(x.source) != ib.at(y.source) ||
        ia.at(x.target) != ib.at(y.target))
      return false;
  }
  return true;
}

std::string rule_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const ValidationError &e) {
    return e.rule() + ":" + e.id();
  }
  return "";
}

} // namespace

TEST_CASE("parse_standoff maps T and R lines") {
  const auto schema = corp_hus_profile();
  const std::string text = "takes aspirin";

  auto doc = parse_standoff(text, "T1\tDrug 6 13\taspirin", schema);
  REQUIRE(doc.entities.size() == 1);
  CHECK(doc.entities[0].etype == "Drug");
  CHECK(doc.entities[0].start == 6);
  CHECK(doc.entities[0].end == 13);
  CHECK(doc.entities[0].surface == "aspirin");

  doc = parse_standoff(text,
                       "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\n"
                       "R1\tRefer_to Arg1:T2 Arg2:T1\n",
                       schema);
  REQUIRE(doc.entities.size() == 2);
  REQUIRE(doc.relations.size() == 1);
  CHECK(doc.relations[0].rtype == "Refer_to");
  CHECK(doc.relations[0].source == "T2");
  CHECK(doc.relations[0].target == "T1");
}

TEST_CASE("parse_standoff errors") {
  const auto schema = corp_hus_profile();
  const std::string text = "takes aspirin";
  CHECK(rule_of([&] { parse_standoff(text, "T1\tDrug 6 99\taspirin", schema); }) ==
        "offset out of bounds:T1");
  CHECK(rule_of([&] { parse_standoff(text, "T1\tDrug 6 13\taspirine", schema); }) ==
        "surface mismatch:T1");
  CHECK(rule_of([&] { parse_standoff(text, "T1\tFoo 6 13\taspirin", schema); }) ==
        "unknown entity type:T1");
  CHECK(rule_of([&] {
          parse_standoff(text, "T1\tDrug 6 13\taspirin\nR1\tRefer_to Arg1:T9 Arg2:T1",
                         schema);
        }) == "dangling argument:R1");
  CHECK(rule_of([&] {
          parse_standoff(text, "T1\tDrug 0 5;6 13\ttakes aspirin", schema);
        }) == "fragmented span:T1");
  CHECK(rule_of([&] {
          parse_standoff(text,
                         "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\n"
                         "R1\tBogus Arg1:T2 Arg2:T1",
                         schema);
        }) == "unknown relation type:R1");
}

TEST_CASE("lax mode maps unknown types to OTHER and drops their relations") {
  const auto schema = corp_hus_profile();
  const auto doc = parse_standoff("takes aspirin",
                                  "T1\tDrug 6 13\taspirin\nT2\tFoo 0 5\ttakes\n"
                                  "R1\tRefer_to Arg1:T2 Arg2:T1\nA1\tNeg T1\n",
                                  schema, ParseOptions{false});
  REQUIRE(doc.entities.size() == 2);
  CHECK(doc.entities[1].etype == "OTHER");
  CHECK(doc.relations.empty());
  CHECK(validate_document(doc, schema).empty());
}

TEST_CASE("offsets count code points") {
  const auto schema = corp_hus_profile();
  // "é" is two bytes; the drug starts at code point 10.
  const std::string text = "traité par paracétamol";
  const auto doc = parse_standoff(text, "T1\tDrug 11 22\tparacétamol", schema);
  CHECK(doc.entities[0].surface == "paracétamol");
  CHECK(doc.text_length() == 22);
}

TEST_CASE("serialize_standoff") {
  const auto schema = corp_hus_profile();
  Document empty;
  empty.text = "nothing here";
  const auto [t0, a0] = serialize_standoff(empty);
  CHECK(t0 == "nothing here");
  CHECK(a0.empty());

  const auto doc = parse_standoff("takes aspirin", "T7\tDrug 6 13\taspirin", schema);
  const auto [t1, a1] = serialize_standoff(doc);
  CHECK(a1 == "T1\tDrug 6 13\taspirin\n");
}

TEST_CASE("standoff round trip over random documents, SAME_FRAME included") {
  const auto schema = corp_hus_profile();
  std::mt19937_64 rng(11);
  std::size_t same_frame_seen = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto doc = testing::random_document(rng, 5 + trial % 40);
    REQUIRE(validate_document(doc, schema).empty());
    const auto [text, ann] = serialize_standoff(doc);
    const auto back = parse_standoff(text, ann, schema);
    CHECK(same_up_to_ids(doc, back));
    // Strict parsing never yields a document the validator rejects.
    CHECK(validate_document(back, schema).empty());
    for (const auto &r : back.relations)
      same_frame_seen += r.rtype == kSameFrame;
  }
  CHECK(same_frame_seen > 0);
}

TEST_CASE("validate_document reports rule and id") {
  const auto schema = corp_hus_profile();
  auto doc = parse_standoff("takes aspirin",
                            "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\n"
                            "R1\tRefer_to Arg1:T2 Arg2:T1\n",
                            schema);
  CHECK(validate_document(doc, schema).empty());

  auto self = doc;
  self.relations[0].source = "T1";
  auto v = validate_document(self, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "self-relation");
  CHECK(v[0].id == "R1");

  auto foo = doc;
  foo.entities[1].etype = "Foo";
  v = validate_document(foo, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "unknown entity type");
  CHECK(v[0].id == "T2");

  auto dup = doc;
  dup.relations.push_back(dup.relations[0]);
  dup.relations[1].id = "R2";
  v = validate_document(dup, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "duplicate relation");

  auto overlap = doc;
  overlap.entities[1].end = 7;
  overlap.entities[1].surface = "takes a";
  v = validate_document(overlap, schema);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "overlapping entities");
}

TEST_CASE("corpus_stats tallies and is additive") {
  const auto schema = corp_hus_profile();
  const auto d = parse_standoff("takes aspirin",
                                "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\n"
                                "R1\tRefer_to Arg1:T2 Arg2:T1\n",
                                schema);
  const auto s = corpus_stats({d, d}, schema);
  CHECK(s.doc_count == 2);
  CHECK(s.relation_total == 2);
  CHECK(s.relation_count.at("Refer_to") == 2);
  CHECK(s.entity_total == 4);
  CHECK(s.drugs == 2);
  CHECK(s.multi_frame_drug_fraction() == 0.0);

  std::mt19937_64 rng(3);
  std::vector<Document> a, b;
  for (int i = 0; i < 20; ++i)
    (i % 2 ? a : b).push_back(testing::random_document(rng, 30));
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  auto sum = corpus_stats(a, schema);
  sum += corpus_stats(b, schema);
  CHECK(sum == corpus_stats(all, schema));
  std::size_t by_type = 0;
  for (const auto &[k, v] : sum.entity_count)
    by_type += v;
  CHECK(by_type == sum.entity_total);
  CHECK(sum.multi_frame_drug_fraction() >= 0.0);
  CHECK(sum.multi_frame_drug_fraction() <= 1.0);
}

TEST_CASE("schema profiles") {
  CHECK_NOTHROW(corp_hus_profile().check());
  CHECK_NOTHROW(n2c2_profile().check());
  CHECK(corp_hus_profile().has_entity_type("Condition"));
  CHECK(corp_hus_profile().has_entity_type("Context"));
  CHECK_THROWS_AS(builtin_profile("i2b2"), SchemaError);

  const auto dir = std::filesystem::temp_directory_path() / "medre_schema_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "p.conf");
    out << "# custom\nname = tiny\nentity_types = Drug, Dose\n"
           "relation_types = Dose-Drug\nattribute_types = Dose\ndrug_types = Drug\n";
  }
  const auto p = load_profile_file(dir / "p.conf");
  CHECK(p.name == "tiny");
  CHECK(p.relation_types == std::vector<std::string>{"Dose-Drug"});
  {
    std::ofstream out(dir / "bad.conf");
    out << "name = bad\nentity_types = Drug\nrelation_types = SAME_FRAME\n";
  }
  CHECK_THROWS_AS(load_profile_file(dir / "bad.conf"), SchemaError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corpus directory io") {
  const auto schema = corp_hus_profile();
  const auto dir = std::filesystem::temp_directory_path() / "medre_corpus_io";
  std::filesystem::remove_all(dir);
  std::mt19937_64 rng(5);
  auto doc = testing::random_document(rng, 25);
  doc.doc_id = "doc_001";
  write_document(dir, doc);
  const auto corpus = load_corpus(dir, schema);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].doc_id == "doc_001");
  CHECK(same_up_to_ids(doc, corpus[0]));
  std::filesystem::remove(dir / "doc_001.ann");
  CHECK_THROWS_AS(load_corpus(dir, schema), IoError);
  std::filesystem::remove_all(dir);
}
