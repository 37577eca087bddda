// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "medre/frames.hpp"
#include "medre/standoff.hpp"
#include "test_support.hpp"

using namespace medre;

namespace {

std::vector<std::string> attrs_of(const Frame &f) {
  std::vector<std::string> out;
  for (const auto &l : f.links)
    out.push_back(l.attribute);
  return out;
}

} // namespace

TEST_CASE("tocilizumab regimen decodes to two frames") {
  const auto schema = corp_hus_profile();
  const auto doc = testing::tocilizumab();
  std::vector<Violation> violations;
  const auto fs = build_frames(doc, schema, &violations);
  CHECK(violations.empty());
  REQUIRE(fs.frames.size() == 2);
  CHECK(fs.frames[0].drug == "T1");
  CHECK(attrs_of(fs.frames[0]) == std::vector<std::string>{"T2", "T3", "T4", "T5"});
  CHECK(attrs_of(fs.frames[1]) == std::vector<std::string>{"T2", "T5", "T6", "T7"});
  CHECK(fs.multi_frame_drugs() == 1);

  // 8 drug links plus a 4-clique per frame.
  const auto with = frames_to_relations(fs, true);
  std::size_t links = 0, same = 0;
  for (const auto &r : with)
    (r.rtype == kSameFrame ? same : links)++;
  CHECK(links == 8);
  CHECK(same == 12);
  CHECK(decode_frames(doc.entities, with, schema) == FrameSet{"", fs.frames});

  // Without SAME_FRAME edges the periods collapse into one frame.
  const auto merged = decode_frames(doc.entities, frames_to_relations(fs, false), schema);
  REQUIRE(merged.frames.size() == 1);
  CHECK(attrs_of(merged.frames[0]) ==
        std::vector<std::string>{"T2", "T3", "T4", "T5", "T6", "T7"});
}

TEST_CASE("build_frames defaults") {
  const auto schema = corp_hus_profile();
  auto doc = parse_standoff("aspirin alone", "T1\tDrug 0 7\taspirin", schema);
  auto fs = build_frames(doc, schema);
  REQUIRE(fs.frames.size() == 1);
  CHECK(fs.frames[0].links.empty());

  doc = parse_standoff("aspirin 500 mg IV daily",
                       "T1\tDrug 0 7\taspirin\nT2\tDosage 8 14\t500 mg\n"
                       "T3\tRoute 15 17\tIV\nT4\tFrequency 18 23\tdaily\n"
                       "R1\tRefer_to Arg1:T2 Arg2:T1\nR2\tRefer_to Arg1:T3 Arg2:T1\n"
                       "R3\tStart Arg1:T4 Arg2:T1\n",
                       schema);
  fs = build_frames(doc, schema);
  REQUIRE(fs.frames.size() == 1);
  REQUIRE(fs.frames[0].links.size() == 3);
  CHECK(fs.frames[0].links[2] == FrameLink{"T4", "Start"});

  CHECK(frames_to_relations(fs, false).size() == 3);
  CHECK(frames_to_relations(fs, true).size() == 6);
  // Gold of a single-frame document decodes to itself.
  CHECK(decode_frames(doc.entities, doc.relations, schema).frames == fs.frames);
}

TEST_CASE("cross-drug SAME_FRAME edges are reported and ignored") {
  const auto schema = corp_hus_profile();
  const auto doc = parse_standoff(
      "aspirin IV then heparin SC",
      "T1\tDrug 0 7\taspirin\nT2\tRoute 8 10\tIV\nT3\tDrug 16 23\theparin\n"
      "T4\tRoute 24 26\tSC\nR1\tRefer_to Arg1:T2 Arg2:T1\n"
      "R2\tRefer_to Arg1:T4 Arg2:T3\nR3\tSAME_FRAME Arg1:T2 Arg2:T4\n",
      schema);
  std::vector<Violation> v;
  const auto fs = build_frames(doc, schema, &v);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "cross-drug same-frame edge");
  REQUIRE(fs.frames.size() == 2);
  CHECK(fs.frames[0].links.size() == 1);
  CHECK(fs.frames[1].links.size() == 1);
}

TEST_CASE("Coref and Discontinue stay outside frames") {
  const auto schema = corp_hus_profile();
  const auto doc = parse_standoff(
      "aspirin stopped",
      "T1\tDrug 0 7\taspirin\nT2\tContext 8 15\tstopped\n"
      "R1\tDiscontinue Arg1:T2 Arg2:T1\n",
      schema);
  const auto fs = build_frames(doc, schema);
  REQUIRE(fs.frames.size() == 1);
  CHECK(fs.frames[0].links.empty());
}

TEST_CASE("frame round trip over random frame sets") {
  const auto schema = corp_hus_profile();
  std::mt19937_64 rng(17);
  std::size_t multi = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto rf = testing::random_frames(rng, schema);
    const auto rels = frames_to_relations(rf.frames, true);
    const auto back = decode_frames(rf.entities, rels, schema);
    REQUIRE(back == rf.frames);
    multi += back.multi_frame_drugs();

    // Without SAME_FRAME each drug's frames merge into exactly one frame
    // holding the union of its attributes.
    const auto merged =
        decode_frames(rf.entities, frames_to_relations(rf.frames, false), schema);
    CHECK(merged.frames.size() == rf.frames.drugs());
    for (const auto &f : merged.frames) {
      std::set<std::string> expect;
      for (const auto &g : rf.frames.frames)
        if (g.drug == f.drug)
          for (const auto &l : g.links)
            expect.insert(l.attribute);
      const auto got = attrs_of(f);
      CHECK(std::set<std::string>(got.begin(), got.end()) == expect);
      CHECK(got.size() == expect.size());
    }
  }
  CHECK(multi > 50);
}

TEST_CASE("frame link totals match attribute->drug relations") {
  const auto schema = corp_hus_profile();
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto doc = testing::random_document(rng, 40, false);
    const auto fs = build_frames(doc, schema);
    std::size_t links = 0;
    for (const auto &f : fs.frames)
      links += f.links.size();
    std::size_t expect = 0;
    for (const auto &r : doc.relations)
      expect += schema.is_frame_relation(r.rtype);
    CHECK(links == expect);
    std::size_t drugs = 0;
    for (const auto &e : doc.entities)
      drugs += schema.is_drug(e.etype);
    CHECK(fs.drugs() == drugs);
  }
}

TEST_CASE("with_same_frame_edges adds a clique per frame") {
  const auto schema = corp_hus_profile();
  const auto doc = testing::tocilizumab();
  const auto plain = without_same_frame_edges(doc);
  CHECK(plain.relations.size() == 6);
  const auto aug = with_same_frame_edges(doc, schema);
  // 12 clique edges, IV-October shared by both frames.
  CHECK(aug.relations.size() == 6 + 11);
  CHECK(validate_document(aug, schema).empty());
  CHECK(build_frames(aug, schema).frames == build_frames(doc, schema).frames);
}
