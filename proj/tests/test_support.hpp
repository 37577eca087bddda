// SPDX-License-Identifier: Apache-2.0
// Random fixtures shared by the property tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "medre/document.hpp"
#include "medre/frames.hpp"
#include "medre/schema.hpp"
#include "medre/standoff.hpp"
#include "medre/utf8.hpp"

namespace medre::testing {

/// Random token-aligned document under the corp-hus profile. Words mix ASCII
/// and accented forms; entities never overlap; relations link attributes to
/// drugs plus optional SAME_FRAME edges between attributes of one drug.
inline Document random_document(std::mt19937_64 &rng, std::size_t words,
                                bool same_frame = true) {
  static const std::vector<std::string> vocab = {
      "le",  "patient", "reçoit", "aspirin", "500", "mg",   "IV",
      "per", "os",      "après",  "été",     "x",   "dose", "à",
      ",",   ".",       "\n",     "every",   "2",   "weeks"};
  const auto schema = corp_hus_profile();
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::bernoulli_distribution coin(0.3);

  Document doc;
  doc.doc_id = "rand";
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t pos = 0;
  for (std::size_t w = 0; w < words; ++w) {
    const auto &word = vocab[pick(rng)];
    if (w > 0) {
      doc.text += ' ';
      ++pos;
    }
    const std::size_t len = utf8::length(word);
    if (word != "\n" && word != "," && word != ".")
      spans.emplace_back(pos, pos + len);
    doc.text += word;
    pos += len;
  }
  const utf8::Index index(doc.text);
  std::vector<std::size_t> drugs, attrs;
  for (const auto &[b, e] : spans) {
    if (!coin(rng))
      continue;
    Entity ent;
    ent.id = "T" + std::to_string(doc.entities.size() + 1);
    const bool drug = std::bernoulli_distribution(0.35)(rng);
    ent.etype = drug ? "Drug"
                     : schema.attribute_types[std::uniform_int_distribution<
                           std::size_t>(0, schema.attribute_types.size() - 1)(rng)];
    ent.start = b;
    ent.end = e;
    ent.surface = std::string(index.slice(b, e));
    (drug ? drugs : attrs).push_back(doc.entities.size());
    doc.entities.push_back(std::move(ent));
  }
  std::vector<Relation> rels;
  if (!drugs.empty()) {
    std::uniform_int_distribution<std::size_t> pd(0, drugs.size() - 1);
    std::vector<std::size_t> owner(doc.entities.size(), SIZE_MAX);
    for (std::size_t a : attrs) {
      if (!coin(rng) && !coin(rng))
        continue;
      const std::size_t d = drugs[pd(rng)];
      owner[a] = d;
      const auto &rt = std::bernoulli_distribution(0.6)(rng)
                           ? std::string("Refer_to")
                           : schema.relation_types[1 + std::uniform_int_distribution<
                                                           std::size_t>(0, 10)(rng)];
      rels.push_back({"", rt, doc.entities[a].id, doc.entities[d].id});
    }
    if (same_frame)
      for (std::size_t a : attrs)
        for (std::size_t b : attrs)
          if (a < b && owner[a] != SIZE_MAX && owner[a] == owner[b] && coin(rng))
            rels.push_back({"", std::string(kSameFrame), doc.entities[a].id,
                            doc.entities[b].id});
  }
  renumber_relations(rels);
  doc.relations = std::move(rels);
  return doc;
}

/// Entities plus a FrameSet whose frames are recoverable from their relation
/// form: one drug, and for multi-frame drugs every frame is a shared block
/// plus at least one private attribute, with at least two attributes each.
struct RandomFrames {
  std::vector<Entity> entities;
  FrameSet frames;
};

inline RandomFrames random_frames(std::mt19937_64 &rng,
                                  const SchemaProfile &schema) {
  RandomFrames out;
  std::size_t pos = 0;
  auto make_entity = [&](const std::string &type) {
    Entity e;
    e.id = "T" + std::to_string(out.entities.size() + 1);
    e.etype = type;
    e.start = pos;
    e.end = pos + 3;
    e.surface = "xyz";
    pos += 4;
    out.entities.push_back(e);
    return e.id;
  };
  auto rint = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const auto &attr_types = schema.attribute_types;
  std::vector<std::string> link_types;
  for (const auto &r : schema.relation_types)
    if (schema.is_frame_relation(r))
      link_types.push_back(r);

  const int drug_count = rint(1, 4);
  for (int d = 0; d < drug_count; ++d) {
    const std::string drug = make_entity(schema.drug_types.front());
    const int frame_count = rint(0, 9) < 3 ? 2 + rint(0, 1) : 1;
    auto new_link = [&] {
      const auto type = attr_types[rint(0, static_cast<int>(attr_types.size()) - 1)];
      return FrameLink{make_entity(type),
                       link_types[rint(0, static_cast<int>(link_types.size()) - 1)]};
    };
    if (frame_count == 1) {
      Frame f{drug, {}};
      const int n = rint(0, 5);
      for (int k = 0; k < n; ++k)
        f.links.push_back(new_link());
      out.frames.frames.push_back(f);
      continue;
    }
    std::vector<FrameLink> shared;
    const int n_shared = rint(0, 2);
    for (int k = 0; k < n_shared; ++k)
      shared.push_back(new_link());
    for (int f = 0; f < frame_count; ++f) {
      Frame fr{drug, shared};
      const int n_private = std::max(1, rint(1, 3) - (n_shared > 0 ? 0 : 0));
      for (int k = 0; k < n_private; ++k)
        fr.links.push_back(new_link());
      if (fr.links.size() < 2)
        fr.links.push_back(new_link());
      out.frames.frames.push_back(fr);
    }
  }
  return out;
}

// The two-period regimen: one drug, a route shared by both periods, two
// frequencies, and dates where the middle one closes the first period and
// opens the second.
inline Document tocilizumab() {
  const std::string text =
      "treatment with tocilizumab IV every 4 weeks from July to October, then "
      "every 2 weeks until December";
  const std::string ann = "T1\tDrug 15 26\ttocilizumab\n"
                          "T2\tRoute 27 29\tIV\n"
                          "T3\tFrequency 30 43\tevery 4 weeks\n"
                          "T4\tDate 49 53\tJuly\n"
                          "T5\tDate 57 64\tOctober\n"
                          "T6\tFrequency 71 84\tevery 2 weeks\n"
                          "T7\tDate 91 99\tDecember\n"
                          "R1\tRefer_to Arg1:T2 Arg2:T1\n"
                          "R2\tRefer_to Arg1:T3 Arg2:T1\n"
                          "R3\tRefer_to Arg1:T4 Arg2:T1\n"
                          "R4\tRefer_to Arg1:T5 Arg2:T1\n"
                          "R5\tRefer_to Arg1:T6 Arg2:T1\n"
                          "R6\tRefer_to Arg1:T7 Arg2:T1\n"
                          "R7\tSAME_FRAME Arg1:T2 Arg2:T3\n"
                          "R8\tSAME_FRAME Arg1:T3 Arg2:T4\n"
                          "R9\tSAME_FRAME Arg1:T3 Arg2:T5\n"
                          "R10\tSAME_FRAME Arg1:T2 Arg2:T4\n"
                          "R11\tSAME_FRAME Arg1:T2 Arg2:T5\n"
                          "R12\tSAME_FRAME Arg1:T4 Arg2:T5\n"
                          "R13\tSAME_FRAME Arg1:T2 Arg2:T6\n"
                          "R14\tSAME_FRAME Arg1:T6 Arg2:T5\n"
                          "R15\tSAME_FRAME Arg1:T6 Arg2:T7\n"
                          "R16\tSAME_FRAME Arg1:T5 Arg2:T7\n"
                          "R17\tSAME_FRAME Arg1:T2 Arg2:T7\n";
  return parse_standoff(text, ann, corp_hus_profile(), {}, "toci");
}

} // namespace medre::testing
