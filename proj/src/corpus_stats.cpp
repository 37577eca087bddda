// SPDX-License-Identifier: Apache-2.0
#include "medre/corpus_stats.hpp"

#include "medre/frames.hpp"

namespace medre {

CorpusStats &CorpusStats::operator+=(const CorpusStats &other) {
  doc_count += other.doc_count;
  for (const auto &[k, v] : other.entity_count)
    entity_count[k] += v;
  entity_total += other.entity_total;
  for (const auto &[k, v] : other.relation_count)
    relation_count[k] += v;
  relation_total += other.relation_total;
  drugs += other.drugs;
  multi_frame_drugs += other.multi_frame_drugs;
  frames += other.frames;
  return *this;
}

CorpusStats corpus_stats(const std::vector<Document> &corpus,
                         const SchemaProfile &schema) {
  CorpusStats s;
  for (const auto &doc : corpus) {
    ++s.doc_count;
    for (const auto &e : doc.entities) {
      ++s.entity_count[e.etype];
      ++s.entity_total;
    }
    for (const auto &r : doc.relations) {
      ++s.relation_count[r.rtype];
      ++s.relation_total;
    }
    const auto fs = build_frames(doc, schema);
    s.drugs += fs.drugs();
    s.multi_frame_drugs += fs.multi_frame_drugs();
    s.frames += fs.frames.size();
  }
  return s;
}

} // namespace medre
