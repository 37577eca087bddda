// SPDX-License-Identifier: Apache-2.0
#include "medre/document.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "medre/utf8.hpp"

namespace medre {

const Entity *Document::find_entity(const std::string &id) const {
  for (const auto &e : entities)
    if (e.id == id)
      return &e;
  return nullptr;
}

std::size_t Document::text_length() const { return utf8::length(text); }

std::vector<Violation> validate_document(const Document &doc,
                                         const SchemaProfile &schema) {
  std::vector<Violation> out;
  const utf8::Index index(doc.text);
  const std::size_t len = index.size();

  std::map<std::string, const Entity *> by_id;
  for (const auto &e : doc.entities) {
    if (!by_id.emplace(e.id, &e).second)
      out.push_back({"duplicate entity id", e.id,
                     "entity id " + e.id + " appears more than once"});
    if (!schema.has_entity_type(e.etype) && e.etype != kOtherType)
      out.push_back({"unknown entity type", e.id,
                     "entity " + e.id + " has unknown type '" + e.etype + "'"});
    if (!(e.start < e.end && e.end <= len)) {
      out.push_back({"offset out of bounds", e.id,
                     "entity " + e.id + " span [" + std::to_string(e.start) +
                         "," + std::to_string(e.end) + ") outside text of " +
                         std::to_string(len) + " characters"});
      continue;
    }
    if (index.slice(e.start, e.end) != e.surface)
      out.push_back({"surface mismatch", e.id,
                     "entity " + e.id + " surface does not match the text"});
  }

  // Overlap check on spans sorted by start.
  std::vector<const Entity *> sorted;
  for (const auto &e : doc.entities)
    if (e.start < e.end && e.end <= len)
      sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Entity *a, const Entity *b) {
    return std::tie(a->start, a->end) < std::tie(b->start, b->end);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->start < sorted[i - 1]->end)
      out.push_back({"overlapping entities", sorted[i]->id,
                     "entity " + sorted[i]->id + " overlaps " +
                         sorted[i - 1]->id});
  }

  std::set<std::string> rel_ids;
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  for (const auto &r : doc.relations) {
    if (!rel_ids.insert(r.id).second)
      out.push_back({"duplicate relation id", r.id,
                     "relation id " + r.id + " appears more than once"});
    if (!schema.has_relation_type(r.rtype) && r.rtype != kSameFrame)
      out.push_back({"unknown relation type", r.id,
                     "relation " + r.id + " has unknown type '" + r.rtype +
                         "'"});
    if (r.source == r.target)
      out.push_back({"self-relation", r.id,
                     "relation " + r.id + " links " + r.source + " to itself"});
    if (!by_id.count(r.source) || !by_id.count(r.target))
      out.push_back({"dangling argument", r.id,
                     "relation " + r.id + " references a missing entity"});
    if (!triples.emplace(r.rtype, r.source, r.target).second)
      out.push_back({"duplicate relation", r.id,
                     "relation " + r.id + " repeats (" + r.rtype + ", " +
                         r.source + ", " + r.target + ")"});
  }
  return out;
}

std::vector<Relation> dedupe_relations(std::vector<Relation> rels) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::vector<Relation> out;
  out.reserve(rels.size());
  for (auto &r : rels)
    if (seen.emplace(r.rtype, r.source, r.target).second)
      out.push_back(std::move(r));
  return out;
}

void renumber_relations(std::vector<Relation> &rels) {
  for (std::size_t i = 0; i < rels.size(); ++i)
    rels[i].id = "R" + std::to_string(i + 1);
}

} // namespace medre
