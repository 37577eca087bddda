// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "medre/schema.hpp"

namespace medre {

/// Typed span. Offsets are half-open and count Unicode code points.
struct Entity {
  std::string id;
  std::string etype;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool operator==(const Entity &) const = default;
};

/// Directed relation, stored attribute (source) -> drug (target).
struct Relation {
  std::string id;
  std::string rtype;
  std::string source;
  std::string target;

  bool operator==(const Relation &) const = default;
};

struct Document {
  std::string doc_id;
  std::string text; // UTF-8
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  const Entity *find_entity(const std::string &id) const;
  std::size_t text_length() const; // in code points
};

struct Violation {
  std::string rule;
  std::string id;
  std::string message;
};

/// Checks every document invariant against the schema. An empty result means
/// the document is well formed.
std::vector<Violation> validate_document(const Document &doc,
                                         const SchemaProfile &schema);

/// Drops repeated (rtype, source, target) triples, keeping the first.
std::vector<Relation> dedupe_relations(std::vector<Relation> rels);

/// Assigns R1..Rn ids in order.
void renumber_relations(std::vector<Relation> &rels);

} // namespace medre
