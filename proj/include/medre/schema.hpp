// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medre {

/// Relation name synthesized between attributes of one frame. Never part of
/// an annotated schema.
inline constexpr std::string_view kSameFrame = "SAME_FRAME";

/// Catch-all entity type that lax parsing assigns to unknown types. Entities
/// of this type never take part in relation extraction.
inline constexpr std::string_view kOtherType = "OTHER";

/// A named label set. Type lists are ordered; label and class ids are derived
/// from that order so it must stay stable across runs.
struct SchemaProfile {
  std::string name;
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;
  std::vector<std::string> attribute_types;
  std::vector<std::string> drug_types;
  // Relations that stay document-level and never become frame links.
  std::vector<std::string> non_frame_relations;

  bool has_entity_type(std::string_view t) const;
  bool has_relation_type(std::string_view t) const;
  bool is_attribute(std::string_view t) const;
  bool is_drug(std::string_view t) const;
  bool is_frame_relation(std::string_view t) const;

  /// 0 is the outside label; entity types follow from 1.
  std::size_t label_count() const { return entity_types.size() + 1; }
  std::optional<int> label_id(std::string_view etype) const;

  /// Checks the profile's own invariants, throwing SchemaError.
  void check() const;
};

/// Built-in French clinical profile. The reference NER table lists both
/// "Condition" and "Context" while the corpus description mentions only
/// "Context"; both are kept.
SchemaProfile corp_hus_profile();

/// Built-in English medication profile (attribute -> Drug relations).
SchemaProfile n2c2_profile();

/// Resolves `corp-hus` / `n2c2`, throwing SchemaError for anything else.
SchemaProfile builtin_profile(std::string_view name);

/// Reads a key-value profile file:
///
///   name = my-profile
///   entity_types = Drug, Dose, Route
///   relation_types = Dose-Drug, Route-Drug
///   attribute_types = Dose, Route
///   drug_types = Drug
///   non_frame_relations =
///
/// Blank lines and lines starting with '#' are ignored.
SchemaProfile load_profile_file(const std::filesystem::path &path);

/// Built-in name or, failing that, a profile file path.
SchemaProfile resolve_profile(std::string_view name_or_path);

} // namespace medre
