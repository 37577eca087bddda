// SPDX-License-Identifier: Apache-2.0
#include "medre/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "medre/error.hpp"

namespace medre {

namespace {

bool contains(const std::vector<std::string> &v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos)
      comma = s.size();
    auto item = trim(s.substr(pos, comma - pos));
    if (!item.empty())
      out.push_back(std::move(item));
    pos = comma + 1;
  }
  return out;
}

} // namespace

bool SchemaProfile::has_entity_type(std::string_view t) const {
  return contains(entity_types, t);
}
bool SchemaProfile::has_relation_type(std::string_view t) const {
  return contains(relation_types, t);
}
bool SchemaProfile::is_attribute(std::string_view t) const {
  return contains(attribute_types, t);
}
bool SchemaProfile::is_drug(std::string_view t) const {
  return contains(drug_types, t);
}
bool SchemaProfile::is_frame_relation(std::string_view t) const {
  return t != kSameFrame && !contains(non_frame_relations, t);
}

std::optional<int> SchemaProfile::label_id(std::string_view etype) const {
  const auto it = std::find(entity_types.begin(), entity_types.end(), etype);
  if (it == entity_types.end())
    return std::nullopt;
  return static_cast<int>(it - entity_types.begin()) + 1;
}

void SchemaProfile::check() const {
  if (name.empty())
    throw SchemaError("schema profile has no name");
  if (entity_types.empty())
    throw SchemaError("schema '" + name + "': entity_types is empty");
  if (relation_types.empty())
    throw SchemaError("schema '" + name + "': relation_types is empty");
  const std::set<std::string> ents(entity_types.begin(), entity_types.end());
  if (ents.size() != entity_types.size())
    throw SchemaError("schema '" + name + "': duplicate entity type");
  const std::set<std::string> rels(relation_types.begin(), relation_types.end());
  if (rels.size() != relation_types.size())
    throw SchemaError("schema '" + name + "': duplicate relation type");
  if (rels.count(std::string(kSameFrame)))
    throw SchemaError("schema '" + name + "': SAME_FRAME is reserved");
  if (ents.count(std::string(kOtherType)))
    throw SchemaError("schema '" + name + "': OTHER is reserved");
  for (const auto &a : attribute_types) {
    if (!ents.count(a))
      throw SchemaError("schema '" + name + "': attribute type '" + a +
                        "' is not an entity type");
    if (is_drug(a))
      throw SchemaError("schema '" + name + "': '" + a +
                        "' is both a drug and an attribute type");
  }
  for (const auto &d : drug_types)
    if (!ents.count(d))
      throw SchemaError("schema '" + name + "': drug type '" + d +
                        "' is not an entity type");
  for (const auto &r : non_frame_relations)
    if (!rels.count(r))
      throw SchemaError("schema '" + name + "': non-frame relation '" + r +
                        "' is not a relation type");
  for (const auto &t : entity_types)
    if (t.find_first_of(" \t\n") != std::string::npos)
      throw SchemaError("schema '" + name + "': type names cannot hold spaces");
  for (const auto &t : relation_types)
    if (t.find_first_of(" \t\n") != std::string::npos)
      throw SchemaError("schema '" + name + "': type names cannot hold spaces");
}

SchemaProfile corp_hus_profile() {
  SchemaProfile p;
  p.name = "corp-hus";
  p.entity_types = {"Drug",     "Drug_Class", "Date",  "Relative_Date",
                    "Dosage",   "Frequency",  "Route", "Duration",
                    "Context",  "Condition"};
  p.relation_types = {"Refer_to",
                      "Start",
                      "Stop",
                      "Ongoing",
                      "Duration_prescription",
                      "Administration_time",
                      "Increase",
                      "Decrease",
                      "Negation",
                      "Contraindicated",
                      "Hypothetical",
                      "Experiencer",
                      "Coref",
                      "Discontinue"};
  p.attribute_types = {"Date",     "Relative_Date", "Dosage",  "Frequency",
                       "Route",    "Duration",      "Context", "Condition"};
  p.drug_types = {"Drug"};
  p.non_frame_relations = {"Coref", "Discontinue"};
  return p;
}

SchemaProfile n2c2_profile() {
  SchemaProfile p;
  p.name = "n2c2";
  p.entity_types = {"Drug",  "Strength", "Form",   "Dosage", "Frequency",
                    "Route", "Duration", "Reason", "ADE"};
  p.relation_types = {"Strength-Drug",  "Form-Drug",     "Dosage-Drug",
                      "Frequency-Drug", "Route-Drug",    "Duration-Drug",
                      "Reason-Drug",    "ADE-Drug"};
  p.attribute_types = {"Strength", "Form",     "Dosage", "Frequency",
                       "Route",    "Duration", "Reason", "ADE"};
  p.drug_types = {"Drug"};
  return p;
}

SchemaProfile builtin_profile(std::string_view name) {
  if (name == "corp-hus")
    return corp_hus_profile();
  if (name == "n2c2")
    return n2c2_profile();
  throw SchemaError("unknown schema profile '" + std::string(name) +
                    "' (built-ins: corp-hus, n2c2)");
}

SchemaProfile load_profile_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open schema profile " + path.string());
  SchemaProfile p;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw SchemaError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = std::string_view(t).substr(eq + 1);
    if (key == "name")
      p.name = trim(value);
    else if (key == "entity_types")
      p.entity_types = split_list(value);
    else if (key == "relation_types")
      p.relation_types = split_list(value);
    else if (key == "attribute_types")
      p.attribute_types = split_list(value);
    else if (key == "drug_types")
      p.drug_types = split_list(value);
    else if (key == "non_frame_relations")
      p.non_frame_relations = split_list(value);
    else
      throw SchemaError(path.string() + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  p.check();
  return p;
}

SchemaProfile resolve_profile(std::string_view name_or_path) {
  if (name_or_path == "corp-hus" || name_or_path == "n2c2")
    return builtin_profile(name_or_path);
  const std::filesystem::path path(name_or_path);
  if (std::filesystem::exists(path))
    return load_profile_file(path);
  return builtin_profile(name_or_path);
}

} // namespace medre
