// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medre/document.hpp"

namespace medre {

struct ParseOptions {
  // Strict rejects unknown types; lax maps unknown entity types to OTHER and
  // drops relations that are unknown or touch an OTHER entity.
  bool strict = true;
};

/// Parses BRAT-style `.ann` content (T- and R-lines only) against `text`.
Document parse_standoff(std::string_view text, std::string_view ann,
                        const SchemaProfile &schema,
                        const ParseOptions &opts = {},
                        std::string doc_id = {});

/// Returns (text, ann). Entities become T1..Tn and relations R1..Rm in
/// document order.
std::pair<std::string, std::string> serialize_standoff(const Document &doc);

/// Reads `<dir>/<doc_id>.txt` + `.ann` for every `.txt` file, sorted by id.
std::vector<Document> load_corpus(const std::filesystem::path &dir,
                                  const SchemaProfile &schema,
                                  const ParseOptions &opts = {});

/// Reads a single document pair.
Document load_document(const std::filesystem::path &txt,
                       const std::filesystem::path &ann,
                       const SchemaProfile &schema,
                       const ParseOptions &opts = {});

void write_document(const std::filesystem::path &dir, const Document &doc);

std::string read_file(const std::filesystem::path &path);

/// Writes through a temporary file then renames.
void write_file_atomic(const std::filesystem::path &path,
                       std::string_view content);

} // namespace medre
