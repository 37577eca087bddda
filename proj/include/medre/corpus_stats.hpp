// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "medre/document.hpp"

namespace medre {

struct CorpusStats {
  std::size_t doc_count = 0;
  std::map<std::string, std::size_t> entity_count;
  std::size_t entity_total = 0;
  std::map<std::string, std::size_t> relation_count;
  std::size_t relation_total = 0;
  std::size_t drugs = 0;             // drugs triggering at least one frame
  std::size_t multi_frame_drugs = 0; // drugs triggering two or more
  std::size_t frames = 0;

  double multi_frame_drug_fraction() const {
    return drugs == 0 ? 0.0 : static_cast<double>(multi_frame_drugs) /
                                  static_cast<double>(drugs);
  }

  CorpusStats &operator+=(const CorpusStats &other);
  bool operator==(const CorpusStats &) const = default;
};

CorpusStats corpus_stats(const std::vector<Document> &corpus,
                         const SchemaProfile &schema);

} // namespace medre
