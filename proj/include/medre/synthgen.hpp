// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "medre/document.hpp"
#include "medre/frames.hpp"

namespace medre {

/// Surface forms the templates draw from. Every table must be non-empty.
struct GenVocabulary {
  std::vector<std::string> drugs;
  std::vector<std::string> drug_classes;
  std::vector<std::string> routes;
  std::vector<std::string> frequencies;
  std::vector<std::string> dates;
  std::vector<std::string> relative_dates;
  std::vector<std::string> dosages;
  std::vector<std::string> strengths;
  std::vector<std::string> forms;
  std::vector<std::string> durations;
  std::vector<std::string> conditions;
  std::vector<std::string> reactions;

  static GenVocabulary defaults();
};

struct GenConfig {
  std::uint64_t seed = 0;
  std::size_t doc_count = 50;
  std::size_t sentences_min = 3;
  std::size_t sentences_max = 6;
  std::string schema = "corp-hus"; // corp-hus | n2c2
  double multi_frame_rate = 0.04;
  double context_relation_rate = 0.35;
  double coref_rate = 0.08;
  double french_rate = 0.3; // share of sentences using accented variants
  GenVocabulary vocab = GenVocabulary::defaults();

  void check() const;
  nlohmann::json to_json() const; // vocabulary tables are not echoed
};

struct GeneratedCorpus {
  std::vector<Document> docs;
  std::vector<FrameSet> frames; // gold frames, one per document
};

/// Template-realised documents with exact offsets. Each sentence introduces
/// one drug; with probability `multi_frame_rate` the drug gets the two-period
/// template and SAME_FRAME edges for its two frames. Same config, same bytes.
GeneratedCorpus generate_corpus(const GenConfig &cfg);

/// Seeded shuffle, then the first round(fraction * n) documents train.
std::pair<std::vector<Document>, std::vector<Document>>
corpus_split(const std::vector<Document> &corpus, double train_fraction,
             std::uint64_t seed);

/// Writes `.txt`/`.ann` pairs plus manifest.json (seed, config, stats).
void write_generated(const std::filesystem::path &dir,
                     const GeneratedCorpus &corpus, const GenConfig &cfg);

} // namespace medre
