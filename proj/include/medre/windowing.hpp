// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medre/document.hpp"

namespace medre {

struct Token {
  std::string surface;
  std::size_t start = 0; // code points
  std::size_t end = 0;

  bool operator==(const Token &) const = default;
};

/// Splits on whitespace; every ASCII punctuation character is its own token
/// and so is every '\n'. Runs of letters, digits and non-ASCII characters form
/// one token.
std::vector<Token> tokenize(std::string_view text);

struct WindowConfig {
  std::size_t window_chars = 300;
  std::size_t stride_chars = 150;

  void check() const;
};

/// One sliding-window slice of a document.
struct Segment {
  std::string doc_id;
  std::size_t doc_index = 0;
  std::size_t window_start = 0;
  std::size_t window_end = 0;
  std::vector<Token> tokens;
  std::vector<std::size_t> entity_refs; // indices into Document::entities
  std::vector<std::size_t> heads;       // token index of each entity_ref
  std::vector<int> labels;              // label id per token, 0 = outside

  bool operator==(const Segment &) const = default;
};

struct SegmentReport {
  std::size_t segments_emitted = 0;
  std::size_t segments_excluded = 0;
  std::size_t unreachable_relations = 0;
  std::map<std::size_t, std::size_t> tokens_per_segment; // bucket start -> count

  SegmentReport &operator+=(const SegmentReport &other);
};

/// Window starts are 0, stride, 2*stride, ... until a window reaches the end
/// of the text. Each raw window [s, s+n) is shrunk to the tokens it contains
/// fully, so no token is split and the width never exceeds n. Windows holding
/// fewer than two entities are dropped. Entities of type OTHER are ignored.
/// Relations whose endpoints never share an emitted window are counted as
/// unreachable.
std::vector<Segment> make_segments(const Document &doc,
                                   const WindowConfig &cfg,
                                   SegmentReport *report = nullptr,
                                   std::size_t doc_index = 0);

/// Fills labels and heads. Throws ValidationError naming both ids when two
/// entities of the segment overlap.
void align_labels(Segment &segment, const Document &doc,
                  const SchemaProfile &schema);

/// Relation class ids: 0 is NULL_REL, then the schema's relation types, then
/// SAME_FRAME when frame augmentation is on.
class ClassMap {
public:
  ClassMap() = default;
  ClassMap(const SchemaProfile &schema, bool same_frame);

  std::size_t size() const { return names_.size(); }
  const std::string &name(int id) const { return names_.at(id); }
  const std::vector<std::string> &names() const { return names_; }
  /// -1 for unknown types.
  int id(std::string_view rtype) const;
  bool same_frame() const { return same_frame_; }

private:
  std::vector<std::string> names_;
  bool same_frame_ = false;
};

inline constexpr int kNullRel = 0;

struct PairTarget {
  std::size_t i = 0; // source head token
  std::size_t j = 0; // target head token
  int class_id = kNullRel;
  std::size_t source_entity = 0; // index into Document::entities
  std::size_t target_entity = 0;

  bool operator==(const PairTarget &) const = default;
};

/// One target per ordered pair of distinct entities, m*(m-1) in total.
/// Relation types missing from `classes` are ignored.
std::vector<PairTarget> build_pair_targets(const Segment &segment,
                                           const Document &doc,
                                           const ClassMap &classes);

/// Token vocabulary built from a training corpus. Id 0 is UNK and ids 1..4
/// are the entity markers used by the per-pair baseline.
class Vocabulary {
public:
  static constexpr int kUnk = 0;
  static constexpr int kMarkerSourceOpen = 1;
  static constexpr int kMarkerSourceClose = 2;
  static constexpr int kMarkerTargetOpen = 3;
  static constexpr int kMarkerTargetClose = 4;
  static constexpr int kReserved = 5;

  Vocabulary();
  static Vocabulary build(const std::vector<Document> &corpus);
  static Vocabulary from_words(const std::vector<std::string> &words);

  int id(std::string_view surface) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string> &words() const { return words_; }

  static std::string normalize(std::string_view surface);

private:
  void add(const std::string &w);
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// The model's training unit.
struct EncodedSegment {
  std::size_t doc_index = 0;
  std::size_t window_index = 0;
  std::vector<int> token_ids;
  std::vector<int> label_ids;
  std::vector<std::size_t> entity_refs;
  std::vector<std::size_t> heads;
  std::vector<std::pair<std::size_t, std::size_t>> entity_spans; // token ranges
  std::vector<PairTarget> targets;

  std::size_t entity_count() const { return entity_refs.size(); }
};

/// Segments, aligns and encodes a corpus in (document, window) order.
std::vector<EncodedSegment> encode_corpus(const std::vector<Document> &corpus,
                                          const SchemaProfile &schema,
                                          const Vocabulary &vocab,
                                          const ClassMap &classes,
                                          const WindowConfig &window,
                                          SegmentReport *report = nullptr);

} // namespace medre
