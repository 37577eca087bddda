// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "medre/document.hpp"

namespace medre {

struct FrameLink {
  std::string attribute; // entity id
  std::string rtype;

  bool operator==(const FrameLink &) const = default;
};

/// One regimen unit: a drug mention plus the attributes describing a single
/// period of its administration. Only the drug is mandatory.
struct Frame {
  std::string drug;
  std::vector<FrameLink> links;

  bool operator==(const Frame &) const = default;
};

struct FrameSet {
  std::string doc_id;
  std::vector<Frame> frames;

  bool operator==(const FrameSet &) const = default;

  /// Drugs that trigger two or more frames.
  std::size_t multi_frame_drugs() const;
  std::size_t drugs() const;
};

/// Groups each drug's attributes into frames.
///
/// Vertices are the drug's attributes, edges the SAME_FRAME relations among
/// them. Without any such edge all attributes form one frame; otherwise every
/// maximal clique is a frame, so an attribute shared between periods (the
/// route, a boundary date) lands in each frame it belongs to. A drug without
/// attributes yields one empty frame. SAME_FRAME edges joining attributes that
/// share no drug are reported and ignored.
///
/// Frames are ordered by (drug start, earliest attribute start); links inside
/// a frame by attribute start.
FrameSet decode_frames(const std::vector<Entity> &entities,
                       const std::vector<Relation> &relations,
                       const SchemaProfile &schema,
                       std::vector<Violation> *violations = nullptr);

FrameSet build_frames(const Document &doc, const SchemaProfile &schema,
                      std::vector<Violation> *violations = nullptr);

/// One attribute->drug relation per link, plus, when `include_same_frame` is
/// set, a SAME_FRAME edge for every unordered attribute pair of each frame.
/// Pairs repeated across frames are emitted once per frame; use
/// dedupe_relations before storing them in a Document.
std::vector<Relation> frames_to_relations(const FrameSet &fs,
                                          bool include_same_frame);

/// Replaces the document's SAME_FRAME edges with the complete graph of every
/// frame built from its current relations.
Document with_same_frame_edges(const Document &doc,
                               const SchemaProfile &schema);

/// The document without SAME_FRAME edges.
Document without_same_frame_edges(const Document &doc);

} // namespace medre
