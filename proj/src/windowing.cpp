// SPDX-License-Identifier: Apache-2.0
#include "medre/windowing.hpp"

#include <algorithm>
#include <set>

#include "medre/error.hpp"
#include "medre/utf8.hpp"

namespace medre {

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0 || c == 0x202F || c == 0x2009;
}

bool is_punct(char32_t c) {
  return c < 0x80 && ((c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
                      (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E));
}

} // namespace

std::vector<Token> tokenize(std::string_view text) {
  const auto cps = utf8::decode(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t b = i;
    if (c == U'\n' || is_punct(c)) {
      ++i;
    } else {
      while (i < cps.size() && cps[i] != U'\n' && !is_space(cps[i]) &&
             !is_punct(cps[i]))
        ++i;
    }
    out.push_back({utf8::encode(std::u32string_view(cps).substr(b, i - b)), b, i});
  }
  return out;
}

void WindowConfig::check() const {
  if (window_chars == 0)
    throw ConfigError("window size must be positive");
  if (stride_chars == 0 || stride_chars > window_chars)
    throw ConfigError("stride must satisfy 0 < stride <= window (got " +
                      std::to_string(stride_chars) + " for window " +
                      std::to_string(window_chars) + ")");
}

SegmentReport &SegmentReport::operator+=(const SegmentReport &other) {
  segments_emitted += other.segments_emitted;
  segments_excluded += other.segments_excluded;
  unreachable_relations += other.unreachable_relations;
  for (const auto &[k, v] : other.tokens_per_segment)
    tokens_per_segment[k] += v;
  return *this;
}

std::vector<Segment> make_segments(const Document &doc,
                                   const WindowConfig &cfg,
                                   SegmentReport *report,
                                   std::size_t doc_index) {
  cfg.check();
  const auto tokens = tokenize(doc.text);
  const std::size_t len = doc.text_length();

  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < doc.entities.size(); ++k)
    if (doc.entities[k].etype != kOtherType)
      candidates.push_back(k);

  std::vector<Segment> out;
  SegmentReport local;
  std::set<std::pair<std::string, std::string>> together;
  for (std::size_t s = 0; s < len; s += cfg.stride_chars) {
    const std::size_t raw_end = std::min(s + cfg.window_chars, len);
    const auto first = std::lower_bound(
        tokens.begin(), tokens.end(), s,
        [](const Token &t, std::size_t v) { return t.start < v; });
    auto last = first;
    while (last != tokens.end() && last->end <= raw_end)
      ++last;

    Segment seg;
    seg.doc_id = doc.doc_id;
    seg.doc_index = doc_index;
    seg.tokens.assign(first, last);
    if (!seg.tokens.empty()) {
      seg.window_start = seg.tokens.front().start;
      seg.window_end = seg.tokens.back().end;
      for (std::size_t k : candidates) {
        const auto &e = doc.entities[k];
        if (e.start >= seg.window_start && e.end <= seg.window_end)
          seg.entity_refs.push_back(k);
      }
    } else {
      seg.window_start = seg.window_end = s;
    }

    if (seg.entity_refs.size() >= 2) {
      for (std::size_t a : seg.entity_refs)
        for (std::size_t b : seg.entity_refs)
          if (a != b)
            together.emplace(doc.entities[a].id, doc.entities[b].id);
      ++local.segments_emitted;
      ++local.tokens_per_segment[seg.tokens.size() / 16 * 16];
      out.push_back(std::move(seg));
    } else {
      ++local.segments_excluded;
    }
    if (s + cfg.window_chars >= len)
      break;
  }
  for (const auto &r : doc.relations)
    if (!together.count({r.source, r.target}))
      ++local.unreachable_relations;
  if (report)
    *report += local;
  return out;
}

void align_labels(Segment &segment, const Document &doc,
                  const SchemaProfile &schema) {
  const auto &toks = segment.tokens;
  segment.labels.assign(toks.size(), 0);
  segment.heads.assign(segment.entity_refs.size(), 0);
  std::vector<std::size_t> owner(toks.size(), SIZE_MAX);
  for (std::size_t r = 0; r < segment.entity_refs.size(); ++r) {
    const auto &e = doc.entities[segment.entity_refs[r]];
    const int label = schema.label_id(e.etype).value_or(0);
    bool found = false;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (toks[t].end <= e.start || toks[t].start >= e.end)
        continue;
      if (owner[t] != SIZE_MAX) {
        const auto &other = doc.entities[segment.entity_refs[owner[t]]];
        throw ValidationError("overlapping entities", e.id,
                              "entities " + other.id + " and " + e.id +
                                  " overlap");
      }
      owner[t] = r;
      segment.labels[t] = label;
      if (!found) {
        segment.heads[r] = t;
        found = true;
      }
    }
    if (!found)
      throw ValidationError("empty entity", e.id,
                            "entity " + e.id + " covers no token");
  }
}

ClassMap::ClassMap(const SchemaProfile &schema, bool same_frame)
    : same_frame_(same_frame) {
  names_.push_back("NULL_REL");
  for (const auto &r : schema.relation_types)
    names_.push_back(r);
  if (same_frame)
    names_.push_back(std::string(kSameFrame));
}

int ClassMap::id(std::string_view rtype) const {
  for (std::size_t k = 1; k < names_.size(); ++k)
    if (names_[k] == rtype)
      return static_cast<int>(k);
  return -1;
}

std::vector<PairTarget> build_pair_targets(const Segment &segment,
                                           const Document &doc,
                                           const ClassMap &classes) {
  std::map<std::pair<std::string, std::string>, const Relation *> gold;
  for (const auto &r : doc.relations) {
    if (classes.id(r.rtype) < 0)
      continue;
    const auto [it, inserted] = gold.emplace(std::pair(r.source, r.target), &r);
    if (!inserted && it->second->rtype != r.rtype)
      throw ValidationError("conflicting relations", r.id,
                            "relations " + it->second->id + " and " + r.id +
                                " give different types to " + r.source +
                                " -> " + r.target);
  }
  std::vector<PairTarget> out;
  const auto m = segment.entity_refs.size();
  out.reserve(m * (m > 0 ? m - 1 : 0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b)
        continue;
      PairTarget t;
      t.i = segment.heads.at(a);
      t.j = segment.heads.at(b);
      t.source_entity = segment.entity_refs[a];
      t.target_entity = segment.entity_refs[b];
      const auto it = gold.find({doc.entities[t.source_entity].id,
                                 doc.entities[t.target_entity].id});
      t.class_id = it == gold.end() ? kNullRel : classes.id(it->second->rtype);
      out.push_back(t);
    }
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char *w : {"<unk>", "<e1>", "</e1>", "<e2>", "</e2>"})
    add(w);
}

std::string Vocabulary::normalize(std::string_view surface) {
  std::string out(surface);
  for (auto &c : out)
    if (c >= 'A' && c <= 'Z')
      c = static_cast<char>(c - 'A' + 'a');
  return out;
}

void Vocabulary::add(const std::string &w) {
  if (index_.emplace(w, static_cast<int>(words_.size())).second)
    words_.push_back(w);
}

Vocabulary Vocabulary::build(const std::vector<Document> &corpus) {
  Vocabulary v;
  for (const auto &doc : corpus)
    for (const auto &t : tokenize(doc.text))
      v.add(normalize(t.surface));
  return v;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string> &words) {
  Vocabulary v;
  if (words.size() < kReserved)
    throw ConfigError("vocabulary is missing its reserved entries");
  for (std::size_t k = kReserved; k < words.size(); ++k)
    v.add(words[k]);
  if (v.size() != words.size())
    throw ConfigError("vocabulary contains duplicate words");
  return v;
}

int Vocabulary::id(std::string_view surface) const {
  const auto it = index_.find(normalize(surface));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<EncodedSegment> encode_corpus(const std::vector<Document> &corpus,
                                          const SchemaProfile &schema,
                                          const Vocabulary &vocab,
                                          const ClassMap &classes,
                                          const WindowConfig &window,
                                          SegmentReport *report) {
  std::vector<EncodedSegment> out;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto &doc = corpus[d];
    auto segments = make_segments(doc, window, report, d);
    for (std::size_t w = 0; w < segments.size(); ++w) {
      auto &seg = segments[w];
      align_labels(seg, doc, schema);
      EncodedSegment enc;
      enc.doc_index = d;
      enc.window_index = w;
      for (const auto &t : seg.tokens)
        enc.token_ids.push_back(vocab.id(t.surface));
      enc.label_ids = seg.labels;
      enc.entity_refs = seg.entity_refs;
      enc.heads = seg.heads;
      for (std::size_t r = 0; r < seg.entity_refs.size(); ++r) {
        const auto &e = doc.entities[seg.entity_refs[r]];
        std::size_t b = seg.heads[r], t = b;
        while (t < seg.tokens.size() && seg.tokens[t].start < e.end)
          ++t;
        enc.entity_spans.emplace_back(b, t);
      }
      enc.targets = build_pair_targets(seg, doc, classes);
      out.push_back(std::move(enc));
    }
  }
  return out;
}

} // namespace medre
