// SPDX-License-Identifier: Apache-2.0
#include "medre/frames.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace medre {

namespace {

using Adjacency = std::vector<std::vector<bool>>;

// Bron-Kerbosch with pivoting; graphs here have a handful of vertices.
void maximal_cliques(const Adjacency &adj, std::vector<int> r,
                     std::vector<int> p, std::vector<int> x,
                     std::vector<std::vector<int>> &out) {
  if (p.empty() && x.empty()) {
    out.push_back(std::move(r));
    return;
  }
  int pivot = p.empty() ? x.front() : p.front();
  std::size_t best = 0;
  for (int u : p) {
    std::size_t deg = 0;
    for (int v : p)
      deg += adj[u][v] ? 1 : 0;
    if (deg >= best) {
      best = deg;
      pivot = u;
    }
  }
  const auto candidates = p;
  for (int v : candidates) {
    if (adj[pivot][v])
      continue;
    std::vector<int> r2 = r, p2, x2;
    r2.push_back(v);
    for (int u : p)
      if (adj[v][u])
        p2.push_back(u);
    for (int u : x)
      if (adj[v][u])
        x2.push_back(u);
    maximal_cliques(adj, std::move(r2), std::move(p2), std::move(x2), out);
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

} // namespace

std::size_t FrameSet::multi_frame_drugs() const {
  std::map<std::string, int> per_drug;
  for (const auto &f : frames)
    ++per_drug[f.drug];
  return static_cast<std::size_t>(std::count_if(
      per_drug.begin(), per_drug.end(), [](auto &kv) { return kv.second >= 2; }));
}

std::size_t FrameSet::drugs() const {
  std::set<std::string> ids;
  for (const auto &f : frames)
    ids.insert(f.drug);
  return ids.size();
}

FrameSet decode_frames(const std::vector<Entity> &entities,
                       const std::vector<Relation> &relations,
                       const SchemaProfile &schema,
                       std::vector<Violation> *violations) {
  std::map<std::string, const Entity *> by_id;
  for (const auto &e : entities)
    by_id[e.id] = &e;
  auto report = [&](std::string rule, std::string id, std::string msg) {
    if (violations)
      violations->push_back({std::move(rule), std::move(id), std::move(msg)});
  };

  // drug id -> attribute id -> link type (first one wins)
  std::map<std::string, std::map<std::string, std::string>> links;
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto &r : relations) {
    const auto src = by_id.find(r.source);
    const auto dst = by_id.find(r.target);
    if (src == by_id.end() || dst == by_id.end())
      continue;
    if (r.rtype == kSameFrame) {
      if (r.source != r.target)
        edges.insert(std::minmax(r.source, r.target));
      continue;
    }
    if (!schema.is_frame_relation(r.rtype) ||
        !schema.is_drug(dst->second->etype) ||
        !schema.is_attribute(src->second->etype))
      continue;
    auto &slot = links[r.target];
    const auto [it, inserted] = slot.emplace(r.source, r.rtype);
    if (!inserted && it->second != r.rtype)
      report("conflicting link types", r.id,
             "relation " + r.id + " gives " + r.source + " a second type for " +
                 r.target);
  }

  for (const auto &[a, b] : edges) {
    bool shared = false;
    for (const auto &[drug, attrs] : links)
      if (attrs.count(a) && attrs.count(b)) {
        shared = true;
        break;
      }
    if (!shared)
      report("cross-drug same-frame edge", a + "-" + b,
             "SAME_FRAME edge " + a + "-" + b +
                 " joins attributes of different drugs; ignored");
  }

  struct Keyed {
    std::size_t drug_start;
    std::vector<std::size_t> attr_starts;
    Frame frame;
  };
  std::vector<Keyed> keyed;
  for (const auto &e : entities) {
    if (!schema.is_drug(e.etype))
      continue;
    std::vector<const Entity *> attrs;
    std::map<std::string, std::string> types;
    if (const auto it = links.find(e.id); it != links.end()) {
      types = it->second;
      for (const auto &[aid, t] : it->second)
        attrs.push_back(by_id.at(aid));
    }
    std::sort(attrs.begin(), attrs.end(), [](const Entity *x, const Entity *y) {
      return std::tie(x->start, x->end, x->id) < std::tie(y->start, y->end, y->id);
    });
    const int n = static_cast<int>(attrs.size());
    Adjacency adj(n, std::vector<bool>(n, false));
    bool any_edge = false;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (edges.count(std::minmax(attrs[i]->id, attrs[j]->id))) {
          adj[i][j] = adj[j][i] = true;
          any_edge = true;
        }

    std::vector<std::vector<int>> groups;
    if (!any_edge) {
      std::vector<int> all(n);
      for (int i = 0; i < n; ++i)
        all[i] = i;
      groups.push_back(std::move(all));
    } else {
      std::vector<int> p(n);
      for (int i = 0; i < n; ++i)
        p[i] = i;
      maximal_cliques(adj, {}, std::move(p), {}, groups);
    }
    for (auto &g : groups) {
      std::sort(g.begin(), g.end());
      Keyed k;
      k.drug_start = e.start;
      k.frame.drug = e.id;
      for (int idx : g) {
        k.frame.links.push_back({attrs[idx]->id, types.at(attrs[idx]->id)});
        k.attr_starts.push_back(attrs[idx]->start);
      }
      keyed.push_back(std::move(k));
    }
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed &x, const Keyed &y) {
    if (x.drug_start != y.drug_start)
      return x.drug_start < y.drug_start;
    if (x.frame.drug != y.frame.drug)
      return x.frame.drug < y.frame.drug;
    return x.attr_starts < y.attr_starts;
  });
  FrameSet fs;
  for (auto &k : keyed)
    fs.frames.push_back(std::move(k.frame));
  return fs;
}

FrameSet build_frames(const Document &doc, const SchemaProfile &schema,
                      std::vector<Violation> *violations) {
  auto fs = decode_frames(doc.entities, doc.relations, schema, violations);
  fs.doc_id = doc.doc_id;
  return fs;
}

std::vector<Relation> frames_to_relations(const FrameSet &fs,
                                          bool include_same_frame) {
  std::vector<Relation> out;
  for (const auto &f : fs.frames)
    for (const auto &l : f.links)
      out.push_back({"", l.rtype, l.attribute, f.drug});
  if (include_same_frame) {
    for (const auto &f : fs.frames)
      for (std::size_t i = 0; i < f.links.size(); ++i)
        for (std::size_t j = i + 1; j < f.links.size(); ++j)
          out.push_back({"", std::string(kSameFrame), f.links[i].attribute,
                         f.links[j].attribute});
  }
  renumber_relations(out);
  return out;
}

Document without_same_frame_edges(const Document &doc) {
  Document out = doc;
  std::erase_if(out.relations,
                [](const Relation &r) { return r.rtype == kSameFrame; });
  renumber_relations(out.relations);
  return out;
}

Document with_same_frame_edges(const Document &doc,
                               const SchemaProfile &schema) {
  Document out = doc;
  const auto fs = build_frames(doc, schema);
  std::vector<Relation> rels;
  for (const auto &r : doc.relations)
    if (r.rtype != kSameFrame)
      rels.push_back(r);
  for (auto &r : frames_to_relations(fs, true))
    if (r.rtype == kSameFrame)
      rels.push_back(std::move(r));
  out.relations = dedupe_relations(std::move(rels));
  renumber_relations(out.relations);
  return out;
}

} // namespace medre
