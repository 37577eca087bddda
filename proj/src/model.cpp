// SPDX-License-Identifier: Apache-2.0
#include "medre/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "medre/error.hpp"

namespace medre {

void ModelConfig::check() const {
  auto positive = [](std::size_t v, const char *name) {
    if (v == 0)
      throw ConfigError(std::string("model: ") + name + " must be > 0");
  };
  positive(vocab_size, "vocab_size");
  positive(label_count, "label_count");
  positive(d_model, "d_model");
  positive(encoder_layers, "encoder_layers");
  positive(encoder_heads, "encoder_heads");
  positive(ff_dim, "ff_dim");
  positive(max_seq_len, "max_seq_len");
  positive(label_emb_dim, "label_emb_dim");
  positive(fusion_heads, "fusion_heads");
  positive(relpos_emb_dim, "relpos_emb_dim");
  positive(hidden_dim, "hidden_dim");
  positive(max_rel_dist, "max_rel_dist");
  if (num_classes < 2)
    throw ConfigError("model: num_classes must be >= 2");
  if (d_model % encoder_heads != 0)
    throw ConfigError("model: d_model must be divisible by encoder_heads");
  if (fused_dim() % fusion_heads != 0)
    throw ConfigError(
        "model: d_model + label_emb_dim must be divisible by fusion_heads");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("model: dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},       {"label_count", label_count},
          {"num_classes", num_classes},     {"d_model", d_model},
          {"encoder_layers", encoder_layers}, {"encoder_heads", encoder_heads},
          {"ff_dim", ff_dim},               {"max_seq_len", max_seq_len},
          {"label_emb_dim", label_emb_dim}, {"fusion_heads", fusion_heads},
          {"relpos_emb_dim", relpos_emb_dim}, {"hidden_dim", hidden_dim},
          {"max_rel_dist", max_rel_dist},   {"dropout", dropout},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json &j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.label_count = j.at("label_count").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.encoder_heads = j.at("encoder_heads").get<std::size_t>();
    c.ff_dim = j.at("ff_dim").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.label_emb_dim = j.at("label_emb_dim").get<std::size_t>();
    c.fusion_heads = j.at("fusion_heads").get<std::size_t>();
    c.relpos_emb_dim = j.at("relpos_emb_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.max_rel_dist = j.at("max_rel_dist").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.check();
  return c;
}

namespace {

constexpr double kEmbeddingStd = 0.1;

Tensor dense_param(ParamStore &s, const std::string &name, std::size_t in,
                   std::size_t out, std::mt19937_64 &rng) {
  return s.add(name, {in, out}, xavier_uniform(in, out, rng));
}

Tensor zeros_param(ParamStore &s, const std::string &name, std::size_t n) {
  return s.add(name, {n}, std::vector<double>(n, 0.0));
}

Tensor ones_param(ParamStore &s, const std::string &name, std::size_t n) {
  return s.add(name, {n}, std::vector<double>(n, 1.0));
}

Tensor linear(const Tensor &x, const Tensor &w, const Tensor &b) {
  return ops::add(ops::matmul(x, w), b);
}

} // namespace

AttentionBlock::AttentionBlock(ParamStore &store, const std::string &prefix,
                               std::size_t width, std::size_t heads,
                               std::mt19937_64 &rng)
    : heads_(heads) {
  wq_ = dense_param(store, prefix + ".wq", width, width, rng);
  bq_ = zeros_param(store, prefix + ".bq", width);
  wk_ = dense_param(store, prefix + ".wk", width, width, rng);
  bk_ = zeros_param(store, prefix + ".bk", width);
  wv_ = dense_param(store, prefix + ".wv", width, width, rng);
  bv_ = zeros_param(store, prefix + ".bv", width);
  wo_ = dense_param(store, prefix + ".wo", width, width, rng);
  bo_ = zeros_param(store, prefix + ".bo", width);
  ln_g_ = ones_param(store, prefix + ".ln.g", width);
  ln_b_ = zeros_param(store, prefix + ".ln.b", width);
}

Tensor AttentionBlock::forward(const Tensor &x, double dropout, bool training,
                               std::mt19937_64 &rng) const {
  const std::size_t width = x.cols(), dh = width / heads_;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto q = linear(x, wq_, bq_);
  const auto k = linear(x, wk_, bk_);
  const auto v = linear(x, wv_, bv_);
  std::vector<Tensor> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const auto qh = ops::slice_cols(q, h * dh, dh);
    const auto kh = ops::slice_cols(k, h * dh, dh);
    const auto vh = ops::slice_cols(v, h * dh, dh);
    const auto p = ops::row_softmax(ops::scale(ops::matmul_nt(qh, kh), inv));
    outs.push_back(ops::matmul(p, vh));
  }
  auto attn = linear(heads_ == 1 ? outs[0] : ops::concat(outs), wo_, bo_);
  attn = ops::dropout(attn, dropout, training, rng);
  return ops::layer_norm(ops::add(x, attn), ln_g_, ln_b_);
}

Encoder::Encoder(ParamStore &store, const ModelConfig &cfg,
                 std::mt19937_64 &rng)
    : cfg_(cfg) {
  tok_emb_ = store.add("enc.tok_emb", {cfg.vocab_size, cfg.d_model},
                       normal_init(cfg.vocab_size * cfg.d_model, kEmbeddingStd, rng));
  pos_emb_ = store.add("enc.pos_emb", {cfg.max_seq_len, cfg.d_model},
                       normal_init(cfg.max_seq_len * cfg.d_model, kEmbeddingStd, rng));
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    attn_.emplace_back(store, p + ".attn", cfg.d_model, cfg.encoder_heads, rng);
    FeedForward f;
    f.w1 = dense_param(store, p + ".ff.w1", cfg.d_model, cfg.ff_dim, rng);
    f.b1 = zeros_param(store, p + ".ff.b1", cfg.ff_dim);
    f.w2 = dense_param(store, p + ".ff.w2", cfg.ff_dim, cfg.d_model, rng);
    f.b2 = zeros_param(store, p + ".ff.b2", cfg.d_model);
    f.ln_g = ones_param(store, p + ".ff.ln.g", cfg.d_model);
    f.ln_b = zeros_param(store, p + ".ff.ln.b", cfg.d_model);
    ff_.push_back(std::move(f));
  }
}

Tensor Encoder::forward(std::span<const int> token_ids, bool training,
                        std::mt19937_64 &rng) const {
  const std::size_t n = token_ids.size();
  if (n == 0)
    throw ShapeError("encode_tokens: empty sequence");
  if (n > cfg_.max_seq_len)
    throw ShapeError("encode_tokens: sequence of " + std::to_string(n) +
                     " tokens exceeds max_seq_len " +
                     std::to_string(cfg_.max_seq_len));
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i)
    positions[i] = static_cast<int>(i);
  auto x = ops::add(ops::embedding(tok_emb_, token_ids),
                    ops::embedding(pos_emb_, positions));
  x = ops::dropout(x, cfg_.dropout, training, rng);
  for (std::size_t l = 0; l < attn_.size(); ++l) {
    x = attn_[l].forward(x, cfg_.dropout, training, rng);
    const auto &f = ff_[l];
    auto h = linear(ops::gelu(linear(x, f.w1, f.b1)), f.w2, f.b2);
    h = ops::dropout(h, cfg_.dropout, training, rng);
    x = ops::layer_norm(ops::add(x, h), f.ln_g, f.ln_b);
  }
  return x;
}

PairwiseREModel::PairwiseREModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), dropout_rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.check();
  std::mt19937_64 rng(cfg_.seed);
  encoder_ = Encoder(store_, cfg_, rng);
  label_emb_ =
      store_.add("fuse.label_emb", {cfg_.label_count, cfg_.label_emb_dim},
                 normal_init(cfg_.label_count * cfg_.label_emb_dim,
                             kEmbeddingStd, rng));
  fusion_ = AttentionBlock(store_, "fuse.attn", cfg_.fused_dim(),
                           cfg_.fusion_heads, rng);
  const std::size_t rows = 2 * cfg_.max_rel_dist + 1;
  relpos_emb_ = store_.add("pair.relpos_emb", {rows, cfg_.relpos_emb_dim},
                           normal_init(rows * cfg_.relpos_emb_dim,
                                       kEmbeddingStd, rng));
  // Stored out x in so the three input blocks are column slices.
  const std::size_t in = 2 * cfg_.fused_dim() + cfg_.relpos_emb_dim;
  dense_w_ = store_.add("pair.dense.w", {cfg_.hidden_dim, in},
                        xavier_uniform(in, cfg_.hidden_dim, rng));
  dense_b_ = zeros_param(store_, "pair.dense.b", cfg_.hidden_dim);
  cls_w_ = store_.add("pair.cls.w", {cfg_.num_classes, cfg_.hidden_dim},
                      xavier_uniform(cfg_.hidden_dim, cfg_.num_classes, rng));
  cls_b_ = zeros_param(store_, "pair.cls.b", cfg_.num_classes);
}

Tensor PairwiseREModel::encode_tokens(std::span<const int> token_ids,
                                      bool training) {
  ++encoder_forwards_;
  return encoder_.forward(token_ids, training, dropout_rng_);
}

Tensor PairwiseREModel::fuse_and_attend(const Tensor &contextual,
                                        std::span<const int> label_ids,
                                        bool training) {
  if (label_ids.size() != contextual.rows())
    throw ShapeError("fuse_and_attend: " + std::to_string(label_ids.size()) +
                     " labels for " + std::to_string(contextual.rows()) +
                     " tokens");
  const auto z =
      ops::concat({contextual, ops::embedding(label_emb_, label_ids)});
  return fusion_.forward(z, cfg_.dropout, training, dropout_rng_);
}

Tensor PairwiseREModel::pair_logits(
    const Tensor &fused,
    std::span<const std::pair<std::size_t, std::size_t>> pairs,
    bool training) {
  const std::size_t seq = fused.rows(), w = cfg_.fused_dim();
  if (pairs.empty())
    return Tensor(Shape{0, cfg_.num_classes});
  std::vector<std::size_t> is, js;
  std::vector<int> rel;
  const auto r = static_cast<long>(cfg_.max_rel_dist);
  for (const auto &[i, j] : pairs) {
    if (i >= seq || j >= seq)
      throw ShapeError("pair_logits: pair (" + std::to_string(i) + ", " +
                       std::to_string(j) + ") outside sequence of " +
                       std::to_string(seq));
    if (i == j)
      throw ShapeError("pair_logits: pair (" + std::to_string(i) + ", " +
                       std::to_string(j) + ") is not two distinct tokens");
    is.push_back(i);
    js.push_back(j);
    const long d =
        std::clamp(static_cast<long>(j) - static_cast<long>(i), -r, r);
    rel.push_back(static_cast<int>(d + r));
  }
  // dense(concat(u_i, u_j, rel)) split into its three column blocks, so each
  // token is projected once rather than once per pair.
  const auto wi = ops::slice_cols(dense_w_, 0, w);
  const auto wj = ops::slice_cols(dense_w_, w, w);
  const auto wr = ops::slice_cols(dense_w_, 2 * w, cfg_.relpos_emb_dim);
  const auto pi = ops::matmul_nt(fused, wi);
  const auto pj = ops::matmul_nt(fused, wj);
  const auto pr = ops::matmul_nt(ops::embedding(relpos_emb_, rel), wr);
  auto h = ops::add(ops::add(ops::gather_rows(pi, is), ops::gather_rows(pj, js)),
                    pr);
  h = ops::gelu(ops::add(h, dense_b_));
  h = ops::dropout(h, cfg_.dropout, training, dropout_rng_);
  return ops::add(ops::matmul_nt(h, cls_w_), cls_b_);
}

Tensor PairwiseREModel::forward(const EncodedSegment &seg, bool training) {
  const auto ctx = encode_tokens(seg.token_ids, training);
  const auto fused = fuse_and_attend(ctx, seg.label_ids, training);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(seg.targets.size());
  for (const auto &t : seg.targets)
    pairs.emplace_back(t.i, t.j);
  return pair_logits(fused, pairs, training);
}

Tensor masked_loss(const Tensor &logits, std::span<const PairTarget> targets,
                   double null_weight) {
  if (targets.empty())
    throw ShapeError("masked_loss: no pair targets");
  if (logits.rows() != targets.size())
    throw ShapeError("masked_loss: " + std::to_string(logits.rows()) +
                     " logit rows for " + std::to_string(targets.size()) +
                     " targets");
  std::vector<int> cls(targets.size());
  std::vector<double> weights;
  for (std::size_t k = 0; k < targets.size(); ++k)
    cls[k] = targets[k].class_id;
  if (null_weight != 1.0) {
    weights.resize(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k)
      weights[k] = cls[k] == kNullRel ? null_weight : 1.0;
  }
  return ops::cross_entropy(logits, cls, weights);
}

std::pair<std::vector<int>, std::vector<std::size_t>>
insert_markers(std::span<const int> token_ids,
               std::pair<std::size_t, std::size_t> source,
               std::pair<std::size_t, std::size_t> target) {
  auto bad = [&](std::pair<std::size_t, std::size_t> s) {
    return s.first >= s.second || s.second > token_ids.size();
  };
  if (bad(source) || bad(target))
    throw ShapeError("insert_markers: entity span outside the segment");
  if (source.first < target.second && target.first < source.second)
    throw ShapeError("insert_markers: entity spans overlap");
  // (position, marker id) sorted so insertions happen left to right; a close
  // marker goes after its span's last token.
  std::vector<std::pair<std::size_t, int>> marks = {
      {source.first, Vocabulary::kMarkerSourceOpen},
      {source.second, Vocabulary::kMarkerSourceClose},
      {target.first, Vocabulary::kMarkerTargetOpen},
      {target.second, Vocabulary::kMarkerTargetClose}};
  std::stable_sort(marks.begin(), marks.end(),
                   [](const auto &a, const auto &b) {
                     // a close at p precedes an open at p
                     if (a.first != b.first)
                       return a.first < b.first;
                     return (a.second % 2 == 0) && (b.second % 2 == 1);
                   });
  std::vector<int> out;
  std::vector<std::size_t> pos(4);
  out.reserve(token_ids.size() + 4);
  std::size_t m = 0;
  for (std::size_t t = 0; t <= token_ids.size(); ++t) {
    while (m < marks.size() && marks[m].first == t) {
      pos[static_cast<std::size_t>(marks[m].second - 1)] = out.size();
      out.push_back(marks[m].second);
      ++m;
    }
    if (t < token_ids.size())
      out.push_back(token_ids[t]);
  }
  return {std::move(out), std::move(pos)};
}

BaselinePairModel::BaselinePairModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), dropout_rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.check();
  std::mt19937_64 rng(cfg_.seed);
  encoder_ = Encoder(store_, cfg_, rng);
  cls_w_ = store_.add("base.cls.w", {cfg_.num_classes, cfg_.d_model},
                      xavier_uniform(cfg_.d_model, cfg_.num_classes, rng));
  cls_b_ = zeros_param(store_, "base.cls.b", cfg_.num_classes);
}

Tensor BaselinePairModel::forward(const EncodedSegment &seg,
                                  std::size_t source, std::size_t target,
                                  bool training) {
  if (source >= seg.entity_spans.size() || target >= seg.entity_spans.size())
    throw ShapeError("baseline_forward: entity index outside the segment");
  const auto [ids, marks] = insert_markers(seg.token_ids,
                                           seg.entity_spans[source],
                                           seg.entity_spans[target]);
  ++encoder_forwards_;
  const auto enc = encoder_.forward(ids, training, dropout_rng_);
  const auto pooled = ops::matmul(Tensor(Shape{1, 4}, 0.25),
                                  ops::gather_rows(enc, marks));
  return ops::add(ops::matmul_nt(pooled, cls_w_), cls_b_);
}

Tensor BaselinePairModel::segment_loss(const EncodedSegment &seg,
                                       double null_weight, bool training) {
  if (seg.targets.empty())
    throw ShapeError("baseline: segment has no pair targets");
  std::map<std::size_t, std::size_t> slot; // head token -> entity index
  for (std::size_t e = 0; e < seg.heads.size(); ++e)
    slot[seg.heads[e]] = e;
  Tensor total;
  for (std::size_t k = 0; k < seg.targets.size(); ++k) {
    const auto &t = seg.targets[k];
    const auto logits = forward(seg, slot.at(t.i), slot.at(t.j), training);
    const double w = t.class_id == kNullRel ? null_weight : 1.0;
    const std::vector<int> cls = {t.class_id};
    auto l = ops::scale(ops::cross_entropy(logits, cls), w);
    total = k == 0 ? l : ops::add(total, l);
  }
  return ops::scale(total, 1.0 / static_cast<double>(seg.targets.size()));
}

double BaselinePairModel::backprop_segment(const EncodedSegment &seg,
                                          double null_weight, double scale) {
  if (seg.targets.empty())
    throw ShapeError("baseline: segment has no pair targets");
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t e = 0; e < seg.heads.size(); ++e)
    slot[seg.heads[e]] = e;
  const double n = static_cast<double>(seg.targets.size());
  double total = 0.0;
  for (const auto &t : seg.targets) {
    const auto logits = forward(seg, slot.at(t.i), slot.at(t.j), true);
    const double w = t.class_id == kNullRel ? null_weight : 1.0;
    const std::vector<int> cls = {t.class_id};
    auto l = ops::scale(ops::cross_entropy(logits, cls), w);
    total += l.item() / n;
    ops::scale(l, scale / n).backward();
  }
  return total;
}

EncodedSegment synthetic_segment(const ModelConfig &cfg, std::size_t seq,
                                 std::size_t entities, std::uint64_t seed) {
  if (entities < 2 || entities > seq)
    throw ConfigError("synthetic segment: need 2 <= entities <= seq");
  std::mt19937_64 rng(seed);
  auto draw = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  EncodedSegment s;
  for (std::size_t t = 0; t < seq; ++t) {
    s.token_ids.push_back(static_cast<int>(draw(0, cfg.vocab_size - 1)));
    s.label_ids.push_back(0);
  }
  for (std::size_t e = 0; e < entities; ++e) {
    const std::size_t head = e * seq / entities;
    s.entity_refs.push_back(e);
    s.heads.push_back(head);
    s.entity_spans.emplace_back(head, head + 1);
    s.label_ids[head] =
        cfg.label_count > 1 ? static_cast<int>(draw(1, cfg.label_count - 1)) : 0;
  }
  for (std::size_t a = 0; a < entities; ++a)
    for (std::size_t b = 0; b < entities; ++b)
      if (a != b)
        s.targets.push_back({s.heads[a], s.heads[b],
                             static_cast<int>(draw(0, cfg.num_classes - 1)), a,
                             b});
  return s;
}

std::vector<PredictedRelation>
predict_relations(PairwiseREModel &model, const Document &doc,
                  const SchemaProfile &schema, const Vocabulary &vocab,
                  const ClassMap &classes, const WindowConfig &window) {
  Document bare = doc;
  bare.relations.clear();
  const std::vector<Document> one = {bare};
  const auto segs = encode_corpus(one, schema, vocab, classes, window);
  NoGradGuard guard;
  struct Best {
    int cls;
    double prob;
    std::size_t window;
  };
  std::map<std::pair<std::size_t, std::size_t>, Best> best;
  for (const auto &seg : segs) {
    const auto probs = ops::row_softmax(model.forward(seg, false));
    const std::size_t c = probs.cols();
    for (std::size_t k = 0; k < seg.targets.size(); ++k) {
      int arg = 0;
      for (std::size_t q = 1; q < c; ++q)
        if (probs.at(k, q) > probs.at(k, static_cast<std::size_t>(arg)))
          arg = static_cast<int>(q);
      if (arg == kNullRel)
        continue;
      const double p = probs.at(k, static_cast<std::size_t>(arg));
      const auto key = std::make_pair(seg.targets[k].source_entity,
                                      seg.targets[k].target_entity);
      auto it = best.find(key);
      // Windows arrive in order, so a strict comparison keeps the earlier
      // window on ties.
      if (it == best.end())
        best.emplace(key, Best{arg, p, seg.window_index});
      else if (p > it->second.prob)
        it->second = Best{arg, p, seg.window_index};
    }
  }
  std::vector<PredictedRelation> out;
  for (const auto &[key, b] : best) {
    PredictedRelation pr;
    pr.relation.rtype = classes.name(b.cls);
    pr.relation.source = doc.entities[key.first].id;
    pr.relation.target = doc.entities[key.second].id;
    pr.probability = b.prob;
    pr.window_index = b.window;
    out.push_back(std::move(pr));
  }
  auto offset = [&](const std::string &id) {
    const auto *e = doc.find_entity(id);
    return std::make_pair(e->start, e->end);
  };
  std::stable_sort(out.begin(), out.end(), [&](const auto &a, const auto &b) {
    return std::make_tuple(offset(a.relation.source),
                           offset(a.relation.target), a.relation.rtype) <
           std::make_tuple(offset(b.relation.source),
                           offset(b.relation.target), b.relation.rtype);
  });
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k].relation.id = "R" + std::to_string(k + 1);
  return out;
}

Document apply_predictions(const Document &doc,
                           const std::vector<PredictedRelation> &preds) {
  Document out = doc;
  out.relations.clear();
  for (const auto &p : preds)
    out.relations.push_back(p.relation);
  renumber_relations(out.relations);
  return out;
}

} // namespace medre
