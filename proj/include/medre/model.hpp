// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "medre/optim.hpp"
#include "medre/windowing.hpp"

namespace medre {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t label_count = 0; // entity types + 1 for outside
  std::size_t num_classes = 0;
  std::size_t d_model = 64;
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 4;
  std::size_t ff_dim = 128;
  std::size_t max_seq_len = 512;
  std::size_t label_emb_dim = 32;
  std::size_t fusion_heads = 4;
  std::size_t relpos_emb_dim = 75;
  std::size_t hidden_dim = 256;
  std::size_t max_rel_dist = 128;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  std::size_t fused_dim() const { return d_model + label_emb_dim; }
  void check() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json &j);
};

/// Multi-head self-attention followed by a residual connection and layer
/// norm. Parameters live in the owner's store under `prefix`.
class AttentionBlock {
public:
  AttentionBlock() = default;
  AttentionBlock(ParamStore &store, const std::string &prefix,
                 std::size_t width, std::size_t heads, std::mt19937_64 &rng);
  Tensor forward(const Tensor &x, double dropout, bool training,
                 std::mt19937_64 &rng) const;

private:
  std::size_t heads_ = 1;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_, ln_g_, ln_b_;
};

/// Post-LN transformer encoder over token plus learned position embeddings.
class Encoder {
public:
  Encoder() = default;
  Encoder(ParamStore &store, const ModelConfig &cfg, std::mt19937_64 &rng);
  Tensor forward(std::span<const int> token_ids, bool training,
                 std::mt19937_64 &rng) const;

private:
  struct FeedForward {
    Tensor w1, b1, w2, b2, ln_g, ln_b;
  };
  ModelConfig cfg_;
  Tensor tok_emb_, pos_emb_;
  std::vector<AttentionBlock> attn_;
  std::vector<FeedForward> ff_;
};

/// Encoder, label fusion with one extra attention layer, and a pairwise head
/// over entity-head tokens with relative position embeddings. A segment costs
/// one encoder pass regardless of how many pairs it holds.
class PairwiseREModel {
public:
  explicit PairwiseREModel(ModelConfig cfg);
  PairwiseREModel(const PairwiseREModel &) = delete;
  PairwiseREModel &operator=(const PairwiseREModel &) = delete;

  const ModelConfig &config() const { return cfg_; }
  ParamStore &params() { return store_; }
  const ParamStore &params() const { return store_; }

  Tensor encode_tokens(std::span<const int> token_ids, bool training);
  Tensor fuse_and_attend(const Tensor &contextual,
                         std::span<const int> label_ids, bool training);
  Tensor pair_logits(const Tensor &fused,
                     std::span<const std::pair<std::size_t, std::size_t>> pairs,
                     bool training);
  /// Logits for every target of the segment, in target order.
  Tensor forward(const EncodedSegment &seg, bool training);

  std::uint64_t encoder_forwards() const { return encoder_forwards_; }
  void reset_counters() { encoder_forwards_ = 0; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

private:
  ModelConfig cfg_;
  ParamStore store_;
  std::mt19937_64 dropout_rng_;
  Encoder encoder_;
  Tensor label_emb_;
  AttentionBlock fusion_;
  Tensor relpos_emb_, dense_w_, dense_b_, cls_w_, cls_b_;
  std::uint64_t encoder_forwards_ = 0;
};

/// Mean cross-entropy over the materialised pairs; NULL_REL rows are scaled
/// by `null_weight`.
Tensor masked_loss(const Tensor &logits, std::span<const PairTarget> targets,
                   double null_weight = 1.0);

/// Per-pair sentence duplication: the segment is re-encoded once per
/// candidate pair with marker tokens around both entities.
class BaselinePairModel {
public:
  explicit BaselinePairModel(ModelConfig cfg);
  BaselinePairModel(const BaselinePairModel &) = delete;
  BaselinePairModel &operator=(const BaselinePairModel &) = delete;

  const ModelConfig &config() const { return cfg_; }
  ParamStore &params() { return store_; }

  /// Logits [1 x num_classes] for the ordered pair (source, target), given
  /// as indices into the segment's entity list.
  Tensor forward(const EncodedSegment &seg, std::size_t source,
                 std::size_t target, bool training);
  /// Mean loss over every pair target of the segment.
  Tensor segment_loss(const EncodedSegment &seg, double null_weight,
                      bool training);
  /// Training form of segment_loss: backpropagates scale * loss one pair at
  /// a time, so memory stays at one encoder graph. Returns the loss.
  double backprop_segment(const EncodedSegment &seg, double null_weight,
                          double scale);

  std::uint64_t encoder_forwards() const { return encoder_forwards_; }
  void reset_counters() { encoder_forwards_ = 0; }

private:
  ModelConfig cfg_;
  ParamStore store_;
  std::mt19937_64 dropout_rng_;
  Encoder encoder_;
  Tensor cls_w_, cls_b_;
  std::uint64_t encoder_forwards_ = 0;
};

/// Token stream with the four markers inserted; also returns the marker
/// positions in the new stream.
std::pair<std::vector<int>, std::vector<std::size_t>>
insert_markers(std::span<const int> token_ids,
               std::pair<std::size_t, std::size_t> source,
               std::pair<std::size_t, std::size_t> target);

/// Random segment of `seq` tokens with `entities` single-token entities
/// spread across it and random pair classes; the gradient-check fixture.
EncodedSegment synthetic_segment(const ModelConfig &cfg, std::size_t seq,
                                 std::size_t entities, std::uint64_t seed);

struct PredictedRelation {
  Relation relation; // arguments are entity ids of the input document
  double probability = 0.0;
  std::size_t window_index = 0;
};

/// Runs the model over every window of `doc` using its entity list as the
/// label source. NULL_REL is dropped; when overlapping windows disagree on a
/// pair, the most probable non-null class wins and ties go to the earlier
/// window. Relations are returned sorted by source and target offsets.
std::vector<PredictedRelation>
predict_relations(PairwiseREModel &model, const Document &doc,
                  const SchemaProfile &schema, const Vocabulary &vocab,
                  const ClassMap &classes, const WindowConfig &window);

/// Copy of `doc` with its relations replaced by the predictions (ids R1..).
Document apply_predictions(const Document &doc,
                           const std::vector<PredictedRelation> &preds);

} // namespace medre
