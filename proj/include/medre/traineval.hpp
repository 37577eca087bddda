// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "medre/frames.hpp"
#include "medre/model.hpp"

namespace medre {

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t epochs = 60;
  double peak_lr = 1e-4;
  double warmup_fraction = 0.1;
  WindowConfig window;
  bool frame_augmentation = false;
  std::uint64_t seed = 0;
  double null_weight = 1.0;

  void check() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json &j);
};

nlohmann::json profile_to_json(const SchemaProfile &p);
SchemaProfile profile_from_json(const nlohmann::json &j);

/// Everything needed to run a trained model: weights plus the vocabulary,
/// class map, schema and window it was trained with.
struct TrainedModel {
  std::unique_ptr<PairwiseREModel> model;
  Vocabulary vocab;
  ClassMap classes;
  SchemaProfile schema;
  TrainConfig train;

  nlohmann::json config_json() const;
  void save(const std::filesystem::path &path) const;
  static TrainedModel load(const std::filesystem::path &path);

  std::vector<PredictedRelation> predict(const Document &doc) const;
};

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::uint64_t forwards = 0; // cumulative encoder passes
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_seconds;
  std::size_t segments = 0;
  SegmentReport report;

  /// One JSON object per line: steps, then an epoch summary per epoch.
  std::string to_jsonl() const;
};

struct TrainResult {
  TrainedModel trained;
  TrainLog log;
};

/// Seeded per-epoch shuffle, batches of `batch_size` segments, mean loss per
/// batch, one Adam step per batch at the scheduled rate. Frame augmentation
/// trains on the complete SAME_FRAME graph of every frame. `on_step`, when
/// set, sees every step as it happens.
TrainResult train(const std::vector<Document> &corpus,
                  const SchemaProfile &schema, const ModelConfig &model_cfg,
                  const TrainConfig &cfg,
                  const std::function<void(const StepRecord &)> &on_step = {});

/// Same loop for the per-pair baseline; used for timing comparisons.
TrainLog train_baseline(const std::vector<Document> &corpus,
                        const SchemaProfile &schema,
                        const ModelConfig &model_cfg, const TrainConfig &cfg);

// ---- evaluation ----------------------------------------------------------

enum class MatchMode { Strict, Lenient };
const char *match_mode_name(MatchMode m);

struct PRF {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool precision_undefined = false; // no predictions; reported as 0
  bool recall_undefined = false;    // no gold; reported as 0

  void finalize();
};

struct EvalReport {
  MatchMode mode = MatchMode::Strict;
  std::map<std::string, PRF> per_type;
  PRF micro;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  MatchMode mode = MatchMode::Strict;
  bool include_same_frame = false;
  std::size_t threads = 1;
};

/// Documents are paired by id; a missing prediction counts all its gold
/// relations as misses. Within one document and relation type, predictions
/// and gold relations are paired by a maximum bipartite matching, so each
/// gold relation is credited at most once.
EvalReport evaluate(const std::vector<Document> &gold,
                    const std::vector<Document> &predicted,
                    const EvalOptions &opts = {});

/// Whether the argument entities of a predicted and a gold relation agree.
bool entities_match(const Entity &pred, const Entity &gold, MatchMode mode);

/// Share of gold frames reproduced exactly (drug plus link set) by some
/// predicted frame of the same document.
struct FrameAccuracy {
  std::size_t gold_frames = 0;
  std::size_t matched = 0;
  double accuracy() const {
    return gold_frames == 0 ? 0.0
                            : static_cast<double>(matched) /
                                  static_cast<double>(gold_frames);
  }
};
FrameAccuracy frame_exact_match(const std::vector<Document> &gold,
                                const std::vector<Document> &predicted,
                                const SchemaProfile &schema);

// ---- cost ----------------------------------------------------------------

struct CostReport {
  std::size_t segments = 0;
  std::uint64_t pairwise_forwards = 0; // analytic: S
  std::uint64_t baseline_forwards = 0; // analytic: sum m(m-1)
  double analytic_ratio = 0.0;
  std::uint64_t measured_pairwise_forwards = 0; // instrumented counters
  std::uint64_t measured_baseline_forwards = 0;
  double pairwise_seconds = 0.0;
  double baseline_seconds = 0.0;
  double measured_ratio = 0.0;
  std::size_t epochs = 0;

  nlohmann::json to_json() const;
};

/// Analytic forward counts, plus measured single-threaded training time of
/// both architectures over `cfg.epochs` epochs when `measure` is set.
CostReport cost_report(const std::vector<Document> &corpus,
                       const SchemaProfile &schema,
                       const ModelConfig &model_cfg, const TrainConfig &cfg,
                       bool measure);

// ---- end to end ------------------------------------------------------------

struct EndToEndResult {
  std::vector<Document> predicted;
  std::vector<FrameSet> frames;
  EvalReport strict;
  EvalReport lenient;
  bool evaluated = false;
};

/// Reads every `<id>.txt` of `text_dir` with entities from `<id>.ann` in
/// `entity_dir` (lax parsing, relations ignored) and predicts relations and
/// frames. Throws IoError listing the ids whose entity file is missing. When
/// `gold` is non-empty both matching modes are scored against it.
EndToEndResult end_to_end(const TrainedModel &trained,
                          const std::filesystem::path &text_dir,
                          const std::filesystem::path &entity_dir,
                          const std::vector<Document> &gold = {});

/// Predictions for already-loaded documents (entities taken as given).
std::vector<Document> predict_corpus(const TrainedModel &trained,
                                     const std::vector<Document> &docs);

} // namespace medre
