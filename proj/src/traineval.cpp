// SPDX-License-Identifier: Apache-2.0
#include "medre/traineval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "medre/checkpoint.hpp"
#include "medre/error.hpp"
#include "medre/standoff.hpp"

namespace medre {

void TrainConfig::check() const {
  if (batch_size == 0)
    throw ConfigError("train: batch_size must be >= 1");
  if (epochs == 0)
    throw ConfigError("train: epochs must be >= 1");
  if (!(peak_lr > 0.0))
    throw ConfigError("train: peak_lr must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw ConfigError("train: warmup_fraction must be in [0, 1]");
  if (!(null_weight > 0.0))
    throw ConfigError("train: null_weight must be > 0");
  window.check();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"peak_lr", peak_lr},
          {"warmup_fraction", warmup_fraction},
          {"window_chars", window.window_chars},
          {"stride_chars", window.stride_chars},
          {"frame_augmentation", frame_augmentation},
          {"seed", seed},
          {"null_weight", null_weight}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j) {
  TrainConfig c;
  try {
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.peak_lr = j.at("peak_lr").get<double>();
    c.warmup_fraction = j.at("warmup_fraction").get<double>();
    c.window.window_chars = j.at("window_chars").get<std::size_t>();
    c.window.stride_chars = j.at("stride_chars").get<std::size_t>();
    c.frame_augmentation = j.at("frame_augmentation").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.null_weight = j.at("null_weight").get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.check();
  return c;
}

nlohmann::json profile_to_json(const SchemaProfile &p) {
  return {{"name", p.name},
          {"entity_types", p.entity_types},
          {"relation_types", p.relation_types},
          {"attribute_types", p.attribute_types},
          {"drug_types", p.drug_types},
          {"non_frame_relations", p.non_frame_relations}};
}

SchemaProfile profile_from_json(const nlohmann::json &j) {
  SchemaProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    p.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    p.relation_types = j.at("relation_types").get<std::vector<std::string>>();
    p.attribute_types = j.at("attribute_types").get<std::vector<std::string>>();
    p.drug_types = j.at("drug_types").get<std::vector<std::string>>();
    p.non_frame_relations =
        j.at("non_frame_relations").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("schema in checkpoint: ") + e.what());
  }
  p.check();
  return p;
}

// ---- model bundle --------------------------------------------------------

nlohmann::json TrainedModel::config_json() const {
  return {{"format", "medre-pairwise"},
          {"model", model->config().to_json()},
          {"train", train.to_json()},
          {"schema", profile_to_json(schema)},
          {"vocabulary", vocab.words()},
          {"classes", classes.names()},
          {"same_frame", classes.same_frame()}};
}

void TrainedModel::save(const std::filesystem::path &path) const {
  write_checkpoint(path, config_json(), model->params());
}

TrainedModel TrainedModel::load(const std::filesystem::path &path) {
  const auto ck = read_checkpoint(path);
  const auto &c = ck.config;
  if (!c.contains("format") || c["format"] != "medre-pairwise")
    throw IoError(path.string() + ": not a pairwise model checkpoint");
  TrainedModel t;
  try {
    t.schema = profile_from_json(c.at("schema"));
    t.train = TrainConfig::from_json(c.at("train"));
    t.vocab = Vocabulary::from_words(
        c.at("vocabulary").get<std::vector<std::string>>());
    t.classes = ClassMap(t.schema, c.at("same_frame").get<bool>());
    if (t.classes.names() != c.at("classes").get<std::vector<std::string>>())
      throw IoError(path.string() + ": class list does not match the schema");
    t.model = std::make_unique<PairwiseREModel>(
        ModelConfig::from_json(c.at("model")));
  } catch (const nlohmann::json::exception &e) {
    throw IoError(path.string() + ": " + e.what());
  }
  load_into(ck, t.model->params());
  return t;
}

std::vector<PredictedRelation> TrainedModel::predict(const Document &doc) const {
  return predict_relations(*model, doc, schema, vocab, classes, train.window);
}

// ---- training --------------------------------------------------------------

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto &s : steps)
    out += nlohmann::json{{"step", s.step},
                          {"epoch", s.epoch},
                          {"lr", s.lr},
                          {"loss", s.loss},
                          {"forwards", s.forwards}}
               .dump() +
           "\n";
  for (std::size_t e = 0; e < epoch_seconds.size(); ++e)
    out += nlohmann::json{{"epoch_end", e}, {"seconds", epoch_seconds[e]}}
               .dump() +
           "\n";
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Prepared {
  std::vector<Document> docs;
  Vocabulary vocab;
  ClassMap classes;
  std::vector<EncodedSegment> segments;
  SegmentReport report;
  ModelConfig model_cfg;
};

Prepared prepare(const std::vector<Document> &corpus,
                 const SchemaProfile &schema, const ModelConfig &model_cfg,
                 const TrainConfig &cfg) {
  cfg.check();
  Prepared p;
  for (const auto &d : corpus)
    p.docs.push_back(cfg.frame_augmentation ? with_same_frame_edges(d, schema)
                                            : without_same_frame_edges(d));
  p.vocab = Vocabulary::build(p.docs);
  p.classes = ClassMap(schema, cfg.frame_augmentation);
  p.segments = encode_corpus(p.docs, schema, p.vocab, p.classes, cfg.window,
                             &p.report);
  if (p.segments.empty())
    throw ConfigError("train: no trainable segments (every window holds "
                      "fewer than two entities)");
  p.model_cfg = model_cfg;
  p.model_cfg.vocab_size = p.vocab.size();
  p.model_cfg.label_count = schema.label_count();
  p.model_cfg.num_classes = p.classes.size();
  p.model_cfg.seed = cfg.seed;
  return p;
}

// Shared loop: `batch_loss` returns the summed loss of one segment.
// `backprop(segment, scale)` backpropagates scale * loss and returns the
// unscaled loss. Gradients accumulate over the batch, so only one segment's
// graph is alive at a time.
template <typename BackpropFn, typename CounterFn>
TrainLog run_epochs(const Prepared &p, const TrainConfig &cfg,
                    ParamStore &store, BackpropFn backprop, CounterFn forwards,
                    const std::function<void(const StepRecord &)> &on_step) {
  TrainLog log;
  log.segments = p.segments.size();
  log.report = p.report;
  const std::size_t per_epoch =
      (p.segments.size() + cfg.batch_size - 1) / cfg.batch_size;
  const auto sched = LrSchedule::with_warmup_fraction(
      cfg.peak_lr, per_epoch * cfg.epochs, cfg.warmup_fraction);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(p.segments.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(e - b);
      double value = 0.0;
      for (std::size_t k = b; k < e; ++k)
        value += scale * backprop(p.segments[order[k]], scale);
      const double lr = lr_at(sched, step);
      adam_step(store, lr);
      StepRecord rec{step, epoch, lr, value, forwards()};
      if (on_step)
        on_step(rec);
      log.steps.push_back(rec);
      ++step;
    }
    log.epoch_seconds.push_back(seconds_since(t0));
  }
  return log;
}

} // namespace

TrainResult train(const std::vector<Document> &corpus,
                  const SchemaProfile &schema, const ModelConfig &model_cfg,
                  const TrainConfig &cfg,
                  const std::function<void(const StepRecord &)> &on_step) {
  auto p = prepare(corpus, schema, model_cfg, cfg);
  TrainResult r;
  r.trained.model = std::make_unique<PairwiseREModel>(p.model_cfg);
  auto &m = *r.trained.model;
  r.log = run_epochs(
      p, cfg, m.params(),
      [&](const EncodedSegment &s, double scale) {
        auto loss = masked_loss(m.forward(s, true), s.targets, cfg.null_weight);
        const double v = loss.item();
        ops::scale(loss, scale).backward();
        return v;
      },
      [&] { return m.encoder_forwards(); }, on_step);
  r.trained.vocab = std::move(p.vocab);
  r.trained.classes = std::move(p.classes);
  r.trained.schema = schema;
  r.trained.train = cfg;
  return r;
}

TrainLog train_baseline(const std::vector<Document> &corpus,
                        const SchemaProfile &schema,
                        const ModelConfig &model_cfg, const TrainConfig &cfg) {
  const auto p = prepare(corpus, schema, model_cfg, cfg);
  BaselinePairModel m(p.model_cfg);
  return run_epochs(
      p, cfg, m.params(),
      [&](const EncodedSegment &s, double scale) {
        return m.backprop_segment(s, cfg.null_weight, scale);
      },
      [&] { return m.encoder_forwards(); }, {});
}

// ---- evaluation ----------------------------------------------------------

const char *match_mode_name(MatchMode m) {
  return m == MatchMode::Strict ? "strict" : "lenient";
}

void PRF::finalize() {
  precision_undefined = tp + fp == 0;
  recall_undefined = tp + fn == 0;
  precision = precision_undefined
                  ? 0.0
                  : static_cast<double>(tp) / static_cast<double>(tp + fp);
  recall = recall_undefined
               ? 0.0
               : static_cast<double>(tp) / static_cast<double>(tp + fn);
  f1 = precision + recall > 0.0
           ? 2.0 * precision * recall / (precision + recall)
           : 0.0;
}

nlohmann::json EvalReport::to_json() const {
  auto row = [](const PRF &r) {
    return nlohmann::json{{"tp", r.tp},
                          {"fp", r.fp},
                          {"fn", r.fn},
                          {"support", r.tp + r.fn},
                          {"precision", r.precision},
                          {"recall", r.recall},
                          {"f1", r.f1},
                          {"precision_undefined", r.precision_undefined}};
  };
  nlohmann::json types = nlohmann::json::object();
  for (const auto &[t, r] : per_type)
    types[t] = row(r);
  return {{"mode", match_mode_name(mode)},
          {"per_type", types},
          {"micro", row(micro)}};
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "matching: " << match_mode_name(mode) << "\n";
  os << std::left << std::setw(24) << "type" << std::right << std::setw(8)
     << "P" << std::setw(8) << "R" << std::setw(8) << "F1" << std::setw(9)
     << "support" << "\n";
  auto line = [&](const std::string &name, const PRF &r) {
    os << std::left << std::setw(24) << name << std::right << std::fixed
       << std::setprecision(3) << std::setw(8) << r.precision << std::setw(8)
       << r.recall << std::setw(8) << r.f1 << std::setw(9) << r.tp + r.fn
       << (r.precision_undefined ? "  *" : "") << "\n";
  };
  for (const auto &[t, r] : per_type)
    line(t, r);
  line("micro", micro);
  os << "* no predictions of this type; precision reported as 0\n";
  return os.str();
}

bool entities_match(const Entity &pred, const Entity &gold, MatchMode mode) {
  if (pred.etype != gold.etype)
    return false;
  if (mode == MatchMode::Strict)
    return pred.start == gold.start && pred.end == gold.end;
  return pred.start < gold.end && gold.start < pred.end;
}

namespace {

// Kuhn's augmenting paths; `adj[p]` lists gold indices compatible with p.
std::size_t max_matching(const std::vector<std::vector<std::size_t>> &adj,
                         std::size_t gold_count) {
  std::vector<long> owner(gold_count, -1);
  std::size_t size = 0;
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t p) {
    for (auto g : adj[p]) {
      if (seen[g])
        continue;
      seen[g] = 1;
      if (owner[g] < 0 || augment(static_cast<std::size_t>(owner[g]))) {
        owner[g] = static_cast<long>(p);
        return true;
      }
    }
    return false;
  };
  for (std::size_t p = 0; p < adj.size(); ++p) {
    seen.assign(gold_count, 0);
    if (augment(p))
      ++size;
  }
  return size;
}

using TypeCounts = std::map<std::string, PRF>;

void score_document(const Document *gold, const Document *pred,
                    const EvalOptions &opts, TypeCounts &counts) {
  auto keep = [&](const Relation &r) {
    return opts.include_same_frame || r.rtype != kSameFrame;
  };
  std::map<std::string, std::vector<const Relation *>> g, p;
  if (gold)
    for (const auto &r : gold->relations)
      if (keep(r))
        g[r.rtype].push_back(&r);
  if (pred)
    for (const auto &r : pred->relations)
      if (keep(r))
        p[r.rtype].push_back(&r);
  std::set<std::string> types;
  for (const auto &[t, _] : g)
    types.insert(t);
  for (const auto &[t, _] : p)
    types.insert(t);
  for (const auto &t : types) {
    const auto &gs = g[t];
    const auto &ps = p[t];
    std::vector<std::vector<std::size_t>> adj(ps.size());
    for (std::size_t a = 0; a < ps.size(); ++a) {
      const Entity *ps_src = pred->find_entity(ps[a]->source);
      const Entity *ps_tgt = pred->find_entity(ps[a]->target);
      if (!ps_src || !ps_tgt)
        continue;
      for (std::size_t b = 0; b < gs.size(); ++b) {
        const Entity *gs_src = gold->find_entity(gs[b]->source);
        const Entity *gs_tgt = gold->find_entity(gs[b]->target);
        if (gs_src && gs_tgt && entities_match(*ps_src, *gs_src, opts.mode) &&
            entities_match(*ps_tgt, *gs_tgt, opts.mode))
          adj[a].push_back(b);
      }
    }
    const std::size_t tp = max_matching(adj, gs.size());
    auto &c = counts[t];
    c.tp += tp;
    c.fp += ps.size() - tp;
    c.fn += gs.size() - tp;
  }
}

} // namespace

EvalReport evaluate(const std::vector<Document> &gold,
                    const std::vector<Document> &predicted,
                    const EvalOptions &opts) {
  std::map<std::string, const Document *> pred_by_id;
  for (const auto &d : predicted)
    pred_by_id[d.doc_id] = &d;
  // Predictions for documents absent from gold are scored against nothing.
  std::vector<std::pair<const Document *, const Document *>> pairs;
  std::set<std::string> gold_ids;
  for (const auto &d : gold) {
    gold_ids.insert(d.doc_id);
    const auto it = pred_by_id.find(d.doc_id);
    pairs.emplace_back(&d, it == pred_by_id.end() ? nullptr : it->second);
  }
  for (const auto &d : predicted)
    if (!gold_ids.count(d.doc_id))
      pairs.emplace_back(nullptr, &d);

  const std::size_t threads =
      std::max<std::size_t>(1, std::min(opts.threads, pairs.size()));
  std::vector<TypeCounts> partial(threads);
  auto work = [&](std::size_t w) {
    for (std::size_t k = w; k < pairs.size(); k += threads)
      score_document(pairs[k].first, pairs[k].second, opts, partial[w]);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back(work, w);
    for (auto &t : pool)
      t.join();
  }
  EvalReport rep;
  rep.mode = opts.mode;
  for (const auto &part : partial)
    for (const auto &[t, c] : part) {
      auto &r = rep.per_type[t];
      r.tp += c.tp;
      r.fp += c.fp;
      r.fn += c.fn;
    }
  for (auto &[t, r] : rep.per_type) {
    r.finalize();
    rep.micro.tp += r.tp;
    rep.micro.fp += r.fp;
    rep.micro.fn += r.fn;
  }
  rep.micro.finalize();
  return rep;
}

FrameAccuracy frame_exact_match(const std::vector<Document> &gold,
                                const std::vector<Document> &predicted,
                                const SchemaProfile &schema) {
  using EntityKey = std::tuple<std::size_t, std::size_t, std::string>;
  using FrameKey =
      std::pair<EntityKey, std::set<std::pair<EntityKey, std::string>>>;
  auto keys = [&](const Document &doc) {
    std::multiset<FrameKey> out;
    auto ek = [&](const std::string &id) {
      const auto *e = doc.find_entity(id);
      return EntityKey{e->start, e->end, e->etype};
    };
    for (const auto &f : build_frames(doc, schema).frames) {
      FrameKey k;
      k.first = ek(f.drug);
      for (const auto &l : f.links)
        k.second.emplace(ek(l.attribute), l.rtype);
      out.insert(std::move(k));
    }
    return out;
  };
  std::map<std::string, const Document *> pred_by_id;
  for (const auto &d : predicted)
    pred_by_id[d.doc_id] = &d;
  FrameAccuracy acc;
  for (const auto &g : gold) {
    const auto gk = keys(g);
    acc.gold_frames += gk.size();
    const auto it = pred_by_id.find(g.doc_id);
    if (it == pred_by_id.end())
      continue;
    auto pk = keys(*it->second);
    for (const auto &k : gk) {
      const auto hit = pk.find(k);
      if (hit != pk.end()) {
        ++acc.matched;
        pk.erase(hit);
      }
    }
  }
  return acc;
}

// ---- cost ------------------------------------------------------------------

nlohmann::json CostReport::to_json() const {
  return {{"segments", segments},
          {"pairwise_forwards", pairwise_forwards},
          {"baseline_forwards", baseline_forwards},
          {"analytic_ratio", analytic_ratio},
          {"measured_pairwise_forwards", measured_pairwise_forwards},
          {"measured_baseline_forwards", measured_baseline_forwards},
          {"pairwise_seconds", pairwise_seconds},
          {"baseline_seconds", baseline_seconds},
          {"measured_ratio", measured_ratio},
          {"epochs", epochs}};
}

CostReport cost_report(const std::vector<Document> &corpus,
                       const SchemaProfile &schema,
                       const ModelConfig &model_cfg, const TrainConfig &cfg,
                       bool measure) {
  const auto p = prepare(corpus, schema, model_cfg, cfg);
  CostReport r;
  r.segments = p.segments.size();
  r.pairwise_forwards = p.segments.size();
  for (const auto &s : p.segments)
    r.baseline_forwards += s.entity_count() * (s.entity_count() - 1);
  r.analytic_ratio = static_cast<double>(r.baseline_forwards) /
                     static_cast<double>(r.pairwise_forwards);
  if (!measure)
    return r;
  r.epochs = cfg.epochs;
  auto t0 = Clock::now();
  const auto ours = train(corpus, schema, model_cfg, cfg);
  r.pairwise_seconds = seconds_since(t0);
  r.measured_pairwise_forwards = ours.log.steps.back().forwards;
  t0 = Clock::now();
  const auto base = train_baseline(corpus, schema, model_cfg, cfg);
  r.baseline_seconds = seconds_since(t0);
  r.measured_baseline_forwards = base.steps.back().forwards;
  r.measured_ratio = r.baseline_seconds / r.pairwise_seconds;
  return r;
}

// ---- end to end ------------------------------------------------------------

std::vector<Document> predict_corpus(const TrainedModel &trained,
                                     const std::vector<Document> &docs) {
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const auto &d : docs)
    out.push_back(apply_predictions(d, trained.predict(d)));
  return out;
}

EndToEndResult end_to_end(const TrainedModel &trained,
                          const std::filesystem::path &text_dir,
                          const std::filesystem::path &entity_dir,
                          const std::vector<Document> &gold) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(text_dir))
    throw IoError(text_dir.string() + ": not a directory");
  std::vector<fs::path> texts;
  for (const auto &e : fs::directory_iterator(text_dir))
    if (e.path().extension() == ".txt")
      texts.push_back(e.path());
  std::sort(texts.begin(), texts.end());
  std::vector<std::string> missing;
  for (const auto &t : texts)
    if (!fs::exists(entity_dir / (t.stem().string() + ".ann")))
      missing.push_back(t.stem().string());
  if (!missing.empty()) {
    std::string ids;
    for (const auto &m : missing)
      ids += (ids.empty() ? "" : ", ") + m;
    throw IoError("missing entity files for: " + ids);
  }
  std::vector<Document> docs;
  ParseOptions lax;
  lax.strict = false;
  for (const auto &t : texts) {
    auto doc = parse_standoff(read_file(t),
                              read_file(entity_dir / (t.stem().string() + ".ann")),
                              trained.schema, lax, t.stem().string());
    doc.relations.clear();
    docs.push_back(std::move(doc));
  }
  EndToEndResult r;
  r.predicted = predict_corpus(trained, docs);
  for (const auto &d : r.predicted) {
    auto fs = build_frames(d, trained.schema);
    fs.doc_id = d.doc_id;
    r.frames.push_back(std::move(fs));
  }
  if (!gold.empty()) {
    r.strict = evaluate(gold, r.predicted, {MatchMode::Strict, false, 1});
    r.lenient = evaluate(gold, r.predicted, {MatchMode::Lenient, false, 1});
    r.evaluated = true;
  }
  return r;
}

} // namespace medre
