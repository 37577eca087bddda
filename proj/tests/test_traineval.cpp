// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "medre/checkpoint.hpp"
#include "medre/error.hpp"
#include "medre/standoff.hpp"
#include "medre/synthgen.hpp"
#include "medre/traineval.hpp"
#include "oracles.hpp"

using namespace medre;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_model = 16;
  c.encoder_layers = 1;
  c.encoder_heads = 2;
  c.ff_dim = 16;
  c.max_seq_len = 320;
  c.label_emb_dim = 8;
  c.relpos_emb_dim = 8;
  c.hidden_dim = 16;
  c.dropout = 0.0;
  return c;
}

TrainConfig quick_train(std::size_t epochs, std::uint64_t seed = 1) {
  TrainConfig t;
  t.epochs = epochs;
  t.peak_lr = 3e-3;
  t.seed = seed;
  return t;
}

std::vector<Document> small_corpus(std::uint64_t seed, std::size_t docs,
                                   double multi = 0.04) {
  GenConfig g;
  g.seed = seed;
  g.doc_count = docs;
  g.multi_frame_rate = multi;
  return generate_corpus(g).docs;
}

// Text of `n` space-separated drug/route pairs, so every window holds
// exactly the entities placed in it.
Document pairs_doc(const std::string &id, std::size_t entities_per_group,
                   std::size_t groups) {
  Document d;
  d.doc_id = id;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    if (g > 0) {
      const std::string gap(400, ' ');
      d.text += gap;
      pos += gap.size();
    }
    for (std::size_t e = 0; e < entities_per_group; ++e) {
      const std::string w = e == 0 ? "aspirin" : "IV";
      if (e > 0) {
        d.text += ' ';
        ++pos;
      }
      d.entities.push_back({"T" + std::to_string(d.entities.size() + 1),
                            e == 0 ? "Drug" : "Route", pos, pos + w.size(), w});
      d.text += w;
      pos += w.size();
    }
  }
  return d;
}

} // namespace

TEST_CASE("one segment and one epoch make exactly one step") {
  const std::vector<Document> corpus = {pairs_doc("d", 2, 1)};
  auto r = train(corpus, corp_hus_profile(), tiny_model(), quick_train(1));
  CHECK(r.log.segments == 1);
  CHECK(r.log.steps.size() == 1);
  CHECK(r.log.steps[0].forwards == 1);
  CHECK(r.log.epoch_seconds.size() == 1);
}

TEST_CASE("no trainable segments") {
  const std::vector<Document> corpus = {pairs_doc("d", 1, 3)};
  CHECK_THROWS_AS(train(corpus, corp_hus_profile(), tiny_model(), quick_train(1)),
                  ConfigError);
  auto bad = quick_train(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(small_corpus(1, 2), corp_hus_profile(), tiny_model(), bad),
                  ConfigError);
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
  const auto corpus = small_corpus(3, 4);
  auto mc = tiny_model();
  mc.dropout = 0.1;
  const auto a = train(corpus, corp_hus_profile(), mc, quick_train(2, 5));
  const auto b = train(corpus, corp_hus_profile(), mc, quick_train(2, 5));
  const auto c = train(corpus, corp_hus_profile(), mc, quick_train(2, 6));
  const auto bytes = encode_checkpoint(a.trained.config_json(),
                                       a.trained.model->params());
  CHECK(bytes == encode_checkpoint(b.trained.config_json(),
                                   b.trained.model->params()));
  CHECK(bytes != encode_checkpoint(c.trained.config_json(),
                                   c.trained.model->params()));

  const auto path = std::filesystem::temp_directory_path() / "medre_ckpt_test.bin";
  a.trained.save(path);
  const auto loaded = TrainedModel::load(path);
  std::filesystem::remove(path);
  CHECK(loaded.classes.names() == a.trained.classes.names());
  CHECK(loaded.vocab.words() == a.trained.vocab.words());
  for (const auto &doc : corpus) {
    const auto p = a.trained.predict(doc), q = loaded.predict(doc);
    REQUIRE(p.size() == q.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(p[k].relation == q[k].relation);
      CHECK(p[k].probability == q[k].probability);
    }
  }
}

TEST_CASE("run log lines are JSON") {
  const auto r = train(small_corpus(4, 2), corp_hus_profile(), tiny_model(),
                       quick_train(2));
  std::istringstream in(r.log.to_jsonl());
  std::string line;
  std::size_t steps = 0, epochs = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    steps += j.contains("step");
    epochs += j.contains("epoch_end");
  }
  CHECK(steps == r.log.steps.size());
  CHECK(epochs == 2);
}

TEST_CASE("evaluation identities") {
  const auto gold = small_corpus(5, 20);
  for (auto mode : {MatchMode::Strict, MatchMode::Lenient}) {
    const auto rep = evaluate(gold, gold, {mode, false, 1});
    CHECK(rep.micro.precision == 1.0);
    CHECK(rep.micro.recall == 1.0);
    CHECK(rep.micro.f1 == 1.0);
    CHECK(rep.per_type.count(std::string(kSameFrame)) == 0);
  }
  std::vector<Document> empty = gold;
  for (auto &d : empty)
    d.relations.clear();
  const auto rep = evaluate(gold, empty);
  CHECK(rep.micro.precision == 0.0);
  CHECK(rep.micro.precision_undefined);
  CHECK(rep.micro.recall == 0.0);
  CHECK(rep.micro.f1 == 0.0);
  CHECK(rep.to_table().find("micro") != std::string::npos);
  CHECK(rep.to_json()["micro"]["precision_undefined"] == true);

  // Missing documents count as misses, never as errors.
  const std::vector<Document> none;
  CHECK(evaluate(gold, none).micro.fn == evaluate(gold, empty).micro.fn);
}

TEST_CASE("evaluation matches a brute-force matcher") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Document> gold, pred;
    const int docs = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int d = 0; d < docs; ++d) {
      gold.push_back(testing::random_instance(rng, "d" + std::to_string(d), nullptr));
      pred.push_back(testing::random_instance(rng, "d" + std::to_string(d), &gold.back()));
    }
    double strict_f1 = 0.0;
    for (auto mode : {MatchMode::Strict, MatchMode::Lenient}) {
      const auto rep = evaluate(gold, pred, {mode, false, static_cast<std::size_t>(1 + trial % 3)});
      const auto ref = testing::brute_eval(gold, pred, mode);
      std::size_t tp = 0, fp = 0, fn = 0;
      for (const auto &[t, c] : ref) {
        REQUIRE(rep.per_type.count(t));
        CHECK(rep.per_type.at(t).tp == c.tp);
        CHECK(rep.per_type.at(t).fp == c.fp);
        CHECK(rep.per_type.at(t).fn == c.fn);
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
      }
      CHECK(rep.per_type.size() == ref.size());
      CHECK(rep.micro.tp == tp);
      CHECK(rep.micro.fp == fp);
      CHECK(rep.micro.fn == fn);
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
      CHECK(rep.micro.f1 == (p + r > 0 ? 2 * p * r / (p + r) : 0.0));
      if (mode == MatchMode::Strict)
        strict_f1 = rep.micro.f1;
      else
        CHECK(strict_f1 <= rep.micro.f1);
    }
  }
}

TEST_CASE("frame exact match") {
  const auto gold = small_corpus(6, 30, 0.5);
  const auto schema = corp_hus_profile();
  CHECK(frame_exact_match(gold, gold, schema).accuracy() == 1.0);
  std::vector<Document> flat;
  for (const auto &d : gold)
    flat.push_back(without_same_frame_edges(d));
  const auto acc = frame_exact_match(gold, flat, schema);
  CHECK(acc.gold_frames > 0);
  CHECK(acc.accuracy() < 1.0);
  CHECK(acc.accuracy() > 0.0);
}

TEST_CASE("cost report counts") {
  const auto schema = corp_hus_profile();
  const std::vector<Document> twos = {pairs_doc("a", 2, 3), pairs_doc("b", 2, 2)};
  auto r = cost_report(twos, schema, tiny_model(), quick_train(1), false);
  // Overlapping windows may both hold a group; each copy is one segment.
  CHECK(r.segments >= 5);
  CHECK(r.baseline_forwards == 2 * r.segments);
  CHECK(r.analytic_ratio == 2.0);
  const std::vector<Document> sixes = {pairs_doc("a", 6, 2)};
  r = cost_report(sixes, schema, tiny_model(), quick_train(1), false);
  CHECK(r.baseline_forwards == 30 * r.segments);
  CHECK(r.analytic_ratio == 30.0);

  const auto corpus = small_corpus(8, 3);
  r = cost_report(corpus, schema, tiny_model(), quick_train(2), true);
  CHECK(r.measured_pairwise_forwards == 2 * r.pairwise_forwards);
  CHECK(r.measured_baseline_forwards == 2 * r.baseline_forwards);
  CHECK(r.pairwise_seconds > 0.0);
  CHECK(r.baseline_seconds > 0.0);
}

TEST_CASE("end to end") {
  namespace fs = std::filesystem;
  const auto schema = corp_hus_profile();
  const auto corpus = small_corpus(10, 8);
  const auto trained = train(corpus, schema, tiny_model(), quick_train(8)).trained;
  const auto root = fs::temp_directory_path() / "medre_e2e_test";
  fs::remove_all(root);
  fs::create_directories(root / "text");
  fs::create_directories(root / "ents");
  for (const auto &d : corpus) {
    write_file_atomic(root / "text" / (d.doc_id + ".txt"), d.text);
    Document ents = d;
    ents.relations.clear();
    write_file_atomic(root / "ents" / (d.doc_id + ".ann"),
                      serialize_standoff(ents).second);
  }
  const auto e2e = end_to_end(trained, root / "text", root / "ents", corpus);
  CHECK(e2e.evaluated);
  const auto direct =
      evaluate(corpus, predict_corpus(trained, corpus), {MatchMode::Strict, false, 1});
  CHECK(e2e.strict.to_json() == direct.to_json());
  CHECK(e2e.strict.micro.f1 <= e2e.lenient.micro.f1);
  CHECK(e2e.frames.size() == corpus.size());

  // 10% of entities deleted: recall cannot exceed the gold-entity run.
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    const auto dropped = root / ("drop" + std::to_string(seed));
    fs::create_directories(dropped);
    for (const auto &d : corpus) {
      Document ents = d;
      ents.relations.clear();
      std::vector<Entity> kept;
      for (const auto &e : ents.entities)
        if (!std::bernoulli_distribution(0.1)(rng))
          kept.push_back(e);
      ents.entities = kept;
      write_file_atomic(dropped / (d.doc_id + ".ann"),
                        serialize_standoff(ents).second);
    }
    const auto lossy = end_to_end(trained, root / "text", dropped, corpus);
    CHECK(lossy.strict.micro.recall <= e2e.strict.micro.recall);
  }

  const auto empty = root / "empty";
  fs::create_directories(empty);
  for (const auto &d : corpus)
    write_file_atomic(empty / (d.doc_id + ".ann"), "");
  const auto none = end_to_end(trained, root / "text", empty, corpus);
  for (const auto &d : none.predicted)
    CHECK(d.relations.empty());
  CHECK(none.strict.micro.f1 == 0.0);

  fs::remove(root / "ents" / (corpus[2].doc_id + ".ann"));
  fs::remove(root / "ents" / (corpus[5].doc_id + ".ann"));
  try {
    end_to_end(trained, root / "text", root / "ents");
    FAIL("expected an error");
  } catch (const IoError &e) {
    const std::string msg = e.what();
    CHECK(msg.find(corpus[2].doc_id) != std::string::npos);
    CHECK(msg.find(corpus[5].doc_id) != std::string::npos);
  }
  fs::remove_all(root);
}
