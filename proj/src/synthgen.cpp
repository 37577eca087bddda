// SPDX-License-Identifier: Apache-2.0
#include "medre/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "medre/corpus_stats.hpp"
#include "medre/error.hpp"
#include "medre/schema.hpp"
#include "medre/standoff.hpp"
#include "medre/utf8.hpp"

namespace medre {

GenVocabulary GenVocabulary::defaults() {
  GenVocabulary v;
  v.drugs = {"tocilizumab", "aspirin",   "metformin",  "paracétamol",
             "amoxicilline", "warfarin", "lévothyroxine", "ibuprofen",
             "methotrexate", "prednisone", "héparine",  "ramipril",
             "furosémide",  "insulin",   "omeprazole", "rituximab"};
  v.drug_classes = {"anticoagulant", "corticoïdes", "antibiotic",
                    "bêta-bloquant", "statin"};
  v.routes = {"IV", "per os", "SC", "oral", "IM", "intraveineux"};
  v.frequencies = {"every 4 weeks", "every 2 weeks", "daily", "twice a day",
                   "2 fois par jour", "tous les jours", "every 8 hours",
                   "une fois par semaine"};
  v.dates = {"July", "October", "December", "12/03/2019", "janvier",
             "février", "March 2020", "15 août", "2018", "mai 2021"};
  v.relative_dates = {"at bedtime", "au coucher", "in the morning",
                      "le soir", "before meals"};
  v.dosages = {"1 tablet", "500 mg", "2 comprimés", "8 mg/kg", "10 mg",
               "1 g", "20 UI", "½ comprimé"};
  v.strengths = {"500 mg", "10 mg", "1 g", "20 mg", "0.5 mg"};
  v.forms = {"tablet", "capsule", "injection", "solution", "patch"};
  v.durations = {"7 days", "3 months", "2 semaines", "one year", "10 jours"};
  v.conditions = {"hypertension", "polyarthrite", "diabetes", "douleur",
                  "infection", "hypothyroïdie"};
  v.reactions = {"rash", "nausea", "hémorragie", "dizziness", "vomissements"};
  return v;
}

void GenConfig::check() const {
  auto rate = [](double r, const char *name) {
    if (!(r >= 0.0 && r <= 1.0))
      throw ConfigError(std::string("generate: ") + name + " must be in [0, 1]");
  };
  rate(multi_frame_rate, "multi_frame_rate");
  rate(context_relation_rate, "context_relation_rate");
  rate(coref_rate, "coref_rate");
  rate(french_rate, "french_rate");
  if (sentences_min == 0 || sentences_min > sentences_max)
    throw ConfigError("generate: need 1 <= sentences_min <= sentences_max");
  if (schema != "corp-hus" && schema != "n2c2")
    throw ConfigError("generate: no templates for schema '" + schema +
                      "' (expected corp-hus or n2c2)");
  const auto &v = vocab;
  for (const auto *t : {&v.drugs, &v.drug_classes, &v.routes, &v.frequencies,
                        &v.dates, &v.relative_dates, &v.dosages, &v.strengths,
                        &v.forms, &v.durations, &v.conditions, &v.reactions})
    if (t->empty())
      throw ConfigError("generate: vocabulary tables must be non-empty");
}

nlohmann::json GenConfig::to_json() const {
  return {{"seed", seed},
          {"doc_count", doc_count},
          {"sentences_min", sentences_min},
          {"sentences_max", sentences_max},
          {"schema", schema},
          {"multi_frame_rate", multi_frame_rate},
          {"context_relation_rate", context_relation_rate},
          {"coref_rate", coref_rate},
          {"french_rate", french_rate}};
}

namespace {

// Appends text and entities while tracking code-point offsets.
class Builder {
public:
  explicit Builder(Document &doc) : doc_(doc) {}

  void text(const std::string &s) {
    doc_.text += s;
    pos_ += utf8::length(s);
  }
  void space() {
    if (!doc_.text.empty() && doc_.text.back() != ' ' && doc_.text.back() != '\n')
      text(" ");
  }
  // Space-separated entity; returns its id.
  std::string entity(const std::string &etype, const std::string &surface) {
    space();
    Entity e;
    e.id = "T" + std::to_string(doc_.entities.size() + 1);
    e.etype = etype;
    e.start = pos_;
    text(surface);
    e.end = pos_;
    e.surface = surface;
    doc_.entities.push_back(e);
    return e.id;
  }
  void words(const std::string &s) {
    space();
    text(s);
  }
  void relation(const std::string &rtype, const std::string &source,
                const std::string &target) {
    doc_.relations.push_back({"", rtype, source, target});
  }
  void same_frame(const std::vector<std::string> &frame) {
    for (std::size_t a = 0; a < frame.size(); ++a)
      for (std::size_t b = a + 1; b < frame.size(); ++b)
        relation(std::string(kSameFrame), frame[a], frame[b]);
  }

private:
  Document &doc_;
  std::size_t pos_ = 0;
};

struct ContextKind {
  const char *rtype;
  const char *etype; // entity carrying the relation
  const char *en;    // lead-in words (may be empty)
  const char *fr;
  double weight;
};

// Rough corpus proportions of the contextual relations.
const std::vector<ContextKind> &context_kinds() {
  static const std::vector<ContextKind> k = {
      {"Start", "Date", "started on", "débuté le", 0.30},
      {"Stop", "Date", "stopped on", "arrêté le", 0.18},
      {"Ongoing", "Date", "ongoing since", "en cours depuis", 0.22},
      {"Duration_prescription", "Duration", "for", "pendant", 0.06},
      {"Administration_time", "Relative_Date", "", "", 0.03},
      {"Increase", "Context", "", "", 0.04},
      {"Decrease", "Context", "", "", 0.03},
      {"Negation", "Context", "", "", 0.04},
      {"Contraindicated", "Context", "", "", 0.03},
      {"Hypothetical", "Context", "", "", 0.04},
      {"Experiencer", "Context", "given to the", "donné à la", 0.01},
  };
  return k;
}

std::string context_word(const std::string &rtype, bool fr) {
  if (rtype == "Increase")
    return fr ? "augmenté" : "increased";
  if (rtype == "Decrease")
    return fr ? "diminué" : "decreased";
  if (rtype == "Negation")
    return fr ? "non pris" : "not taken";
  if (rtype == "Contraindicated")
    return fr ? "contre-indiqué" : "contraindicated";
  if (rtype == "Hypothetical")
    return fr ? "si besoin" : "if needed";
  return fr ? "mère" : "mother";
}

class Generator {
public:
  Generator(const GenConfig &cfg, std::mt19937_64 &rng)
      : cfg_(cfg), rng_(rng) {}

  Document document(const std::string &id) {
    Document doc;
    doc.doc_id = id;
    Builder b(doc);
    const auto n = std::uniform_int_distribution<std::size_t>(
        cfg_.sentences_min, cfg_.sentences_max)(rng_);
    for (std::size_t s = 0; s < n; ++s) {
      if (s > 0)
        b.text(coin(0.15) ? "\n" : " ");
      fr_ = coin(cfg_.french_rate);
      const bool multi = coin(cfg_.multi_frame_rate);
      if (cfg_.schema == "n2c2")
        multi ? n2c2_two_period(b) : n2c2_prescription(b);
      else if (multi)
        two_period(b);
      else
        prescription(b);
    }
    // The two periods share a pair of attributes.
    doc.relations = dedupe_relations(std::move(doc.relations));
    renumber_relations(doc.relations);
    return doc;
  }

private:
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  const std::string &pick(const std::vector<std::string> &t) {
    return t[std::uniform_int_distribution<std::size_t>(0, t.size() - 1)(rng_)];
  }
  const std::string &lead(const std::vector<std::string> &en,
                          const std::vector<std::string> &fr) {
    return pick(fr_ ? fr : en);
  }

  std::string drug_intro(Builder &b) {
    const auto &v = cfg_.vocab;
    if (coin(cfg_.coref_rate)) {
      const auto cls = b.entity("Drug_Class", pick(v.drug_classes));
      b.text(" :");
      const auto drug = b.entity("Drug", pick(v.drugs));
      b.relation("Coref", cls, drug);
      return drug;
    }
    b.words(lead({"Patient takes", "Continue", "Prescribed", "Treatment with"},
                 {"Le patient prend", "Poursuivre", "Prescription de",
                  "Traitement par"}));
    return b.entity("Drug", pick(v.drugs));
  }

  void prescription(Builder &b) {
    const auto &v = cfg_.vocab;
    const auto drug = drug_intro(b);
    std::vector<std::pair<const char *, const std::vector<std::string> *>>
        slots = {{"Dosage", &v.dosages},
                 {"Route", &v.routes},
                 {"Frequency", &v.frequencies}};
    bool any = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!coin(0.8) && (any || k + 1 < slots.size()))
        continue;
      any = true;
      b.relation("Refer_to", b.entity(slots[k].first, pick(*slots[k].second)),
                 drug);
    }
    if (coin(0.2)) {
      b.words(fr_ ? "pour" : "for");
      b.relation("Refer_to", b.entity("Condition", pick(v.conditions)), drug);
    }
    if (coin(cfg_.context_relation_rate))
      context(b, drug);
    b.text(".");
  }

  void context(Builder &b, const std::string &drug) {
    const auto &kinds = context_kinds();
    std::vector<double> w;
    for (const auto &k : kinds)
      w.push_back(k.weight);
    const auto &k = kinds[std::discrete_distribution<std::size_t>(
        w.begin(), w.end())(rng_)];
    const std::string etype = k.etype;
    b.text(",");
    const std::string leadin = fr_ ? k.fr : k.en;
    if (!leadin.empty())
      b.words(leadin);
    std::string surface;
    if (etype == "Date")
      surface = pick(cfg_.vocab.dates);
    else if (etype == "Duration")
      surface = pick(cfg_.vocab.durations);
    else if (etype == "Relative_Date")
      surface = pick(cfg_.vocab.relative_dates);
    else
      surface = context_word(k.rtype, fr_);
    b.relation(k.rtype, b.entity(etype, surface), drug);
  }

  // "tocilizumab IV every 4 weeks from July to October, then every 2 weeks
  // until December": the route and the middle date belong to both periods.
  void two_period(Builder &b) {
    const auto &v = cfg_.vocab;
    const auto drug = drug_intro(b);
    const auto route = b.entity("Route", pick(v.routes));
    const auto f1 = b.entity("Frequency", pick(v.frequencies));
    b.words(fr_ ? "du" : "from");
    const auto d1 = b.entity("Date", pick(v.dates));
    b.words(fr_ ? "au" : "to");
    const auto d2 = b.entity("Date", pick(v.dates));
    b.text(",");
    b.words(fr_ ? "puis" : "then");
    const auto f2 = b.entity("Frequency", pick(v.frequencies));
    b.words(fr_ ? "jusqu'en" : "until");
    const auto d3 = b.entity("Date", pick(v.dates));
    b.text(".");
    for (const auto &a : {route, f1, d1, d2, f2, d3})
      b.relation("Refer_to", a, drug);
    b.same_frame({route, f1, d1, d2});
    b.same_frame({route, d2, f2, d3});
  }

  void n2c2_prescription(Builder &b) {
    const auto &v = cfg_.vocab;
    b.words(lead({"Patient takes", "Continue", "Started"},
                 {"Le patient prend", "Poursuivre", "Débuté"}));
    const auto drug = b.entity("Drug", pick(v.drugs));
    const std::vector<std::pair<const char *, const std::vector<std::string> *>>
        slots = {{"Strength", &v.strengths}, {"Form", &v.forms},
                 {"Dosage", &v.dosages},     {"Route", &v.routes},
                 {"Frequency", &v.frequencies}};
    bool any = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!coin(0.7) && (any || k + 1 < slots.size()))
        continue;
      any = true;
      const std::string t = slots[k].first;
      b.relation(t + "-Drug", b.entity(t, pick(*slots[k].second)), drug);
    }
    if (coin(cfg_.context_relation_rate)) {
      const int which = std::uniform_int_distribution<int>(0, 2)(rng_);
      if (which == 0) {
        b.words(fr_ ? "pendant" : "for");
        b.relation("Duration-Drug", b.entity("Duration", pick(v.durations)), drug);
      } else if (which == 1) {
        b.words(fr_ ? "pour" : "for");
        b.relation("Reason-Drug", b.entity("Reason", pick(v.conditions)), drug);
      } else {
        b.text(",");
        b.words(fr_ ? "a causé" : "caused");
        b.relation("ADE-Drug", b.entity("ADE", pick(v.reactions)), drug);
      }
    }
    b.text(".");
  }

  void n2c2_two_period(Builder &b) {
    const auto &v = cfg_.vocab;
    b.words(lead({"Patient takes", "Continue"}, {"Le patient prend", "Poursuivre"}));
    const auto drug = b.entity("Drug", pick(v.drugs));
    const auto s = b.entity("Strength", pick(v.strengths));
    const auto r = b.entity("Route", pick(v.routes));
    const auto f1 = b.entity("Frequency", pick(v.frequencies));
    b.words(fr_ ? "pendant" : "for");
    const auto d1 = b.entity("Duration", pick(v.durations));
    b.text(",");
    b.words(fr_ ? "puis" : "then");
    const auto f2 = b.entity("Frequency", pick(v.frequencies));
    b.words(fr_ ? "pendant" : "for");
    const auto d2 = b.entity("Duration", pick(v.durations));
    b.text(".");
    b.relation("Strength-Drug", s, drug);
    b.relation("Route-Drug", r, drug);
    b.relation("Frequency-Drug", f1, drug);
    b.relation("Duration-Drug", d1, drug);
    b.relation("Frequency-Drug", f2, drug);
    b.relation("Duration-Drug", d2, drug);
    b.same_frame({s, r, f1, d1});
    b.same_frame({s, r, f2, d2});
  }

  const GenConfig &cfg_;
  std::mt19937_64 &rng_;
  bool fr_ = false;
};

} // namespace

GeneratedCorpus generate_corpus(const GenConfig &cfg) {
  cfg.check();
  const auto schema = builtin_profile(cfg.schema);
  GeneratedCorpus out;
  std::mt19937_64 rng(cfg.seed);
  Generator gen(cfg, rng);
  const int width = std::max<int>(
      4, static_cast<int>(std::to_string(cfg.doc_count).size()));
  for (std::size_t d = 0; d < cfg.doc_count; ++d) {
    std::string num = std::to_string(d + 1);
    num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
    auto doc = gen.document("doc" + num);
    const auto violations = validate_document(doc, schema);
    if (!violations.empty())
      throw ValidationError(violations.front().rule, violations.front().id,
                            "generator produced an invalid document " +
                                doc.doc_id + ": " + violations.front().message);
    out.frames.push_back(build_frames(doc, schema));
    out.docs.push_back(std::move(doc));
  }
  return out;
}

std::pair<std::vector<Document>, std::vector<Document>>
corpus_split(const std::vector<Document> &corpus, double train_fraction,
             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("split: train fraction must be in (0, 1)");
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(corpus.size())));
  std::pair<std::vector<Document>, std::vector<Document>> out;
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k < n_train ? out.first : out.second).push_back(corpus[idx[k]]);
  return out;
}

void write_generated(const std::filesystem::path &dir,
                     const GeneratedCorpus &corpus, const GenConfig &cfg) {
  std::filesystem::create_directories(dir);
  for (const auto &doc : corpus.docs)
    write_document(dir, doc);
  const auto stats = corpus_stats(corpus.docs, builtin_profile(cfg.schema));
  nlohmann::json m = {{"seed", cfg.seed},
                      {"config", cfg.to_json()},
                      {"stats",
                       {{"documents", stats.doc_count},
                        {"entities", stats.entity_count},
                        {"entity_total", stats.entity_total},
                        {"relations", stats.relation_count},
                        {"relation_total", stats.relation_total},
                        {"drugs", stats.drugs},
                        {"multi_frame_drugs", stats.multi_frame_drugs},
                        {"frames", stats.frames}}}};
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

} // namespace medre
