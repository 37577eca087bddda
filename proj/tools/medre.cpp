// SPDX-License-Identifier: Apache-2.0
// medre: command-line front end for the relation extraction pipeline.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "medre/corpus_stats.hpp"
#include "medre/error.hpp"
#include "medre/frames.hpp"
#include "medre/gradcheck.hpp"
#include "medre/kernels.hpp"
#include "medre/standoff.hpp"
#include "medre/synthgen.hpp"
#include "medre/traineval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace medre;

namespace {

constexpr const char *kVersion = "0.1.0";
constexpr const char *kEnvPrefix = "MEDRE_";

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kSchema = 4,
  kValidation = 5,
  kIo = 6,
  kNumeric = 7,
  kCheckFailed = 8,
};

const char *kExitHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown flag, bad flag value)\n"
    "  3  configuration error (bad config key or value)\n"
    "  4  schema error (unknown profile, bad profile file)\n"
    "  5  annotation validation error\n"
    "  6  input/output error (missing path, unreadable file)\n"
    "  7  numeric or shape error\n"
    "  8  a check ran but failed (grad-check above threshold)\n"
    "Errors are also written to stderr as one JSON object.";

// Built-in configs selectable with --config NAME.
const std::map<std::string, std::string> &presets() {
  static const std::map<std::string, std::string> p = {
      {"small", "d-model = 16\nlayers = 1\nheads = 2\nff-dim = 16\n"
                "label-dim = 8\nrelpos-dim = 8\nhidden = 16\nseq = 12\n"
                "entities = 4\n"},
      {"full", "d-model = 64\nlayers = 2\nheads = 4\nff-dim = 128\n"
               "label-dim = 32\nrelpos-dim = 75\nhidden = 256\nseq = 24\n"
               "entities = 4\n"},
  };
  return p;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key = value lines; '#' starts a comment line.
std::vector<std::pair<std::string, std::string>>
read_config(const std::string &name_or_path) {
  std::string text;
  if (presets().count(name_or_path) && !fs::exists(name_or_path))
    text = presets().at(name_or_path);
  else if (fs::exists(name_or_path))
    text = read_file(name_or_path);
  else
    throw IoError("config file not found: " + name_or_path);
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name_or_path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::string env_name(const std::string &flag) {
  std::string e = kEnvPrefix;
  for (char c : flag)
    e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return e;
}

struct RunManifest {
  std::string subcommand;
  json config;
  json inputs = json::object();
  json outputs = json::object();
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const fs::path &dir) const {
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    json m = {{"subcommand", subcommand},
              {"config", config},
              {"inputs", inputs},
              {"outputs", outputs},
              {"seed", seed},
              {"tool_version", kVersion},
              {"wall_clock_seconds", secs}};
    fs::create_directories(dir);
    write_file_atomic(dir / "run_manifest.json", m.dump(2) + "\n");
  }
};

// Effective values of every option of a subcommand.
json echo_options(const CLI::App &sub) {
  json j = json::object();
  for (const auto *opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help")
      continue;
    const auto v = opt->as<std::string>();
    j[name] = v.empty() && opt->get_expected_min() == 0 ? "false" : v;
    if (opt->get_expected_min() == 0)
      j[name] = opt->count() > 0 && opt->as<bool>();
  }
  return j;
}

void require_dir(const fs::path &p, const char *what) {
  if (!fs::is_directory(p))
    throw IoError(std::string(what) + " directory not found: " + p.string());
}

std::vector<Document> load_dir(const fs::path &dir, const SchemaProfile &schema,
                               bool lax) {
  require_dir(dir, "data");
  ParseOptions opts;
  opts.strict = !lax;
  return load_corpus(dir, schema, opts);
}

json frames_json(const FrameSet &fs) {
  json frames = json::array();
  for (const auto &f : fs.frames) {
    json links = json::array();
    for (const auto &l : f.links)
      links.push_back({{"attribute", l.attribute}, {"rtype", l.rtype}});
    frames.push_back({{"drug", f.drug}, {"links", links}});
  }
  return {{"doc_id", fs.doc_id}, {"frames", frames}};
}

// Model-size flags shared by train, cost-report and grad-check.
struct ModelFlags {
  std::size_t d_model = 64, layers = 2, heads = 4, ff_dim = 128;
  std::size_t label_dim = 32, relpos_dim = 75, hidden = 256, max_rel = 128;
  double dropout = 0.1;

  void add(CLI::App *s, bool with_dropout = true) {
    s->add_option("--d-model", d_model, "Encoder width")->capture_default_str();
    s->add_option("--layers", layers, "Encoder layers")->capture_default_str();
    s->add_option("--heads", heads, "Encoder attention heads")->capture_default_str();
    s->add_option("--ff-dim", ff_dim, "Encoder feed-forward width")->capture_default_str();
    s->add_option("--label-dim", label_dim, "Entity label embedding size")
        ->capture_default_str();
    s->add_option("--relpos-dim", relpos_dim, "Relative position embedding size")
        ->capture_default_str();
    s->add_option("--hidden", hidden, "Pair classifier hidden layer size")
        ->capture_default_str();
    s->add_option("--max-rel-dist", max_rel, "Relative distance clip radius")
        ->capture_default_str();
    if (with_dropout)
      s->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
  }
  ModelConfig config() const {
    ModelConfig c;
    c.d_model = d_model;
    c.encoder_layers = layers;
    c.encoder_heads = heads;
    c.ff_dim = ff_dim;
    c.label_emb_dim = label_dim;
    c.relpos_emb_dim = relpos_dim;
    c.hidden_dim = hidden;
    c.max_rel_dist = max_rel;
    c.dropout = dropout;
    return c;
  }
};

struct TrainFlags {
  std::size_t batch = 10, epochs = 60, window = 300, stride = 0;
  double lr = 1e-4, warmup = 0.1, null_weight = 1.0;
  bool frames = false;

  void add(CLI::App *s, bool all = true) {
    s->add_option("--window", window, "Window width in characters")->capture_default_str();
    s->add_option("--stride", stride, "Window stride in characters (0 = window/2)")
        ->capture_default_str();
    s->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    s->add_option("--batch-size", batch, "Segments per optimiser step")
        ->capture_default_str();
    s->add_option("--lr", lr, "Peak learning rate")->capture_default_str();
    s->add_flag("--frame-augmentation", frames,
                "Train on SAME_FRAME edges between attributes of one frame");
    if (!all)
      return;
    s->add_option("--warmup", warmup, "Warmup share of all steps")->capture_default_str();
    s->add_option("--null-weight", null_weight, "Loss weight of NULL_REL pairs")
        ->capture_default_str();
  }
  TrainConfig config(std::uint64_t seed) const {
    TrainConfig t;
    t.batch_size = batch;
    t.epochs = epochs;
    t.peak_lr = lr;
    t.warmup_fraction = warmup;
    t.window.window_chars = window;
    t.window.stride_chars = stride == 0 ? std::max<std::size_t>(1, window / 2) : stride;
    t.frame_augmentation = frames;
    t.seed = seed;
    t.null_weight = null_weight;
    t.check();
    return t;
  }
};

int fail(int code, const std::string &kind, const std::string &message,
         const json &extra = json::object()) {
  json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  for (auto it = extra.begin(); it != extra.end(); ++it)
    j[it.key()] = it.value();
  std::cerr << j.dump() << "\n";
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Drug relation and frame extraction from clinical text", "medre"};
  app.footer(kExitHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string workdir = ".", config_path;
  app.add_option("--workdir", workdir,
                 "Directory that every relative path is resolved against");
  app.add_option("--config", config_path,
                 "key = value config file, or a preset name (small, full)");

  std::uint64_t seed = 0;
  std::string schema_name = "corp-hus";
  std::size_t threads = 1;
  bool lax = false;
  ModelFlags mf;
  TrainFlags tf;

  // generate
  auto *gen = app.add_subcommand("generate", "Write a synthetic annotated corpus");
  GenConfig gc;
  std::string gen_out;
  double split = 0.0;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--docs", gc.doc_count, "Number of documents")->capture_default_str();
  gen->add_option("--schema", schema_name, "corp-hus or n2c2")->capture_default_str();
  gen->add_option("--sentences-min", gc.sentences_min, "Fewest sentences per document")
      ->capture_default_str();
  gen->add_option("--sentences-max", gc.sentences_max, "Most sentences per document")
      ->capture_default_str();
  gen->add_option("--multi-frame-rate", gc.multi_frame_rate,
                  "Share of drugs given two frames")->capture_default_str();
  gen->add_option("--context-rate", gc.context_relation_rate,
                  "Share of prescriptions with a contextual relation")
      ->capture_default_str();
  gen->add_option("--coref-rate", gc.coref_rate,
                  "Share of drugs introduced by a drug class")->capture_default_str();
  gen->add_option("--french-rate", gc.french_rate,
                  "Share of sentences using French wording")->capture_default_str();
  gen->add_option("--split", split,
                  "Also write train/ and test/ with this train share (0 = off)")
      ->capture_default_str();
  gen->add_option("--threads", threads,
                  "Accepted for symmetry; generation is sequential so output "
                  "never depends on it")->capture_default_str();

  // train
  auto *trn = app.add_subcommand("train", "Train the pairwise model");
  std::string data, out;
  trn->add_option("--data", data, "Directory of .txt/.ann training documents")->required();
  trn->add_option("--out", out, "Output directory for checkpoint and run log")->required();
  trn->add_option("--schema", schema_name, "Profile name or profile file")
      ->capture_default_str();
  trn->add_option("--seed", seed, "Random seed")->capture_default_str();
  trn->add_flag("--lax", lax, "Map unknown entity types to OTHER instead of failing");
  tf.add(trn);
  mf.add(trn);

  // predict
  auto *pred = app.add_subcommand("predict", "Predict relations for annotated entities");
  std::string model_path;
  bool write_frames = false;
  pred->add_option("--data", data, "Directory of .txt/.ann documents (entities used)")
      ->required();
  pred->add_option("--model", model_path, "Checkpoint written by train")->required();
  pred->add_option("--out", out, "Output directory")->required();
  pred->add_flag("--frames", write_frames, "Also write frames.jsonl");
  pred->add_flag("--lax", lax, "Map unknown entity types to OTHER instead of failing");

  // evaluate
  auto *ev = app.add_subcommand("evaluate", "Score predicted relations against gold");
  std::string gold_dir, pred_dir, mode = "both", json_out;
  bool with_same_frame = false;
  ev->add_option("--gold", gold_dir, "Gold directory")->required();
  ev->add_option("--pred", pred_dir, "Prediction directory")->required();
  ev->add_option("--schema", schema_name, "Profile name or profile file")
      ->capture_default_str();
  ev->add_option("--mode", mode, "strict, lenient or both")
      ->check(CLI::IsMember({"strict", "lenient", "both"}))
      ->capture_default_str();
  ev->add_flag("--include-same-frame", with_same_frame, "Score SAME_FRAME edges too");
  bool score_frames = false;
  ev->add_flag("--frames", score_frames, "Also report frame exact-match accuracy");
  ev->add_option("--json", json_out, "Also write the report as JSON here");
  ev->add_option("--threads", threads, "Worker threads")->capture_default_str();
  ev->add_flag("--lax", lax, "Map unknown entity types to OTHER instead of failing");

  // end-to-end
  auto *e2e = app.add_subcommand("end-to-end",
                                 "Predict from texts plus NER entity files, then score");
  std::string text_dir, ent_dir;
  e2e->add_option("--text", text_dir, "Directory of .txt files")->required();
  e2e->add_option("--entities", ent_dir, "Directory of predicted-entity .ann files")
      ->required();
  e2e->add_option("--model", model_path, "Checkpoint written by train")->required();
  e2e->add_option("--gold", gold_dir, "Gold directory to score against");
  e2e->add_option("--out", out, "Output directory")->required();

  // convert-frames
  auto *conv = app.add_subcommand("convert-frames",
                                  "Add or strip SAME_FRAME edges and list frames");
  bool strip = false;
  conv->add_option("--data", data, "Input directory")->required();
  conv->add_option("--out", out, "Output directory")->required();
  conv->add_option("--schema", schema_name, "Profile name or profile file")
      ->capture_default_str();
  conv->add_flag("--strip", strip, "Remove SAME_FRAME edges instead of completing them");
  conv->add_flag("--lax", lax, "Map unknown entity types to OTHER instead of failing");

  // cost-report
  auto *cost = app.add_subcommand("cost-report",
                                  "Encoder passes and training time: pairwise vs per-pair");
  bool no_measure = false;
  std::size_t cost_docs = 50;
  cost->add_option("--data", data, "Corpus directory (default: generate one)");
  cost->add_option("--docs", cost_docs, "Generated corpus size when --data is absent")
      ->capture_default_str();
  cost->add_option("--seed", seed, "Random seed")->capture_default_str();
  cost->add_option("--schema", schema_name, "Profile name or profile file")
      ->capture_default_str();
  cost->add_flag("--no-measure", no_measure, "Analytic counts only");
  TrainFlags cost_tf;
  cost_tf.epochs = 1;
  cost_tf.add(cost, false);
  mf.add(cost);

  // grad-check
  auto *gcheck = app.add_subcommand("grad-check",
                                    "Finite-difference check of the full model gradient");
  std::size_t seq = 24, entities = 4, samples = 200;
  double eps = 1e-5, threshold = 1e-4;
  gcheck->add_option("--seq", seq, "Segment length in tokens")->capture_default_str();
  gcheck->add_option("--entities", entities, "Entities in the segment")->capture_default_str();
  gcheck->add_option("--samples", samples, "Coordinates sampled per parameter")
      ->capture_default_str();
  gcheck->add_option("--eps", eps, "Central difference step")->capture_default_str();
  gcheck->add_option("--threshold", threshold, "Largest accepted relative error")
      ->capture_default_str();
  gcheck->add_option("--seed", seed, "Random seed")->capture_default_str();
  mf.add(gcheck, false);

  // stats
  auto *st = app.add_subcommand("stats", "Corpus and segmentation statistics");
  std::size_t st_window = 300, st_stride = 0;
  st->add_option("--data", data, "Corpus directory")->required();
  st->add_option("--schema", schema_name, "Profile name or profile file")
      ->capture_default_str();
  st->add_option("--window", st_window, "Window width in characters")->capture_default_str();
  st->add_option("--stride", st_stride, "Window stride (0 = window/2)")->capture_default_str();
  st->add_flag("--lax", lax, "Map unknown entity types to OTHER instead of failing");

  for (auto *s : app.get_subcommands({}))
    s->footer(kExitHelp);

  try {
    // Pre-pass: pick out --workdir / --config and the subcommand so config
    // and environment values can be turned into flags that the real command
    // line overrides (last value wins).
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> rest;
    std::string wd, cfg;
    if (const char *e = std::getenv("MEDRE_WORKDIR"))
      wd = e;
    if (const char *e = std::getenv("MEDRE_CONFIG"))
      cfg = e;
    for (std::size_t k = 0; k < args.size(); ++k) {
      const auto &a = args[k];
      auto take = [&](const std::string &flag, std::string &dst) {
        if (a == flag && k + 1 < args.size()) {
          dst = args[++k];
          return true;
        }
        if (a.rfind(flag + "=", 0) == 0) {
          dst = a.substr(flag.size() + 1);
          return true;
        }
        return false;
      };
      if (take("--workdir", wd) || take("--config", cfg))
        continue;
      rest.push_back(a);
    }
    CLI::App *sub = nullptr;
    std::size_t sub_pos = 0;
    for (std::size_t k = 0; k < rest.size(); ++k)
      if (rest[k].rfind("-", 0) != 0) {
        sub = app.get_subcommand_no_throw(rest[k]);
        sub_pos = k;
        break;
      }
    if (!wd.empty()) {
      if (!fs::is_directory(wd))
        return fail(kIo, "io", "workdir not found: " + wd);
      fs::current_path(wd);
    }
    std::vector<std::string> injected;
    if (sub) {
      if (!cfg.empty())
        // One file may serve several subcommands: keys of other
        // subcommands are skipped, keys of none are an error.
        for (const auto &[k, v] : read_config(cfg)) {
          if (k == "workdir" || k == "config")
            throw ConfigError("config key '" + k + "' is only valid as a flag");
          if (sub->get_option_no_throw("--" + k)) {
            injected.push_back("--" + k + "=" + v);
            continue;
          }
          bool known = false;
          for (const auto *other : app.get_subcommands({}))
            known = known || other->get_option_no_throw("--" + k) != nullptr;
          if (!known)
            throw ConfigError("unknown config key '" + k + "'");
        }
      for (const auto *opt : sub->get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help")
          continue;
        if (const char *v = std::getenv(env_name(name).c_str()))
          injected.push_back("--" + name + "=" + v);
      }
    }
    std::vector<std::string> final_args = {argv[0]};
    for (std::size_t k = 0; k < rest.size(); ++k) {
      final_args.push_back(rest[k]);
      if (sub && k == sub_pos)
        final_args.insert(final_args.end(), injected.begin(), injected.end());
    }
    std::vector<const char *> cargv;
    for (const auto &a : final_args)
      cargv.push_back(a.c_str());
    try {
      try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
      } catch (const CLI::ParseError &e) {
        if (injected.empty() || e.get_exit_code() == 0)
          throw;
        // Blame the config file or environment when the command line alone
        // parses cleanly.
        std::vector<const char *> user = {argv[0]};
        for (const auto &a : rest)
          user.push_back(a.c_str());
        app.clear();
        try {
          app.parse(static_cast<int>(user.size()), user.data());
        } catch (const CLI::ParseError &) {
          throw e;
        }
        return fail(kConfig, "config", std::string("config or environment value: ") + e.what());
      }
    } catch (const CLI::CallForHelp &e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
      return app.exit(e);
    } catch (const CLI::ParseError &e) {
      return fail(kUsage, "usage", e.what());
    }

    RunManifest manifest;
    manifest.seed = seed;
    if (sub) {
      manifest.subcommand = sub->get_name();
      manifest.config = echo_options(*sub);
    }

    if (gen->parsed()) {
      gc.seed = seed;
      resolve_profile(schema_name); // unknown names fail as schema errors
      gc.schema = schema_name;
      const auto corpus = generate_corpus(gc);
      write_generated(gen_out, corpus, gc);
      manifest.outputs["corpus"] = gen_out;
      if (split > 0.0) {
        const auto [a, b] = corpus_split(corpus.docs, split, seed);
        for (const auto &[name, docs] : {std::pair{"train", &a}, std::pair{"test", &b}}) {
          fs::create_directories(fs::path(gen_out) / name);
          for (const auto &d : *docs)
            write_document(fs::path(gen_out) / name, d);
          manifest.outputs[name] = (fs::path(gen_out) / name).string();
        }
      }
      manifest.write(gen_out);
      std::cout << "wrote " << corpus.docs.size() << " documents to " << gen_out << "\n";
      return kOk;
    }

    if (trn->parsed()) {
      const auto schema = resolve_profile(schema_name);
      const auto corpus = load_dir(data, schema, lax);
      const auto tcfg = tf.config(seed);
      fs::create_directories(out);
      std::ofstream log(fs::path(out) / "run_log.jsonl");
      const auto r = train(corpus, schema, mf.config(), tcfg,
                           [&](const StepRecord &s) {
                             log << json{{"step", s.step},
                                         {"epoch", s.epoch},
                                         {"lr", s.lr},
                                         {"loss", s.loss},
                                         {"forwards", s.forwards}}
                                        .dump()
                                 << "\n";
                           });
      for (std::size_t e = 0; e < r.log.epoch_seconds.size(); ++e)
        log << json{{"epoch_end", e}, {"seconds", r.log.epoch_seconds[e]}}.dump() << "\n";
      log.close();
      r.trained.save(fs::path(out) / "model.ckpt");
      manifest.inputs["data"] = data;
      manifest.outputs["checkpoint"] = (fs::path(out) / "model.ckpt").string();
      manifest.outputs["run_log"] = (fs::path(out) / "run_log.jsonl").string();
      manifest.write(out);
      std::cout << "trained on " << r.log.segments << " segments, "
                << r.log.steps.size() << " steps, final loss "
                << r.log.steps.back().loss << "\n";
      return kOk;
    }

    if (pred->parsed()) {
      const auto trained = TrainedModel::load(model_path);
      auto docs = load_dir(data, trained.schema, lax);
      fs::create_directories(out);
      std::ostringstream report, frames;
      for (auto &d : docs) {
        const auto preds = trained.predict(d);
        for (const auto &p : preds)
          report << json{{"doc_id", d.doc_id},
                         {"rtype", p.relation.rtype},
                         {"source", p.relation.source},
                         {"target", p.relation.target},
                         {"probability", p.probability},
                         {"window", p.window_index}}
                        .dump()
                 << "\n";
        d = apply_predictions(d, preds);
        write_document(out, d);
        if (write_frames) {
          auto f = build_frames(d, trained.schema);
          f.doc_id = d.doc_id;
          frames << frames_json(f).dump() << "\n";
        }
      }
      write_file_atomic(fs::path(out) / "predictions.jsonl", report.str());
      if (write_frames)
        write_file_atomic(fs::path(out) / "frames.jsonl", frames.str());
      manifest.inputs = {{"data", data}, {"model", model_path}};
      manifest.outputs["predictions"] = out;
      manifest.write(out);
      std::cout << "predicted relations for " << docs.size() << " documents\n";
      return kOk;
    }

    if (ev->parsed()) {
      const auto schema = resolve_profile(schema_name);
      const auto gold = load_dir(gold_dir, schema, lax);
      const auto predicted = load_dir(pred_dir, schema, lax);
      json all = json::object();
      for (auto m : {MatchMode::Strict, MatchMode::Lenient}) {
        if (mode != "both" && mode != match_mode_name(m))
          continue;
        const auto rep = evaluate(gold, predicted, {m, with_same_frame, threads});
        std::cout << rep.to_table() << "\n";
        all[match_mode_name(m)] = rep.to_json();
      }
      if (score_frames) {
        const auto fa = frame_exact_match(gold, predicted, schema);
        std::cout << "frames: " << fa.matched << "/" << fa.gold_frames << " exact ("
                  << fa.accuracy() << ")\n";
        all["frames"] = {{"gold_frames", fa.gold_frames},
                         {"matched", fa.matched},
                         {"accuracy", fa.accuracy()}};
      }
      if (!json_out.empty())
        write_file_atomic(json_out, all.dump(2) + "\n");
      return kOk;
    }

    if (e2e->parsed()) {
      const auto trained = TrainedModel::load(model_path);
      std::vector<Document> gold;
      if (!gold_dir.empty())
        gold = load_dir(gold_dir, trained.schema, false);
      const auto r = end_to_end(trained, text_dir, ent_dir, gold);
      fs::create_directories(out);
      std::ostringstream frames;
      for (std::size_t k = 0; k < r.predicted.size(); ++k) {
        write_document(out, r.predicted[k]);
        frames << frames_json(r.frames[k]).dump() << "\n";
      }
      write_file_atomic(fs::path(out) / "frames.jsonl", frames.str());
      if (r.evaluated) {
        std::cout << r.strict.to_table() << "\n" << r.lenient.to_table();
        write_file_atomic(fs::path(out) / "report.json",
                          json{{"strict", r.strict.to_json()},
                               {"lenient", r.lenient.to_json()}}
                                  .dump(2) +
                              "\n");
      }
      manifest.inputs = {{"text", text_dir}, {"entities", ent_dir},
                         {"model", model_path}, {"gold", gold_dir}};
      manifest.outputs["predictions"] = out;
      manifest.write(out);
      return kOk;
    }

    if (conv->parsed()) {
      const auto schema = resolve_profile(schema_name);
      const auto docs = load_dir(data, schema, lax);
      fs::create_directories(out);
      std::ostringstream frames;
      for (const auto &d : docs) {
        const auto c = strip ? without_same_frame_edges(d) : with_same_frame_edges(d, schema);
        write_document(out, c);
        auto f = build_frames(d, schema);
        f.doc_id = d.doc_id;
        frames << frames_json(f).dump() << "\n";
      }
      write_file_atomic(fs::path(out) / "frames.jsonl", frames.str());
      manifest.inputs["data"] = data;
      manifest.outputs["corpus"] = out;
      manifest.write(out);
      return kOk;
    }

    if (cost->parsed()) {
      const auto schema = resolve_profile(schema_name);
      std::vector<Document> corpus;
      if (!data.empty()) {
        corpus = load_dir(data, schema, lax);
      } else {
        GenConfig g;
        g.seed = seed;
        g.doc_count = cost_docs;
        g.schema = schema.name;
        corpus = generate_corpus(g).docs;
      }
      const auto tcfg = cost_tf.config(seed);
      const auto r = cost_report(corpus, schema, mf.config(), tcfg, !no_measure);
      std::cout << r.to_json().dump(2) << "\n";
      return kOk;
    }

    if (gcheck->parsed()) {
      auto mc = mf.config();
      mc.dropout = 0.0;
      mc.vocab_size = 50;
      mc.label_count = 11;
      mc.num_classes = 16;
      mc.max_seq_len = std::max<std::size_t>(seq, 1);
      mc.seed = seed;
      PairwiseREModel model(mc);
      const auto segment = synthetic_segment(mc, seq, entities, seed + 1);
      GradCheckOptions opts;
      opts.eps = eps;
      opts.samples_per_param = samples;
      opts.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = finite_diff_check(
          [&] { return masked_loss(model.forward(segment, false), segment.targets); },
          model.params(), opts);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const bool ok = r.max_rel_error < threshold;
      std::cout << json{{"max_rel_error", r.max_rel_error},
                        {"threshold", threshold},
                        {"pass", ok},
                        {"worst_param", r.worst_param},
                        {"worst_index", r.worst_index},
                        {"analytic", r.worst_analytic},
                        {"numeric", r.worst_numeric},
                        {"coordinates", r.coordinates_checked},
                        {"parameters", model.params().parameter_count()},
                        {"kernels", kernels::active().name},
                        {"seconds", secs}}
                       .dump(2)
                << "\n";
      return ok ? kOk : kCheckFailed;
    }

    if (st->parsed()) {
      const auto schema = resolve_profile(schema_name);
      const auto docs = load_dir(data, schema, lax);
      const auto s = corpus_stats(docs, schema);
      WindowConfig w{st_window, st_stride == 0 ? std::max<std::size_t>(1, st_window / 2)
                                               : st_stride};
      SegmentReport rep;
      std::size_t pairs = 0;
      for (std::size_t d = 0; d < docs.size(); ++d)
        for (const auto &seg : make_segments(docs[d], w, &rep, d))
          pairs += seg.entity_refs.size() * (seg.entity_refs.size() - 1);
      json buckets = json::object();
      for (const auto &[b, n] : rep.tokens_per_segment)
        buckets[std::to_string(b)] = n;
      std::cout << json{{"documents", s.doc_count},
                        {"entities", s.entity_count},
                        {"entity_total", s.entity_total},
                        {"relations", s.relation_count},
                        {"relation_total", s.relation_total},
                        {"drugs", s.drugs},
                        {"multi_frame_drugs", s.multi_frame_drugs},
                        {"multi_frame_fraction", s.multi_frame_drug_fraction()},
                        {"frames", s.frames},
                        {"segments", rep.segments_emitted},
                        {"segments_excluded", rep.segments_excluded},
                        {"unreachable_relations", rep.unreachable_relations},
                        {"candidate_pairs", pairs},
                        {"tokens_per_segment", buckets}}
                           .dump(2)
                << "\n";
      return kOk;
    }
    return fail(kUsage, "usage", "no subcommand");
  } catch (const ValidationError &e) {
    return fail(kValidation, "validation", e.what(), {{"rule", e.rule()}, {"id", e.id()}});
  } catch (const SchemaError &e) {
    return fail(kSchema, "schema", e.what());
  } catch (const ConfigError &e) {
    return fail(kConfig, "config", e.what());
  } catch (const IoError &e) {
    return fail(kIo, "io", e.what());
  } catch (const ShapeError &e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const Error &e) {
    return fail(kInternal, "error", e.what());
  } catch (const fs::filesystem_error &e) {
    return fail(kIo, "io", e.what());
  } catch (const std::exception &e) {
    return fail(kInternal, "internal", e.what());
  }
}
