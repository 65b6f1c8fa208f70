#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "htds/checkpoint.hpp"
#include "htds/cli.hpp"
#include "htds/corpus.hpp"
#include "htds/corpus_stats.hpp"
#include "htds/metrics.hpp"
#include "htds/synthetic.hpp"
#include "htds/training.hpp"

namespace htds::cli {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::map<std::string, std::string> hash_corpus(const fs::path& data) {
  std::map<std::string, std::string> out;
  for (const char* f : {kNotesFile, kLabelsFile, kSplitFile}) out[(data / f).string()] = sha256_hex(data / f);
  return out;
}

int threads_from_env() {
  const char* v = std::getenv("HTDS_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw std::invalid_argument(std::string("HTDS_THREADS: expected a positive integer, got '") + v + "'");
  return static_cast<int>(n);
}

// Config file (or defaults) with the command-line overrides applied.
struct RunOptions {
  std::string config_path;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string notes;
  std::string strategy;

  void add_to(CLI::App& app, bool need_out) {
    app.add_option("--config", config_path, "key = value run config")->check(CLI::ExistingFile);
    app.add_option("--data", data, "corpus directory")->required();
    auto* o = app.add_option("--out", out, "output directory");
    if (need_out) o->required();
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--notes", notes, "all | discharge_only");
    app.add_option("--strategy", strategy, "diversity | first | last | category:<name>");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (seed) cfg.train.seed = *seed;
    if (!notes.empty()) cfg.set("notes", notes);
    if (!strategy.empty()) cfg.set("strategy", strategy);
    return cfg;
  }
};

struct TrainSummary {
  double dev_micro_f1 = 0.0;
  double threshold = 0.5;
  std::size_t best_epoch = 0;
};

// Trains on `corpus` and writes a complete run directory.
TrainSummary train_into(const RunConfig& cfg, const Corpus& corpus, const fs::path& data, const fs::path& dir,
                        const std::vector<std::string>& args, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.args = args;
  manifest.config = cfg.serialize();
  manifest.seed = cfg.train.seed;
  manifest.inputs = hash_corpus(data);
  manifest.started_at = utc_now();

  const auto prepared = prepare_data(corpus, cfg);
  make_dir(dir);
  auto result = fit(prepared.train, prepared.dev, prepared.model, cfg.train, [&](const EpochLog& e) {
    out << "epoch " << e.epoch << " train_loss " << format_real(e.train_loss) << " dev_micro_f1 "
        << format_real(e.dev_micro_f1) << " threshold " << format_real(e.threshold)
        << (e.improved ? " *" : "") << '\n';
  });

  write_file(dir / kConfigFile, manifest.config);
  prepared.vocab.save(dir / kVocabFile);
  corpus.labels.save(dir / kLabelSpaceFile);
  prepared.categories.save(dir / kCategoriesFile);
  write_file(dir / kTrainLogFile, result.log.to_jsonl());
  save_checkpoint({prepared.model, cfg.train.seed, result.threshold, std::move(result.params)}, dir / kCheckpointFile);

  // Dev metrics from the stored checkpoint so that evaluate reproduces them.
  const auto ckpt = load_checkpoint(dir / kCheckpointFile, &prepared.model);
  const auto dev = predict_all(ckpt.params, ckpt.config, prepared.dev);
  try {
    const auto report = evaluate_predictions(dev, ckpt.threshold);
    write_file(dir / metrics_file("dev", false), report.to_key_value());
    write_file(dir / metrics_file("dev", true), report.to_json_line() + "\n");
  } catch (const MetricError& e) {
    out << "warning: dev metrics not written: " << e.what() << '\n';
  }

  manifest.outputs = hash_outputs(dir);
  manifest.finished_at = utc_now();
  manifest.save(dir);
  return {result.dev_micro_f1, result.threshold, result.best_epoch};
}

// ---- gen-data

struct GenDataOptions {
  SyntheticSpec spec;
  std::string out;
  std::vector<std::int64_t> notes_per_stay, words_per_note, labels_per_stay;
};

void add_range(CLI::App& app, const std::string& name, std::vector<std::int64_t>& v, const std::string& help) {
  app.add_option(name, v, help)->expected(2)->delimiter(',');
}

IntRange to_range(const std::vector<std::int64_t>& v, IntRange fallback) {
  return v.empty() ? fallback : IntRange{v[0], v[1]};
}

int cmd_gen_data(const GenDataOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  SyntheticSpec spec = o.spec;
  spec.notes_per_stay = to_range(o.notes_per_stay, spec.notes_per_stay);
  spec.words_per_note = to_range(o.words_per_note, spec.words_per_note);
  spec.labels_per_stay = to_range(o.labels_per_stay, spec.labels_per_stay);
  spec.validate();

  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.args = args;
  manifest.seed = spec.seed;
  manifest.started_at = utc_now();
  const fs::path dir = o.out;
  make_dir(dir);
  write_corpus_dir(generate_synthetic(spec), dir);
  manifest.outputs = hash_outputs(dir);
  manifest.finished_at = utc_now();
  manifest.save(dir);
  out << "wrote " << spec.n_stays << " stays to " << dir.string() << '\n';
  return kOk;
}

// ---- stats

int cmd_stats(const RunOptions& o, std::ostream& out) {
  const auto cfg = o.resolve();
  const auto corpus = ingest_dir(o.data, cfg.model.num_labels);
  const auto vocab = build_vocab(corpus.select(SplitName::kTrain), cfg.vocab_max);
  out << corpus_stats(corpus.stays, vocab).render();
  return kOk;
}

// ---- train

int cmd_train(const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cfg = o.resolve();
  const auto corpus = ingest_dir(o.data, cfg.model.num_labels);
  const auto s = train_into(cfg, corpus, o.data, o.out, args, out);
  out << "best epoch " << s.best_epoch << " dev_micro_f1 " << format_real(s.dev_micro_f1) << " threshold "
      << format_real(s.threshold) << '\n';
  return kOk;
}

// ---- evaluate

struct EvaluateOptions {
  std::string run;
  std::string data;
  std::string split = "test";
  std::string out;
  bool retune = false;
};

int cmd_evaluate(const EvaluateOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const SplitName split = [&] {
    try {
      return parse_split_name(o.split);
    } catch (const std::exception& e) {
      throw std::invalid_argument(e.what());
    }
  }();
  if (o.retune && split == SplitName::kTest) {
    throw std::invalid_argument("--retune-threshold is not allowed on the test split; thresholds are tuned on dev only");
  }
  const fs::path run = o.run;
  const fs::path dir = o.out.empty() ? run / ("eval_" + o.split) : fs::path(o.out);

  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.args = args;
  manifest.started_at = utc_now();

  const auto cfg = RunConfig::load(run / kConfigFile);
  manifest.config = cfg.serialize();
  const auto vocab = Vocabulary::load(run / kVocabFile);
  const auto categories = CategoryTable::load(run / kCategoriesFile);
  const auto labels = LabelSpace::load(run / kLabelSpaceFile);
  const auto corpus = ingest_dir(o.data, cfg.model.num_labels);
  if (!(corpus.labels == labels)) {
    throw DataError("label space of " + o.data + " does not match the run's " + kLabelSpaceFile);
  }
  ModelConfig model = cfg.model;
  model.vocab_size = vocab.size();
  model.num_labels = labels.size();
  model.num_categories = categories.size();
  const auto ckpt = load_checkpoint(run / kCheckpointFile, &model);
  manifest.seed = ckpt.seed;
  manifest.inputs = hash_corpus(o.data);
  manifest.inputs[(run / kCheckpointFile).string()] = sha256_hex(run / kCheckpointFile);

  auto examples = [&](SplitName s) {
    return make_examples(corpus.select(s), model.num_labels, vocab, categories, model, cfg.strategy, cfg.notes);
  };
  double threshold = ckpt.threshold;
  if (o.retune) {
    const auto dev = predict_all(ckpt.params, model, examples(SplitName::kDev));
    threshold = optimize_threshold(dev, cfg.train.threshold_grid).threshold;
  }
  const auto ex = examples(split);
  if (ex.empty()) throw DataError("split '" + o.split + "' has no stays");
  const auto report = evaluate_predictions(predict_all(ckpt.params, model, ex), threshold);

  make_dir(dir);
  write_file(dir / metrics_file(o.split, false), report.to_key_value());
  write_file(dir / metrics_file(o.split, true), report.to_json_line() + "\n");
  manifest.outputs = hash_outputs(dir);
  manifest.finished_at = utc_now();
  manifest.save(dir);
  out << report.to_key_value();
  return kOk;
}

// ---- ablate

struct Variant {
  std::string name;
  RunConfig cfg;
};

std::vector<Variant> ablation_variants(const std::string& ablation, const RunConfig& base) {
  std::vector<Variant> v;
  auto with = [&](std::string name, const std::function<void(RunConfig&)>& edit) {
    RunConfig c = base;
    edit(c);
    v.push_back({std::move(name), std::move(c)});
  };
  if (ablation == "chunk_budget") {
    const auto n = base.model.max_chunks;
    if (n < 2) throw ConfigError("chunk_budget ablation needs max_chunks >= 2");
    with("max_chunks=" + std::to_string(n), [](RunConfig&) {});
    with("max_chunks=" + std::to_string(n / 2), [&](RunConfig& c) { c.model.max_chunks = n / 2; });
  } else if (ablation == "meta_embeddings") {
    with("all", [](RunConfig& c) { c.model.meta = MetaFlags{}; });
    with("-CE", [](RunConfig& c) {
      c.model.meta = MetaFlags{};
      c.model.meta.ce = false;
    });
    with("-(PE+Rev-PE)", [](RunConfig& c) {
      c.model.meta = MetaFlags{};
      c.model.meta.pe = c.model.meta.rev_pe = false;
    });
    with("-(TE+Rev-TE)", [](RunConfig& c) {
      c.model.meta = MetaFlags{};
      c.model.meta.te = c.model.meta.rev_te = false;
    });
  } else if (ablation == "cls_only") {
    with("all_tokens", [](RunConfig& c) { c.model.cls_only = false; });
    with("cls_only", [](RunConfig& c) { c.model.cls_only = true; });
  } else if (ablation == "second_transformer") {
    const auto layers = base.model.second_layers == 0 ? std::size_t{1} : base.model.second_layers;
    with("second_layers=" + std::to_string(layers), [&](RunConfig& c) { c.model.second_layers = layers; });
    with("second_layers=0", [](RunConfig& c) { c.model.second_layers = 0; });
  } else if (ablation == "note_selection") {
    for (const char* s : {"diversity", "first", "last", "category:Radiology", "category:Nursing",
                          "category:Physician"}) {
      with(s, [&](RunConfig& c) { c.strategy = SelectionStrategy::parse(s); });
    }
  } else {
    throw std::invalid_argument("unknown ablation '" + ablation +
                                "' (expected chunk_budget, meta_embeddings, cls_only, second_transformer, "
                                "note_selection)");
  }
  return v;
}

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

struct AblateOptions {
  RunOptions run;
  std::string ablation;
  std::size_t seeds = 3;
};

int cmd_ablate(const AblateOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto base = o.run.resolve();
  const auto variants = ablation_variants(o.ablation, base);
  if (o.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  const auto corpus = ingest_dir(o.run.data, base.model.num_labels);
  const fs::path dir = o.run.out;
  make_dir(dir);

  RunManifest manifest;
  manifest.command = "ablate";
  manifest.args = args;
  manifest.config = base.serialize();
  manifest.seed = base.train.seed;
  manifest.inputs = hash_corpus(o.run.data);
  manifest.started_at = utc_now();

  std::vector<std::vector<double>> scores;
  for (const auto& v : variants) {
    scores.emplace_back();
    for (std::size_t i = 0; i < o.seeds; ++i) {
      RunConfig c = v.cfg;
      c.train.seed = base.train.seed + i;
      const auto run_dir = dir / slug(v.name) / ("seed_" + std::to_string(c.train.seed));
      std::ostringstream quiet;
      const auto s = train_into(c, corpus, o.run.data, run_dir, args, quiet);
      scores.back().push_back(s.dev_micro_f1);
      out << v.name << " seed " << c.train.seed << " dev_micro_f1 " << format_real(s.dev_micro_f1) << '\n';
    }
  }

  std::ostringstream table;
  table << "variant\tmicro_f1_mean\tmicro_f1_sd\truns\tp_vs_first\n";
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const auto ms = mean_sd(scores[k]);
    std::string p = "-";
    if (k > 0 && o.seeds >= 2) p = format_real(welch_t_test(scores[0], scores[k]));
    table << variants[k].name << '\t' << std::fixed << std::setprecision(4) << ms.mean << '\t' << ms.sd
          << std::defaultfloat << '\t' << ms.n << '\t' << p << '\n';
  }
  write_file(dir / "ablation.tsv", table.str());
  manifest.outputs = hash_outputs(dir);
  manifest.finished_at = utc_now();
  manifest.save(dir);
  out << table.str();
  return kOk;
}

// ---- compare

struct CompareOptions {
  std::vector<std::string> a, b;
  std::string split = "dev";
  std::string out;
};

std::vector<MetricsReport> load_reports(const std::vector<std::string>& paths, const std::string& split) {
  std::vector<MetricsReport> out;
  for (const auto& p : paths) {
    const fs::path file = fs::is_directory(p) ? fs::path(p) / metrics_file(split, true) : fs::path(p);
    try {
      out.push_back(MetricsReport::from_json_line(read_file(file)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(file.string() + ": " + e.what());
    }
  }
  return out;
}

int cmd_compare(const CompareOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto cmp = compare_groups(load_reports(o.a, o.split), load_reports(o.b, o.split));
  const auto text = cmp.to_key_value();
  if (!o.out.empty()) {
    const fs::path dir = o.out;
    make_dir(dir);
    RunManifest manifest;
    manifest.command = "compare";
    manifest.args = args;
    manifest.started_at = utc_now();
    for (const auto& p : o.a) manifest.inputs[p] = "";
    for (const auto& p : o.b) manifest.inputs[p] = "";
    write_file(dir / "comparison.txt", text);
    manifest.outputs = hash_outputs(dir);
    manifest.finished_at = utc_now();
    manifest.save(dir);
  }
  out << text;
  return kOk;
}

// ---- replay

int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const auto m = RunManifest::load(manifest_path);
  std::vector<std::string> args;
  for (std::size_t i = 0; i < m.args.size(); ++i) {
    if (m.args[i] == "--out" && i + 1 < m.args.size()) {
      ++i;
      continue;
    }
    if (m.args[i].rfind("--out=", 0) == 0) continue;
    args.push_back(m.args[i]);
  }
  args.push_back("--out");
  args.push_back(out_dir);
  return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical transformer multi-label coding over document sequences", "htds"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic corpus");
  gen_cmd->add_option("--out", gen.out, "corpus directory")->required();
  gen_cmd->add_option("--seed", gen.spec.seed);
  gen_cmd->add_option("--n-stays", gen.spec.n_stays);
  gen_cmd->add_option("--n-labels", gen.spec.n_labels);
  gen_cmd->add_option("--keywords-per-label", gen.spec.keywords_per_label);
  gen_cmd->add_option("--discharge-signal-fraction", gen.spec.discharge_signal_fraction);
  gen_cmd->add_option("--filler-vocab", gen.spec.filler_vocab);
  gen_cmd->add_option("--train-fraction", gen.spec.train_fraction);
  gen_cmd->add_option("--dev-fraction", gen.spec.dev_fraction);
  add_range(*gen_cmd, "--notes-per-stay", gen.notes_per_stay, "lo,hi");
  add_range(*gen_cmd, "--words-per-note", gen.words_per_note, "lo,hi");
  add_range(*gen_cmd, "--labels-per-stay", gen.labels_per_stay, "lo,hi");

  RunOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "text amount per stay");
  stats.add_to(*stats_cmd, false);

  RunOptions train;
  auto* train_cmd = app.add_subcommand("train", "fit a model and write a run directory");
  train.add_to(*train_cmd, true);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a trained run on one split");
  eval_cmd->add_option("--run", eval.run, "run directory written by train")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", eval.data, "corpus directory")->required();
  eval_cmd->add_option("--split", eval.split, "train | dev | test");
  eval_cmd->add_option("--out", eval.out, "output directory (default <run>/eval_<split>)");
  eval_cmd->add_flag("--retune-threshold", eval.retune, "re-tune the threshold on dev");

  AblateOptions abl;
  auto* abl_cmd = app.add_subcommand("ablate", "train every variant of one ablation over several seeds");
  abl.run.add_to(*abl_cmd, true);
  abl_cmd->add_option("ablation", abl.ablation,
                      "chunk_budget | meta_embeddings | cls_only | second_transformer | note_selection")
      ->required();
  abl_cmd->add_option("--seeds", abl.seeds, "runs per variant");

  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Welch t-test between two groups of runs");
  cmp_cmd->add_option("--a", cmp.a, "run directories or metrics json files")->required()->expected(1, -1);
  cmp_cmd->add_option("--b", cmp.b, "run directories or metrics json files")->required()->expected(1, -1);
  cmp_cmd->add_option("--split", cmp.split, "metrics split read from run directories");
  cmp_cmd->add_option("--out", cmp.out, "output directory");

  std::string replay_manifest, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay_cmd->add_option("--manifest", replay_manifest)->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n'
        << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }

  try {
    omp_set_num_threads(threads_from_env());
    if (*gen_cmd) return cmd_gen_data(gen, args, out);
    if (*stats_cmd) return cmd_stats(stats, out);
    if (*train_cmd) return cmd_train(train, args, out);
    if (*eval_cmd) return cmd_evaluate(eval, args, out);
    if (*abl_cmd) return cmd_ablate(abl, args, out);
    if (*cmp_cmd) return cmd_compare(cmp, args, out);
    if (*replay_cmd) return cmd_replay(replay_manifest, replay_out, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\nrun 'htds " << args.front() << " --help' for usage\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace htds::cli
