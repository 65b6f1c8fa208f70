// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Tolerances and runtime budgets are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "htds/cli.hpp"
#include "htds/model.hpp"
#include "htds/schedule.hpp"
#include "htds/selection.hpp"
#include "htds/synthetic.hpp"
#include "htds/training.hpp"
#include "oracles.hpp"

namespace htds {
namespace {

namespace fs = std::filesystem;

constexpr double kScheduleRelTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kColumnSumTol = 1e-6;
constexpr double kAucTol = 1e-12;
constexpr double kOverfitF1 = 0.95;
constexpr double kDirectionalGap = 0.02;
constexpr double kSignificance = 0.05;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure messages; keeps the first few.
struct Checker {
  bool ok = true;
  int failures = 0;
  std::ostringstream first;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (++failures <= 3) first << (failures > 1 ? "; " : "") << what;
  }
  Outcome outcome(const std::string& summary) const {
    return {ok, ok ? summary : summary + " | " + first.str() + (failures > 3 ? " ..." : "")};
  }
};

bool rel_close(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::abs(want);
}

const std::vector<std::string> kCats = {"Discharge summary", "ECG", "Nursing", "Physician", "Radiology"};

// ---- 1

Outcome scheduler_anchors() {
  TrainConfig cfg;  // peak 5e-5, fractions 0.3/0.3/0.4, divisors 25/1000
  const std::size_t total = 1000;
  const auto s = LRSchedule::make(total, cfg);
  const double peak = cfg.peak_lr;
  Checker c;
  const std::pair<double, double> anchors[] = {{0.0, peak / 25},
                                               {0.30 * total, peak},
                                               {0.60 * total, peak / 25},
                                               {static_cast<double>(total), peak / 1000},
                                               {0.15 * total, 2.6e-5}};
  for (auto [step, want] : anchors) {
    const double got = onecycle_lr(step, s, cfg);
    c.expect(rel_close(got, want, kScheduleRelTol),
             "lr(" + format_real(step) + ") = " + format_real(got) + " want " + format_real(want));
  }
  return c.outcome("5 anchors within 1e-12 relative");
}

// ---- 2

Outcome gradient_correctness() {
  const auto cfg = testing::grad_check_config();
  Rng rng(2024);
  double worst = 0.0;
  std::string worst_name;
  std::set<std::string> seen;
  for (int draw = 0; draw < 3; ++draw) {
    const auto params = init_params(cfg, rng.next());
    const auto chunks = testing::random_chunks(rng, cfg);
    const auto y = testing::random_targets(rng, cfg.num_labels);
    for (const auto& [name, e] : testing::gradient_check(params, cfg, chunks, y)) {
      seen.insert(name);
      if (e > worst) {
        worst = e;
        worst_name = name;
      }
    }
  }
  Checker c;
  for (const char* name : {"label_emb", "meta.pe", "meta.rev_pe", "meta.te", "meta.rev_te", "meta.ce"}) {
    c.expect(seen.count(name) == 1, std::string("tensor not checked: ") + name);
  }
  c.expect(worst < kGradRelTol, "max rel error " + format_real(worst) + " in " + worst_name);
  return c.outcome(std::to_string(seen.size()) + " tensors, max rel error " + format_real(worst) + " (" +
                   worst_name + ")");
}

// ---- 3

Outcome masking_invariants() {
  const auto cfg = testing::grad_check_config();
  Rng rng(3);
  Checker c;
  double worst = 0.0;
  ModelParams params;
  for (int trial = 0; trial < 1000; ++trial) {
    if (trial % 100 == 0) params = init_params(cfg, rng.next());
    auto chunks = testing::random_chunks(rng, cfg);
    const auto t = model_forward(params, cfg, chunks);
    for (std::size_t l = 0; l < cfg.num_labels; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < t.A.rows(); ++i) s += t.A(i, l);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    const Matrix dense = t.dense_A();
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      for (std::size_t i = chunks[k].real_len; i < cfg.tokens_per_chunk; ++i) {
        for (std::size_t l = 0; l < cfg.num_labels; ++l) {
          c.expect(dense(k * cfg.tokens_per_chunk + i, l) == 0.0, "nonzero attention on PAD");
        }
        chunks[k].token_ids[i] = static_cast<TokenId>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.vocab_size) - 1));
      }
    }
    c.expect(model_forward(params, cfg, chunks).probs == t.probs, "PAD perturbation changed probabilities");
  }
  c.expect(worst <= kColumnSumTol, "column sum off by " + format_real(worst));
  return c.outcome("1000 traces, max |colsum - 1| = " + format_real(worst));
}

// ---- 4

Outcome ablation_identities() {
  Checker c;
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto cfg = testing::grad_check_config();
    const auto chunks = testing::random_chunks(rng, cfg);

    cfg.second_layers = 0;
    auto params = init_params(cfg, rng.next());
    auto enc = chunk_encoder_forward(params, cfg, chunks);
    apply_meta_embeddings(enc, chunks, params, cfg.meta);
    const Matrix x = enc.stacked();
    c.expect(cross_chunk_forward(x, params, cfg) == x, "N_e = 0 is not the identity");
    c.expect(model_forward(params, cfg, chunks).H == x, "N_e = 0 model H differs from meta output");

    cfg = testing::grad_check_config();
    params = init_params(cfg, rng.next());
    const auto plain = chunk_encoder_forward(params, cfg, chunks);
    auto off = plain;
    apply_meta_embeddings(off, chunks, params, MetaFlags{false, false, false, false, false});
    c.expect(off.chunks == plain.chunks, "all meta flags off is not the identity");

    const auto full = model_forward(params, cfg, chunks);
    c.expect(full.dense_H().rows() == chunks.size() * cfg.tokens_per_chunk, "full H rows != N_sel * T_c");
    cfg.cls_only = true;
    const auto cls = model_forward(params, cfg, chunks);
    c.expect(cls.dense_H().rows() == chunks.size() && cls.H.rows() == chunks.size(), "cls_only H rows != N_sel");
  }
  return c.outcome("50 draws, exact");
}

// ---- 5 / 6

testing::StayWithChunks distinct_category_stay(Rng& rng) {
  auto cats = kCats;
  rng.shuffle(std::span(cats));
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cats.size())));
  testing::StayWithChunks s;
  const Timestamp base = parse_timestamp("2130-01-01T00:00:00");
  for (std::size_t d = 0; d < n; ++d) {
    ClinicalNote note;
    note.note_id = "N" + std::to_string(d);
    note.category = cats[d];
    note.charttime = base + std::chrono::hours(3 * d + static_cast<std::size_t>(rng.uniform_int(0, 2)));
    s.stay.notes.push_back(note);
    for (std::int64_t j = rng.uniform_int(1, 4); j > 0; --j) {
      Chunk c;
      c.token_ids = {kClsId, static_cast<TokenId>(100 + s.chunks.size())};
      c.real_len = 2;
      c.doc_index = d;
      c.category_id = static_cast<std::size_t>(std::find(kCats.begin(), kCats.end(), cats[d]) - kCats.begin());
      s.chunks.push_back(c);
    }
  }
  return s;
}

Outcome selection_oracle() {
  Rng rng(5);
  Checker c;
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 8, 4);
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const std::vector<std::string> names = {"diversity", "first", "last",
                                            "category:" + kCats[static_cast<std::size_t>(rng.uniform_int(1, 4))]};
    for (const auto& name : names) {
      const auto strat = SelectionStrategy::parse(name);
      const auto got = select_chunks(s.chunks, s.stay, budget, strat);
      c.expect(got == testing::oracle_select(s.chunks, s.stay, budget, strat),
               name + " differs from oracle, trial " + std::to_string(trial));
      c.expect(got.size() == std::min(budget, s.chunks.size()), "|selected| != min(|chunks|, N_c)");
      ++compared;
    }
    const auto d = distinct_category_stay(rng);
    const auto b2 = static_cast<std::size_t>(rng.uniform_int(1, 12));
    c.expect(select_chunks(d.chunks, d.stay, b2, SelectionStrategy::parse("diversity")) ==
                 select_chunks(d.chunks, d.stay, b2, SelectionStrategy::parse("last")),
             "diversity != last with distinct categories, trial " + std::to_string(trial));
  }
  return c.outcome(std::to_string(compared) + " strategy runs on 1000 stays + 1000 distinct-category stays");
}

Outcome meta_identities() {
  Rng rng(6);
  Checker c;
  const std::vector<std::string> strategies = {"diversity", "first", "last", "category:Nursing"};
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = testing::random_stay_with_chunks(rng, kCats, 8, 4);
    const auto budget = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto& strat = strategies[static_cast<std::size_t>(trial) % strategies.size()];
    const auto sel = assign_meta_indices(select_chunks(s.chunks, s.stay, budget, SelectionStrategy::parse(strat)));
    std::set<std::size_t> docs;
    for (const auto& ch : sel) docs.insert(ch.doc_index);
    const std::size_t n = sel.size(), d = docs.size();
    for (const auto& ch : sel) {
      c.expect(ch.meta.pe + ch.meta.rev_pe == n - 1, "pe + rev_pe != N - 1");
      c.expect(ch.meta.te + ch.meta.rev_te == d - 1, "te + rev_te != D - 1");
    }
  }
  return c.outcome("1000 selections, exact");
}

// ---- 7 / 11

PredictionSet random_set(Rng& rng, std::size_t stays, std::size_t labels, bool coarse) {
  PredictionSet p;
  p.probs.resize(stays, labels);
  p.gold.resize(stays, labels);
  for (double& v : p.probs.flat()) v = coarse ? static_cast<double>(rng.uniform_int(0, 20)) / 20.0 : rng.uniform();
  for (double& v : p.gold.flat()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  return p;
}

Outcome metric_oracles() {
  Rng rng(7);
  Checker c;
  for (int trial = 0; trial < 500; ++trial) {
    const auto stays = static_cast<std::size_t>(rng.uniform_int(2, 25));
    const auto labels = static_cast<std::size_t>(rng.uniform_int(5, 10));
    const auto p = random_set(rng, stays, labels, trial % 2 == 0);
    const double t = trial % 3 == 0 ? 0.5 : rng.uniform();
    c.expect(micro_f1(p, t) == testing::oracle_micro_f1(p, t), "micro-F1 mismatch");
    c.expect(macro_f1(p, t) == testing::oracle_macro_f1(p, t), "macro-F1 mismatch");
    c.expect(precision_at_k(p, 5) == testing::oracle_precision_at_k(p, 5), "P@5 mismatch");
    const double want_micro = testing::oracle_micro_auc(p);
    if (std::isnan(want_micro)) {
      c.expect(false, "degenerate pooled gold");
    } else {
      c.expect(std::abs(micro_auc(p) - want_micro) <= kAucTol, "micro-AUC mismatch");
    }
    const double want_macro = testing::oracle_macro_auc(p);
    if (std::isnan(want_macro)) {
      bool threw = false;
      try {
        macro_auc(p);
      } catch (const MetricError&) {
        threw = true;
      }
      c.expect(threw, "macro-AUC without usable labels did not throw");
    } else {
      c.expect(std::abs(macro_auc(p) - want_macro) <= kAucTol, "macro-AUC mismatch");
    }
  }

  // TP = 2, FP = 1, FN = 1
  PredictionSet h;
  h.probs = Matrix(1, 5);
  h.gold = Matrix(1, 5);
  const double probs[] = {0.9, 0.8, 0.7, 0.1, 0.2};
  const double gold[] = {1, 1, 0, 1, 0};
  for (std::size_t l = 0; l < 5; ++l) {
    h.probs(0, l) = probs[l];
    h.gold(0, l) = gold[l];
  }
  c.expect(micro_f1(h, 0.5) == 2.0 / 3.0, "hand micro-F1 != 2/3");
  // 3 of the top 5 are gold
  PredictionSet k;
  k.probs = Matrix(1, 7);
  k.gold = Matrix(1, 7);
  const double kp[] = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3};
  const double kg[] = {1, 0, 1, 0, 1, 1, 0};
  for (std::size_t l = 0; l < 7; ++l) {
    k.probs(0, l) = kp[l];
    k.gold(0, l) = kg[l];
  }
  c.expect(precision_at_k(k, 5) == 0.6, "hand P@5 != 0.6");
  return c.outcome("500 instances + 2 hand cases");
}

Outcome threshold_search() {
  Rng rng(11);
  Checker c;
  const ThresholdGrid grid;
  for (int trial = 0; trial < 200; ++trial) {
    const auto stays = static_cast<std::size_t>(rng.uniform_int(1, 30));
    const auto p = random_set(rng, stays, static_cast<std::size_t>(rng.uniform_int(1, 8)), trial % 2 == 0);
    const auto got = optimize_threshold(p, grid);
    const double want = testing::oracle_threshold(p, grid);
    c.expect(got.threshold == want, "trial " + std::to_string(trial) + ": " + format_real(got.threshold) +
                                        " vs oracle " + format_real(want));
    c.expect(got.micro_f1 == micro_f1(p, got.threshold), "reported F1 differs from micro_f1");
  }
  // every grid point scores 0: the smallest wins
  PredictionSet none;
  none.probs = Matrix(3, 2, 0.5);
  none.gold = Matrix(3, 2, 0.0);
  c.expect(optimize_threshold(none, grid).threshold == grid.points().front(), "tie not broken to smallest t");
  return c.outcome("200 dev sets match exhaustive oracle");
}

// ---- 8 / 10

RunConfig small_run_config() {
  RunConfig cfg;
  cfg.model.tokens_per_chunk = 32;
  cfg.model.max_chunks = 8;
  cfg.model.hidden = 32;
  cfg.model.enc_heads = 2;
  cfg.model.second_heads = 2;
  cfg.model.ffn_mult = 2;
  cfg.model.num_labels = 10;
  cfg.vocab_max = 1000;
  cfg.train.peak_lr = 3e-3;
  cfg.train.effective_batch = 8;
  cfg.train.micro_batch = 8;
  cfg.train.seed = 1;
  return cfg;
}

SyntheticSpec overfit_spec() {
  SyntheticSpec spec;
  spec.seed = 8;
  spec.n_stays = 40;
  spec.n_labels = 10;
  spec.labels_per_stay = {1, 4};
  spec.train_fraction = 0.8;  // 32 train stays
  spec.dev_fraction = 0.1;
  return spec;
}

constexpr std::size_t kOverfitEpochs = 60;

Outcome overfit_check() {
  const auto corpus = generate_synthetic(overfit_spec());
  auto cfg = small_run_config();
  cfg.train.epochs_max = kOverfitEpochs;
  cfg.train.patience = 0;
  const auto data = prepare_data(corpus, cfg);
  // model selection on the training stays themselves
  const auto r = fit(data.train, data.train, data.model, cfg.train);
  const double f1 = micro_f1(predict_all(r.params, data.model, data.train), r.threshold);
  Checker c;
  c.expect(data.train.size() == 32, "train split has " + std::to_string(data.train.size()) + " stays");
  c.expect(f1 >= kOverfitF1, "train micro-F1 " + format_real(f1));
  return c.outcome(std::to_string(data.train.size()) + " stays, " + std::to_string(r.epochs_run) +
                   " epochs, train micro-F1 " + format_real(f1) + " at t=" + format_real(r.threshold));
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism(const fs::path& work) {
  Checker c;
  const auto data = work / "det_data";
  write_corpus_dir(generate_synthetic(overfit_spec()), data);
  auto cfg = small_run_config();
  cfg.train.epochs_max = kOverfitEpochs;
  cfg.train.patience = 0;
  testing::write_text(work / "det.txt", cfg.serialize());
  for (const char* run : {"det_a", "det_b"}) {
    c.expect(run_cli({"train", "--config", (work / "det.txt").string(), "--data", data.string(), "--out",
                      (work / run).string()}) == 0,
             std::string("train failed: ") + run);
  }
  if (!c.ok) return c.outcome("");
  for (const char* f : {cli::kTrainLogFile, cli::kCheckpointFile}) {
    c.expect(testing::read_text(work / "det_a" / f) == testing::read_text(work / "det_b" / f),
             std::string(f) + " differs");
    c.expect(cli::sha256_hex(work / "det_a" / f) == cli::sha256_hex(work / "det_b" / f), std::string(f) + " hash differs");
  }
  return c.outcome("2 single-threaded train runs, log and checkpoint bit-identical");
}

// ---- 9

Outcome directional_claim(const fs::path& work) {
  Checker c;
  SyntheticSpec spec;
  spec.seed = 7;
  spec.n_stays = 520;
  spec.n_labels = 20;
  spec.labels_per_stay = {4, 8};
  spec.discharge_signal_fraction = 0.5;
  spec.train_fraction = 0.6;
  spec.dev_fraction = 0.2;
  const auto data = work / "dir_data";
  write_corpus_dir(generate_synthetic(spec), data);
  const auto corpus = ingest_dir(data, 20);
  c.expect(corpus.split.train.size() >= 300 && corpus.split.dev.size() >= 100, "split too small");

  auto cfg = small_run_config();
  cfg.model.num_labels = 20;
  cfg.train.epochs_max = 15;
  cfg.train.patience = 5;
  testing::write_text(work / "dir.txt", cfg.serialize());

  std::vector<std::string> group[2];
  const char* modes[2] = {"all", "discharge_only"};
  for (int m = 0; m < 2; ++m) {
    for (int seed = 1; seed <= 3; ++seed) {
      const auto out = work / (std::string("dir_") + modes[m] + "_" + std::to_string(seed));
      c.expect(run_cli({"train", "--config", (work / "dir.txt").string(), "--data", data.string(), "--out",
                        out.string(), "--seed", std::to_string(seed), "--notes", modes[m]}) == 0,
               "train failed");
      group[m].push_back(out.string());
    }
  }
  if (!c.ok) return c.outcome("");
  std::vector<std::string> args = {"compare", "--a"};
  args.insert(args.end(), group[0].begin(), group[0].end());
  args.push_back("--b");
  args.insert(args.end(), group[1].begin(), group[1].end());
  std::string report;
  c.expect(run_cli(args, &report) == 0, "compare failed");

  std::vector<MetricsReport> a, b;
  for (const auto& d : group[0]) a.push_back(MetricsReport::from_json_line(testing::read_text(fs::path(d) / cli::metrics_file("dev", true))));
  for (const auto& d : group[1]) b.push_back(MetricsReport::from_json_line(testing::read_text(fs::path(d) / cli::metrics_file("dev", true))));
  const auto cmp = compare_groups(a, b);
  const double gap = cmp.a.micro_f1.mean - cmp.b.micro_f1.mean;
  c.expect(gap >= kDirectionalGap, "gap " + format_real(gap));
  c.expect(cmp.p_micro_f1 < kSignificance, "p " + format_real(cmp.p_micro_f1));
  c.expect(report.find("micro_f1_significant = true") != std::string::npos, "report does not flag significance");
  char buf[160];
  std::snprintf(buf, sizeof buf, "dev micro-F1 all %.4f vs discharge_only %.4f, gap %.2f points, p = %.3g",
                cmp.a.micro_f1.mean, cmp.b.micro_f1.mean, 100 * gap, cmp.p_micro_f1);
  return c.outcome(buf);
}

}  // namespace
}  // namespace htds

int main() {
  using namespace htds;
  setenv("HTDS_THREADS", "1", 0);
  testing::TempDir work("acceptance");

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "scheduler anchors", 1, scheduler_anchors},
      {2, "gradient correctness", 120, gradient_correctness},
      {3, "attention/masking invariants", 60, masking_invariants},
      {4, "ablation identities", 30, ablation_identities},
      {5, "selection oracle", 30, selection_oracle},
      {6, "meta-index identities", 10, meta_identities},
      {7, "metric oracles", 30, metric_oracles},
      {8, "overfit check", 300, overfit_check},
      {9, "directional all-notes gain", 1800, [&] { return directional_claim(work.path()); }},
      {10, "determinism", 600, [&] { return determinism(work.path()); }},
      {11, "threshold search", 10, threshold_search},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += " | over runtime budget";
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.1f s, budget %.0f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
