#include "htds/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "htds/rng.hpp"
#include "htds/schedule.hpp"
#include "htds/selection.hpp"

namespace htds {

Example make_example(const HospitalStay& stay, std::size_t n_labels, const Vocabulary& vocab,
                     const CategoryTable& categories, const ModelConfig& model,
                     const SelectionStrategy& strategy, NotesMode notes) {
  const HospitalStay filtered = notes == NotesMode::kDischargeOnly ? discharge_only(stay) : stay;
  Example ex;
  ex.stay_id = stay.stay_id;
  const auto chunks = chunk_stay(filtered, vocab, categories, model.tokens_per_chunk);
  ex.chunks = assign_meta_indices(select_chunks(chunks, filtered, model.max_chunks, strategy));
  ex.targets.assign(n_labels, 0.0);
  for (int l : stay.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_labels) throw DataError("label id outside label space");
    ex.targets[static_cast<std::size_t>(l)] = 1.0;
  }
  return ex;
}

std::vector<Example> make_examples(const std::vector<const HospitalStay*>& stays, std::size_t n_labels,
                                   const Vocabulary& vocab, const CategoryTable& categories,
                                   const ModelConfig& model, const SelectionStrategy& strategy,
                                   NotesMode notes) {
  std::vector<Example> out;
  out.reserve(stays.size());
  for (const auto* s : stays) out.push_back(make_example(*s, n_labels, vocab, categories, model, strategy, notes));
  return out;
}

PreparedData prepare_data(const Corpus& corpus, const RunConfig& cfg) {
  PreparedData d;
  const auto train = corpus.select(SplitName::kTrain);
  d.vocab = build_vocab(train, cfg.vocab_max);
  d.categories = CategoryTable::from_stays(corpus.stays);
  d.model = cfg.model;
  d.model.vocab_size = d.vocab.size();
  d.model.num_labels = corpus.labels.size();
  d.model.num_categories = d.categories.size();
  d.model.validate();
  auto build = [&](SplitName s) {
    return make_examples(corpus.select(s), d.model.num_labels, d.vocab, d.categories, d.model, cfg.strategy,
                         cfg.notes);
  };
  d.train = build(SplitName::kTrain);
  d.dev = build(SplitName::kDev);
  d.test = build(SplitName::kTest);
  return d;
}

double bce_loss(std::span<const double> probs, std::span<const double> targets) {
  if (probs.size() != targets.size() || probs.empty()) throw std::invalid_argument("bce_loss: shape mismatch");
  constexpr double kEps = 1e-12;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kEps, 1.0 - kEps);
    sum -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

std::vector<double> predict(const ModelParams& params, const ModelConfig& cfg, const Example& ex) {
  if (ex.chunks.empty()) return std::vector<double>(cfg.num_labels, 0.5);
  return model_forward(params, cfg, ex.chunks).probs;
}

PredictionSet predict_all(const ModelParams& params, const ModelConfig& cfg,
                          const std::vector<Example>& examples) {
  PredictionSet out;
  out.probs.resize(examples.size(), cfg.num_labels);
  out.gold.resize(examples.size(), cfg.num_labels);
  const auto n = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    const auto p = predict(params, cfg, ex);
    std::copy(p.begin(), p.end(), out.probs.row(static_cast<std::size_t>(i)).begin());
    std::copy(ex.targets.begin(), ex.targets.end(), out.gold.row(static_cast<std::size_t>(i)).begin());
  }
  return out;
}

AdamW::AdamW(const ModelParams& shape, const TrainConfig& cfg)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps), weight_decay_(cfg.weight_decay),
      m_(shape), v_(shape) {
  m_.for_each([](const std::string&, Matrix& m) { m.set_zero(); });
  v_.for_each([](const std::string&, Matrix& m) { m.set_zero(); });
}

void AdamW::step(ModelParams& params, const ModelParams& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double shrink = 1.0 - lr * weight_decay_;
  auto p = params.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  std::vector<const Matrix*> g;
  grads.for_each([&](const std::string&, const Matrix& x) { g.push_back(&x); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto pf = p[k].second->flat();
    auto mf = m[k].second->flat();
    auto vf = v[k].second->flat();
    const auto gf = g[k]->flat();
    for (std::size_t i = 0; i < pf.size(); ++i) {
      mf[i] = beta1_ * mf[i] + (1.0 - beta1_) * gf[i];
      vf[i] = beta2_ * vf[i] + (1.0 - beta2_) * gf[i] * gf[i];
      const double mhat = mf[i] / c1;
      const double vhat = vf[i] / c2;
      pf[i] = pf[i] * shrink - lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double accumulate_gradients(const ModelParams& params, const ModelConfig& cfg,
                            std::span<const Example* const> examples, double scale, ModelParams& grads) {
  double loss = 0.0;
  for (const Example* ex : examples) {
    if (ex->chunks.empty()) {
      loss += bce_loss(std::vector<double>(cfg.num_labels, 0.5), ex->targets);
      continue;
    }
    const ForwardTrace trace = model_forward(params, cfg, ex->chunks);
    const double l = bce_loss(trace.probs, ex->targets);
    if (!std::isfinite(l)) throw NumericError("non-finite loss on stay " + ex->stay_id);
    loss += l;
    model_backward(params, cfg, trace, ex->targets, scale, grads);
  }
  return loss;
}

double train_step(ModelParams& params, AdamW& opt, const ModelConfig& cfg,
                  const std::vector<std::vector<const Example*>>& micro_batches, double lr) {
  std::size_t n = 0;
  for (const auto& mb : micro_batches) n += mb.size();
  if (n == 0) throw std::invalid_argument("train_step: empty batch");
  const double scale = 1.0 / static_cast<double>(n);
  ModelParams grads = ModelParams::zeros(cfg);
  double loss = 0.0;
  for (const auto& mb : micro_batches) loss += accumulate_gradients(params, cfg, mb, scale, grads);
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericError("non-finite batch loss");
  opt.step(params, grads, lr);
  return loss;
}

ThresholdChoice optimize_threshold(const PredictionSet& dev, const ThresholdGrid& grid) {
  if (dev.n_stays() == 0) throw std::invalid_argument("optimize_threshold: empty dev set");
  if (!dev.probs.same_shape(dev.gold)) throw std::invalid_argument("optimize_threshold: shape mismatch");

  // Pairs sorted by probability; a threshold t predicts the suffix with p >= t.
  std::vector<std::pair<double, bool>> pairs;
  pairs.reserve(dev.probs.size());
  std::size_t gold_total = 0;
  for (std::size_t i = 0; i < dev.probs.size(); ++i) {
    const bool g = dev.gold.flat()[i] != 0.0;
    gold_total += g;
    pairs.emplace_back(dev.probs.flat()[i], g);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::size_t> gold_suffix(pairs.size() + 1, 0);
  for (std::size_t i = pairs.size(); i-- > 0;) gold_suffix[i] = gold_suffix[i + 1] + pairs[i].second;

  ThresholdChoice best{0.0, -1.0};
  std::size_t pos = 0;
  for (double t : grid.points()) {
    while (pos < pairs.size() && pairs[pos].first < t) ++pos;
    const std::size_t predicted = pairs.size() - pos;
    const std::size_t tp = gold_suffix[pos];
    const std::size_t fp = predicted - tp;
    const std::size_t fn = gold_total - tp;
    const std::size_t denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
    if (f1 > best.micro_f1) best = {t, f1};
  }
  return best;
}

bool EarlyStopState::update(double score, std::size_t epoch) {
  if (score > best) {
    best = score;
    best_epoch = epoch;
    since_improvement = 0;
    return true;
  }
  ++since_improvement;
  return false;
}

std::string TrainingLog::to_jsonl() const {
  std::ostringstream out;
  std::size_t s = 0;
  for (const auto& e : epochs) {
    for (; s < steps.size() && steps[s].epoch <= e.epoch; ++s) {
      const auto& r = steps[s];
      out << nlohmann::ordered_json{{"type", "step"}, {"step", r.step}, {"epoch", r.epoch},
                                    {"lr", r.lr},     {"loss", r.loss}}
                 .dump()
          << '\n';
    }
    out << nlohmann::ordered_json{{"type", "epoch"},
                                  {"epoch", e.epoch},
                                  {"train_loss", e.train_loss},
                                  {"dev_micro_f1", e.dev_micro_f1},
                                  {"threshold", e.threshold},
                                  {"improved", e.improved}}
               .dump()
        << '\n';
  }
  return out.str();
}

FitResult fit(const std::vector<Example>& train, const std::vector<Example>& dev, const ModelConfig& model,
              const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("fit: empty training split");
  if (dev.empty()) throw std::invalid_argument("fit: empty dev split");
  model.validate();
  cfg.validate();

  const std::size_t steps_per_epoch = (train.size() + cfg.effective_batch - 1) / cfg.effective_batch;
  const auto schedule = LRSchedule::make(cfg.epochs_max * steps_per_epoch, cfg);

  ModelParams params = init_params(model, cfg.seed);
  AdamW opt(params, cfg);
  Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<const Example*> order;
  for (const auto& ex : train) order.push_back(&ex);

  FitResult result;
  result.params = params;
  EarlyStopState stop{cfg.patience};
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    order_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * cfg.effective_batch;
      const std::size_t end = std::min(begin + cfg.effective_batch, order.size());
      std::vector<std::vector<const Example*>> micro;
      for (std::size_t i = begin; i < end; i += cfg.micro_batch) {
        micro.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(i + cfg.micro_batch, end)));
      }
      const double lr = onecycle_lr(static_cast<double>(step), schedule, cfg);
      const double loss = train_step(params, opt, model, micro, lr);
      result.log.steps.push_back({step, epoch, lr, loss});
      loss_sum += loss;
      ++step;
    }

    const auto choice = optimize_threshold(predict_all(params, model, dev), cfg.threshold_grid);
    EpochLog rec{epoch, loss_sum / static_cast<double>(steps_per_epoch), choice.micro_f1, choice.threshold, false};
    rec.improved = stop.update(choice.micro_f1, epoch);
    if (rec.improved) {
      result.params = params;
      result.threshold = choice.threshold;
      result.dev_micro_f1 = choice.micro_f1;
      result.best_epoch = epoch;
    }
    result.log.epochs.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);
    if (stop.should_stop()) break;
  }
  return result;
}

}  // namespace htds
