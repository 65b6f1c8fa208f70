#include "htds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "htds/config.hpp"

namespace htds {
namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

double f1(const Counts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

void check(const PredictionSet& p) {
  if (!p.probs.same_shape(p.gold)) throw std::invalid_argument("prediction/gold shape mismatch");
  if (p.n_stays() == 0) throw std::invalid_argument("no stays to evaluate");
}

std::vector<Counts> label_counts(const PredictionSet& p, double t) {
  std::vector<Counts> out(p.n_labels());
  for (std::size_t s = 0; s < p.n_stays(); ++s) {
    for (std::size_t l = 0; l < p.n_labels(); ++l) {
      const bool pred = p.probs(s, l) >= t;
      const bool gold = p.gold(s, l) != 0.0;
      if (pred && gold) ++out[l].tp;
      else if (pred) ++out[l].fp;
      else if (gold) ++out[l].fn;
    }
  }
  return out;
}

}  // namespace

double micro_f1(const PredictionSet& p, double threshold) {
  check(p);
  Counts total;
  for (const auto& c : label_counts(p, threshold)) {
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
  }
  return f1(total);
}

double macro_f1(const PredictionSet& p, double threshold) {
  check(p);
  const auto counts = label_counts(p, threshold);
  double sum = 0.0;
  for (const auto& c : counts) sum += f1(c);
  return sum / static_cast<double>(counts.size());
}

double rank_auc(const std::vector<double>& scores, const std::vector<double>& gold) {
  if (scores.size() != gold.size()) throw std::invalid_argument("rank_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (gold[order[k]] != 0.0) {
        pos += 1.0;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw MetricError("AUC undefined without both positives and negatives");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double micro_auc(const PredictionSet& p) {
  check(p);
  const auto s = p.probs.flat();
  const auto g = p.gold.flat();
  return rank_auc({s.begin(), s.end()}, {g.begin(), g.end()});
}

double macro_auc(const PredictionSet& p) {
  check(p);
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> s(p.n_stays()), g(p.n_stays());
  for (std::size_t l = 0; l < p.n_labels(); ++l) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < p.n_stays(); ++i) {
      s[i] = p.probs(i, l);
      g[i] = p.gold(i, l);
      pos += g[i] != 0.0;
    }
    if (pos == 0 || pos == p.n_stays()) continue;
    sum += rank_auc(s, g);
    ++used;
  }
  if (used == 0) throw MetricError("macro-AUC undefined: every label is all-positive or all-negative");
  return sum / static_cast<double>(used);
}

double precision_at_k(const PredictionSet& p, std::size_t k) {
  check(p);
  if (k == 0 || k > p.n_labels()) throw std::invalid_argument("precision_at_k: need 1 <= k <= labels");
  std::vector<std::size_t> idx(p.n_labels());
  double total = 0.0;
  for (std::size_t s = 0; s < p.n_stays(); ++s) {
    std::iota(idx.begin(), idx.end(), 0);
    const auto row = p.probs.row(s);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += p.gold(s, idx[i]) != 0.0;
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(p.n_stays());
}

MetricsReport evaluate_predictions(const PredictionSet& p, double threshold) {
  MetricsReport r;
  r.micro_f1 = micro_f1(p, threshold);
  r.macro_f1 = macro_f1(p, threshold);
  r.micro_auc = micro_auc(p);
  r.macro_auc = macro_auc(p);
  r.p_at_5 = precision_at_k(p, 5);
  r.threshold = threshold;
  r.n_stays = p.n_stays();
  return r;
}

std::string MetricsReport::to_key_value() const {
  std::ostringstream out;
  out << "micro_f1 = " << format_real(micro_f1) << '\n'
      << "macro_f1 = " << format_real(macro_f1) << '\n'
      << "micro_auc = " << format_real(micro_auc) << '\n'
      << "macro_auc = " << format_real(macro_auc) << '\n'
      << "p_at_5 = " << format_real(p_at_5) << '\n'
      << "threshold = " << format_real(threshold) << '\n'
      << "n_stays = " << n_stays << '\n';
  return out.str();
}

std::string MetricsReport::to_json_line() const {
  const nlohmann::ordered_json j = {{"micro_f1", micro_f1}, {"macro_f1", macro_f1},
                                    {"micro_auc", micro_auc}, {"macro_auc", macro_auc},
                                    {"p_at_5", p_at_5},     {"threshold", threshold},
                                    {"n_stays", n_stays}};
  return j.dump();
}

MetricsReport MetricsReport::from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  MetricsReport r;
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.micro_auc = j.at("micro_auc").get<double>();
  r.macro_auc = j.at("macro_auc").get<double>();
  r.p_at_5 = j.at("p_at_5").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.n_stays = j.at("n_stays").get<std::size_t>();
  return r;
}

MeanSdN mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_sd: no values");
  MeanSdN r;
  r.n = xs.size();
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
  }
  return r;
}

namespace {

std::vector<double> column(const std::vector<MetricsReport>& rs, double MetricsReport::*field) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(r.*field);
  return out;
}

void put_stat(std::ostream& out, std::string_view name, const MeanSdN& s) {
  out << name << "_mean = " << format_real(s.mean) << '\n' << name << "_sd = " << format_real(s.sd) << '\n';
}

}  // namespace

AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_runs: no reports");
  AggregateReport a;
  a.runs = reports.size();
  a.micro_f1 = mean_sd(column(reports, &MetricsReport::micro_f1));
  a.macro_f1 = mean_sd(column(reports, &MetricsReport::macro_f1));
  a.micro_auc = mean_sd(column(reports, &MetricsReport::micro_auc));
  a.macro_auc = mean_sd(column(reports, &MetricsReport::macro_auc));
  a.p_at_5 = mean_sd(column(reports, &MetricsReport::p_at_5));
  return a;
}

std::string AggregateReport::to_key_value() const {
  std::ostringstream out;
  out << "runs = " << runs << '\n';
  put_stat(out, "micro_f1", micro_f1);
  put_stat(out, "macro_f1", macro_f1);
  put_stat(out, "micro_auc", micro_auc);
  put_stat(out, "macro_auc", macro_auc);
  put_stat(out, "p_at_5", p_at_5);
  return out.str();
}

double welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: need two samples per group");
  const MeanSdN sa = mean_sd(a), sb = mean_sd(b);
  const double va = sa.sd * sa.sd / static_cast<double>(sa.n);
  const double vb = sb.sd * sb.sd / static_cast<double>(sb.n);
  if (va + vb == 0.0) return sa.mean == sb.mean ? 1.0 : 0.0;
  const double t = (sa.mean - sb.mean) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(sa.n - 1) + vb * vb / static_cast<double>(sb.n - 1));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

GroupComparison compare_groups(const std::vector<MetricsReport>& a, const std::vector<MetricsReport>& b) {
  GroupComparison c;
  c.a = aggregate_runs(a);
  c.b = aggregate_runs(b);
  c.p_micro_f1 = welch_t_test(column(a, &MetricsReport::micro_f1), column(b, &MetricsReport::micro_f1));
  c.p_macro_f1 = welch_t_test(column(a, &MetricsReport::macro_f1), column(b, &MetricsReport::macro_f1));
  c.p_micro_auc = welch_t_test(column(a, &MetricsReport::micro_auc), column(b, &MetricsReport::micro_auc));
  c.p_macro_auc = welch_t_test(column(a, &MetricsReport::macro_auc), column(b, &MetricsReport::macro_auc));
  c.p_p_at_5 = welch_t_test(column(a, &MetricsReport::p_at_5), column(b, &MetricsReport::p_at_5));
  return c;
}

std::string GroupComparison::to_key_value() const {
  std::ostringstream out;
  out << "runs_a = " << a.runs << '\n' << "runs_b = " << b.runs << '\n';
  auto row = [&](std::string_view name, const MeanSdN& x, const MeanSdN& y, double p) {
    out << name << "_a = " << format_real(x.mean) << " +- " << format_real(x.sd) << '\n'
        << name << "_b = " << format_real(y.mean) << " +- " << format_real(y.sd) << '\n'
        << name << "_p = " << format_real(p) << '\n'
        << name << "_significant = " << (p < 0.05 ? "true" : "false") << '\n';
  };
  row("micro_f1", a.micro_f1, b.micro_f1, p_micro_f1);
  row("macro_f1", a.macro_f1, b.macro_f1, p_macro_f1);
  row("micro_auc", a.micro_auc, b.micro_auc, p_micro_auc);
  row("macro_auc", a.macro_auc, b.macro_auc, p_macro_auc);
  row("p_at_5", a.p_at_5, b.p_at_5, p_p_at_5);
  return out.str();
}

}  // namespace htds
