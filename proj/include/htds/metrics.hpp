#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "htds/tensor.hpp"

namespace htds {

// A metric is undefined on the given data (e.g. AUC without negatives).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scores and gold labels for a set of stays; both n_stays x n_labels, gold
// entries are 0 or 1.
struct PredictionSet {
  Matrix probs;
  Matrix gold;

  std::size_t n_stays() const { return probs.rows(); }
  std::size_t n_labels() const { return probs.cols(); }
};

// Positive decision is probability >= threshold.
double micro_f1(const PredictionSet& p, double threshold);
// Unweighted mean of per-label F1; a label with TP = FP = FN = 0 scores 0.
double macro_f1(const PredictionSet& p, double threshold);
// Mann-Whitney AUC over all pooled (stay, label) pairs; ties count 1/2.
double micro_auc(const PredictionSet& p);
// Mean per-label AUC over labels having both positives and negatives.
double macro_auc(const PredictionSet& p);
// Mean over stays of |top-k ∩ gold| / k; ties by ascending label index.
double precision_at_k(const PredictionSet& p, std::size_t k = 5);

// AUC of one score list against binary gold, by average ranks.
double rank_auc(const std::vector<double>& scores, const std::vector<double>& gold);

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double micro_auc = 0.0;
  double macro_auc = 0.0;
  double p_at_5 = 0.0;
  double threshold = 0.5;
  std::size_t n_stays = 0;

  std::string to_key_value() const;
  std::string to_json_line() const;
  static MetricsReport from_json_line(const std::string& line);
};

MetricsReport evaluate_predictions(const PredictionSet& p, double threshold);

struct MeanSdN {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single run
  std::size_t n = 0;
};

MeanSdN mean_sd(const std::vector<double>& xs);

struct AggregateReport {
  MeanSdN micro_f1, macro_f1, micro_auc, macro_auc, p_at_5;
  std::size_t runs = 0;

  std::string to_key_value() const;
};

AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports);

// Two-sided Welch t-test p-value. Needs at least two samples per group.
// Both groups constant: 1 when the means agree, 0 otherwise.
double welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Per-metric Welch p-values between two groups of runs.
struct GroupComparison {
  AggregateReport a, b;
  double p_micro_f1 = 1.0, p_macro_f1 = 1.0, p_micro_auc = 1.0, p_macro_auc = 1.0, p_p_at_5 = 1.0;

  std::string to_key_value() const;
};

GroupComparison compare_groups(const std::vector<MetricsReport>& a, const std::vector<MetricsReport>& b);

}  // namespace htds
