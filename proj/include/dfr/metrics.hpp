#pragma once

#include <span>
#include <string>
#include <vector>

namespace dfr {

// Per-group evaluation. Groups absent from the evaluation data carry count 0
// and accuracy NaN; they are excluded from the worst-group minimum and the
// weighted mean (weights renormalized over present groups).
struct GroupMetrics {
  std::vector<double> per_group_accuracy;
  std::vector<long> per_group_count;
  double worst_group_accuracy = 0.0;
  double weighted_mean_accuracy = 0.0;
  double mean_over_examples = 0.0;

  std::string to_json() const;
};

struct GroupAccuracies {
  std::vector<double> accuracy;  // NaN where count == 0
  std::vector<long> count;
};

GroupAccuracies group_accuracies(std::span<const int32_t> predictions,
                                 std::span<const int32_t> labels,
                                 std::span<const int32_t> groups, int n_groups);

double worst_group_accuracy(const GroupAccuracies& acc);

double weighted_mean_accuracy(std::span<const double> per_group_accuracy,
                              std::span<const long> train_counts);

GroupMetrics evaluate_groups(std::span<const int32_t> predictions,
                             std::span<const int32_t> labels,
                             std::span<const int32_t> groups, int n_groups,
                             std::span<const long> train_counts);

}  // namespace dfr
