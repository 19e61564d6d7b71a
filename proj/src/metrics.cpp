#include "dfr/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dfr {

GroupAccuracies group_accuracies(std::span<const int32_t> predictions,
                                 std::span<const int32_t> labels,
                                 std::span<const int32_t> groups, int n_groups) {
  if (predictions.size() != labels.size() || labels.size() != groups.size())
    throw std::invalid_argument("group_accuracies: length mismatch");
  GroupAccuracies out;
  out.count.assign(static_cast<size_t>(n_groups), 0);
  std::vector<long> correct(static_cast<size_t>(n_groups), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int32_t g = groups[i];
    if (g < 0 || g >= n_groups)
      throw std::invalid_argument("group_accuracies: group id " +
                                  std::to_string(g) + " out of range");
    ++out.count[static_cast<size_t>(g)];
    if (predictions[i] == labels[i]) ++correct[static_cast<size_t>(g)];
  }
  out.accuracy.assign(static_cast<size_t>(n_groups),
                      std::numeric_limits<double>::quiet_NaN());
  for (int g = 0; g < n_groups; ++g) {
    if (out.count[static_cast<size_t>(g)] > 0)
      out.accuracy[static_cast<size_t>(g)] =
          static_cast<double>(correct[static_cast<size_t>(g)]) /
          static_cast<double>(out.count[static_cast<size_t>(g)]);
  }
  return out;
}

double worst_group_accuracy(const GroupAccuracies& acc) {
  double worst = std::numeric_limits<double>::infinity();
  bool any = false;
  for (size_t g = 0; g < acc.accuracy.size(); ++g) {
    if (acc.count[g] > 0) {
      any = true;
      worst = std::min(worst, acc.accuracy[g]);
    }
  }
  if (!any) throw std::invalid_argument("worst_group_accuracy: all groups empty");
  return worst;
}

double weighted_mean_accuracy(std::span<const double> per_group_accuracy,
                              std::span<const long> train_counts) {
  if (per_group_accuracy.size() != train_counts.size())
    throw std::invalid_argument("weighted_mean_accuracy: length mismatch");
  double total = 0.0, acc = 0.0;
  for (size_t g = 0; g < train_counts.size(); ++g) {
    if (std::isnan(per_group_accuracy[g])) continue;  // absent in eval data
    total += static_cast<double>(train_counts[g]);
    acc += per_group_accuracy[g] * static_cast<double>(train_counts[g]);
  }
  if (total <= 0.0)
    throw std::invalid_argument("weighted_mean_accuracy: zero total count");
  return acc / total;
}

GroupMetrics evaluate_groups(std::span<const int32_t> predictions,
                             std::span<const int32_t> labels,
                             std::span<const int32_t> groups, int n_groups,
                             std::span<const long> train_counts) {
  const auto acc = group_accuracies(predictions, labels, groups, n_groups);
  GroupMetrics m;
  m.per_group_accuracy = acc.accuracy;
  m.per_group_count = acc.count;
  m.worst_group_accuracy = worst_group_accuracy(acc);
  m.weighted_mean_accuracy = weighted_mean_accuracy(acc.accuracy, train_counts);
  long correct = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  m.mean_over_examples =
      static_cast<double>(correct) / static_cast<double>(labels.size());
  return m;
}

std::string GroupMetrics::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"per_group\":[";
  for (size_t g = 0; g < per_group_accuracy.size(); ++g) {
    if (g) os << ",";
    os << "{\"group\":" << g << ",\"count\":" << per_group_count[g]
       << ",\"accuracy\":";
    if (std::isnan(per_group_accuracy[g]))
      os << "null";
    else
      os << per_group_accuracy[g];
    os << "}";
  }
  os << "],\"worst\":" << worst_group_accuracy
     << ",\"weighted_mean\":" << weighted_mean_accuracy
     << ",\"mean_over_examples\":" << mean_over_examples << "}";
  return os.str();
}

}  // namespace dfr
