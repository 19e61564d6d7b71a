#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dfr {

// The universal currency between modules: an n×d feature matrix plus a class
// label and a group id per row. Features are stored as f32, matching the
// on-disk format; all downstream numerics run in f64.
struct EmbeddingDataset {
  Eigen::MatrixXf features;      // n×d, one row per example
  std::vector<int32_t> labels;   // in [0, n_classes)
  std::vector<int32_t> groups;   // in [0, n_groups)
  int n_classes = 0;
  int n_groups = 0;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }

  EmbeddingDataset subset(std::span<const size_t> rows) const;
  std::vector<long> group_counts() const;
};

struct GroupSchemaEntry {
  int group_id = 0;
  int class_label = 0;
  int attribute = 0;
  long train_count = 0;
};

// Maps each group id to its (class, spurious attribute) pair and records the
// training prevalence counts that define the mixture proportions.
struct GroupSchema {
  std::vector<GroupSchemaEntry> entries;  // dense, entries[g].group_id == g
  int n_groups = 0;
  int n_classes = 0;

  std::vector<long> train_counts() const;
  std::vector<double> proportions() const;  // alpha_i; empty if total count is 0
};

struct ValidationIssue {
  std::string message;
  long row = -1;  // first offending row, -1 when not row-specific
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

// Total: reports violations as data, never throws.
ValidationReport validate(const EmbeddingDataset& ds);

struct DatasetSplit {
  EmbeddingDataset train;
  EmbeddingDataset val;
  EmbeddingDataset test;
};

enum class Stratify { none, by_group };

// Deterministic shuffle-and-apportion split. With by_group, each group's rows
// are spread over the parts in proportion to the fractions; leftover units go
// to the part with the largest global deficit, ties resolved train, val, test.
DatasetSplit split(const EmbeddingDataset& ds, std::array<double, 3> fractions,
                   uint64_t seed, Stratify stratify);

}  // namespace dfr
