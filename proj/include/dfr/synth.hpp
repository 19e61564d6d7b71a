#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "dfr/dataset.hpp"

namespace dfr {

// gaussian: class means at core_margin along orthonormal per-class directions.
// xor_sign: binary labels encoded as the sign product of two core coordinates;
// a linear probe on the raw inputs reads nothing from the core block.
enum class CoreStructure { gaussian, xor_sign };

// Vector-level analog of an image dataset with a simple spurious feature: the
// input is [core block | spurious block], the spurious block mirrors the
// attribute with a much higher signal-to-noise ratio than the core block
// mirrors the label. p_corr is the train-time probability that the attribute
// matches the label; elsewhere the attribute is uniform over the other values.
struct SpuriousSpec {
  int n_classes = 2;
  int n_attributes = 0;  // 0 means n_classes
  int d_core = 8;
  int d_spurious = 4;
  double core_margin = 1.0;
  double spurious_margin = 1.0;
  double core_noise_sigma = 0.5;
  double spurious_noise_sigma = 0.05;
  double p_corr = 0.95;
  long n_train = 2000;
  long n_val = 500;
  long n_test = 1000;
  CoreStructure core = CoreStructure::gaussian;
  std::vector<double> class_priors;  // empty means uniform

  int attributes() const { return n_attributes > 0 ? n_attributes : n_classes; }
  void check() const;  // throws on invalid spec
};

struct RawDataset {
  Eigen::MatrixXf inputs;  // n×(d_core+d_spurious)
  std::vector<int32_t> labels;
  std::vector<int32_t> attributes;
  std::vector<int32_t> groups;  // label * A + attribute
  int d_core = 0;
  int n_classes = 0;
  int n_attributes = 0;

  Eigen::Index n() const { return inputs.rows(); }
  int n_groups() const { return n_classes * n_attributes; }
  EmbeddingDataset as_embeddings() const;
};

struct SynthBundle {
  RawDataset train;
  RawDataset val;
  RawDataset test;
  GroupSchema schema;  // train prevalence counts
};

// Train follows p_corr and the class priors; val and test are group-balanced
// (per-group counts differ by at most 1). Bit-reproducible given the seed.
SynthBundle generate(const SpuriousSpec& spec, uint64_t seed);

// group = label * n_attribute_values + attribute; the schema records the
// count of each group in the given data.
std::pair<std::vector<int32_t>, GroupSchema> assign_groups(
    std::span<const int32_t> labels, std::span<const int32_t> attributes,
    int n_attribute_values);

enum class AblateMode { zero_core, zero_spurious };

// Replaces the selected block with zeros; labels and groups are untouched.
RawDataset ablate_spurious_block(const RawDataset& ds, AblateMode mode);

}  // namespace dfr
