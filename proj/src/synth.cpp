#include "dfr/synth.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dfr/rng.hpp"

namespace dfr {

namespace {

// k orthonormal columns in dimension n, via Gaussian draws + modified
// Gram-Schmidt. Deterministic in the rng state.
Eigen::MatrixXd orthonormal_directions(int n, int k, Rng& rng) {
  Eigen::MatrixXd m(n, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = rng.normal();
  for (int j = 0; j < k; ++j) {
    for (int p = 0; p < j; ++p) m.col(j) -= m.col(p).dot(m.col(j)) * m.col(p);
    const double norm = m.col(j).norm();
    if (norm < 1e-8)
      throw std::runtime_error("orthonormal_directions: degenerate draw");
    m.col(j) /= norm;
  }
  return m;
}

std::vector<double> effective_priors(const SpuriousSpec& spec) {
  if (spec.class_priors.empty())
    return std::vector<double>(static_cast<size_t>(spec.n_classes),
                               1.0 / spec.n_classes);
  return spec.class_priors;
}

struct Directions {
  Eigen::MatrixXd core;      // d_core × n_classes
  Eigen::MatrixXd spurious;  // d_spurious × A
};

// Row i of the output dataset: [core(label_i) | spurious(attribute_i)] + noise.
RawDataset materialize(const SpuriousSpec& spec, const Directions& dirs,
                       std::vector<int32_t> labels, std::vector<int32_t> attrs,
                       Rng& rng) {
  const int d = spec.d_core + spec.d_spurious;
  const auto n = static_cast<Eigen::Index>(labels.size());
  RawDataset ds;
  ds.inputs.resize(n, d);
  ds.d_core = spec.d_core;
  ds.n_classes = spec.n_classes;
  ds.n_attributes = spec.attributes();

  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    const int a = attrs[static_cast<size_t>(i)];
    Eigen::VectorXd core;
    if (spec.core == CoreStructure::gaussian) {
      core = spec.core_margin * dirs.core.col(y);
    } else {
      // Signs with product +1 encode class 1, product -1 class 0.
      const bool flip = rng.uniform() < 0.5;
      double s0 = flip ? -1.0 : 1.0;
      double s1 = (y == 1) ? s0 : -s0;
      core = spec.core_margin * (s0 * dirs.core.col(0) + s1 * dirs.core.col(1));
    }
    for (int j = 0; j < spec.d_core; ++j)
      ds.inputs(i, j) =
          static_cast<float>(core(j) + spec.core_noise_sigma * rng.normal());
    for (int j = 0; j < spec.d_spurious; ++j)
      ds.inputs(i, spec.d_core + j) = static_cast<float>(
          spec.spurious_margin * dirs.spurious(j, a) +
          spec.spurious_noise_sigma * rng.normal());
  }
  ds.labels = std::move(labels);
  ds.attributes = std::move(attrs);
  ds.groups.resize(ds.labels.size());
  for (size_t i = 0; i < ds.labels.size(); ++i)
    ds.groups[i] = ds.labels[i] * ds.n_attributes + ds.attributes[i];
  return ds;
}

// Group-balanced label/attribute assignment: per-cell counts differ by at
// most one, the order is then shuffled.
void balanced_cells(long n, int n_classes, int A, Rng& rng,
                    std::vector<int32_t>& labels, std::vector<int32_t>& attrs) {
  const int G = n_classes * A;
  const long base = n / G;
  const long rem = n % G;
  labels.clear();
  attrs.clear();
  labels.reserve(static_cast<size_t>(n));
  attrs.reserve(static_cast<size_t>(n));
  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), size_t{0});
  rng.shuffle(order);
  std::vector<int32_t> cell_label(static_cast<size_t>(n)), cell_attr(static_cast<size_t>(n));
  size_t pos = 0;
  for (int g = 0; g < G; ++g) {
    const long count = base + (g < rem ? 1 : 0);
    for (long k = 0; k < count; ++k, ++pos) {
      cell_label[pos] = static_cast<int32_t>(g / A);
      cell_attr[pos] = static_cast<int32_t>(g % A);
    }
  }
  labels.resize(static_cast<size_t>(n));
  attrs.resize(static_cast<size_t>(n));
  for (size_t i = 0; i < order.size(); ++i) {
    labels[i] = cell_label[order[i]];
    attrs[i] = cell_attr[order[i]];
  }
}

}  // namespace

void SpuriousSpec::check() const {
  if (n_classes < 2) throw std::invalid_argument("SpuriousSpec: n_classes must be >= 2");
  if (attributes() != n_classes)
    throw std::invalid_argument(
        "SpuriousSpec: generate requires one attribute value per class");
  if (d_core < 1 || d_spurious < 1)
    throw std::invalid_argument("SpuriousSpec: block dimensions must be >= 1");
  if (core == CoreStructure::gaussian && d_core < n_classes)
    throw std::invalid_argument(
        "SpuriousSpec: d_core must be >= n_classes for orthonormal class means");
  if (core == CoreStructure::xor_sign && (n_classes != 2 || d_core < 2))
    throw std::invalid_argument(
        "SpuriousSpec: xor core needs n_classes == 2 and d_core >= 2");
  if (d_spurious < attributes())
    throw std::invalid_argument(
        "SpuriousSpec: d_spurious must be >= the number of attribute values");
  if (p_corr < 0.0 || p_corr > 1.0)
    throw std::invalid_argument("SpuriousSpec: p_corr must be in [0, 1]");
  if (core_noise_sigma < 0.0 || spurious_noise_sigma < 0.0)
    throw std::invalid_argument("SpuriousSpec: noise sigmas must be >= 0");
  if (core_margin <= 0.0 || spurious_margin <= 0.0)
    throw std::invalid_argument("SpuriousSpec: margins must be > 0");
  const long min_count = static_cast<long>(n_classes) * attributes();
  if (n_train < min_count || n_val < min_count || n_test < min_count)
    throw std::invalid_argument(
        "SpuriousSpec: each part needs at least n_classes * n_attributes rows");
  if (!class_priors.empty()) {
    if (static_cast<int>(class_priors.size()) != n_classes)
      throw std::invalid_argument("SpuriousSpec: class_priors size mismatch");
    double total = 0.0;
    for (double p : class_priors) {
      if (p <= 0.0) throw std::invalid_argument("SpuriousSpec: priors must be > 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("SpuriousSpec: priors must sum to 1");
  }
}

EmbeddingDataset RawDataset::as_embeddings() const {
  EmbeddingDataset ds;
  ds.features = inputs;
  ds.labels = labels;
  ds.groups = groups;
  ds.n_classes = n_classes;
  ds.n_groups = n_groups();
  return ds;
}

SynthBundle generate(const SpuriousSpec& spec, uint64_t seed) {
  spec.check();
  const int C = spec.n_classes;
  const int A = spec.attributes();
  const auto priors = effective_priors(spec);

  Rng dir_rng(mix_seed(seed, 0));
  Directions dirs;
  dirs.core = orthonormal_directions(spec.d_core,
                                     spec.core == CoreStructure::xor_sign ? 2 : C,
                                     dir_rng);
  dirs.spurious = orthonormal_directions(spec.d_spurious, A, dir_rng);

  SynthBundle out;
  {
    Rng rng(mix_seed(seed, 1));
    std::vector<int32_t> labels(static_cast<size_t>(spec.n_train));
    std::vector<int32_t> attrs(static_cast<size_t>(spec.n_train));
    for (long i = 0; i < spec.n_train; ++i) {
      const int y = rng.categorical(priors);
      int a = y;
      if (A > 1 && rng.uniform() >= spec.p_corr) {
        // Uniform over the remaining attribute values.
        const auto r = static_cast<int>(rng.below(static_cast<uint64_t>(A - 1)));
        a = r < y ? r : r + 1;
      }
      labels[static_cast<size_t>(i)] = y;
      attrs[static_cast<size_t>(i)] = a;
    }
    out.train = materialize(spec, dirs, std::move(labels), std::move(attrs), rng);
  }
  for (int part = 0; part < 2; ++part) {
    Rng rng(mix_seed(seed, 2 + static_cast<uint64_t>(part)));
    std::vector<int32_t> labels, attrs;
    balanced_cells(part == 0 ? spec.n_val : spec.n_test, C, A, rng, labels, attrs);
    (part == 0 ? out.val : out.test) =
        materialize(spec, dirs, std::move(labels), std::move(attrs), rng);
  }
  out.schema = assign_groups(out.train.labels, out.train.attributes, A).second;
  // Schema spans all C*A groups even if a minority cell is empty on train.
  if (out.schema.n_groups != C * A) {
    GroupSchema schema;
    schema.n_classes = C;
    schema.n_groups = C * A;
    schema.entries.resize(static_cast<size_t>(C * A));
    for (int g = 0; g < C * A; ++g)
      schema.entries[static_cast<size_t>(g)] = {g, g / A, g % A, 0};
    for (int32_t g : out.train.groups)
      ++schema.entries[static_cast<size_t>(g)].train_count;
    out.schema = schema;
  }
  return out;
}

std::pair<std::vector<int32_t>, GroupSchema> assign_groups(
    std::span<const int32_t> labels, std::span<const int32_t> attributes,
    int n_attribute_values) {
  if (labels.size() != attributes.size())
    throw std::invalid_argument("assign_groups: length mismatch");
  if (n_attribute_values < 1)
    throw std::invalid_argument("assign_groups: n_attribute_values must be >= 1");
  int max_label = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw std::invalid_argument("assign_groups: negative label");
    if (attributes[i] < 0 || attributes[i] >= n_attribute_values)
      throw std::invalid_argument("assign_groups: attribute out of range at row " +
                                  std::to_string(i));
    max_label = std::max(max_label, labels[i]);
  }
  const int C = max_label + 1;
  const int G = C * n_attribute_values;
  std::vector<int32_t> groups(labels.size());
  GroupSchema schema;
  schema.n_classes = C;
  schema.n_groups = G;
  schema.entries.resize(static_cast<size_t>(G));
  for (int g = 0; g < G; ++g)
    schema.entries[static_cast<size_t>(g)] = {g, g / n_attribute_values,
                                              g % n_attribute_values, 0};
  for (size_t i = 0; i < labels.size(); ++i) {
    const int32_t g = labels[i] * n_attribute_values + attributes[i];
    groups[i] = g;
    ++schema.entries[static_cast<size_t>(g)].train_count;
  }
  return {std::move(groups), std::move(schema)};
}

RawDataset ablate_spurious_block(const RawDataset& ds, AblateMode mode) {
  RawDataset out = ds;
  if (mode == AblateMode::zero_spurious) {
    out.inputs.rightCols(out.inputs.cols() - ds.d_core).setZero();
  } else {
    out.inputs.leftCols(ds.d_core).setZero();
  }
  return out;
}

}  // namespace dfr
