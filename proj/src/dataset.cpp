#include "dfr/dataset.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dfr/rng.hpp"

namespace dfr {

EmbeddingDataset EmbeddingDataset::subset(std::span<const size_t> rows) const {
  EmbeddingDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
    out.groups.push_back(groups[rows[i]]);
  }
  out.n_classes = n_classes;
  out.n_groups = n_groups;
  return out;
}

std::vector<long> EmbeddingDataset::group_counts() const {
  std::vector<long> counts(static_cast<size_t>(n_groups), 0);
  for (int32_t g : groups) {
    if (g >= 0 && g < n_groups) ++counts[static_cast<size_t>(g)];
  }
  return counts;
}

std::vector<long> GroupSchema::train_counts() const {
  std::vector<long> c(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) c[i] = entries[i].train_count;
  return c;
}

std::vector<double> GroupSchema::proportions() const {
  const auto c = train_counts();
  const double total = std::accumulate(c.begin(), c.end(), 0.0);
  std::vector<double> p;
  if (total <= 0) return p;
  p.reserve(c.size());
  for (long x : c) p.push_back(static_cast<double>(x) / total);
  return p;
}

std::string ValidationReport::to_string() const {
  if (issues.empty()) return "ok";
  std::ostringstream os;
  for (const auto& v : issues) {
    os << v.message;
    if (v.row >= 0) os << " at row " << v.row;
    os << "\n";
  }
  return os.str();
}

ValidationReport validate(const EmbeddingDataset& ds) {
  ValidationReport rep;
  const long n = static_cast<long>(ds.features.rows());
  if (n < 1) rep.issues.push_back({"dataset is empty (n must be >= 1)", -1});
  if (static_cast<long>(ds.labels.size()) != n)
    rep.issues.push_back({"labels length " + std::to_string(ds.labels.size()) +
                              " does not match feature rows " + std::to_string(n),
                          -1});
  if (static_cast<long>(ds.groups.size()) != n)
    rep.issues.push_back({"groups length " + std::to_string(ds.groups.size()) +
                              " does not match feature rows " + std::to_string(n),
                          -1});
  if (ds.n_classes < 1) rep.issues.push_back({"n_classes must be >= 1", -1});
  if (ds.n_groups < 1) rep.issues.push_back({"n_groups must be >= 1", -1});

  const long n_lab = std::min<long>(n, static_cast<long>(ds.labels.size()));
  for (long i = 0; i < n_lab; ++i) {
    if (ds.labels[static_cast<size_t>(i)] < 0 ||
        ds.labels[static_cast<size_t>(i)] >= ds.n_classes) {
      rep.issues.push_back({"label out of range", i});
      break;
    }
  }
  const long n_grp = std::min<long>(n, static_cast<long>(ds.groups.size()));
  for (long i = 0; i < n_grp; ++i) {
    if (ds.groups[static_cast<size_t>(i)] < 0 ||
        ds.groups[static_cast<size_t>(i)] >= ds.n_groups) {
      rep.issues.push_back({"group out of range", i});
      break;
    }
  }
  for (long i = 0; i < n; ++i) {
    bool bad = false;
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      if (!std::isfinite(ds.features(i, j))) {
        bad = true;
        break;
      }
    }
    if (bad) {
      rep.issues.push_back({"non-finite feature", i});
      break;
    }
  }
  return rep;
}

namespace {

// Apportion n_g rows of one bucket over the three parts. Floors first, then
// each leftover unit goes to the part with the largest global deficit
// (global quota minus globally assigned), ties broken train, val, test.
std::array<long, 3> apportion(long n_g, const std::array<double, 3>& fractions,
                              std::array<double, 3>& global_quota,
                              std::array<long, 3>& global_assigned) {
  std::array<long, 3> counts{};
  long assigned = 0;
  for (int p = 0; p < 3; ++p) {
    global_quota[static_cast<size_t>(p)] += fractions[static_cast<size_t>(p)] * static_cast<double>(n_g);
    counts[static_cast<size_t>(p)] = static_cast<long>(std::floor(
        fractions[static_cast<size_t>(p)] * static_cast<double>(n_g)));
    assigned += counts[static_cast<size_t>(p)];
  }
  for (long r = assigned; r < n_g; ++r) {
    int best = 0;
    double best_deficit = -1e300;
    for (int p = 0; p < 3; ++p) {
      const double deficit =
          global_quota[static_cast<size_t>(p)] -
          static_cast<double>(global_assigned[static_cast<size_t>(p)] +
                              counts[static_cast<size_t>(p)]);
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = p;
      }
    }
    ++counts[static_cast<size_t>(best)];
  }
  for (int p = 0; p < 3; ++p)
    global_assigned[static_cast<size_t>(p)] += counts[static_cast<size_t>(p)];
  return counts;
}

}  // namespace

DatasetSplit split(const EmbeddingDataset& ds, std::array<double, 3> fractions,
                   uint64_t seed, Stratify stratify) {
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("split: fractions must be positive");
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1 (got " +
                                std::to_string(total) + ")");

  // Buckets: the whole dataset, or one bucket per group.
  std::vector<std::vector<size_t>> buckets;
  if (stratify == Stratify::by_group) {
    buckets.resize(static_cast<size_t>(ds.n_groups));
    for (size_t i = 0; i < ds.groups.size(); ++i)
      buckets[static_cast<size_t>(ds.groups[i])].push_back(i);
    for (size_t g = 0; g < buckets.size(); ++g) {
      if (!buckets[g].empty() && buckets[g].size() < 3)
        throw std::invalid_argument("split: group " + std::to_string(g) +
                                    " has fewer rows than parts");
    }
  } else {
    buckets.emplace_back(ds.labels.size());
    std::iota(buckets[0].begin(), buckets[0].end(), size_t{0});
  }

  std::array<double, 3> global_quota{0, 0, 0};
  std::array<long, 3> global_assigned{0, 0, 0};
  std::array<std::vector<size_t>, 3> part_rows;

  for (size_t b = 0; b < buckets.size(); ++b) {
    auto& rows = buckets[b];
    if (rows.empty()) continue;
    Rng rng(mix_seed(seed, b));
    rng.shuffle(rows);
    const auto counts =
        apportion(static_cast<long>(rows.size()), fractions, global_quota, global_assigned);
    size_t pos = 0;
    for (int p = 0; p < 3; ++p) {
      for (long k = 0; k < counts[static_cast<size_t>(p)]; ++k)
        part_rows[static_cast<size_t>(p)].push_back(rows[pos++]);
    }
  }
  for (auto& rows : part_rows) std::sort(rows.begin(), rows.end());

  DatasetSplit out;
  out.train = ds.subset(part_rows[0]);
  out.val = ds.subset(part_rows[1]);
  out.test = ds.subset(part_rows[2]);
  return out;
}

}  // namespace dfr
