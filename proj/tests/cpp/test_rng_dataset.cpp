#include <doctest.h>

#include <limits>
#include <set>

#include "dfr/dataset.hpp"
#include "dfr/rng.hpp"

using namespace dfr;

namespace {

EmbeddingDataset four_group_dataset(int per_group) {
  EmbeddingDataset ds;
  const int n = 4 * per_group;
  ds.features.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.features(i, 0) = static_cast<float>(i);
    ds.features(i, 1) = static_cast<float>(-i);
    ds.labels.push_back((i / per_group) / 2);
    ds.groups.push_back(i / per_group);
  }
  ds.n_classes = 2;
  ds.n_groups = 4;
  return ds;
}

}  // namespace

TEST_CASE("seed mixing is deterministic and spreads") {
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 2));
}

TEST_CASE("rng primitives behave") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  Rng c(8);
  for (int i = 0; i < 100; ++i) {
    CHECK(c.below(17) < 17);
    CHECK(std::isfinite(c.normal()));
  }
  Rng d(9);
  const auto sample = d.sample_without_replacement(50, 12);
  CHECK(sample.size() == 12);
  CHECK(std::is_sorted(sample.begin(), sample.end()));
  CHECK(std::set<size_t>(sample.begin(), sample.end()).size() == 12);
  for (size_t v : sample) CHECK(v < 50);
}

TEST_CASE("validate accepts a well-formed dataset") {
  const auto ds = four_group_dataset(3);
  CHECK(validate(ds).ok());
}

TEST_CASE("validate flags out-of-range labels with the offending row") {
  auto ds = four_group_dataset(3);
  ds.labels[5] = 2;  // == n_classes
  const auto rep = validate(ds);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.issues[0].message == "label out of range");
  CHECK(rep.issues[0].row == 5);
}

TEST_CASE("validate flags non-finite features") {
  auto ds = four_group_dataset(3);
  ds.features(7, 1) = std::numeric_limits<float>::quiet_NaN();
  const auto rep = validate(ds);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.issues[0].message == "non-finite feature");
  CHECK(rep.issues[0].row == 7);
}

TEST_CASE("validate is total on malformed shapes") {
  EmbeddingDataset ds;  // empty everything
  CHECK_FALSE(validate(ds).ok());
  ds.features.resize(3, 2);
  ds.features.setZero();
  ds.labels = {0};  // wrong length
  ds.groups = {0, 0, 0, 0};
  ds.n_classes = 1;
  ds.n_groups = 1;
  CHECK_FALSE(validate(ds).ok());
}

TEST_CASE("stratified split reproduces the documented apportionment") {
  const auto ds = four_group_dataset(25);  // n = 100
  const auto parts = split(ds, {0.8, 0.1, 0.1}, 3, Stratify::by_group);
  CHECK(parts.train.n() == 80);
  CHECK(parts.val.n() == 10);
  CHECK(parts.test.n() == 10);
  for (long c : parts.train.group_counts()) CHECK(c == 20);
  for (long c : parts.val.group_counts()) {
    CHECK(c >= 2);
    CHECK(c <= 3);
  }
  for (long c : parts.test.group_counts()) {
    CHECK(c >= 2);
    CHECK(c <= 3);
  }
}

TEST_CASE("split is deterministic per seed and row-disjoint") {
  const auto ds = four_group_dataset(25);
  const auto a = split(ds, {0.8, 0.1, 0.1}, 11, Stratify::by_group);
  const auto b = split(ds, {0.8, 0.1, 0.1}, 11, Stratify::by_group);
  CHECK(a.train.features == b.train.features);
  CHECK(a.val.features == b.val.features);
  CHECK(a.test.features == b.test.features);

  // Feature values are unique row ids here; the parts must partition them.
  std::set<float> seen;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (Eigen::Index i = 0; i < part->n(); ++i) seen.insert(part->features(i, 0));
  CHECK(seen.size() == 100);
}

TEST_CASE("different seeds give different splits almost surely") {
  const auto ds = four_group_dataset(25);
  const auto base = split(ds, {0.8, 0.1, 0.1}, 0, Stratify::none);
  int differing = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    const auto other = split(ds, {0.8, 0.1, 0.1}, seed, Stratify::none);
    if (other.train.features != base.train.features) ++differing;
  }
  CHECK(differing >= 99);
}

TEST_CASE("split rejects bad fractions and too-small groups") {
  const auto ds = four_group_dataset(25);
  CHECK_THROWS_WITH_AS(split(ds, {0.7, 0.1, 0.1}, 0, Stratify::none),
                       doctest::Contains("sum to 1"), std::invalid_argument);
  CHECK_THROWS(split(ds, {-0.2, 0.6, 0.6}, 0, Stratify::none));

  // Shrink group 2 to two rows; stratified splitting must name it.
  const auto full = four_group_dataset(25);
  std::vector<size_t> keep;
  int g2 = 0;
  for (size_t i = 0; i < full.groups.size(); ++i) {
    if (full.groups[i] == 2 && g2++ >= 2) continue;
    keep.push_back(i);
  }
  const auto small = full.subset(keep);
  CHECK_THROWS_WITH_AS(split(small, {0.8, 0.1, 0.1}, 0, Stratify::by_group),
                       doctest::Contains("group 2"), std::invalid_argument);
}

TEST_CASE("group schema proportions") {
  GroupSchema schema;
  schema.n_classes = 2;
  schema.n_groups = 4;
  schema.entries = {{0, 0, 0, 3498}, {1, 0, 1, 184}, {2, 1, 0, 56}, {3, 1, 1, 1057}};
  const auto p = schema.proportions();
  REQUIRE(p.size() == 4);
  CHECK(p[0] == doctest::Approx(3498.0 / 4795.0));
  double total = 0.0;
  for (double v : p) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}
