#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dfr/embedding_io.hpp"
#include "dfr/rng.hpp"

using namespace dfr;
namespace fs = std::filesystem;

namespace {

EmbeddingDataset random_dataset(Rng& rng, long n, int d, int C, int G) {
  EmbeddingDataset ds;
  ds.features.resize(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      ds.features(i, j) = static_cast<float>(10.0 * rng.normal());
  for (long i = 0; i < n; ++i) {
    ds.labels.push_back(static_cast<int32_t>(rng.below(static_cast<uint64_t>(C))));
    ds.groups.push_back(static_cast<int32_t>(rng.below(static_cast<uint64_t>(G))));
  }
  ds.n_classes = C;
  ds.n_groups = G;
  return ds;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("small csv fixture loads with inferred class and group counts") {
  TempFile f("io_fixture.csv");
  {
    std::ofstream os(f.path);
    os << "feat_0,feat_1,label,group\n";
    os << "0.5,-1.25,0,0\n";
    os << "1.5,2.0,1,3\n";
    os << "-0.125,0.25,0,2\n";
  }
  const auto ds = load_embeddings(f.path, EmbeddingFormat::csv);
  CHECK(ds.n() == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.n_classes == 2);
  CHECK(ds.n_groups == 4);
  CHECK(ds.features(0, 1) == doctest::Approx(-1.25));
  CHECK(ds.labels == std::vector<int32_t>{0, 1, 0});
}

TEST_CASE("csv rejects malformed header and ragged rows") {
  TempFile f("io_bad.csv");
  {
    std::ofstream os(f.path);
    os << "feat_0,feat_9,label,group\n0.1,0.2,0,0\n";
  }
  CHECK_THROWS_WITH_AS(load_embeddings(f.path, EmbeddingFormat::csv),
                       doctest::Contains("header"), std::runtime_error);
  {
    std::ofstream os(f.path);
    os << "feat_0,feat_1,label,group\n0.1,0.2,0\n";
  }
  CHECK_THROWS_WITH_AS(load_embeddings(f.path, EmbeddingFormat::csv),
                       doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("binary round trip is bitwise exact") {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto ds = random_dataset(rng, 1 + static_cast<long>(rng.below(40)),
                                   1 + static_cast<int>(rng.below(8)), 3, 5);
    TempFile f("io_roundtrip.dfre");
    save_embeddings(ds, f.path, EmbeddingFormat::binary);
    const auto back = load_embeddings(f.path, EmbeddingFormat::binary);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.groups == ds.groups);
    CHECK(back.n_classes == ds.n_classes);
    CHECK(back.n_groups == ds.n_groups);
  }
}

TEST_CASE("csv round trip stays within 1e-6 per element") {
  Rng rng(22);
  for (int t = 0; t < 10; ++t) {
    const auto ds = random_dataset(rng, 20, 4, 2, 4);
    TempFile f("io_roundtrip.csv");
    save_embeddings(ds, f.path, EmbeddingFormat::csv);
    const auto back = load_embeddings(f.path, EmbeddingFormat::csv);
    REQUIRE(back.n() == ds.n());
    CHECK((back.features - ds.features).cwiseAbs().maxCoeff() <= 1e-6f);
    CHECK(back.labels == ds.labels);
  }
}

TEST_CASE("corrupted magic bytes are rejected") {
  Rng rng(23);
  const auto ds = random_dataset(rng, 5, 3, 2, 2);
  TempFile f("io_magic.dfre");
  save_embeddings(ds, f.path, EmbeddingFormat::binary);
  {
    std::fstream s(f.path, std::ios::in | std::ios::out | std::ios::binary);
    s.seekp(0);
    s.write("XXXX", 4);
  }
  CHECK_THROWS_WITH_AS(load_embeddings(f.path, EmbeddingFormat::binary),
                       doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("truncated binary names the failing byte region") {
  Rng rng(24);
  const auto ds = random_dataset(rng, 10, 4, 2, 2);
  TempFile f("io_trunc.dfre");
  save_embeddings(ds, f.path, EmbeddingFormat::binary);
  fs::resize_file(f.path, fs::file_size(f.path) - 8);
  CHECK_THROWS_WITH_AS(load_embeddings(f.path, EmbeddingFormat::binary),
                       doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("out-of-range labels in binary are rejected at the right row") {
  Rng rng(25);
  auto ds = random_dataset(rng, 6, 2, 2, 2);
  TempFile f("io_range.dfre");
  save_embeddings(ds, f.path, EmbeddingFormat::binary);
  // Patch label of row 4 to 9 (header is 24 bytes, features 6*2*4 bytes).
  {
    std::fstream s(f.path, std::ios::in | std::ios::out | std::ios::binary);
    s.seekp(24 + 6 * 2 * 4 + 4 * 4);
    const uint32_t bad = 9;
    s.write(reinterpret_cast<const char*>(&bad), 4);
  }
  CHECK_THROWS_WITH_AS(load_embeddings(f.path, EmbeddingFormat::binary),
                       doctest::Contains("row 4"), std::runtime_error);
}

TEST_CASE("saving an invalid dataset is refused") {
  EmbeddingDataset ds;
  ds.features.resize(2, 2);
  ds.features.setZero();
  ds.labels = {0, 5};
  ds.groups = {0, 0};
  ds.n_classes = 2;
  ds.n_groups = 1;
  CHECK_THROWS(save_embeddings(ds, "never_written.dfre", EmbeddingFormat::binary));
  CHECK_FALSE(fs::exists("never_written.dfre"));
}

TEST_CASE("format is inferred from the extension") {
  CHECK(format_from_path("x/y/data.csv") == EmbeddingFormat::csv);
  CHECK(format_from_path("x/y/data.dfre") == EmbeddingFormat::binary);
  CHECK(format_from_path("data") == EmbeddingFormat::binary);
}
