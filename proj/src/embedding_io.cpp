#include "dfr/embedding_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dfr {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'R', 'E'};
constexpr uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

template <typename T>
void write_raw(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const std::string& path, const char* field) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    fail(path, std::string("truncated while reading ") + field + " at byte " +
                   std::to_string(static_cast<long>(is.tellg())));
  return v;
}

EmbeddingDataset load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open file");

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    fail(path, "bad magic at byte 0 (expected DFRE)");
  const auto version = read_raw<uint32_t>(is, path, "version");
  if (version != kVersion)
    fail(path, "unsupported version " + std::to_string(version) + " at byte 4");
  const auto n = read_raw<uint64_t>(is, path, "n");
  const auto d = read_raw<uint32_t>(is, path, "d");
  const auto n_classes = read_raw<uint32_t>(is, path, "n_classes");
  const auto n_groups = read_raw<uint32_t>(is, path, "n_groups");
  if (n == 0) fail(path, "declared n is 0");
  if (d == 0) fail(path, "declared d is 0");
  if (n > (1ull << 32) || d > (1u << 24))
    fail(path, "implausible dimensions in header");

  EmbeddingDataset ds;
  ds.n_classes = static_cast<int>(n_classes);
  ds.n_groups = static_cast<int>(n_groups);
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<float> row(d);
  for (uint64_t i = 0; i < n; ++i) {
    const long at = static_cast<long>(is.tellg());
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(float) * d));
    if (!is)
      fail(path, "truncated feature row " + std::to_string(i) + " at byte " +
                     std::to_string(at));
    for (uint32_t j = 0; j < d; ++j) {
      if (!std::isfinite(row[j]))
        fail(path, "non-finite feature value at row " + std::to_string(i) +
                       ", column " + std::to_string(j));
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  ds.labels.resize(n);
  ds.groups.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    const auto v = read_raw<uint32_t>(is, path, "label");
    if (v >= n_classes)
      fail(path, "label " + std::to_string(v) + " out of range at row " +
                     std::to_string(i));
    ds.labels[i] = static_cast<int32_t>(v);
  }
  for (uint64_t i = 0; i < n; ++i) {
    const auto v = read_raw<uint32_t>(is, path, "group");
    if (v >= n_groups)
      fail(path, "group " + std::to_string(v) + " out of range at row " +
                     std::to_string(i));
    ds.groups[i] = static_cast<int32_t>(v);
  }
  return ds;
}

void save_binary(const EmbeddingDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open file for writing");
  os.write(kMagic, 4);
  write_raw<uint32_t>(os, kVersion);
  write_raw<uint64_t>(os, static_cast<uint64_t>(ds.n()));
  write_raw<uint32_t>(os, static_cast<uint32_t>(ds.d()));
  write_raw<uint32_t>(os, static_cast<uint32_t>(ds.n_classes));
  write_raw<uint32_t>(os, static_cast<uint32_t>(ds.n_groups));
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    for (Eigen::Index j = 0; j < ds.d(); ++j) write_raw<float>(os, ds.features(i, j));
  for (int32_t v : ds.labels) write_raw<uint32_t>(os, static_cast<uint32_t>(v));
  for (int32_t v : ds.groups) write_raw<uint32_t>(os, static_cast<uint32_t>(v));
  if (!os) fail(path, "write failed");
}

EmbeddingDataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(path, "cannot open file");
  std::string line;
  if (!std::getline(is, line)) fail(path, "missing header at line 1");

  // Header must be feat_0,...,feat_{d-1},label,group.
  std::vector<std::string> cols;
  {
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      cols.push_back(line.substr(start, comma == std::string::npos
                                            ? std::string::npos
                                            : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (cols.size() < 3 || cols[cols.size() - 2] != "label" || cols.back() != "group")
    fail(path, "malformed header at line 1 (expected feat_*,label,group)");
  const size_t d = cols.size() - 2;
  for (size_t j = 0; j < d; ++j) {
    if (cols[j] != "feat_" + std::to_string(j))
      fail(path, "malformed header at line 1: column " + std::to_string(j) +
                     " is '" + cols[j] + "'");
  }

  std::vector<float> values;
  std::vector<int32_t> labels, groups;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t start = 0;
    size_t field = 0;
    while (field < d + 2) {
      size_t comma = line.find(',', start);
      std::string tok = line.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      char* end = nullptr;
      if (field < d) {
        const float v = std::strtof(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
          fail(path, "unparsable feature at line " + std::to_string(line_no));
        if (!std::isfinite(v))
          fail(path, "non-finite feature at line " + std::to_string(line_no));
        values.push_back(v);
      } else {
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0' || v < 0)
          fail(path, std::string("unparsable ") + (field == d ? "label" : "group") +
                         " at line " + std::to_string(line_no));
        (field == d ? labels : groups).push_back(static_cast<int32_t>(v));
      }
      ++field;
      if (comma == std::string::npos) {
        if (field != d + 2)
          fail(path, "row width does not match header at line " +
                         std::to_string(line_no));
        break;
      }
      start = comma + 1;
    }
  }
  if (labels.empty()) fail(path, "no data rows");

  EmbeddingDataset ds;
  const auto n = static_cast<Eigen::Index>(labels.size());
  ds.features.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j)
      ds.features(i, j) = values[static_cast<size_t>(i) * d + static_cast<size_t>(j)];
  ds.labels = std::move(labels);
  ds.groups = std::move(groups);
  int max_label = 0, max_group = 0;
  for (int32_t v : ds.labels) max_label = std::max(max_label, v);
  for (int32_t v : ds.groups) max_group = std::max(max_group, v);
  ds.n_classes = max_label + 1;
  ds.n_groups = max_group + 1;
  return ds;
}

void save_csv(const EmbeddingDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(path, "cannot open file for writing");
  for (Eigen::Index j = 0; j < ds.d(); ++j) os << "feat_" << j << ",";
  os << "label,group\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      // %.9g round-trips binary32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(ds.features(i, j)));
      os << buf << ",";
    }
    os << ds.labels[static_cast<size_t>(i)] << "," << ds.groups[static_cast<size_t>(i)]
       << "\n";
  }
  if (!os) fail(path, "write failed");
}

}  // namespace

EmbeddingFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return EmbeddingFormat::csv;
  return EmbeddingFormat::binary;
}

EmbeddingDataset load_embeddings(const std::string& path, EmbeddingFormat format) {
  EmbeddingDataset ds = format == EmbeddingFormat::csv ? load_csv(path)
                                                       : load_binary(path);
  const auto rep = validate(ds);
  if (!rep.ok()) fail(path, "loaded dataset is invalid: " + rep.to_string());
  return ds;
}

void save_embeddings(const EmbeddingDataset& ds, const std::string& path,
                     EmbeddingFormat format) {
  const auto rep = validate(ds);
  if (!rep.ok())
    throw std::invalid_argument("save_embeddings: dataset is invalid: " +
                                rep.to_string());
  if (format == EmbeddingFormat::csv)
    save_csv(ds, path);
  else
    save_binary(ds, path);
}

}  // namespace dfr
