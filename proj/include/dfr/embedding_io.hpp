#pragma once

#include <string>

#include "dfr/dataset.hpp"

namespace dfr {

enum class EmbeddingFormat { csv, binary };

// ".csv" -> csv, anything else -> binary.
EmbeddingFormat format_from_path(const std::string& path);

// Binary layout (little-endian): magic "DFRE", u32 version=1, u64 n, u32 d,
// u32 n_classes, u32 n_groups, n*d f32 features row-major, n u32 labels,
// n u32 groups.
//
// CSV layout: header "feat_0,...,feat_{d-1},label,group", one row per example.
// n_classes / n_groups are inferred as max value + 1.
EmbeddingDataset load_embeddings(const std::string& path, EmbeddingFormat format);
void save_embeddings(const EmbeddingDataset& ds, const std::string& path,
                     EmbeddingFormat format);

}  // namespace dfr
