#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "termclust/encoder.hpp"
#include "termclust/matrix.hpp"
#include "termclust/vocab.hpp"

namespace termclust {

/// Per-term top-m neighbors by cosine, self excluded. Rows are sorted by
/// similarity descending, ties by smaller id.
struct NeighborTable {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<TermId> ids;  ///< n x m
    std::vector<float> sims;  ///< n x m

    std::span<const TermId> row_ids(std::size_t i) const noexcept { return {ids.data() + i * m, m}; }
    std::span<const float> row_sims(std::size_t i) const noexcept { return {sims.data() + i * m, m}; }

    /// Content hash over ids and sims; equal tables hash equal.
    std::uint64_t checksum() const noexcept;

    bool operator==(const NeighborTable&) const = default;
};

/// a.b / (|a||b|), computed in double. Throws on zero or non-finite input.
double cosine(std::span<const float> a, std::span<const float> b);

/// Stored similarity between two unit rows: the dispatched float dot kernel.
/// Every table entry is exactly this value.
float stored_similarity(std::span<const float> a, std::span<const float> b);

struct NeighborRow {
    std::vector<TermId> ids;
    std::vector<float> sims;
};

/// Top-m neighbors of one row of a unit-norm embedding matrix.
NeighborRow top_m(const Matrix<float>& embeddings, TermId query, std::size_t m);

struct IndexOptions {
    unsigned threads = 1;
};

NeighborTable build_neighbor_table(const Matrix<float>& embeddings, std::size_t m, const IndexOptions& options = {});

/// "TCNT": version u32, n u64, m u32, then per row m u32 ids and m f32 sims.
void save_neighbor_table(const std::filesystem::path& path, const NeighborTable& table);
NeighborTable load_neighbor_table(const std::filesystem::path& path);

inline constexpr std::uint32_t kNeighborFileVersion = 1;

}  // namespace termclust
