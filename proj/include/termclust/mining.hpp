#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "termclust/rng.hpp"
#include "termclust/simindex.hpp"
#include "termclust/vocab.hpp"

namespace termclust {

struct BatchEntry {
    TermId term = 0;
    std::uint32_t label = 0;  ///< cluster index of the term's concept

    bool operator==(const BatchEntry&) const = default;
};

/// b anchor blocks of (anchor, k positives, m possibly-hard negatives).
struct MiniBatch {
    std::vector<BatchEntry> entries;
    std::size_t b = 0;
    std::size_t k = 0;
    std::size_t m = 0;

    std::size_t block_size() const noexcept { return 1 + k + m; }
    std::vector<std::uint32_t> labels() const;
    bool operator==(const MiniBatch&) const = default;
};

/// b anchors drawn uniformly from terms whose concept has >= 2 terms,
/// without replacement while the eligible pool lasts.
std::vector<TermId> sample_anchors(const ClusterMap& clusters, std::size_t b, Rng& rng);

/// Sorted ids of terms whose concept has >= 2 terms.
std::vector<TermId> eligible_anchors(const ClusterMap& clusters);
std::vector<TermId> sample_anchors(std::span<const TermId> eligible, std::size_t b, Rng& rng);

/// k same-concept terms other than t; with replacement only when the
/// cluster has fewer than k other members.
std::vector<TermId> sample_positives(const ClusterMap& clusters, TermId t, std::size_t k, Rng& rng);

/// First m ids of t's neighbor row. These may share t's concept.
std::vector<TermId> hard_negatives(const NeighborTable& table, TermId t, std::size_t m);

/// `eligible` may be passed to skip recomputing eligible_anchors(clusters).
MiniBatch build_minibatch(const ClusterMap& clusters, const NeighborTable& table, std::size_t b, std::size_t k,
                          std::size_t m, Rng& rng, std::span<const TermId> eligible = {});

/// Fraction of hard-negative slots whose label equals the anchor's.
double hard_negative_same_concept_fraction(const MiniBatch& batch);

/// Same fraction over the first m neighbors of every listed anchor.
double neighbor_same_concept_fraction(const NeighborTable& table, const ClusterMap& clusters,
                                      std::span<const TermId> anchors, std::size_t m);

}  // namespace termclust
