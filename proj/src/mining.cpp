#include "termclust/mining.hpp"

#include <algorithm>

#include "termclust/error.hpp"

namespace termclust {

std::vector<std::uint32_t> MiniBatch::labels() const {
    std::vector<std::uint32_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.label);
    return out;
}

std::vector<TermId> eligible_anchors(const ClusterMap& clusters) {
    std::vector<TermId> eligible;
    for (const auto& members : clusters.members) {
        if (members.size() >= 2) eligible.insert(eligible.end(), members.begin(), members.end());
    }
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

std::vector<TermId> sample_anchors(std::span<const TermId> eligible, std::size_t b, Rng& rng) {
    if (eligible.empty()) fail_data("sample_anchors: no concept has two or more terms");
    std::vector<TermId> out;
    out.reserve(b);
    if (b * 8 <= eligible.size()) {
        // sparse draw: rejection against the few ids already taken
        while (out.size() < b) {
            const TermId id = eligible[rng.below(eligible.size())];
            if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
        }
        return out;
    }
    std::vector<TermId> pool(eligible.begin(), eligible.end());
    if (b <= pool.size()) {
        // partial Fisher-Yates
        for (std::size_t i = 0; i < b; ++i) {
            const auto j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }
    out = pool;
    rng.shuffle(out.begin(), out.end());
    while (out.size() < b) out.push_back(pool[rng.below(pool.size())]);
    return out;
}

std::vector<TermId> sample_anchors(const ClusterMap& clusters, std::size_t b, Rng& rng) {
    return sample_anchors(eligible_anchors(clusters), b, rng);
}

std::vector<TermId> sample_positives(const ClusterMap& clusters, TermId t, std::size_t k, Rng& rng) {
    if (t >= clusters.term_count()) fail_validation("sample_positives: term id out of range");
    const auto& members = clusters.members[clusters.cluster_of[t]];
    std::vector<TermId> others;
    others.reserve(members.size() - 1);
    for (TermId id : members)
        if (id != t) others.push_back(id);
    if (others.empty()) fail_data("sample_positives: term " + std::to_string(t) + " has a singleton concept");

    std::vector<TermId> out;
    out.reserve(k);
    if (others.size() >= k) {
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + rng.below(others.size() - i);
            std::swap(others[i], others[j]);
            out.push_back(others[i]);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) out.push_back(others[rng.below(others.size())]);
    }
    return out;
}

std::vector<TermId> hard_negatives(const NeighborTable& table, TermId t, std::size_t m) {
    if (m > table.m) fail_validation("hard_negatives: m=" + std::to_string(m) + " exceeds table width " + std::to_string(table.m));
    if (t >= table.n) fail_validation("hard_negatives: term id out of range");
    const auto row = table.row_ids(t);
    return {row.begin(), row.begin() + static_cast<std::ptrdiff_t>(m)};
}

MiniBatch build_minibatch(const ClusterMap& clusters, const NeighborTable& table, std::size_t b, std::size_t k,
                          std::size_t m, Rng& rng, std::span<const TermId> eligible) {
    if (table.n != clusters.term_count()) fail_data("build_minibatch: neighbor table and vocabulary sizes differ");
    MiniBatch batch;
    batch.b = b;
    batch.k = k;
    batch.m = m;
    batch.entries.reserve(b * batch.block_size());
    auto push = [&](TermId id) { batch.entries.push_back({id, clusters.cluster_of[id]}); };
    std::vector<TermId> computed;
    if (eligible.empty()) {
        computed = eligible_anchors(clusters);
        eligible = computed;
    }
    for (TermId anchor : sample_anchors(eligible, b, rng)) {
        push(anchor);
        for (TermId p : sample_positives(clusters, anchor, k, rng)) push(p);
        for (TermId n : hard_negatives(table, anchor, m)) push(n);
    }
    return batch;
}

double hard_negative_same_concept_fraction(const MiniBatch& batch) {
    if (batch.m == 0 || batch.entries.empty()) return 0.0;
    std::size_t same = 0, total = 0;
    for (std::size_t blk = 0; blk < batch.b; ++blk) {
        const std::size_t base = blk * batch.block_size();
        const auto anchor_label = batch.entries[base].label;
        for (std::size_t j = 0; j < batch.m; ++j, ++total)
            if (batch.entries[base + 1 + batch.k + j].label == anchor_label) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(total);
}

double neighbor_same_concept_fraction(const NeighborTable& table, const ClusterMap& clusters,
                                      std::span<const TermId> anchors, std::size_t m) {
    if (m > table.m) fail_validation("neighbor_same_concept_fraction: m exceeds table width");
    if (anchors.empty() || m == 0) return 0.0;
    std::size_t same = 0;
    for (TermId t : anchors) {
        const auto ids = table.row_ids(t);
        for (std::size_t r = 0; r < m; ++r) same += clusters.cluster_of[ids[r]] == clusters.cluster_of[t];
    }
    return static_cast<double>(same) / static_cast<double>(anchors.size() * m);
}

}  // namespace termclust
