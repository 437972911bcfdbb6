#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "termclust/matrix.hpp"
#include "termclust/simindex.hpp"
#include "termclust/vocab.hpp"

namespace termclust {

/// Pair counts over all n(n-1)/2 term pairs at one threshold.
struct EvalReport {
    double theta = 0.0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    /// Fills precision/recall/f1 from the counts (0/0 -> 0).
    void finalize();
    bool operator==(const EvalReport&) const = default;
};

EvalReport make_report(double theta, std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);

inline std::uint64_t pair_count(std::uint64_t n) noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }

using TermPair = std::pair<TermId, TermId>;  ///< first < second

/// Canonical pairs (i < j) with j stored in row i or i stored in row j at
/// similarity strictly above theta. Sorted.
std::vector<TermPair> predict_pairs(const NeighborTable& table, double theta);

struct EvalOptions {
    /// Warn when the largest cluster's |C|^2 exceeds this many pair checks.
    std::uint64_t cluster_pair_budget = 100'000'000;
    unsigned threads = 1;
    std::function<void(const std::string&)> warn;
};

/// Counts TP/FP by one pass over the neighbor table and FN by one pass over
/// the ground-truth clusters; TN is the remainder of n(n-1)/2.
/// Runtime O(n m log m + sum |C_i|^2 log m).
EvalReport evaluate(const NeighborTable& table, const ClusterMap& clusters, double theta, const EvalOptions& options = {});

struct SweepResult {
    std::vector<EvalReport> reports;
    double best_theta = 0.0;
    std::size_t best_index = 0;
};

/// One report per theta from a single traversal of table and clusters.
/// best_theta maximizes F1, ties to the larger theta. Grid must be ascending.
SweepResult sweep(const NeighborTable& table, const ClusterMap& clusters, std::span<const double> theta_grid,
                  const EvalOptions& options = {});

/// theta_begin, theta_begin + step, ... up to theta_end inclusive (within step/2).
std::vector<double> theta_grid(double theta_begin, double theta_end, double step);

/// Exhaustive O(n^2) counterpart of evaluate(): full similarity matrix,
/// full-sort top-m rows, same prediction rule, every pair counted directly.
EvalReport brute_force_evaluate(const Matrix<float>& embeddings, const ClusterMap& clusters, double theta,
                                std::size_t m, std::size_t max_n = 5000);

/// One exhaustive count per threshold, sharing the similarity matrix and
/// top-m selection.
std::vector<EvalReport> brute_force_evaluate(const Matrix<float>& embeddings, const ClusterMap& clusters,
                                             std::span<const double> thetas, std::size_t m, std::size_t max_n = 5000);

/// Union-find over predicted pairs. Cluster id = smallest term id in the component.
std::vector<TermId> connected_components(std::span<const TermPair> pairs, std::size_t n);

struct LinkingQuery {
    std::vector<float> embedding;
    std::string gold_concept;
};

struct LinkingResult {
    std::vector<std::size_t> ks;
    std::vector<double> accuracy;  ///< Acc@k per ks entry
    std::size_t queries = 0;
    std::size_t missing_gold = 0;  ///< queries whose gold concept is absent from the dictionary
};

/// Acc@k: fraction of queries with a gold-concept term among the top-k
/// dictionary entries by cosine (ties to smaller dictionary index).
LinkingResult linking_accuracy(const Matrix<float>& dictionary_embeddings,
                               std::span<const std::string> dictionary_concepts, std::span<const LinkingQuery> queries,
                               std::span<const std::size_t> ks,
                               const std::function<void(const std::string&)>& warn = {});

}  // namespace termclust
