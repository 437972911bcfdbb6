#include "termclust/clustereval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>
#include <unordered_set>

#include "termclust/error.hpp"
#include "termclust/simd.hpp"

namespace termclust {

namespace {

// Per-term neighbor lists sorted by id, for O(log m) membership tests.
class Adjacency {
public:
    explicit Adjacency(const NeighborTable& t) : m_(t.m), ids_(t.ids.size()), sims_(t.sims.size()) {
        std::vector<std::size_t> order(t.m);
        for (std::size_t i = 0; i < t.n; ++i) {
            const auto row_ids = t.row_ids(i);
            const auto row_sims = t.row_sims(i);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row_ids[a] < row_ids[b]; });
            for (std::size_t k = 0; k < t.m; ++k) {
                ids_[i * m_ + k] = row_ids[order[k]];
                sims_[i * m_ + k] = row_sims[order[k]];
            }
        }
    }

    /// Stored similarity of j in row i, if present.
    std::optional<float> find(TermId i, TermId j) const {
        const TermId* first = ids_.data() + static_cast<std::size_t>(i) * m_;
        const TermId* last = first + m_;
        const TermId* it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return std::nullopt;
        return sims_[static_cast<std::size_t>(it - ids_.data())];
    }

    bool above(TermId i, TermId j, double theta) const {
        const auto s = find(i, j);
        return s && static_cast<double>(*s) > theta;
    }

    bool predicted(TermId a, TermId b, double theta) const { return above(a, b, theta) || above(b, a, theta); }

private:
    std::size_t m_;
    std::vector<TermId> ids_;
    std::vector<float> sims_;
};

void check_sizes(const NeighborTable& table, const ClusterMap& clusters) {
    if (table.n != clusters.term_count())
        fail_data("evaluate: neighbor table has " + std::to_string(table.n) + " rows but the vocabulary has " +
                  std::to_string(clusters.term_count()) + " terms");
}

void check_budget(const ClusterMap& clusters, const EvalOptions& options) {
    const auto largest = static_cast<std::uint64_t>(clusters.max_cluster_size());
    if (largest * largest > options.cluster_pair_budget && options.warn)
        options.warn("largest ground-truth cluster has " + std::to_string(largest) +
                     " terms; the false-negative pass is quadratic in cluster size");
}

// Runs body(begin, end, shard) over [0, n) split into `threads` shards.
template <class Body>
void sharded(std::size_t n, unsigned threads, Body body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 1024))));
    if (threads == 1) {
        body(0, n, 0u);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] { body(n * t / threads, n * (t + 1) / threads, t); });
    for (auto& th : pool) th.join();
}

}  // namespace

void EvalReport::finalize() {
    auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    precision = ratio(tp, tp + fp);
    recall = ratio(tp, tp + fn);
    f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

EvalReport make_report(double theta, std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    EvalReport r{theta, tp, fp, fn, tn, 0.0, 0.0, 0.0};
    r.finalize();
    return r;
}

std::vector<TermPair> predict_pairs(const NeighborTable& table, double theta) {
    std::vector<TermPair> pairs;
    for (std::size_t i = 0; i < table.n; ++i) {
        const auto ids = table.row_ids(i);
        const auto sims = table.row_sims(i);
        for (std::size_t k = 0; k < table.m; ++k) {
            if (!(static_cast<double>(sims[k]) > theta)) break;  // rows are sorted descending
            const auto i32 = static_cast<TermId>(i);
            pairs.emplace_back(std::min(i32, ids[k]), std::max(i32, ids[k]));
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

EvalReport evaluate(const NeighborTable& table, const ClusterMap& clusters, double theta, const EvalOptions& options) {
    check_sizes(table, clusters);
    check_budget(clusters, options);
    const Adjacency adj(table);
    const unsigned shards = std::max(1u, options.threads);

    // Pass 1: predicted pairs from the table. Pair {i, j} is owned by row
    // min(i, j) when that row predicts it, else by the other row.
    std::vector<std::uint64_t> tp_shard(shards, 0), fp_shard(shards, 0);
    sharded(table.n, shards, [&](std::size_t begin, std::size_t end, unsigned s) {
        std::uint64_t tp = 0, fp = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto ids = table.row_ids(i);
            const auto sims = table.row_sims(i);
            const auto self = static_cast<TermId>(i);
            for (std::size_t k = 0; k < table.m; ++k) {
                if (!(static_cast<double>(sims[k]) > theta)) break;
                const TermId j = ids[k];
                if (j < self && adj.above(j, self, theta)) continue;  // counted from row j
                if (clusters.cluster_of[i] == clusters.cluster_of[j])
                    ++tp;
                else
                    ++fp;
            }
        }
        tp_shard[s] = tp;
        fp_shard[s] = fp;
    });

    // Pass 2: ground-truth pairs from the clusters.
    std::vector<std::uint64_t> fn_shard(shards, 0), hit_shard(shards, 0);
    sharded(clusters.cluster_count(), shards, [&](std::size_t begin, std::size_t end, unsigned s) {
        std::uint64_t fn = 0, hit = 0;
        for (std::size_t c = begin; c < end; ++c) {
            const auto& members = clusters.members[c];
            for (std::size_t a = 0; a < members.size(); ++a) {
                for (std::size_t b = a + 1; b < members.size(); ++b) {
                    if (adj.predicted(members[a], members[b], theta))
                        ++hit;
                    else
                        ++fn;
                }
            }
        }
        fn_shard[s] = fn;
        hit_shard[s] = hit;
    });

    const auto sum = [](const std::vector<std::uint64_t>& v) { return std::accumulate(v.begin(), v.end(), std::uint64_t{0}); };
    const std::uint64_t tp = sum(tp_shard), fp = sum(fp_shard), fn = sum(fn_shard);
    if (sum(hit_shard) != tp) throw std::logic_error("evaluate: table and cluster passes disagree on true positives");
    const std::uint64_t total = pair_count(table.n);
    return make_report(theta, tp, fp, fn, total - tp - fp - fn);
}

SweepResult sweep(const NeighborTable& table, const ClusterMap& clusters, std::span<const double> grid,
                  const EvalOptions& options) {
    check_sizes(table, clusters);
    check_budget(clusters, options);
    if (grid.empty()) fail_validation("sweep: empty threshold grid");
    if (!std::is_sorted(grid.begin(), grid.end())) fail_validation("sweep: threshold grid must be ascending");
    const Adjacency adj(table);

    // Each stored pair's deciding similarity is the larger of its stored
    // directions: the pair is predicted at theta iff that value exceeds theta.
    auto deciding = [&](TermId a, TermId b) {
        const auto ab = adj.find(a, b);
        const auto ba = adj.find(b, a);
        if (ab && ba) return std::max(*ab, *ba);
        if (ab) return *ab;
        if (ba) return *ba;
        return -std::numeric_limits<float>::infinity();
    };

    std::vector<float> false_pairs;  // stored pairs across concepts
    for (std::size_t i = 0; i < table.n; ++i) {
        const auto self = static_cast<TermId>(i);
        for (TermId j : table.row_ids(i)) {
            if (j < self && adj.find(j, self)) continue;  // counted from row j
            if (clusters.cluster_of[i] != clusters.cluster_of[j]) false_pairs.push_back(deciding(self, j));
        }
    }
    std::vector<float> true_pairs;  // every ground-truth pair, stored or not
    for (const auto& members : clusters.members)
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b) true_pairs.push_back(deciding(members[a], members[b]));
    std::sort(false_pairs.begin(), false_pairs.end());
    std::sort(true_pairs.begin(), true_pairs.end());

    auto count_above = [](const std::vector<float>& v, double theta) {
        const auto it = std::upper_bound(v.begin(), v.end(), theta,
                                         [](double t, float s) { return t < static_cast<double>(s); });
        return static_cast<std::uint64_t>(v.end() - it);
    };
    const std::uint64_t total = pair_count(table.n);
    SweepResult out;
    for (double theta : grid) {
        const std::uint64_t tp = count_above(true_pairs, theta);
        const std::uint64_t fp = count_above(false_pairs, theta);
        const std::uint64_t fn = true_pairs.size() - tp;
        out.reports.push_back(make_report(theta, tp, fp, fn, total - tp - fp - fn));
    }
    for (std::size_t i = 0; i < out.reports.size(); ++i) {
        if (out.reports[i].f1 >= out.reports[out.best_index].f1) out.best_index = i;
    }
    out.best_theta = out.reports[out.best_index].theta;
    return out;
}

std::vector<double> theta_grid(double theta_begin, double theta_end, double step) {
    if (!(step > 0.0)) fail_validation("theta grid: step must be > 0");
    if (theta_end < theta_begin) fail_validation("theta grid: end must be >= begin");
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(std::floor((theta_end - theta_begin) / step + 0.5)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        // round to 1e-9 so 0.5 + 3*0.02 prints and compares as 0.56
        grid.push_back(std::round((theta_begin + static_cast<double>(i) * step) * 1e9) / 1e9);
    }
    return grid;
}

std::vector<EvalReport> brute_force_evaluate(const Matrix<float>& embeddings, const ClusterMap& clusters,
                                             std::span<const double> thetas, std::size_t m, std::size_t max_n) {
    const std::size_t n = embeddings.rows();
    if (n > max_n) fail_validation("brute_force_evaluate: n=" + std::to_string(n) + " exceeds guard " + std::to_string(max_n));
    if (n != clusters.term_count()) fail_data("brute_force_evaluate: embeddings and vocabulary sizes differ");
    if (n < 2 || m < 1 || m > n - 1) fail_validation("brute_force_evaluate: m must be in [1, n-1]");
    const std::size_t dim = embeddings.cols();
    const auto& k = simd::kernels();

    Matrix<float> s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = k.dot(embeddings.data() + i * dim, embeddings.data() + j * dim, dim);

    std::vector<char> kept(n * n, 0);
    std::vector<TermId> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.resize(n);
        std::iota(order.begin(), order.end(), TermId{0});
        order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
        std::sort(order.begin(), order.end(), [&](TermId a, TermId b) {
            return s(i, a) > s(i, b) || (s(i, a) == s(i, b) && a < b);
        });
        for (std::size_t r = 0; r < m; ++r) kept[i * n + order[r]] = 1;
    }

    std::vector<EvalReport> out;
    out.reserve(thetas.size());
    for (double theta : thetas) {
        std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool predicted = (kept[i * n + j] && static_cast<double>(s(i, j)) > theta) ||
                                       (kept[j * n + i] && static_cast<double>(s(j, i)) > theta);
                const bool same = clusters.cluster_of[i] == clusters.cluster_of[j];
                if (predicted && same) ++tp;
                else if (predicted) ++fp;
                else if (same) ++fn;
                else ++tn;
            }
        }
        out.push_back(make_report(theta, tp, fp, fn, tn));
    }
    return out;
}

EvalReport brute_force_evaluate(const Matrix<float>& embeddings, const ClusterMap& clusters, double theta,
                                std::size_t m, std::size_t max_n) {
    const double one[1] = {theta};
    return brute_force_evaluate(embeddings, clusters, one, m, max_n).front();
}

std::vector<TermId> connected_components(std::span<const TermPair> pairs, std::size_t n) {
    std::vector<TermId> parent(n);
    std::iota(parent.begin(), parent.end(), TermId{0});
    auto find = [&](TermId x) {
        TermId root = x;
        while (parent[root] != root) root = parent[root];
        while (parent[x] != root) x = std::exchange(parent[x], root);
        return root;
    };
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) fail_validation("connected_components: pair id out of range");
        const TermId ra = find(a), rb = find(b);
        // the smaller id stays root, so each root is its component's minimum
        if (ra < rb)
            parent[rb] = ra;
        else if (rb < ra)
            parent[ra] = rb;
    }
    std::vector<TermId> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = find(static_cast<TermId>(i));
    return out;
}

LinkingResult linking_accuracy(const Matrix<float>& dict, std::span<const std::string> dict_concepts,
                               std::span<const LinkingQuery> queries, std::span<const std::size_t> ks,
                               const std::function<void(const std::string&)>& warn) {
    if (dict.rows() == 0) fail_validation("linking_accuracy: empty dictionary");
    if (dict_concepts.size() != dict.rows()) fail_validation("linking_accuracy: concept list does not match dictionary");
    if (ks.empty() || !std::is_sorted(ks.begin(), ks.end()) || ks.front() < 1)
        fail_validation("linking_accuracy: ks must be ascending positive integers");
    const std::size_t dim = dict.cols();
    const std::size_t depth = std::min(ks.back(), dict.rows());
    std::unordered_set<std::string> known(dict_concepts.begin(), dict_concepts.end());
    const auto& kern = simd::kernels();

    LinkingResult result{{ks.begin(), ks.end()}, std::vector<double>(ks.size(), 0.0), queries.size(), 0};
    std::vector<std::size_t> hits(ks.size(), 0);
    std::vector<float> sims(dict.rows());
    std::vector<std::size_t> order(dict.rows());
    for (const auto& q : queries) {
        if (q.embedding.size() != dim) fail_validation("linking_accuracy: query dimension mismatch");
        if (!known.count(q.gold_concept)) {
            ++result.missing_gold;
            if (warn) warn("gold concept '" + q.gold_concept + "' not in dictionary; counted as a miss");
            continue;
        }
        for (std::size_t r = 0; r < dict.rows(); ++r) sims[r] = kern.dot(q.embedding.data(), dict.data() + r * dim, dim);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                          [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
        std::size_t first_hit = depth;
        for (std::size_t r = 0; r < depth; ++r) {
            if (dict_concepts[order[r]] == q.gold_concept) {
                first_hit = r;
                break;
            }
        }
        for (std::size_t x = 0; x < ks.size(); ++x)
            if (first_hit < ks[x]) ++hits[x];
    }
    for (std::size_t x = 0; x < ks.size(); ++x)
        result.accuracy[x] = queries.empty() ? 0.0 : static_cast<double>(hits[x]) / static_cast<double>(queries.size());
    return result;
}

}  // namespace termclust
