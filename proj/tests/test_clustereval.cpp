#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "termclust/clustereval.hpp"
#include "termclust/error.hpp"
#include "termclust/simindex.hpp"
#include "oracles.hpp"

using namespace termclust;

namespace {

struct RowSpec {
    std::vector<TermId> ids;
    std::vector<float> sims;
};

NeighborTable table_of(std::size_t m, const std::vector<RowSpec>& rows) {
    NeighborTable t{rows.size(), m, {}, {}};
    for (const auto& r : rows) {
        t.ids.insert(t.ids.end(), r.ids.begin(), r.ids.end());
        t.sims.insert(t.sims.end(), r.sims.begin(), r.sims.end());
    }
    return t;
}

ClusterMap clusters_from_labels(const std::vector<std::string>& labels) {
    Vocabulary v;
    for (std::size_t i = 0; i < labels.size(); ++i) v.add(labels[i], "t" + std::to_string(i));
    return concept_clusters(v);
}

}  // namespace

TEST_CASE("four-term worked example") {
    const auto clusters = clusters_from_labels({"A", "A", "B", "B"});
    const auto table = table_of(3, {{{1, 2, 3}, {0.9f, 0.2f, 0.1f}},
                                    {{0, 2, 3}, {0.9f, 0.15f, 0.1f}},
                                    {{3, 0, 1}, {0.5f, 0.2f, 0.15f}},
                                    {{2, 0, 1}, {0.5f, 0.1f, 0.1f}}});
    const auto r = evaluate(table, clusters, 0.6);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 1);
    CHECK(r.tn == 4);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.5);
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const auto hi = evaluate(table, clusters, 0.99);
    CHECK(hi == make_report(0.99, 0, 0, 2, 4));
    CHECK(hi.precision == 0.0);
    CHECK(hi.recall == 0.0);
    CHECK(hi.f1 == 0.0);

    CHECK(oracle::enumerate_counts(table, clusters, 0.6) == r);
}

TEST_CASE("asymmetric truncation counts a pair once") {
    // 0 -> 1 at 0.9, but row 1 is filled by 2, so 0 is not in M_1.
    const auto table = table_of(1, {{{1}, {0.9f}}, {{2}, {0.95f}}, {{1}, {0.95f}}, {{4}, {0.3f}}, {{3}, {0.3f}}});
    const auto pairs = predict_pairs(table, 0.8);
    CHECK(pairs == std::vector<TermPair>{{0, 1}, {1, 2}});

    const auto clusters = clusters_from_labels({"A", "A", "B", "C", "C"});
    const auto r = evaluate(table, clusters, 0.8);
    CHECK(r == make_report(0.8, 1, 1, 1, 7));
    CHECK(oracle::enumerate_counts(table, clusters, 0.8) == r);
}

TEST_CASE("prediction extremes") {
    Rng rng(1);
    const auto e = testing::random_unit_rows(30, 8, rng);
    const auto full = build_neighbor_table(e, 29);
    CHECK(predict_pairs(full, 1.0).empty());
    CHECK(predict_pairs(full, -1.0).size() == pair_count(30));
    const auto clusters = testing::random_clusters(30, 5, rng);
    const std::vector<double> grid{-1.0};
    CHECK(sweep(full, clusters, grid).reports[0].recall == 1.0);
}

TEST_CASE("two-term brute force cases") {
    Matrix<float> e(2, 2);
    e(0, 0) = 1.f;
    e(1, 0) = 0.8f;
    e(1, 1) = 0.6f;
    const auto same = clusters_from_labels({"A", "A"});
    const auto diff = clusters_from_labels({"A", "B"});
    CHECK(brute_force_evaluate(e, same, 0.5, 1) == make_report(0.5, 1, 0, 0, 0));
    CHECK(brute_force_evaluate(e, diff, 0.5, 1) == make_report(0.5, 0, 1, 0, 0));
    CHECK(evaluate(build_neighbor_table(e, 1), same, 0.5) == make_report(0.5, 1, 0, 0, 0));

    Matrix<float> big(5001, 2);
    CHECK_THROWS_AS(brute_force_evaluate(big, testing::random_clusters(5001, 3, *std::make_unique<Rng>(1)), 0.5, 1),
                    Error);
}

TEST_CASE("evaluate equals both oracles on random instances") {
    Rng rng(2);
    const auto grid = theta_grid(0.50, 0.98, 0.02);
    REQUIRE(grid.size() == 25);
    for (int inst = 0; inst < 12; ++inst) {
        const std::size_t n = inst < 8 ? 50 : 300;
        const auto clusters = testing::random_clusters(n, rng.between(1, 20), rng);
        const auto e = testing::clustered_unit_rows(clusters, 16, rng.uniform(0.1, 0.5), rng);
        for (std::size_t m : {std::size_t{1}, std::size_t{5}, std::size_t{30}, n - 1}) {
            const auto table = build_neighbor_table(e, m);
            const auto swept = sweep(table, clusters, grid);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const auto r = evaluate(table, clusters, grid[g]);
                CHECK(r == swept.reports[g]);
                CHECK(r == oracle::enumerate_counts(table, clusters, grid[g]));
                if (g % 6 == 0) CHECK(r == brute_force_evaluate(e, clusters, grid[g], m));
                CHECK(r.tp + r.fp + r.fn + r.tn == pair_count(n));
            }
        }
    }
}

TEST_CASE("threshold and m monotonicity") {
    Rng rng(3);
    const auto grid = theta_grid(0.30, 0.99, 0.01);
    for (int inst = 0; inst < 6; ++inst) {
        const auto clusters = testing::random_clusters(400, 12, rng);
        const auto e = testing::clustered_unit_rows(clusters, 12, 0.35, rng);
        std::vector<SweepResult> by_m;
        for (std::size_t m : {1u, 5u, 30u, 120u}) by_m.push_back(sweep(build_neighbor_table(e, m), clusters, grid));
        for (const auto& s : by_m) {
            for (std::size_t g = 1; g < grid.size(); ++g) {
                const auto &lo = s.reports[g - 1], &hi = s.reports[g];
                CHECK(hi.tp <= lo.tp);
                CHECK(hi.fp <= lo.fp);
                CHECK(hi.fn >= lo.fn);
                CHECK(hi.recall <= lo.recall);
            }
            const auto best = std::max_element(s.reports.begin(), s.reports.end(),
                                               [](const auto& a, const auto& b) { return a.f1 < b.f1; });
            CHECK(s.best_theta == s.reports[s.best_index].theta);
            CHECK(s.reports[s.best_index].f1 == best->f1);
            for (std::size_t g = s.best_index + 1; g < grid.size(); ++g) CHECK(s.reports[g].f1 < best->f1);
        }
        for (std::size_t k = 1; k < by_m.size(); ++k)
            for (std::size_t g = 0; g < grid.size(); ++g) {
                CHECK(by_m[k].reports[g].tp >= by_m[k - 1].reports[g].tp);
                CHECK(by_m[k].reports[g].fp >= by_m[k - 1].reports[g].fp);
            }
    }
}

TEST_CASE("predicted pairs are invariant under relabeling") {
    Rng rng(4);
    const std::size_t n = 200;
    const auto e = testing::random_unit_rows(n, 6, rng);
    std::vector<TermId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Matrix<float> pe(n, 6);
    for (std::size_t i = 0; i < n; ++i) std::copy(e.row(i).begin(), e.row(i).end(), pe.row(perm[i]).begin());
    // m = n-1 keeps truncation ties out of the comparison
    const auto a = predict_pairs(build_neighbor_table(e, n - 1), 0.7);
    const auto b = predict_pairs(build_neighbor_table(pe, n - 1), 0.7);
    std::set<TermPair> mapped;
    for (auto [i, j] : a) mapped.insert({std::min(perm[i], perm[j]), std::max(perm[i], perm[j])});
    CHECK(mapped == std::set<TermPair>(b.begin(), b.end()));
}

TEST_CASE("best theta ties go to the larger threshold") {
    const auto clusters = clusters_from_labels({"A", "A", "B", "B"});
    const auto table = table_of(1, {{{1}, {0.9f}}, {{0}, {0.9f}}, {{3}, {0.5f}}, {{2}, {0.5f}}});
    const std::vector<double> grid{0.6, 0.7, 0.8, 0.95};
    const auto s = sweep(table, clusters, grid);
    CHECK(s.best_theta == 0.8);
    CHECK(s.best_index == 2);
    const std::vector<double> unsorted{0.7, 0.6};
    CHECK_THROWS_AS(sweep(table, clusters, unsorted), Error);
    CHECK_THROWS_AS(sweep(table, clusters, std::vector<double>{}), Error);
}

TEST_CASE("theta grid construction") {
    const auto g = theta_grid(0.50, 0.99, 0.01);
    CHECK(g.size() == 50);
    CHECK(g.front() == 0.5);
    CHECK(g.back() == 0.99);
    CHECK(g[20] == 0.7);
    CHECK_THROWS_AS(theta_grid(0.5, 0.4, 0.01), Error);
    CHECK_THROWS_AS(theta_grid(0.5, 0.6, 0.0), Error);
}

TEST_CASE("evaluate rejects mismatched sizes and warns over budget") {
    const auto clusters = clusters_from_labels({"A", "A", "B"});
    const auto table = table_of(1, {{{1}, {0.9f}}, {{0}, {0.9f}}, {{0}, {0.1f}}, {{0}, {0.1f}}});
    CHECK_THROWS_AS(evaluate(table, clusters, 0.5), Error);

    const auto ok = table_of(1, {{{1}, {0.9f}}, {{0}, {0.9f}}, {{0}, {0.1f}}});
    std::vector<std::string> warnings;
    EvalOptions opt;
    opt.cluster_pair_budget = 1;
    opt.warn = [&](const std::string& w) { warnings.push_back(w); };
    evaluate(ok, clusters, 0.5, opt);
    CHECK(warnings.size() == 1);
}

TEST_CASE("connected components") {
    const std::vector<TermPair> chain{{1, 2}, {2, 3}};
    CHECK(connected_components(chain, 5) == std::vector<TermId>{0, 1, 1, 1, 4});
    CHECK(connected_components(std::vector<TermPair>{}, 3) == std::vector<TermId>{0, 1, 2});
    std::vector<TermPair> all;
    for (TermId i = 0; i < 6; ++i)
        for (TermId j = i + 1; j < 6; ++j) all.push_back({i, j});
    CHECK(connected_components(all, 6) == std::vector<TermId>(6, 0));
    CHECK(connected_components(std::vector<TermPair>{{4, 2}, {3, 0}}, 5) == std::vector<TermId>{0, 1, 2, 0, 2});
}

TEST_CASE("linking accuracy") {
    Rng rng(5);
    const std::size_t n = 120;
    const auto clusters = testing::random_clusters(n, 4, rng);
    const auto dict = testing::clustered_unit_rows(clusters, 10, 0.6, rng);
    std::vector<std::string> concepts(n);
    for (std::size_t i = 0; i < n; ++i) concepts[i] = clusters.concept_ids[clusters.cluster_of[i]];

    std::vector<LinkingQuery> exact;
    for (std::size_t i = 0; i < n; ++i) exact.push_back({std::vector<float>(dict.row(i).begin(), dict.row(i).end()), concepts[i]});
    const std::vector<std::size_t> ks{1, 5, 10};
    const auto self = linking_accuracy(dict, concepts, exact, ks);
    CHECK(self.accuracy[0] == 1.0);
    CHECK(self.queries == n);

    std::vector<LinkingQuery> noisy;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> q(dict.row(i).begin(), dict.row(i).end());
        for (auto& v : q) v += static_cast<float>(0.5 * rng.normal());
        noisy.push_back({q, concepts[rng.below(n)]});
    }
    noisy.push_back({noisy[0].embedding, "NOT-A-CONCEPT"});
    std::size_t warned = 0;
    const auto r = linking_accuracy(dict, concepts, noisy, ks, [&](const std::string&) { ++warned; });
    CHECK(r.missing_gold == 1);
    CHECK(warned >= 1);
    CHECK(r.queries == n + 1);
    for (std::size_t k = 1; k < ks.size(); ++k) CHECK(r.accuracy[k] >= r.accuracy[k - 1]);

    // direct count for Acc@5
    std::size_t hits = 0;
    for (const auto& q : noisy) {
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t d = 0; d < n; ++d) scored.emplace_back(-cosine(q.embedding, dict.row(d)), d);
        std::sort(scored.begin(), scored.end());
        for (std::size_t t = 0; t < 5; ++t)
            if (concepts[scored[t].second] == q.gold_concept) {
                ++hits;
                break;
            }
    }
    CHECK(r.accuracy[1] == doctest::Approx(double(hits) / double(n + 1)));
}
