#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "doctest.h"
#include "termclust/error.hpp"
#include "termclust/trainer.hpp"
#include "test_util.hpp"

using namespace termclust;

namespace {

TrainConfig toy_config() {
    TrainConfig cfg;
    cfg.b = 4;
    cfg.k = 3;
    cfg.m = 5;
    cfg.total_steps = 40;
    cfg.warmup_steps = 5;
    cfg.refresh_interval_steps = 10;
    cfg.encoder.dim = 16;
    cfg.encoder.bucket_count = 1u << 12;
    cfg.log_interval_steps = 10;
    return cfg;
}

SynthVocabulary toy_synth(std::size_t concepts = 60, std::uint64_t seed = 3) {
    SynthSpec spec;
    spec.concept_count = concepts;
    spec.rng_seed = seed;
    return synth_vocabulary(spec);
}

bool same_run(const TrainResult& a, const TrainResult& b) {
    if (!(a.params == b.params) || !(a.optimizer == b.optimizer) || a.metrics.size() != b.metrics.size()) return false;
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        const auto &x = a.metrics[i], &y = b.metrics[i];
        if (x.step != y.step || x.loss != y.loss || x.lr != y.lr || x.table_checksum != y.table_checksum ||
            x.hard_neg_same_cui_fraction != y.hard_neg_same_cui_fraction || x.probe_loss != y.probe_loss ||
            x.refresh_count != y.refresh_count || x.event != y.event)
            return false;
    }
    return a.probe_loss_initial == b.probe_loss_initial && a.probe_loss_final == b.probe_loss_final;
}

void set_row(SparseRowGrad& g, std::uint32_t bucket, const std::vector<double>& values) {
    const auto slot = g.row(bucket);
    std::copy(values.begin(), values.end(), slot.begin());
}

}  // namespace

TEST_CASE("lr schedule") {
    TrainConfig cfg;
    cfg.total_steps = 1000;
    cfg.warmup_steps = 100;
    cfg.peak_lr = 0.5;
    CHECK(lr_at(0, cfg) == 0.0);
    CHECK(lr_at(100, cfg) == 0.5);
    CHECK(lr_at(550, cfg) == doctest::Approx(0.25));
    CHECK(lr_at(50, cfg) == doctest::Approx(0.25));
    CHECK(lr_at(1000, cfg) == 0.0);
    double peak = 0.0;
    for (std::size_t s = 0; s <= 1000; ++s) {
        const double v = lr_at(s, cfg);
        CHECK(v >= 0.0);
        peak = std::max(peak, v);
        if (s > 0) CHECK(std::abs(v - lr_at(s - 1, cfg)) <= 0.5 / 100 + 1e-12);
    }
    CHECK(peak == 0.5);

    cfg.warmup_steps = 0;
    CHECK(lr_at(0, cfg) == 0.5);
    cfg.warmup_steps = 2000;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("adamw single step closed form") {
    TrainConfig cfg;
    cfg.adam_beta1 = 0.0;
    cfg.adam_beta2 = 0.0;
    cfg.encoder.dim = 4;
    cfg.encoder.bucket_count = 8;
    auto params = EncoderParams::init(cfg.encoder, 1);
    const auto before = params;
    auto state = OptimizerState::zeros(cfg.encoder);

    SparseRowGrad g(4);
    const std::vector<double> row{0.5, -2.0, 1e-3, 0.0};
    set_row(g, 3, row);
    const double lr = 0.1;
    adamw_step(params, g, state, lr, cfg);
    CHECK(state.step == 1);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t d = 0; d < 4; ++d) {
            if (r != 3) {
                CHECK(params.table(r, d) == before.table(r, d));
                continue;
            }
            const double expect = before.table(r, d) - lr * row[d] / (std::abs(row[d]) + cfg.adam_eps);
            CHECK(params.table(r, d) == doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("adamw with bias correction and lazy decay") {
    TrainConfig cfg;
    cfg.weight_decay = 0.1;
    cfg.encoder.dim = 2;
    cfg.encoder.bucket_count = 4;
    auto params = EncoderParams::init(cfg.encoder, 2);
    const auto before = params;
    auto state = OptimizerState::zeros(cfg.encoder);
    SparseRowGrad g(2);
    set_row(g, 1, std::vector<double>{0.3, -0.4});

    // reference: two PyTorch-style AdamW steps on row 1 in double
    double p[2] = {before.table(1, 0), before.table(1, 1)}, m1[2] = {}, m2[2] = {};
    const double grad[2] = {0.3, -0.4};
    for (int t = 1; t <= 2; ++t) {
        const double lr = 0.01 * t;
        adamw_step(params, g, state, lr, cfg);
        for (int d = 0; d < 2; ++d) {
            p[d] *= 1.0 - lr * cfg.weight_decay;
            m1[d] = 0.9 * m1[d] + 0.1 * grad[d];
            m2[d] = 0.999 * m2[d] + 0.001 * grad[d] * grad[d];
            const double mh = m1[d] / (1 - std::pow(0.9, t)), vh = m2[d] / (1 - std::pow(0.999, t));
            p[d] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }
    CHECK(params.table(1, 0) == doctest::Approx(p[0]).epsilon(1e-6));
    CHECK(params.table(1, 1) == doctest::Approx(p[1]).epsilon(1e-6));
    for (std::size_t r : {0u, 2u, 3u})
        for (std::size_t d = 0; d < 2; ++d) CHECK(params.table(r, d) == before.table(r, d));
}

TEST_CASE("adamw edge cases") {
    TrainConfig cfg;
    cfg.encoder.dim = 3;
    cfg.encoder.bucket_count = 5;
    auto params = EncoderParams::init(cfg.encoder, 3);
    const auto before = params;
    auto state = OptimizerState::zeros(cfg.encoder);

    SparseRowGrad zero(3);
    set_row(zero, 2, std::vector<double>{0, 0, 0});
    adamw_step(params, zero, state, 0.1, cfg);
    CHECK(params == before);

    SparseRowGrad bad(3);
    set_row(bad, 0, std::vector<double>{1, 1, 1});
    set_row(bad, 4, std::vector<double>{1, NAN, 1});
    const auto state_before = state;
    CHECK_THROWS_AS(adamw_step(params, bad, state, 0.1, cfg), Error);
    CHECK(params == before);
    CHECK(state == state_before);
}

TEST_CASE("zero steps returns the initial parameters") {
    const auto synth = toy_synth();
    auto cfg = toy_config();
    cfg.total_steps = 0;
    cfg.warmup_steps = 0;
    const auto a = train(synth.vocab, synth.clusters, cfg);
    cfg.total_steps = 10;
    const auto b = train(synth.vocab, synth.clusters, cfg);
    CHECK(a.optimizer.step == 0);
    CHECK(std::all_of(a.optimizer.first_moment.storage().begin(), a.optimizer.first_moment.storage().end(),
                      [](float v) { return v == 0.f; }));
    CHECK(a.probe_loss_initial == a.probe_loss_final);
    CHECK_FALSE(a.params == b.params);
    for (float v : a.params.table.storage()) CHECK(std::abs(v) <= 0.5f / 16.f);
}

TEST_CASE("training is bitwise deterministic") {
    const auto synth = toy_synth();
    const auto cfg = toy_config();
    const auto a = train(synth.vocab, synth.clusters, cfg);
    const auto b = train(synth.vocab, synth.clusters, cfg);
    CHECK(same_run(a, b));
    auto other = cfg;
    other.rng_seed = 43;
    CHECK_FALSE(same_run(a, train(synth.vocab, synth.clusters, other)));
    auto threaded = cfg;
    threaded.threads = 3;
    CHECK(same_run(a, train(synth.vocab, synth.clusters, threaded)));
}

TEST_CASE("refresh semantics") {
    const auto synth = toy_synth();
    auto cfg = toy_config();
    cfg.total_steps = 22;
    cfg.refresh_interval_steps = 5;
    std::vector<std::pair<std::size_t, std::uint64_t>> seen;
    TrainHooks hooks;
    hooks.on_mining_table = [&](std::size_t step, const NeighborTable& t) { seen.emplace_back(step, t.checksum()); };
    auto result = train(synth.vocab, synth.clusters, cfg, hooks);
    REQUIRE(seen.size() == 22);
    for (std::size_t i = 1; i < seen.size(); ++i) {
        const std::size_t step = seen[i].first;
        if ((step - 1) % 5 == 0)
            CHECK(seen[i].second != seen[i - 1].second);
        else
            CHECK(seen[i].second == seen[i - 1].second);
    }
    CHECK(result.metrics.back().refresh_count == 4);

    seen.clear();
    cfg.refresh_interval_steps = std::nullopt;
    result = train(synth.vocab, synth.clusters, cfg, hooks);
    std::set<std::uint64_t> sums;
    for (const auto& s : seen) sums.insert(s.second);
    CHECK(sums.size() == 1);
    CHECK(result.metrics.back().refresh_count == 0);
}

TEST_CASE("accumulated gradients equal one combined batch") {
    // Two disjoint alphabets whose terms embed into orthogonal subspaces, so
    // concatenating the batches mines no cross-batch pairs.
    Vocabulary vocab;
    const std::vector<std::string> left{"abc", "abd", "bca", "cab", "deh", "edh", "hed", "gfe"};
    const std::vector<std::string> right{"pqr", "pqs", "qrp", "rpq", "tuw", "utw", "wut", "vwu"};
    for (std::size_t i = 0; i < 8; ++i) vocab.add("L" + std::to_string(i / 4), left[i]);
    for (std::size_t i = 0; i < 8; ++i) vocab.add("R" + std::to_string(i / 4), right[i]);
    const auto clusters = concept_clusters(vocab);

    TrainConfig cfg;
    cfg.encoder.dim = 4;
    cfg.encoder.bucket_count = 1u << 16;
    auto params = EncoderParams::zeros(cfg.encoder);
    std::set<std::uint32_t> left_rows, right_rows;
    Rng rng(11);
    for (std::size_t t = 0; t < 16; ++t)
        for (auto f : featurize(cfg.encoder, vocab[t].surface)) {
            (t < 8 ? left_rows : right_rows).insert(f);
            const std::size_t off = t < 8 ? 0 : 2;
            params.table(f, off) = static_cast<float>(rng.uniform(0.5, 1.0));
            params.table(f, off + 1) = static_cast<float>(rng.uniform(0.5, 1.0));
        }
    for (auto r : left_rows) REQUIRE(right_rows.count(r) == 0);

    auto block = [&](std::vector<TermId> terms) {
        MiniBatch b;
        b.b = 1;
        b.k = terms.size() - 1;
        for (auto t : terms) b.entries.push_back({t, clusters.cluster_of[t]});
        return b;
    };
    const auto b1 = block({0, 1, 2, 3, 4, 5, 6, 7});
    const auto b2 = block({8, 9, 10, 11, 12, 13, 14, 15});
    auto both = b1;
    both.entries.insert(both.entries.end(), b2.entries.begin(), b2.entries.end());

    const auto g1 = batch_loss_and_grad(params, vocab, b1, cfg.loss);
    const auto g2 = batch_loss_and_grad(params, vocab, b2, cfg.loss);
    const auto g12 = batch_loss_and_grad(params, vocab, both, cfg.loss);
    REQUIRE(g1.loss > 0.0);
    REQUIRE(g2.loss > 0.0);
    CHECK(g12.loss == doctest::Approx(0.5 * (g1.loss + g2.loss)).epsilon(1e-12));

    SparseRowGrad acc(cfg.encoder.dim);
    acc.add(g1.grad, 0.5);
    acc.add(g2.grad, 0.5);

    auto p_acc = params, p_one = params;
    auto s_acc = OptimizerState::zeros(cfg.encoder), s_one = s_acc;
    for (int step = 0; step < 2; ++step) {
        adamw_step(p_acc, acc, s_acc, 0.01, cfg);
        adamw_step(p_one, g12.grad, s_one, 0.01, cfg);
    }
    for (std::size_t i = 0; i < p_acc.table.storage().size(); ++i)
        CHECK(p_acc.table.storage()[i] == doctest::Approx(p_one.table.storage()[i]).epsilon(1e-6));
}

TEST_CASE("accumulation runs and counts each update once") {
    const auto synth = toy_synth();
    auto cfg = toy_config();
    cfg.accumulation_steps = 3;
    cfg.total_steps = 12;
    std::size_t mining_calls = 0;
    TrainHooks hooks;
    hooks.on_mining_table = [&](std::size_t, const NeighborTable&) { ++mining_calls; };
    const auto r = train(synth.vocab, synth.clusters, cfg, hooks);
    CHECK(r.optimizer.step == 12);
    CHECK(mining_calls == 36);
}

TEST_CASE("probe loss decreases on synthetic data") {
    const auto synth = toy_synth(150, 5);
    auto cfg = toy_config();
    cfg.b = 8;
    cfg.k = 5;
    cfg.m = 10;
    cfg.total_steps = 300;
    cfg.warmup_steps = 30;
    cfg.refresh_interval_steps = 100;
    cfg.encoder.dim = 32;
    const auto r = train(synth.vocab, synth.clusters, cfg);
    CHECK(r.probe_loss_final < r.probe_loss_initial);
    CHECK(r.metrics.front().event == "start");
    CHECK(r.metrics.back().event == "end");
}

TEST_CASE("metrics lines carry the documented keys") {
    MetricsRecord rec{7, 0.25, 1e-3, 0.5, 2, 0xabcdef, 0.1, 1.5, "log"};
    const auto j = nlohmann::json::parse(to_json_line(rec));
    for (const char* key : {"step", "loss", "lr", "hard_neg_same_cui_fraction", "refresh_count"})
        CHECK(j.contains(key));
    CHECK(j["step"] == 7);
    CHECK(j["refresh_count"] == 2);
    CHECK(j["hard_neg_same_cui_fraction"] == 0.5);
}

TEST_CASE("abort writes a checkpoint") {
    testing::TempDir dir;
    const auto synth = toy_synth();
    auto cfg = toy_config();
    TrainHooks hooks;
    hooks.abort_checkpoint = dir / "abort.tcpq";
    hooks.on_metrics = [](const MetricsRecord& r) {
        if (r.event == "log" && r.step == 20) throw std::runtime_error("stop");
    };
    CHECK_THROWS_AS(train(synth.vocab, synth.clusters, cfg, hooks), std::runtime_error);
    const auto ck = load_checkpoint(dir / "abort.tcpq");
    REQUIRE(ck.optimizer.has_value());
    CHECK(ck.optimizer->step == 20);
}

TEST_CASE("train rejects unusable inputs") {
    Vocabulary v;
    v.add("A", "x");
    v.add("B", "y");
    v.add("C", "z");
    auto cfg = toy_config();
    cfg.m = 1;
    CHECK_THROWS_AS(train(v, concept_clusters(v), cfg), Error);
    v.add("A", "xx");
    cfg.m = 10;
    CHECK_THROWS_AS(train(v, concept_clusters(v), cfg), Error);
}
