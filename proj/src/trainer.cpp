#include "termclust/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "termclust/binary_io.hpp"
#include "termclust/error.hpp"
#include "termclust/simindex.hpp"

namespace termclust {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;   // table init
constexpr std::uint64_t kProbeStream = 0x70726f6265ULL;  // probe batch

NeighborTable rebuild_table(const EncoderParams& params, const std::vector<std::string>& surfaces, std::size_t m,
                            unsigned threads) {
    const Matrix<float> emb = encode_batch(params, surfaces, threads);
    return build_neighbor_table(emb, m, IndexOptions{threads});
}

}  // namespace

void TrainConfig::validate() const {
    if (b < 1) fail_validation("train: b must be >= 1");
    if (positive_mode == PositiveMode::k_positives && k < 1) fail_validation("train: k must be >= 1");
    if (m < 1) fail_validation("train: m must be >= 1");
    if (accumulation_steps < 1) fail_validation("train: accumulation_steps must be >= 1");
    if (refresh_interval_steps && *refresh_interval_steps < 1)
        fail_validation("train: refresh interval must be >= 1 or never");
    if (!(peak_lr > 0.0)) fail_validation("train: peak_lr must be > 0");
    if (warmup_steps > total_steps) fail_validation("train: warmup_steps must not exceed total_steps");
    if (!(weight_decay >= 0.0)) fail_validation("train: weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail_validation("train: adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) fail_validation("train: adam_eps must be > 0");
    loss.validate();
    encoder.validate();
}

OptimizerState OptimizerState::zeros(const EncoderConfig& config) {
    return OptimizerState{Matrix<float>(config.bucket_count, config.dim, 0.f),
                          Matrix<float>(config.bucket_count, config.dim, 0.f), 0};
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    const auto s = static_cast<double>(step);
    const auto warm = static_cast<double>(cfg.warmup_steps);
    const auto total = static_cast<double>(cfg.total_steps);
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) return cfg.peak_lr * s / warm;
    if (cfg.total_steps <= cfg.warmup_steps) return cfg.peak_lr;
    return std::max(0.0, cfg.peak_lr * (total - s) / (total - warm));
}

void adamw_step(EncoderParams& params, const SparseRowGrad& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg) {
    const std::size_t dim = params.dim();
    if (grads.dim() != dim || state.first_moment.rows() != params.table.rows())
        fail_validation("adamw_step: shape mismatch");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (grads.rows()[k] >= params.table.rows()) fail_validation("adamw_step: gradient row out of range");
        for (double g : grads.values(k))
            if (!std::isfinite(g)) fail_numeric("adamw_step: non-finite gradient");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.adam_beta2, t);
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t k = 0; k < grads.size(); ++k) {
        const std::uint32_t r = grads.rows()[k];
        const auto g = grads.values(k);
        auto p = params.table.row(r);
        auto m1 = state.first_moment.row(r);
        auto m2 = state.second_moment.row(r);
        for (std::size_t d = 0; d < dim; ++d) {
            const double mv = cfg.adam_beta1 * m1[d] + (1.0 - cfg.adam_beta1) * g[d];
            const double vv = cfg.adam_beta2 * m2[d] + (1.0 - cfg.adam_beta2) * g[d] * g[d];
            m1[d] = static_cast<float>(mv);
            m2[d] = static_cast<float>(vv);
            const double update = (mv / bias1) / (std::sqrt(vv / bias2) + cfg.adam_eps);
            p[d] = static_cast<float>(static_cast<double>(p[d]) * decay - lr * update);
        }
    }
}

std::string to_json_line(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["loss"] = r.loss;
    j["lr"] = r.lr;
    j["hard_neg_same_cui_fraction"] = r.hard_neg_same_cui_fraction;
    j["refresh_count"] = r.refresh_count;
    j["event"] = r.event;
    j["table_checksum"] = io::hex64(r.table_checksum);
    j["probe_loss"] = r.probe_loss;
    j["elapsed_seconds"] = r.elapsed_seconds;
    return j.dump();
}

BatchGrad batch_loss_and_grad(const EncoderParams& params, const Vocabulary& vocab, const MiniBatch& batch,
                              const LossHyper& hyper) {
    const std::size_t count = batch.entries.size();
    const std::size_t dim = params.dim();
    BatchGrad out{0.0, SparseRowGrad(dim)};
    if (count == 0) return out;

    // encode each distinct term once
    std::unordered_map<TermId, std::size_t> slot;
    std::vector<EncodeTrace> traces;
    std::vector<std::size_t> entry_trace(count);
    for (std::size_t i = 0; i < count; ++i) {
        const TermId id = batch.entries[i].term;
        auto [it, inserted] = slot.try_emplace(id, traces.size());
        if (inserted) traces.push_back(encode_trace(params, vocab[id].surface));
        entry_trace[i] = it->second;
    }
    Matrix<float> ef(count, dim);
    Matrix<double> ed(count, dim);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& unit = traces[entry_trace[i]].unit;
        for (std::size_t d = 0; d < dim; ++d) {
            ed(i, d) = unit[d];
            ef(i, d) = static_cast<float>(unit[d]);
        }
    }

    const auto labels = batch.labels();
    const LossEval eval = ms_loss_and_grad(pairwise_sims(ef), labels, hyper);
    out.loss = eval.loss;
    if (eval.pairs.all_empty()) return out;

    const Matrix<double> de = backprop_to_embeddings(eval.grad, ed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto row = de.row(i);
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
        encode_grad(traces[entry_trace[i]], row, out.grad);
    }
    return out;
}

TrainResult train(const Vocabulary& vocab, const ClusterMap& clusters, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (clusters.term_count() != vocab.size()) fail_data("train: cluster map does not match vocabulary");
    const std::size_t n = vocab.size();
    if (n < 2 || cfg.m > n - 1)
        fail_validation("train: m=" + std::to_string(cfg.m) + " needs at least m+1 terms, have " + std::to_string(n));
    const auto eligible = eligible_anchors(clusters);
    if (eligible.empty()) fail_data("train: vocabulary has no concept with two or more terms");

    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

    TrainResult result{EncoderParams::init(cfg.encoder, mix64(cfg.rng_seed ^ kInitStream)),
                       OptimizerState::zeros(cfg.encoder),
                       {},
                       0.0,
                       0.0};
    try {
        const auto surfaces = vocab.surfaces();
        const std::size_t k = cfg.effective_k();
        Rng rng(cfg.rng_seed);

        NeighborTable table = rebuild_table(result.params, surfaces, cfg.m, cfg.threads);
        std::size_t refresh_count = 0;

        Rng probe_rng(mix64(cfg.rng_seed ^ kProbeStream));
        const MiniBatch probe = build_minibatch(clusters, table, cfg.b, k, cfg.m, probe_rng, eligible);
        auto probe_loss = [&] { return batch_loss_and_grad(result.params, vocab, probe, cfg.loss).loss; };
        result.probe_loss_initial = probe_loss();

        auto emit = [&](MetricsRecord r) {
            r.refresh_count = refresh_count;
            r.table_checksum = table.checksum();
            r.elapsed_seconds = elapsed();
            if (hooks.on_metrics) hooks.on_metrics(r);
            result.metrics.push_back(std::move(r));
        };
        auto table_frac = [&] { return neighbor_same_concept_fraction(table, clusters, eligible, cfg.m); };
        emit(MetricsRecord{0, result.probe_loss_initial, lr_at(0, cfg), table_frac(), 0, 0, result.probe_loss_initial,
                           0.0, "start"});

        double window_loss = 0.0, window_frac = 0.0;
        std::size_t window = 0;
        for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
            if (cfg.refresh_interval_steps && step > 1 && (step - 1) % *cfg.refresh_interval_steps == 0) {
                table = rebuild_table(result.params, surfaces, cfg.m, cfg.threads);
                ++refresh_count;
                const double pl = probe_loss();
                emit(MetricsRecord{step - 1, pl, lr_at(step - 1, cfg), table_frac(), 0, 0, pl, 0.0, "refresh"});
            }

            SparseRowGrad grad(cfg.encoder.dim);
            double step_loss = 0.0, step_frac = 0.0;
            const double inv_accum = 1.0 / static_cast<double>(cfg.accumulation_steps);
            for (std::size_t a = 0; a < cfg.accumulation_steps; ++a) {
                const MiniBatch batch = build_minibatch(clusters, table, cfg.b, k, cfg.m, rng, eligible);
                if (hooks.on_mining_table) hooks.on_mining_table(step, table);
                const BatchGrad bg = batch_loss_and_grad(result.params, vocab, batch, cfg.loss);
                grad.add(bg.grad, inv_accum);
                step_loss += bg.loss * inv_accum;
                step_frac += hard_negative_same_concept_fraction(batch) * inv_accum;
            }
            const double lr = lr_at(step, cfg);
            adamw_step(result.params, grad, result.optimizer, lr, cfg);

            window_loss += step_loss;
            window_frac += step_frac;
            ++window;
            if (cfg.log_interval_steps > 0 && step % cfg.log_interval_steps == 0) {
                emit(MetricsRecord{step, window_loss / double(window), lr, window_frac / double(window), 0, 0, 0.0, 0.0,
                                   "log"});
                window_loss = window_frac = 0.0;
                window = 0;
            }
        }
        result.probe_loss_final = probe_loss();
        emit(MetricsRecord{cfg.total_steps, result.probe_loss_final, lr_at(cfg.total_steps, cfg), table_frac(), 0, 0,
                           result.probe_loss_final, 0.0, "end"});
    } catch (...) {
        if (hooks.abort_checkpoint) {
            try {
                save_checkpoint(*hooks.abort_checkpoint, result.params, &result.optimizer);
            } catch (...) {
            }
        }
        throw;
    }
    return result;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params, const OptimizerState* optimizer) {
    auto out = io::open_out(path);
    io::Writer w(out);
    const auto& c = params.config;
    w.magic("TCPQ");
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint64_t>(c.bucket_count);
    w.put<std::uint32_t>(c.dim);
    w.put<std::uint32_t>(c.ngram_min);
    w.put<std::uint32_t>(c.ngram_max);
    w.put<std::uint64_t>(c.hash_seed);
    w.put<std::uint32_t>(c.max_chars);
    w.put_span<float>(params.table.storage());
    if (optimizer) {
        w.magic("TCOS");
        w.put<std::uint64_t>(optimizer->step);
        w.put_span<float>(optimizer->first_moment.storage());
        w.put_span<float>(optimizer->second_moment.storage());
    }
    if (!out) fail_validation("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    io::Reader r(in, path.string());
    r.expect_magic("TCPQ");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) fail_data(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    EncoderConfig c;
    c.bucket_count = r.get<std::uint64_t>();
    c.dim = r.get<std::uint32_t>();
    c.ngram_min = r.get<std::uint32_t>();
    c.ngram_max = r.get<std::uint32_t>();
    c.hash_seed = r.get<std::uint64_t>();
    c.max_chars = r.get<std::uint32_t>();
    try {
        c.validate();
    } catch (const Error& e) {
        fail_data(path.string() + ": " + e.what());
    }
    Checkpoint ck{EncoderParams::zeros(c), std::nullopt};
    r.get_span<float>(ck.params.table.storage());
    for (float v : ck.params.table.storage())
        if (!std::isfinite(v)) fail_numeric(path.string() + ": non-finite parameter");
    if (!r.at_end()) {
        r.expect_magic("TCOS");
        OptimizerState s = OptimizerState::zeros(c);
        s.step = r.get<std::uint64_t>();
        r.get_span<float>(s.first_moment.storage());
        r.get_span<float>(s.second_moment.storage());
        ck.optimizer = std::move(s);
    }
    return ck;
}

}  // namespace termclust
