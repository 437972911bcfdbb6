#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "termclust/encoder.hpp"
#include "termclust/mining.hpp"
#include "termclust/msloss.hpp"
#include "termclust/vocab.hpp"

namespace termclust {

enum class PositiveMode { k_positives, single_positive };

struct TrainConfig {
    std::size_t b = 16;
    std::size_t k = 30;
    std::size_t m = 30;
    std::size_t total_steps = 20000;
    std::size_t accumulation_steps = 1;
    std::optional<std::size_t> refresh_interval_steps = 2000;  ///< nullopt: never refresh
    PositiveMode positive_mode = PositiveMode::k_positives;
    double peak_lr = 1e-2;
    std::size_t warmup_steps = 1000;
    double weight_decay = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossHyper loss;
    std::uint64_t rng_seed = 42;
    EncoderConfig encoder;
    unsigned threads = 1;
    std::size_t log_interval_steps = 500;

    /// k actually used: 1 in single-positive mode.
    std::size_t effective_k() const noexcept { return positive_mode == PositiveMode::single_positive ? 1 : k; }
    void validate() const;
};

/// AdamW moments for the full table, updated lazily per touched row.
struct OptimizerState {
    Matrix<float> first_moment;
    Matrix<float> second_moment;
    std::uint64_t step = 0;

    static OptimizerState zeros(const EncoderConfig& config);
    bool operator==(const OptimizerState&) const = default;
};

/// Linear warm-up to peak_lr, then linear decay to 0 at total_steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

/// One decoupled-weight-decay Adam step on the rows present in `grads`.
/// Decay is applied only to those rows. Throws before touching anything if
/// a gradient is non-finite.
void adamw_step(EncoderParams& params, const SparseRowGrad& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg);

/// "log" records average the batches since the previous log record. "start",
/// "refresh" and "end" records carry the probe-batch loss and the same-concept
/// fraction over the whole current table.
struct MetricsRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double hard_neg_same_cui_fraction = 0.0;
    std::size_t refresh_count = 0;
    std::uint64_t table_checksum = 0;
    double probe_loss = 0.0;
    double elapsed_seconds = 0.0;
    std::string event;  ///< "start", "log", "refresh", "end"
};

/// One JSON object per line.
std::string to_json_line(const MetricsRecord& r);

struct TrainHooks {
    std::function<void(const MetricsRecord&)> on_metrics;
    /// Called with each neighbor table handed to the miner (for refresh checks).
    std::function<void(std::size_t step, const NeighborTable&)> on_mining_table;
    /// Where to write a checkpoint if training aborts with an exception.
    std::optional<std::filesystem::path> abort_checkpoint;
};

struct TrainResult {
    EncoderParams params;
    OptimizerState optimizer;
    std::vector<MetricsRecord> metrics;
    double probe_loss_initial = 0.0;
    double probe_loss_final = 0.0;
};

TrainResult train(const Vocabulary& vocab, const ClusterMap& clusters, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Loss and sparse table gradient for one mini-batch, averaged over its entries.
struct BatchGrad {
    double loss = 0.0;
    SparseRowGrad grad;
};
BatchGrad batch_loss_and_grad(const EncoderParams& params, const Vocabulary& vocab, const MiniBatch& batch,
                              const LossHyper& hyper);

/// "TCPQ" checkpoint: version u32, hyperparameters, table as f32 rows, then
/// an optional "TCOS" optimizer section (step u64, both moment tables).
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const OptimizerState* optimizer = nullptr);

struct Checkpoint {
    EncoderParams params;
    std::optional<OptimizerState> optimizer;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace termclust
