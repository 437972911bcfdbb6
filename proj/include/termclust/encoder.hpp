#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "termclust/matrix.hpp"

namespace termclust {

struct EncoderConfig {
    std::uint64_t bucket_count = 1u << 18;
    std::uint32_t dim = 128;
    std::uint32_t ngram_min = 3;
    std::uint32_t ngram_max = 5;
    std::uint64_t hash_seed = 0x7465726d636c7573ULL;
    std::uint32_t max_chars = 64;

    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

/// Trainable hashed character n-gram encoder: a bucket_count x dim table.
struct EncoderParams {
    EncoderConfig config;
    Matrix<float> table;

    /// Table entries i.i.d. uniform in [-0.5/dim, 0.5/dim].
    static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);
    static EncoderParams zeros(const EncoderConfig& config);

    std::size_t dim() const noexcept { return config.dim; }
    bool operator==(const EncoderParams&) const = default;
};

using Embedding = std::vector<float>;

/// Bucket index of every character n-gram of "⟨" + surface + "⟩", in
/// enumeration order (a multiset). Surfaces are truncated to max_chars code
/// points first. When the padded string is shorter than ngram_min the whole
/// padded string is the single n-gram.
std::vector<std::uint32_t> featurize(const EncoderConfig& config, std::string_view surface);

/// Seeded 64-bit hash of one n-gram's UTF-8 bytes (see io::hash64).
std::uint64_t ngram_hash(std::string_view bytes, std::uint64_t seed) noexcept;

Embedding encode(const EncoderParams& params, std::string_view surface);

/// Row i is encode(surfaces[i]). Errors name the offending index.
Matrix<float> encode_batch(const EncoderParams& params, std::span<const std::string> surfaces,
                           unsigned threads = 1);

/// Gradient rows for a subset of table buckets, in first-touch order.
class SparseRowGrad {
public:
    explicit SparseRowGrad(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    std::span<const std::uint32_t> rows() const noexcept { return rows_; }
    std::span<const double> values(std::size_t k) const noexcept { return {values_.data() + k * dim_, dim_}; }
    std::span<double> values(std::size_t k) noexcept { return {values_.data() + k * dim_, dim_}; }

    /// Slot for a bucket, zero-initialized on first touch.
    std::span<double> row(std::uint32_t bucket);

    /// this += scale * other.
    void add(const SparseRowGrad& other, double scale = 1.0);
    void scale(double factor);

    /// Value for (bucket, column); 0 when untouched.
    double at(std::uint32_t bucket, std::size_t col) const;

    void clear();

private:
    std::size_t dim_;
    std::vector<std::uint32_t> rows_;
    std::vector<double> values_;
    std::unordered_map<std::uint32_t, std::size_t> slot_;
};

/// Forward state kept for the backward pass.
struct EncodeTrace {
    std::vector<std::uint32_t> features;
    std::vector<double> unit;  ///< e
    double norm = 0.0;         ///< |z|, z = mean of gathered rows
    bool fallback = false;
};

/// Threshold below which the pre-normalization vector is treated as zero.
inline constexpr double kFallbackNorm = 1e-12;

namespace detail {

/// Gather-mean-normalize over a table of T (float in production, double in
/// gradient checks). Output is always double.
template <class T>
void encode_features(const T* table, std::size_t dim, std::span<const std::uint32_t> features, EncodeTrace& trace) {
    std::vector<double> z(dim, 0.0);
    for (std::uint32_t f : features) {
        const T* row = table + static_cast<std::size_t>(f) * dim;
        for (std::size_t i = 0; i < dim; ++i) z[i] += static_cast<double>(row[i]);
    }
    const double inv_count = 1.0 / static_cast<double>(features.size());
    double sq = 0.0;
    for (double& v : z) {
        v *= inv_count;
        sq += v * v;
    }
    trace.norm = std::sqrt(sq);
    trace.unit.assign(dim, 0.0);
    trace.fallback = !(trace.norm >= kFallbackNorm);
    if (trace.fallback) {
        trace.unit[0] = 1.0;
        return;
    }
    for (std::size_t i = 0; i < dim; ++i) trace.unit[i] = z[i] / trace.norm;
}

}  // namespace detail

EncodeTrace encode_trace(const EncoderParams& params, std::string_view surface);

/// d(upstream . e)/d(table) as sparse rows: (count_b / F) (I - e e^T) upstream / |z|
/// for each bucket b with multiplicity count_b among F features. Accumulates
/// into `out` scaled by `scale`. Fallback encodings contribute nothing.
void encode_grad(const EncodeTrace& trace, std::span<const double> upstream, SparseRowGrad& out, double scale = 1.0);

SparseRowGrad encode_grad(const EncoderParams& params, std::string_view surface, std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Files

/// "TCEM" embedding matrix: version u32, n u64, dim u32, row-major f32.
void save_embeddings(const std::filesystem::path& path, const Matrix<float>& embeddings);
Matrix<float> load_embeddings(const std::filesystem::path& path);

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace termclust
