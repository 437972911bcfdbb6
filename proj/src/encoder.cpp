#include "termclust/encoder.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include "termclust/binary_io.hpp"
#include "termclust/error.hpp"
#include "termclust/rng.hpp"
#include "termclust/simd.hpp"
#include "termclust/utf8.hpp"

namespace termclust {

namespace {

constexpr std::string_view kOpen = "\xE2\x9F\xA8";   // U+27E8
constexpr std::string_view kClose = "\xE2\x9F\xA9";  // U+27E9

void gather_mean(const EncoderParams& params, std::span<const std::uint32_t> features, EncodeTrace& trace) {
    const std::size_t dim = params.dim();
    const auto& k = simd::kernels();
    std::vector<double> z(dim, 0.0);
    for (std::uint32_t f : features) k.axpy(z.data(), params.table.data() + static_cast<std::size_t>(f) * dim, 1.0, dim);
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

}  // namespace

void EncoderConfig::validate() const {
    if (dim < 2) fail_validation("encoder: dim must be >= 2");
    if (bucket_count < 1) fail_validation("encoder: bucket_count must be >= 1");
    if (bucket_count > (std::uint64_t{1} << 32)) fail_validation("encoder: bucket_count must fit in 32 bits");
    if (ngram_min < 1 || ngram_min > ngram_max) fail_validation("encoder: need 1 <= ngram_min <= ngram_max");
    if (max_chars < 1) fail_validation("encoder: max_chars must be >= 1");
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::uint64_t seed) {
    EncoderParams p = zeros(config);
    Rng rng(seed);
    const double half = 0.5 / static_cast<double>(config.dim);
    for (float& v : p.table.storage()) v = static_cast<float>(rng.uniform(-half, half));
    return p;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
    config.validate();
    return EncoderParams{config, Matrix<float>(config.bucket_count, config.dim, 0.f)};
}

std::uint64_t ngram_hash(std::string_view bytes, std::uint64_t seed) noexcept { return io::hash64(bytes, seed); }

std::vector<std::uint32_t> featurize(const EncoderConfig& config, std::string_view surface) {
    auto cuts = utf8::boundaries(surface);
    if (!cuts) fail_data("featurize: invalid UTF-8 in '" + std::string(surface) + "'");
    std::size_t chars = cuts->size() - 1;
    if (chars > config.max_chars) {
        surface = surface.substr(0, (*cuts)[config.max_chars]);
        chars = config.max_chars;
    }
    if (chars == 0) fail_validation("featurize: empty surface");

    std::string padded;
    padded.reserve(surface.size() + kOpen.size() + kClose.size());
    padded.append(kOpen).append(surface).append(kClose);
    // code point starts within the padded string
    std::vector<std::size_t> starts;
    starts.reserve(chars + 3);
    starts.push_back(0);
    for (std::size_t c = 0; c < chars; ++c) starts.push_back(kOpen.size() + (*cuts)[c]);
    starts.push_back(kOpen.size() + surface.size());
    starts.push_back(padded.size());
    const std::size_t len = chars + 2;

    std::vector<std::uint32_t> out;
    auto push = [&](std::size_t from, std::size_t to) {
        const auto h = ngram_hash(std::string_view(padded).substr(starts[from], starts[to] - starts[from]), config.hash_seed);
        out.push_back(static_cast<std::uint32_t>(h % config.bucket_count));
    };
    for (std::size_t n = config.ngram_min; n <= config.ngram_max && n <= len; ++n) {
        for (std::size_t i = 0; i + n <= len; ++i) push(i, i + n);
    }
    if (out.empty()) push(0, len);
    return out;
}

EncodeTrace encode_trace(const EncoderParams& params, std::string_view surface) {
    EncodeTrace trace;
    trace.features = featurize(params.config, surface);
    gather_mean(params, trace.features, trace);
    return trace;
}

Embedding encode(const EncoderParams& params, std::string_view surface) {
    const EncodeTrace trace = encode_trace(params, surface);
    return Embedding(trace.unit.begin(), trace.unit.end());
}

Matrix<float> encode_batch(const EncoderParams& params, std::span<const std::string> surfaces, unsigned threads) {
    Matrix<float> out(surfaces.size(), params.dim());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            EncodeTrace trace;
            try {
                trace.features = featurize(params.config, surfaces[i]);
            } catch (const Error& e) {
                throw Error(e.kind(), "encode_batch item " + std::to_string(i) + ": " + e.what());
            }
            gather_mean(params, trace.features, trace);
            std::transform(trace.unit.begin(), trace.unit.end(), out.row(i).begin(),
                           [](double v) { return static_cast<float>(v); });
        }
    };
    if (threads <= 1 || surfaces.size() < 1024) {
        work(0, surfaces.size());
        return out;
    }
    // rows are independent, so the result does not depend on the split
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (surfaces.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                work(std::min(surfaces.size(), t * chunk), std::min(surfaces.size(), (t + 1) * chunk));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------

std::span<double> SparseRowGrad::row(std::uint32_t bucket) {
    auto [it, inserted] = slot_.try_emplace(bucket, rows_.size());
    if (inserted) {
        rows_.push_back(bucket);
        values_.resize(values_.size() + dim_, 0.0);
    }
    return values(it->second);
}

void SparseRowGrad::add(const SparseRowGrad& other, double scale) {
    if (other.dim_ != dim_) fail_validation("SparseRowGrad::add: dim mismatch");
    for (std::size_t k = 0; k < other.size(); ++k) {
        auto dst = row(other.rows_[k]);
        const auto src = other.values(k);
        for (std::size_t i = 0; i < dim_; ++i) dst[i] += scale * src[i];
    }
}

void SparseRowGrad::scale(double factor) {
    for (double& v : values_) v *= factor;
}

double SparseRowGrad::at(std::uint32_t bucket, std::size_t col) const {
    const auto it = slot_.find(bucket);
    return it == slot_.end() ? 0.0 : values_[it->second * dim_ + col];
}

void SparseRowGrad::clear() {
    rows_.clear();
    values_.clear();
    slot_.clear();
}

void encode_grad(const EncodeTrace& trace, std::span<const double> upstream, SparseRowGrad& out, double scale) {
    if (trace.fallback) return;
    const std::size_t dim = trace.unit.size();
    if (upstream.size() != dim || out.dim() != dim) fail_validation("encode_grad: dimension mismatch");
    double proj = 0.0;
    for (std::size_t i = 0; i < dim; ++i) proj += trace.unit[i] * upstream[i];
    // dz = (I - e e^T) u / |z|
    std::vector<double> dz(dim);
    for (std::size_t i = 0; i < dim; ++i) dz[i] = (upstream[i] - trace.unit[i] * proj) / trace.norm;

    // multiplicities, visited in first-occurrence order
    std::vector<std::pair<std::uint32_t, std::size_t>> counts;
    {
        std::map<std::uint32_t, std::size_t> seen;
        for (std::uint32_t f : trace.features) {
            auto [it, inserted] = seen.try_emplace(f, counts.size());
            if (inserted) counts.emplace_back(f, 0);
            ++counts[it->second].second;
        }
    }
    const double inv_count = 1.0 / static_cast<double>(trace.features.size());
    for (auto [bucket, count] : counts) {
        auto dst = out.row(bucket);
        const double w = scale * static_cast<double>(count) * inv_count;
        for (std::size_t i = 0; i < dim; ++i) dst[i] += w * dz[i];
    }
}

SparseRowGrad encode_grad(const EncoderParams& params, std::string_view surface, std::span<const double> upstream) {
    SparseRowGrad g(params.dim());
    encode_grad(encode_trace(params, surface), upstream, g);
    return g;
}

// ---------------------------------------------------------------------------

void save_embeddings(const std::filesystem::path& path, const Matrix<float>& embeddings) {
    auto out = io::open_out(path);
    io::Writer w(out);
    w.magic("TCEM");
    w.put<std::uint32_t>(kEmbeddingFileVersion);
    w.put<std::uint64_t>(embeddings.rows());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(embeddings.cols()));
    w.put_span<float>(embeddings.storage());
    if (!out) fail_validation("write failed: " + path.string());
}

Matrix<float> load_embeddings(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    io::Reader r(in, path.string());
    r.expect_magic("TCEM");
    const auto version = r.get<std::uint32_t>();
    if (version != kEmbeddingFileVersion) fail_data(path.string() + ": unsupported version " + std::to_string(version));
    const auto n = r.get<std::uint64_t>();
    const auto dim = r.get<std::uint32_t>();
    if (dim < 1) fail_data(path.string() + ": zero dimension");
    Matrix<float> m(n, dim);
    r.get_span<float>(m.storage());
    for (float v : m.storage())
        if (!std::isfinite(v)) fail_numeric(path.string() + ": non-finite embedding value");
    return m;
}

}  // namespace termclust
