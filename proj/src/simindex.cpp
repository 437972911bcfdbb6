#include "termclust/simindex.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <mutex>
#include <thread>

#include "termclust/binary_io.hpp"
#include "termclust/error.hpp"
#include "termclust/rng.hpp"
#include "termclust/simd.hpp"

namespace termclust {

namespace {

constexpr std::size_t kTile = 256;

// Bounded selection of the m best (sim desc, id asc) candidates.
// Kept as a heap whose front is the worst retained entry; the result does
// not depend on the order candidates arrive in.
class TopSelector {
public:
    void reset(std::size_t m) {
        m_ = m;
        heap_.clear();
        heap_.reserve(m);
    }

    void offer(float sim, TermId id) {
        if (heap_.size() < m_) {
            heap_.push_back({sim, id});
            std::push_heap(heap_.begin(), heap_.end(), better);
            return;
        }
        const Entry& worst = heap_.front();
        if (sim < worst.sim || (sim == worst.sim && id > worst.id)) return;
        std::pop_heap(heap_.begin(), heap_.end(), better);
        heap_.back() = {sim, id};
        std::push_heap(heap_.begin(), heap_.end(), better);
    }

    /// Similarities strictly below this can never enter.
    float floor() const noexcept { return heap_.size() < m_ ? -INFINITY : heap_.front().sim; }

    void emit(TermId* ids, float* sims) {
        std::sort_heap(heap_.begin(), heap_.end(), better);
        for (std::size_t k = 0; k < heap_.size(); ++k) {
            ids[k] = heap_[k].id;
            sims[k] = heap_[k].sim;
        }
    }

private:
    struct Entry {
        float sim;
        TermId id;
    };
    // "a ranks ahead of b"; with this as the heap comparator the front is the worst
    static bool better(const Entry& a, const Entry& b) { return a.sim > b.sim || (a.sim == b.sim && a.id < b.id); }

    std::size_t m_ = 0;
    std::vector<Entry> heap_;
};

void check_m(std::size_t n, std::size_t m) {
    if (n < 2) fail_validation("neighbor table needs at least 2 embeddings");
    if (m < 1 || m > n - 1)
        fail_validation("m must be in [1, n-1], got m=" + std::to_string(m) + " with n=" + std::to_string(n));
}

// Similarity is symmetric bit for bit (fma(a,b,c) == fma(b,a,c)), so each
// unordered tile pair (I <= J) is computed once and offered to both sides.
class SymmetricBuilder {
public:
    SymmetricBuilder(const Matrix<float>& emb, std::size_t m)
        : emb_(emb), n_(emb.rows()), tiles_((n_ + kTile - 1) / kTile), selectors_(n_), locks_(tiles_) {
        for (auto& s : selectors_) s.reset(m);
    }

    std::size_t tile_count() const noexcept { return tiles_; }

    void run_tile_pair(std::size_t ti, std::size_t tj, std::vector<float>& block, bool locking) {
        const auto& k = simd::kernels();
        const std::size_t dim = emb_.cols();
        const std::size_t i0 = ti * kTile, j0 = tj * kTile;
        const std::size_t ni = std::min(kTile, n_ - i0), nj = std::min(kTile, n_ - j0);
        k.dot_block(emb_.data() + i0 * dim, ni, emb_.data() + j0 * dim, nj, dim, block.data(), kTile);

        auto offer_rows = [&] {
            for (std::size_t r = 0; r < ni; ++r) {
                TopSelector& sel = selectors_[i0 + r];
                const float* sims = block.data() + r * kTile;
                float floor = sel.floor();
                for (std::size_t c = 0; c < nj; ++c) {
                    if (sims[c] < floor || (ti == tj && r == c)) continue;
                    sel.offer(sims[c], static_cast<TermId>(j0 + c));
                    floor = sel.floor();
                }
            }
        };
        auto offer_cols = [&] {
            for (std::size_t c = 0; c < nj; ++c) {
                TopSelector& sel = selectors_[j0 + c];
                float floor = sel.floor();
                for (std::size_t r = 0; r < ni; ++r) {
                    const float s = block[r * kTile + c];
                    if (s < floor) continue;
                    sel.offer(s, static_cast<TermId>(i0 + r));
                    floor = sel.floor();
                }
            }
        };
        if (!locking) {
            offer_rows();
            if (ti != tj) offer_cols();
            return;
        }
        {
            std::lock_guard<std::mutex> g(locks_[ti]);
            offer_rows();
        }
        if (ti != tj) {
            std::lock_guard<std::mutex> g(locks_[tj]);
            offer_cols();
        }
    }

    void emit(NeighborTable& table) {
        for (std::size_t i = 0; i < n_; ++i) selectors_[i].emit(table.ids.data() + i * table.m, table.sims.data() + i * table.m);
    }

private:
    const Matrix<float>& emb_;
    std::size_t n_;
    std::size_t tiles_;
    std::vector<TopSelector> selectors_;
    std::vector<std::mutex> locks_;
};

}  // namespace

std::uint64_t NeighborTable::checksum() const noexcept {
    std::uint64_t h = mix64(n) ^ mix64(m + 1);
    h = io::hash64(std::string_view(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(TermId)), h);
    h = io::hash64(std::string_view(reinterpret_cast<const char*>(sims.data()), sims.size() * sizeof(float)), h);
    return h;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) fail_validation("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        if (!std::isfinite(x) || !std::isfinite(y)) fail_numeric("cosine: non-finite input");
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) fail_numeric("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

float stored_similarity(std::span<const float> a, std::span<const float> b) {
    return simd::kernels().dot(a.data(), b.data(), a.size());
}

NeighborRow top_m(const Matrix<float>& embeddings, TermId query, std::size_t m) {
    const std::size_t n = embeddings.rows();
    check_m(n, m);
    if (query >= n) fail_validation("top_m: query id out of range");
    const auto& k = simd::kernels();
    TopSelector sel;
    sel.reset(m);
    const float* q = embeddings.data() + static_cast<std::size_t>(query) * embeddings.cols();
    for (std::size_t j = 0; j < n; ++j) {
        if (j == query) continue;
        sel.offer(k.dot(q, embeddings.data() + j * embeddings.cols(), embeddings.cols()), static_cast<TermId>(j));
    }
    NeighborRow row;
    row.ids.resize(m);
    row.sims.resize(m);
    sel.emit(row.ids.data(), row.sims.data());
    return row;
}

NeighborTable build_neighbor_table(const Matrix<float>& embeddings, std::size_t m, const IndexOptions& options) {
    const std::size_t n = embeddings.rows();
    check_m(n, m);
    for (float v : embeddings.storage())
        if (!std::isfinite(v)) fail_numeric("build_neighbor_table: non-finite embedding");

    NeighborTable table{n, m, std::vector<TermId>(n * m), std::vector<float>(n * m)};
    SymmetricBuilder builder(embeddings, m);
    const std::size_t tiles = builder.tile_count();
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(tiles)));
    if (threads == 1) {
        std::vector<float> block(kTile * kTile);
        for (std::size_t ti = 0; ti < tiles; ++ti)
            for (std::size_t tj = ti; tj < tiles; ++tj) builder.run_tile_pair(ti, tj, block, false);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t work = tiles * (tiles + 1) / 2;
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                std::vector<float> block(kTile * kTile);
                for (std::size_t w = next++; w < work; w = next++) {
                    // w -> (ti, tj) in row-major order over the upper triangle
                    std::size_t ti = 0, rem = w;
                    while (rem >= tiles - ti) rem -= tiles - ti++;
                    builder.run_tile_pair(ti, ti + rem, block, true);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    builder.emit(table);
    return table;
}

void save_neighbor_table(const std::filesystem::path& path, const NeighborTable& table) {
    auto out = io::open_out(path);
    io::Writer w(out);
    w.magic("TCNT");
    w.put<std::uint32_t>(kNeighborFileVersion);
    w.put<std::uint64_t>(table.n);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.m));
    for (std::size_t i = 0; i < table.n; ++i) {
        w.put_span<TermId>(table.row_ids(i));
        w.put_span<float>(table.row_sims(i));
    }
    if (!out) fail_validation("write failed: " + path.string());
}

NeighborTable load_neighbor_table(const std::filesystem::path& path) {
    auto in = io::open_in(path);
    io::Reader r(in, path.string());
    r.expect_magic("TCNT");
    const auto version = r.get<std::uint32_t>();
    if (version != kNeighborFileVersion) fail_data(path.string() + ": unsupported version " + std::to_string(version));
    NeighborTable t;
    t.n = r.get<std::uint64_t>();
    t.m = r.get<std::uint32_t>();
    t.ids.resize(t.n * t.m);
    t.sims.resize(t.n * t.m);
    for (std::size_t i = 0; i < t.n; ++i) {
        r.get_span<TermId>({t.ids.data() + i * t.m, t.m});
        r.get_span<float>({t.sims.data() + i * t.m, t.m});
        for (std::size_t k = 0; k < t.m; ++k) {
            if (t.ids[i * t.m + k] >= t.n) fail_data(path.string() + ": neighbor id out of range in row " + std::to_string(i));
            if (!std::isfinite(t.sims[i * t.m + k])) fail_numeric(path.string() + ": non-finite similarity");
        }
    }
    return t;
}

}  // namespace termclust
