// Times build_neighbor_table on random unit vectors.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "termclust/rng.hpp"
#include "termclust/simd.hpp"
#include "termclust/simindex.hpp"

int main(int argc, char** argv) {
    using namespace termclust;
    const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 100000;
    const std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 128;
    const std::size_t m = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 30;
    const unsigned threads = argc > 4 ? static_cast<unsigned>(std::strtoul(argv[4], nullptr, 10)) : 1;

    Rng rng(1);
    Matrix<float> emb(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0;
        for (auto& v : emb.row(i)) {
            v = static_cast<float>(rng.normal());
            norm += double(v) * v;
        }
        for (auto& v : emb.row(i)) v = static_cast<float>(v / std::sqrt(norm));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = build_neighbor_table(emb, m, IndexOptions{threads});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("isa=%s n=%zu dim=%zu m=%zu threads=%u build=%.2fs checksum=%016llx\n",
                std::string(simd::isa_name(simd::kernels().isa)).c_str(), n, dim, m, threads, secs,
                static_cast<unsigned long long>(table.checksum()));
}
