#include <cmath>

#include "termclust/simd.hpp"

namespace termclust::simd::detail {

namespace {

inline float reduce_lanes(const float (&lane)[8]) {
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

}  // namespace

float dot_scalar(const float* a, const float* b, std::size_t dim) {
    float lane[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
    std::size_t i = 0;
    for (; i + 8 <= dim; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) lane[l] = std::fma(a[i + l], b[i + l], lane[l]);
    }
    if (i < dim) {
        // zero padded tail, matching a masked vector load
        for (std::size_t l = 0; l < 8; ++l) {
            const float av = i + l < dim ? a[i + l] : 0.f;
            const float bv = i + l < dim ? b[i + l] : 0.f;
            lane[l] = std::fma(av, bv, lane[l]);
        }
    }
    return reduce_lanes(lane);
}

void dot_block_scalar(const float* q, std::size_t nq, const float* c, std::size_t nc, std::size_t dim, float* out,
                      std::size_t ldo) {
    for (std::size_t i = 0; i < nq; ++i) {
        for (std::size_t j = 0; j < nc; ++j) out[i * ldo + j] = dot_scalar(q + i * dim, c + j * dim, dim);
    }
}

void axpy_scalar(double* acc, const float* row, double scale, std::size_t dim) {
    for (std::size_t i = 0; i < dim; ++i) acc[i] += scale * static_cast<double>(row[i]);
}

}  // namespace termclust::simd::detail
