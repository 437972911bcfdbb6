// Compiled with -mavx2 -mfma; only reached through the dispatcher after a CPU check.
#include <immintrin.h>

#include "termclust/simd.hpp"

namespace termclust::simd::detail {

namespace {

inline __m256i tail_mask(std::size_t remaining) {
    alignas(32) static const int table[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - remaining));
}

// Lane tree ((l0+l1)+(l2+l3)) + ((l4+l5)+(l6+l7)) for one accumulator.
inline float reduce1(__m256 v) {
    const __m256 h1 = _mm256_hadd_ps(v, v);
    const __m256 h2 = _mm256_hadd_ps(h1, h1);
    return _mm_cvtss_f32(_mm_add_ss(_mm256_castps256_ps128(h2), _mm256_extractf128_ps(h2, 1)));
}

// Same tree for eight accumulators at once; lane k of the result is acc[k] reduced.
inline __m256 reduce8(__m256 a0, __m256 a1, __m256 a2, __m256 a3, __m256 a4, __m256 a5, __m256 a6, __m256 a7) {
    const __m256 h01 = _mm256_hadd_ps(a0, a1);
    const __m256 h23 = _mm256_hadd_ps(a2, a3);
    const __m256 h45 = _mm256_hadd_ps(a4, a5);
    const __m256 h67 = _mm256_hadd_ps(a6, a7);
    const __m256 lo4 = _mm256_hadd_ps(h01, h23);
    const __m256 hi4 = _mm256_hadd_ps(h45, h67);
    const __m256 low_halves = _mm256_permute2f128_ps(lo4, hi4, 0x20);
    const __m256 high_halves = _mm256_permute2f128_ps(lo4, hi4, 0x31);
    return _mm256_add_ps(low_halves, high_halves);
}

// 4 query rows x 2 candidate rows.
inline void micro_4x2(const float* q, const float* c, std::size_t dim, float* out, std::size_t ldo) {
    __m256 a00 = _mm256_setzero_ps(), a01 = _mm256_setzero_ps();
    __m256 a10 = _mm256_setzero_ps(), a11 = _mm256_setzero_ps();
    __m256 a20 = _mm256_setzero_ps(), a21 = _mm256_setzero_ps();
    __m256 a30 = _mm256_setzero_ps(), a31 = _mm256_setzero_ps();
    const float* q0 = q;
    const float* q1 = q + dim;
    const float* q2 = q + 2 * dim;
    const float* q3 = q + 3 * dim;
    const float* c0 = c;
    const float* c1 = c + dim;
    std::size_t i = 0;
    for (; i + 8 <= dim; i += 8) {
        const __m256 vc0 = _mm256_loadu_ps(c0 + i);
        const __m256 vc1 = _mm256_loadu_ps(c1 + i);
        __m256 vq = _mm256_loadu_ps(q0 + i);
        a00 = _mm256_fmadd_ps(vq, vc0, a00);
        a01 = _mm256_fmadd_ps(vq, vc1, a01);
        vq = _mm256_loadu_ps(q1 + i);
        a10 = _mm256_fmadd_ps(vq, vc0, a10);
        a11 = _mm256_fmadd_ps(vq, vc1, a11);
        vq = _mm256_loadu_ps(q2 + i);
        a20 = _mm256_fmadd_ps(vq, vc0, a20);
        a21 = _mm256_fmadd_ps(vq, vc1, a21);
        vq = _mm256_loadu_ps(q3 + i);
        a30 = _mm256_fmadd_ps(vq, vc0, a30);
        a31 = _mm256_fmadd_ps(vq, vc1, a31);
    }
    if (i < dim) {
        const __m256i m = tail_mask(dim - i);
        const __m256 vc0 = _mm256_maskload_ps(c0 + i, m);
        const __m256 vc1 = _mm256_maskload_ps(c1 + i, m);
        __m256 vq = _mm256_maskload_ps(q0 + i, m);
        a00 = _mm256_fmadd_ps(vq, vc0, a00);
        a01 = _mm256_fmadd_ps(vq, vc1, a01);
        vq = _mm256_maskload_ps(q1 + i, m);
        a10 = _mm256_fmadd_ps(vq, vc0, a10);
        a11 = _mm256_fmadd_ps(vq, vc1, a11);
        vq = _mm256_maskload_ps(q2 + i, m);
        a20 = _mm256_fmadd_ps(vq, vc0, a20);
        a21 = _mm256_fmadd_ps(vq, vc1, a21);
        vq = _mm256_maskload_ps(q3 + i, m);
        a30 = _mm256_fmadd_ps(vq, vc0, a30);
        a31 = _mm256_fmadd_ps(vq, vc1, a31);
    }
    alignas(32) float r[8];
    _mm256_store_ps(r, reduce8(a00, a01, a10, a11, a20, a21, a30, a31));
    out[0] = r[0];
    out[1] = r[1];
    out[ldo] = r[2];
    out[ldo + 1] = r[3];
    out[2 * ldo] = r[4];
    out[2 * ldo + 1] = r[5];
    out[3 * ldo] = r[6];
    out[3 * ldo + 1] = r[7];
}

}  // namespace

float dot_avx2(const float* a, const float* b, std::size_t dim) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= dim; i += 8) acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    if (i < dim) {
        const __m256i m = tail_mask(dim - i);
        acc = _mm256_fmadd_ps(_mm256_maskload_ps(a + i, m), _mm256_maskload_ps(b + i, m), acc);
    }
    return reduce1(acc);
}

void dot_block_avx2(const float* q, std::size_t nq, const float* c, std::size_t nc, std::size_t dim, float* out,
                    std::size_t ldo) {
    const std::size_t nq4 = nq - nq % 4;
    const std::size_t nc2 = nc - nc % 2;
    for (std::size_t i = 0; i < nq4; i += 4) {
        for (std::size_t j = 0; j < nc2; j += 2) micro_4x2(q + i * dim, c + j * dim, dim, out + i * ldo + j, ldo);
        for (std::size_t j = nc2; j < nc; ++j) {
            for (std::size_t r = 0; r < 4; ++r) out[(i + r) * ldo + j] = dot_avx2(q + (i + r) * dim, c + j * dim, dim);
        }
    }
    for (std::size_t i = nq4; i < nq; ++i) {
        for (std::size_t j = 0; j < nc; ++j) out[i * ldo + j] = dot_avx2(q + i * dim, c + j * dim, dim);
    }
}

void axpy_avx2(double* acc, const float* row, double scale, std::size_t dim) {
    const __m256d s = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= dim; i += 4) {
        const __m256d r = _mm256_cvtps_pd(_mm_loadu_ps(row + i));
        // mul then add, no fusion, to match the scalar reference
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(s, r)));
    }
    for (; i < dim; ++i) acc[i] += scale * static_cast<double>(row[i]);
}

}  // namespace termclust::simd::detail
