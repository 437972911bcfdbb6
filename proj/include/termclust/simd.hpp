#pragma once

#include <cstddef>
#include <string_view>

namespace termclust::simd {

enum class Isa { scalar, avx2 };

/// Function table for one instruction set.
///
/// Every variant produces bit-identical results to the scalar reference:
/// dot products use eight interleaved fused-multiply-add lanes (element i
/// feeds lane i mod 8, the tail is zero padded) reduced as
/// ((l0+l1)+(l2+l3)) + ((l4+l5)+(l6+l7)).
struct Kernels {
    Isa isa;

    float (*dot)(const float* a, const float* b, std::size_t dim);

    /// out[i * ldo + j] = dot(q_i, c_j) for i < nq, j < nc; rows are dim floats apart.
    void (*dot_block)(const float* q, std::size_t nq, const float* c, std::size_t nc, std::size_t dim, float* out,
                      std::size_t ldo);

    /// acc[i] += scale * row[i], widened to double.
    void (*axpy)(double* acc, const float* row, double scale, std::size_t dim);
};

/// Runtime-selected kernels: the widest ISA the CPU supports, unless the
/// TERMCLUST_SIMD environment variable names a narrower one ("scalar").
const Kernels& kernels();

/// Kernels for a specific ISA; throws if the CPU lacks it.
const Kernels& kernels_for(Isa isa);

bool isa_available(Isa isa) noexcept;

std::string_view isa_name(Isa isa) noexcept;

namespace detail {
float dot_scalar(const float* a, const float* b, std::size_t dim);
void dot_block_scalar(const float* q, std::size_t nq, const float* c, std::size_t nc, std::size_t dim, float* out,
                      std::size_t ldo);
void axpy_scalar(double* acc, const float* row, double scale, std::size_t dim);

float dot_avx2(const float* a, const float* b, std::size_t dim);
void dot_block_avx2(const float* q, std::size_t nq, const float* c, std::size_t nc, std::size_t dim, float* out,
                    std::size_t ldo);
void axpy_avx2(double* acc, const float* row, double scale, std::size_t dim);
}  // namespace detail

}  // namespace termclust::simd
