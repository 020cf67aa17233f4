#pragma once

// Inner loops of the inference engine. Every kernel has a scalar reference in
// kernels::scalar and, where the target supports it, a vector variant; the
// active variant is picked once at startup from CPUID and can be pinned for
// tests. Variants of `relu` are bit-identical; `dot` variants differ only by
// summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace lightning::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool isa_supported(Isa isa);
/// Best ISA the running CPU supports.
Isa detect_isa();
Isa active_isa();
/// Throws std::runtime_error when the CPU (or build) lacks the ISA.
void set_active_isa(Isa isa);

float dot(std::span<const float> a, std::span<const float> b);
/// In place; negative values become +0, everything else (including NaN and
/// -0) passes through unchanged.
void relu(std::span<float> x);

namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
void relu(float* x, std::size_t n);
} // namespace scalar

#if defined(LIGHTNING_HAVE_AVX2)
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n);
void relu(float* x, std::size_t n);
} // namespace avx2
#endif

} // namespace lightning::kernels
