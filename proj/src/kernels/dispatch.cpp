#include "lightning/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace lightning::kernels {

namespace {

struct Table {
    float (*dot)(const float*, const float*, std::size_t);
    void (*relu)(float*, std::size_t);
};

constexpr Table kScalar{scalar::dot, scalar::relu};
#if defined(LIGHTNING_HAVE_AVX2)
constexpr Table kAvx2{avx2::dot, avx2::relu};
#endif

const Table* table_for(Isa isa)
{
#if defined(LIGHTNING_HAVE_AVX2)
    if (isa == Isa::Avx2) {
        return &kAvx2;
    }
#endif
    (void)isa;
    return &kScalar;
}

std::atomic<Isa>& active()
{
    static std::atomic<Isa> isa{detect_isa()};
    return isa;
}

} // namespace

std::string_view to_string(Isa isa)
{
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa)
{
    switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(LIGHTNING_HAVE_AVX2)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

Isa detect_isa()
{
    return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

Isa active_isa()
{
    return active().load(std::memory_order_relaxed);
}

void set_active_isa(Isa isa)
{
    if (!isa_supported(isa)) {
        throw std::runtime_error("ISA " + std::string(to_string(isa)) + " not supported on this machine");
    }
    active().store(isa, std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    return table_for(active_isa())->dot(a.data(), b.data(), a.size());
}

void relu(std::span<float> x)
{
    table_for(active_isa())->relu(x.data(), x.size());
}

} // namespace lightning::kernels
