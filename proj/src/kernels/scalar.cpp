#include "lightning/kernels.hpp"

namespace lightning::kernels::scalar {

float dot(const float* a, const float* b, std::size_t n)
{
    float sum = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

void relu(float* x, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x[i] < 0.0f ? 0.0f : x[i];
    }
}

} // namespace lightning::kernels::scalar
