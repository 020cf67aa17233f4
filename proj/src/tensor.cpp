#include "lightning/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace lightning {

std::size_t shape_product(std::span<const std::size_t> shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            s += "x";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape))
{
    data_.assign(shape_product(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    for (auto d : shape_) {
        if (d == 0) {
            throw std::invalid_argument("tensor dimension must be positive: " + shape_string(shape_));
        }
    }
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor shape " + shape_string(shape_) + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const
{
    return Tensor(std::move(shape), data_);
}

bool Tensor::bit_equal(const Tensor& other) const
{
    return shape_ == other.shape_ &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

BitLoc::BitLoc(unsigned index) : index_(index)
{
    if (index >= kWordBits) {
        throw std::out_of_range("bit index " + std::to_string(index) + " outside [0, 31]");
    }
}

std::string_view to_string(Granularity g)
{
    switch (g) {
    case Granularity::Element: return "element";
    case Granularity::Exponent: return "exponent";
    case Granularity::Mantissa: return "mantissa";
    case Granularity::Bit: return "bit";
    }
    return "?";
}

Granularity parse_granularity(std::string_view name)
{
    for (auto g : {Granularity::Element, Granularity::Exponent, Granularity::Mantissa, Granularity::Bit}) {
        if (name == to_string(g)) {
            return g;
        }
    }
    throw std::invalid_argument("unknown granularity '" + std::string(name) + "'");
}

unsigned bit_count(Granularity g)
{
    switch (g) {
    case Granularity::Element: return 32;
    case Granularity::Exponent: return 8;
    case Granularity::Mantissa: return 23;
    case Granularity::Bit: return 1;
    }
    return 0;
}

static void check_anchor(Granularity g, const std::optional<BitLoc>& anchor)
{
    if (g == Granularity::Bit && !anchor) {
        throw std::invalid_argument("bit granularity needs an anchor bit");
    }
    if (g != Granularity::Bit && anchor) {
        throw std::invalid_argument("anchor bit given for " + std::string(to_string(g)) + " granularity");
    }
}

BitLoc nth_bit(Granularity g, unsigned k, std::optional<BitLoc> anchor)
{
    check_anchor(g, anchor);
    if (k >= bit_count(g)) {
        throw std::out_of_range("bit ordinal outside granularity");
    }
    switch (g) {
    case Granularity::Element: return BitLoc(k);
    case Granularity::Exponent: return BitLoc(kExponentLow + k);
    case Granularity::Mantissa: return BitLoc(k);
    case Granularity::Bit: return *anchor;
    }
    return BitLoc(0);
}

std::vector<BitLoc> bits_of(Granularity g, std::optional<BitLoc> anchor)
{
    check_anchor(g, anchor);
    std::vector<BitLoc> out;
    out.reserve(bit_count(g));
    for (unsigned k = 0; k < bit_count(g); ++k) {
        out.push_back(nth_bit(g, k, anchor));
    }
    return out;
}

} // namespace lightning
