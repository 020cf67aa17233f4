#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lightning {

/// Dense row-major binary32 tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    /// Same words, different shape; element counts must agree.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    /// Word-level equality (distinguishes -0/+0 and NaN payloads).
    bool bit_equal(const Tensor& other) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

inline constexpr unsigned kWordBits = 32;
inline constexpr unsigned kSignBit = 31;
inline constexpr unsigned kExponentLow = 23;
inline constexpr unsigned kExponentHigh = 30;

/// Bit position inside a binary32 word: 0 is the lowest mantissa bit,
/// 23..30 the exponent, 31 the sign.
class BitLoc {
public:
    /// Throws std::out_of_range for index > 31.
    explicit BitLoc(unsigned index);
    unsigned index() const { return index_; }
    auto operator<=>(const BitLoc&) const = default;

private:
    unsigned index_;
};

enum class Granularity : std::uint8_t { Element, Exponent, Mantissa, Bit };

std::string_view to_string(Granularity g);
/// Throws std::invalid_argument on an unknown name.
Granularity parse_granularity(std::string_view name);
/// n: number of bits a target of this granularity covers.
unsigned bit_count(Granularity g);

inline std::uint32_t word_of(float v) { return std::bit_cast<std::uint32_t>(v); }
inline float float_of(std::uint32_t w) { return std::bit_cast<float>(w); }

inline std::uint32_t flip_bit(std::uint32_t word, BitLoc loc)
{
    return word ^ (std::uint32_t{1} << loc.index());
}

inline float flip_bit(float value, BitLoc loc)
{
    return float_of(flip_bit(word_of(value), loc));
}

/// The bit set a target covers, ascending. anchor is required for Bit and
/// rejected otherwise (std::invalid_argument).
std::vector<BitLoc> bits_of(Granularity g, std::optional<BitLoc> anchor = std::nullopt);

/// Uniform draw helper: the k-th bit (0-based) of the granularity's bit set.
BitLoc nth_bit(Granularity g, unsigned k, std::optional<BitLoc> anchor = std::nullopt);

} // namespace lightning
