#pragma once

#include "lightning/model.hpp"
#include "lightning/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightning {

struct Dataset {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }
    /// Items [first, first + count) clipped to the end.
    Dataset slice(std::size_t first, std::size_t count) const;
};

/// Reshape every input to the model's input shape; element counts must agree.
Dataset conform(Dataset data, const Model& model);

enum class FormatErrorKind { Io, BadMagic, BadVersion, Truncated, BadLayer, ShapeMismatch, CountMismatch };

std::string_view to_string(FormatErrorKind kind);

/// Structured decode failure; offset is the byte position where decoding
/// stopped making sense.
class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what);
    FormatErrorKind kind() const { return kind_; }
    std::uint64_t offset() const { return offset_; }

private:
    FormatErrorKind kind_;
    std::uint64_t offset_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// LSNM: "LSNM", u16 version (1), u16 layer count, then per layer a u8 kind,
// u32 parameter count + u32 parameters, u64 blob length + binary32 weights
// (bias follows the weights). Parameters start with the input rank and
// dimensions; Conv2D adds out_channels, kh, kw, sh, sw, ph, pw; Dense adds
// out_features; pools add wh, ww, sh, sw. All little-endian.
std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(std::span<const std::uint8_t> bytes);
Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& path);

/// IDX image (0x00000803) and label (0x00000801) files, big-endian headers.
/// Pixels are divided by 255; images keep their [rows, cols] shape.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void save_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
              std::span<const std::uint8_t> pixels, std::size_t rows, std::size_t cols,
              std::span<const std::uint8_t> labels_data);

/// Gaussian class blobs: coordinate i of class c has mean +3 or -3 according
/// to bit (i mod b) of c, where b is the bit width of classes - 1, and unit
/// variance. Items are interleaved by class.
Dataset synth_dataset(std::size_t classes, std::size_t per_class, std::size_t dimension, std::uint64_t seed);

/// Reference logits written by the training script: "LSNF", u32 count,
/// u32 classes, u32 rank, u32 dims, then per item the input words, a u32
/// label and the logit words.
struct Fixture {
    Dataset data;
    std::vector<std::vector<float>> logits;
    std::size_t classes = 0;
};

Fixture load_fixture(const std::filesystem::path& path);

} // namespace lightning
