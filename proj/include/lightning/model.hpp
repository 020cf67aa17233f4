#pragma once

#include "lightning/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace lightning {

// Values double as the LSNM on-disk kind byte.
enum class LayerKind : std::uint8_t {
    Conv2D = 1,
    Dense = 2,
    ReLU = 3,
    MaxPool = 4,
    AvgPool = 5,
    Flatten = 6,
    Softmax = 7,
};

std::string_view to_string(LayerKind kind);

/// One layer with its declared input shape. Conv2D and the pools work on
/// [channels, height, width]; Dense on a rank-1 vector. Pools reuse
/// kernel_h/kernel_w as the window and take no padding.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::vector<std::size_t> input_shape;

    std::size_t out_channels = 0; // Conv2D
    std::size_t out_features = 0; // Dense
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    Tensor weights; // Conv2D [out, in, kh, kw]; Dense [out, in]
    Tensor bias;    // [out]

    /// Throws std::invalid_argument when the spec is malformed.
    std::vector<std::size_t> output_shape() const;
    /// Arithmetic operations one output element costs: multiply-accumulates
    /// for Conv2D (padding taps included) and Dense, window size for pools,
    /// 1 for ReLU, 0 for Flatten and Softmax.
    std::size_t ops_per_element() const;
    /// Whether the layer's output counts as a feature map (everything except
    /// Flatten, a pure reshape, and Softmax).
    bool produces_feature_map() const;
};

LayerSpec conv2d(std::vector<std::size_t> input_shape, std::size_t out_channels, std::size_t kernel,
                 std::size_t stride, std::size_t pad, Tensor weights, Tensor bias);
LayerSpec dense(std::size_t in_features, std::size_t out_features, Tensor weights, Tensor bias);
LayerSpec relu(std::vector<std::size_t> shape);
LayerSpec max_pool(std::vector<std::size_t> input_shape, std::size_t window, std::size_t stride);
LayerSpec avg_pool(std::vector<std::size_t> input_shape, std::size_t window, std::size_t stride);
LayerSpec flatten(std::vector<std::size_t> input_shape);
LayerSpec softmax(std::size_t classes);

/// Immutable, validated layer sequence.
class Model {
public:
    /// Throws std::invalid_argument naming the first offending layer.
    explicit Model(std::vector<LayerSpec> layers);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<std::size_t>& input_shape() const { return layers_.front().input_shape; }
    const std::vector<std::size_t>& output_shape(std::size_t layer) const { return out_shapes_[layer]; }
    std::size_t class_count() const { return class_count_; }

    /// Layer indices whose outputs are feature maps; position in this list is
    /// the feature-map index j of an ElementAddr.
    const std::vector<std::size_t>& feature_layers() const { return feature_layers_; }
    std::size_t feature_map_count() const { return feature_layers_.size(); }
    std::size_t feature_map_size(std::size_t j) const;
    /// Feature-map index of a layer, or npos.
    std::size_t feature_index_of_layer(std::size_t layer) const { return feature_of_layer_[layer]; }
    /// Index of the layer whose output is the logit vector.
    std::size_t logits_layer() const { return logits_layer_; }

    /// FNV-1a over structure and weight words.
    std::uint64_t fingerprint() const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::vector<std::size_t>> out_shapes_;
    std::vector<std::size_t> feature_layers_;
    std::vector<std::size_t> feature_of_layer_;
    std::size_t logits_layer_ = 0;
    std::size_t class_count_ = 0;
};

} // namespace lightning
