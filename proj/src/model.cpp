#include "lightning/model.hpp"

#include "lightning/hash.hpp"

#include <stdexcept>
#include <string>

namespace lightning {

std::string_view to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

namespace {

[[noreturn]] void bad(const LayerSpec& l, const std::string& what)
{
    throw std::invalid_argument(std::string(to_string(l.kind)) + " layer on " + shape_string(l.input_shape) +
                                ": " + what);
}

std::size_t sliding(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad)
{
    return (in + 2 * pad - k) / stride + 1;
}

void check_window(const LayerSpec& l)
{
    if (l.input_shape.size() != 3) {
        bad(l, "expects [channels, height, width] input");
    }
    if (l.kernel_h == 0 || l.kernel_w == 0 || l.stride_h == 0 || l.stride_w == 0) {
        bad(l, "kernel and stride must be positive");
    }
    if (l.input_shape[1] + 2 * l.pad_h < l.kernel_h || l.input_shape[2] + 2 * l.pad_w < l.kernel_w) {
        bad(l, "window larger than padded input");
    }
}

} // namespace

std::vector<std::size_t> LayerSpec::output_shape() const
{
    if (input_shape.empty()) {
        bad(*this, "missing input shape");
    }
    for (auto d : input_shape) {
        if (d == 0) {
            bad(*this, "zero input dimension");
        }
    }
    switch (kind) {
    case LayerKind::Conv2D:
        check_window(*this);
        if (out_channels == 0) {
            bad(*this, "out_channels must be positive");
        }
        return {out_channels, sliding(input_shape[1], kernel_h, stride_h, pad_h),
                sliding(input_shape[2], kernel_w, stride_w, pad_w)};
    case LayerKind::Dense:
        if (input_shape.size() != 1) {
            bad(*this, "expects a flat input");
        }
        if (out_features == 0) {
            bad(*this, "out_features must be positive");
        }
        return {out_features};
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
        if (pad_h || pad_w) {
            bad(*this, "pools take no padding");
        }
        check_window(*this);
        return {input_shape[0], sliding(input_shape[1], kernel_h, stride_h, 0),
                sliding(input_shape[2], kernel_w, stride_w, 0)};
    case LayerKind::Flatten:
        return {shape_product(input_shape)};
    case LayerKind::ReLU:
        return input_shape;
    case LayerKind::Softmax:
        if (input_shape.size() != 1) {
            bad(*this, "expects a flat input");
        }
        return input_shape;
    }
    bad(*this, "unknown kind");
}

std::size_t LayerSpec::ops_per_element() const
{
    switch (kind) {
    case LayerKind::Conv2D: return input_shape[0] * kernel_h * kernel_w;
    case LayerKind::Dense: return input_shape[0];
    case LayerKind::MaxPool:
    case LayerKind::AvgPool: return kernel_h * kernel_w;
    case LayerKind::ReLU: return 1;
    case LayerKind::Flatten:
    case LayerKind::Softmax: return 0;
    }
    return 0;
}

bool LayerSpec::produces_feature_map() const
{
    return kind != LayerKind::Flatten && kind != LayerKind::Softmax;
}

LayerSpec conv2d(std::vector<std::size_t> input_shape, std::size_t out_channels, std::size_t kernel,
                 std::size_t stride, std::size_t pad, Tensor weights, Tensor bias)
{
    LayerSpec l;
    l.kind = LayerKind::Conv2D;
    l.input_shape = std::move(input_shape);
    l.out_channels = out_channels;
    l.kernel_h = l.kernel_w = kernel;
    l.stride_h = l.stride_w = stride;
    l.pad_h = l.pad_w = pad;
    l.weights = std::move(weights);
    l.bias = std::move(bias);
    return l;
}

LayerSpec dense(std::size_t in_features, std::size_t out_features, Tensor weights, Tensor bias)
{
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.input_shape = {in_features};
    l.out_features = out_features;
    l.weights = std::move(weights);
    l.bias = std::move(bias);
    return l;
}

LayerSpec relu(std::vector<std::size_t> shape)
{
    LayerSpec l;
    l.kind = LayerKind::ReLU;
    l.input_shape = std::move(shape);
    return l;
}

static LayerSpec pool(LayerKind kind, std::vector<std::size_t> input_shape, std::size_t window, std::size_t stride)
{
    LayerSpec l;
    l.kind = kind;
    l.input_shape = std::move(input_shape);
    l.kernel_h = l.kernel_w = window;
    l.stride_h = l.stride_w = stride;
    return l;
}

LayerSpec max_pool(std::vector<std::size_t> input_shape, std::size_t window, std::size_t stride)
{
    return pool(LayerKind::MaxPool, std::move(input_shape), window, stride);
}

LayerSpec avg_pool(std::vector<std::size_t> input_shape, std::size_t window, std::size_t stride)
{
    return pool(LayerKind::AvgPool, std::move(input_shape), window, stride);
}

LayerSpec flatten(std::vector<std::size_t> input_shape)
{
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    l.input_shape = std::move(input_shape);
    return l;
}

LayerSpec softmax(std::size_t classes)
{
    LayerSpec l;
    l.kind = LayerKind::Softmax;
    l.input_shape = {classes};
    return l;
}

Model::Model(std::vector<LayerSpec> layers) : layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw std::invalid_argument("model has no layers");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + "): ";
        if (i > 0 && l.input_shape != out_shapes_.back()) {
            throw std::invalid_argument(where + "input shape " + shape_string(l.input_shape) +
                                        " does not match previous output " + shape_string(out_shapes_.back()));
        }
        out_shapes_.push_back(l.output_shape());
        if (l.kind == LayerKind::Conv2D || l.kind == LayerKind::Dense) {
            const std::vector<std::size_t> want_w =
                l.kind == LayerKind::Conv2D
                    ? std::vector<std::size_t>{l.out_channels, l.input_shape[0], l.kernel_h, l.kernel_w}
                    : std::vector<std::size_t>{l.out_features, l.input_shape[0]};
            const std::size_t outs = want_w[0];
            if (l.weights.shape() != want_w) {
                throw std::invalid_argument(where + "weights " + shape_string(l.weights.shape()) + ", expected " +
                                            shape_string(want_w));
            }
            if (l.bias.shape() != std::vector<std::size_t>{outs}) {
                throw std::invalid_argument(where + "bias " + shape_string(l.bias.shape()) + ", expected [" +
                                            std::to_string(outs) + "]");
            }
        } else if (l.weights.size() || l.bias.size()) {
            throw std::invalid_argument(where + "layer kind carries no weights");
        }
        if (l.kind == LayerKind::Softmax && i + 1 != layers_.size()) {
            throw std::invalid_argument(where + "softmax is only allowed as the final layer");
        }
        feature_of_layer_.push_back(npos);
        if (l.produces_feature_map()) {
            feature_of_layer_.back() = feature_layers_.size();
            feature_layers_.push_back(i);
        }
    }
    logits_layer_ = layers_.back().kind == LayerKind::Softmax ? layers_.size() - 2 : layers_.size() - 1;
    if (layers_.size() == 1 && layers_[0].kind == LayerKind::Softmax) {
        throw std::invalid_argument("model consists of a bare softmax");
    }
    if (out_shapes_[logits_layer_].size() != 1) {
        throw std::invalid_argument("final output must be a flat logit vector, got " +
                                    shape_string(out_shapes_[logits_layer_]));
    }
    class_count_ = out_shapes_[logits_layer_][0];
    if (feature_layers_.empty()) {
        throw std::invalid_argument("model produces no feature maps");
    }
}

std::size_t Model::feature_map_size(std::size_t j) const
{
    return shape_product(out_shapes_.at(feature_layers_.at(j)));
}

std::uint64_t Model::fingerprint() const
{
    std::uint64_t h = kFnvOffset;
    auto mix = [&h](std::uint64_t v) { h = fnv1a(&v, sizeof v, h); };
    for (const auto& l : layers_) {
        mix(static_cast<std::uint64_t>(l.kind));
        for (auto d : l.input_shape) {
            mix(d);
        }
        for (auto v : {l.out_channels, l.out_features, l.kernel_h, l.kernel_w, l.stride_h, l.stride_w, l.pad_h,
                       l.pad_w}) {
            mix(v);
        }
        h = fnv1a(l.weights.values().data(), l.weights.size() * sizeof(float), h);
        h = fnv1a(l.bias.values().data(), l.bias.size() * sizeof(float), h);
    }
    return h;
}

} // namespace lightning
