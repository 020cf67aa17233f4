#include "lightning/engine.hpp"

#include "lightning/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lightning {

InjectionPlan::InjectionPlan(std::vector<Injection> flips)
{
    for (const auto& f : flips) {
        add(f.addr, f.loc);
    }
}

void InjectionPlan::add(ElementAddr addr, BitLoc loc)
{
    const Injection f{addr, loc};
    auto it = std::lower_bound(flips_.begin(), flips_.end(), f);
    if (it != flips_.end() && *it == f) {
        throw std::invalid_argument("duplicate injection at layer " + std::to_string(addr.layer) + " element " +
                                    std::to_string(addr.index) + " bit " + std::to_string(loc.index()));
    }
    flips_.insert(it, f);
}

void InjectionPlan::toggle(ElementAddr addr, BitLoc loc)
{
    const Injection f{addr, loc};
    auto it = std::lower_bound(flips_.begin(), flips_.end(), f);
    if (it != flips_.end() && *it == f) {
        flips_.erase(it);
    } else {
        flips_.insert(it, f);
    }
}

void InjectionPlan::validate(const Model& model) const
{
    for (const auto& f : flips_) {
        if (f.addr.layer >= model.feature_map_count()) {
            throw std::out_of_range("injection targets feature map " + std::to_string(f.addr.layer) + " of " +
                                    std::to_string(model.feature_map_count()));
        }
        if (f.addr.index >= model.feature_map_size(f.addr.layer)) {
            throw std::out_of_range("injection targets element " + std::to_string(f.addr.index) +
                                    " of feature map " + std::to_string(f.addr.layer) + " with " +
                                    std::to_string(model.feature_map_size(f.addr.layer)) + " elements");
        }
    }
}

namespace {

// Each output element is computed by exactly one of these routines, whether
// the whole layer is evaluated or only a few outputs are refreshed.

void gather_patch(const LayerSpec& l, const float* in, std::size_t oy, std::size_t ox, float* patch)
{
    const std::size_t H = l.input_shape[1], W = l.input_shape[2];
    std::size_t p = 0;
    for (std::size_t c = 0; c < l.input_shape[0]; ++c) {
        const float* plane = in + c * H * W;
        for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * l.stride_h + ky) -
                                      static_cast<std::ptrdiff_t>(l.pad_h);
            for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * l.stride_w + kx) -
                                          static_cast<std::ptrdiff_t>(l.pad_w);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(H) &&
                                    ix < static_cast<std::ptrdiff_t>(W);
                patch[p++] = inside ? plane[iy * W + ix] : 0.0f;
            }
        }
    }
}

float conv_output(const LayerSpec& l, std::size_t oc, const float* patch)
{
    const std::size_t n = l.ops_per_element();
    const float* w = l.weights.values().data() + oc * n;
    return kernels::dot({w, n}, {patch, n}) + l.bias[oc];
}

float dense_output(const LayerSpec& l, const float* in, std::size_t o)
{
    const std::size_t n = l.input_shape[0];
    return kernels::dot({l.weights.values().data() + o * n, n}, {in, n}) + l.bias[o];
}

float pool_output(const LayerSpec& l, const float* in, std::size_t c, std::size_t oy, std::size_t ox)
{
    const std::size_t H = l.input_shape[1], W = l.input_shape[2];
    const float* plane = in + c * H * W;
    if (l.kind == LayerKind::MaxPool) {
        float m = plane[(oy * l.stride_h) * W + ox * l.stride_w];
        for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
                const float v = plane[(oy * l.stride_h + ky) * W + ox * l.stride_w + kx];
                if (v > m) {
                    m = v;
                }
            }
        }
        return m;
    }
    float sum = 0.0f;
    for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
            sum += plane[(oy * l.stride_h + ky) * W + ox * l.stride_w + kx];
        }
    }
    return sum / static_cast<float>(l.kernel_h * l.kernel_w);
}

float relu_output(float v)
{
    return v < 0.0f ? 0.0f : v;
}

void softmax_layer(const float* in, float* out, std::size_t n)
{
    float m = in[0];
    for (std::size_t i = 1; i < n; ++i) {
        m = std::max(m, in[i]);
    }
    float sum = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] /= sum;
    }
}

void run_layer(const LayerSpec& l, const std::vector<std::size_t>& out_shape, const float* in, float* out,
               std::vector<float>& patch)
{
    const std::size_t n_out = shape_product(out_shape);
    switch (l.kind) {
    case LayerKind::Conv2D: {
        const std::size_t OH = out_shape[1], OW = out_shape[2];
        patch.resize(l.ops_per_element());
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                gather_patch(l, in, oy, ox, patch.data());
                for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
                    out[(oc * OH + oy) * OW + ox] = conv_output(l, oc, patch.data());
                }
            }
        }
        break;
    }
    case LayerKind::Dense:
        for (std::size_t o = 0; o < n_out; ++o) {
            out[o] = dense_output(l, in, o);
        }
        break;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool: {
        const std::size_t OH = out_shape[1], OW = out_shape[2];
        for (std::size_t c = 0; c < out_shape[0]; ++c) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    out[(c * OH + oy) * OW + ox] = pool_output(l, in, c, oy, ox);
                }
            }
        }
        break;
    }
    case LayerKind::ReLU:
        std::copy(in, in + n_out, out);
        kernels::relu({out, n_out});
        break;
    case LayerKind::Flatten:
        std::copy(in, in + n_out, out);
        break;
    case LayerKind::Softmax:
        softmax_layer(in, out, n_out);
        break;
    }
}

// Output positions (oy, ox) of a sliding window whose receptive field covers
// input row/column `i`.
std::pair<std::size_t, std::size_t> covering(std::size_t i, std::size_t k, std::size_t stride, std::size_t pad,
                                             std::size_t out_len)
{
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(i + pad);
    const std::ptrdiff_t lo_num = p - static_cast<std::ptrdiff_t>(k) + 1;
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(stride);
    const std::ptrdiff_t lo = lo_num <= 0 ? 0 : (lo_num + s - 1) / s;
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(p / s, static_cast<std::ptrdiff_t>(out_len) - 1);
    if (hi < lo) {
        return {1, 0};
    }
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

} // namespace

double loss(std::span<const float> logits, std::size_t label)
{
    if (label >= logits.size()) {
        throw std::out_of_range("label " + std::to_string(label) + " outside " + std::to_string(logits.size()) +
                                " classes");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (float v : logits) {
        if (!std::isfinite(v)) {
            return kLossSentinel;
        }
        m = std::max(m, static_cast<double>(v));
    }
    double sum = 0.0;
    for (float v : logits) {
        sum += std::exp(static_cast<double>(v) - m);
    }
    const double l = m + std::log(sum) - static_cast<double>(logits[label]);
    if (!(l < kLossSentinel)) {
        return kLossSentinel;
    }
    return l < 0.0 ? 0.0 : l;
}

std::size_t argmax(std::span<const float> logits)
{
    std::size_t best = 0;
    bool found = false;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (std::isnan(logits[i])) {
            continue;
        }
        if (!found || logits[i] > logits[best]) {
            best = i;
            found = true;
        }
    }
    return found ? best : logits.size();
}

std::vector<ElementAddr> enumerate_elements(const Model& model)
{
    std::vector<ElementAddr> out;
    for (std::size_t j = 0; j < model.feature_map_count(); ++j) {
        const std::size_t n = model.feature_map_size(j);
        for (std::size_t k = 0; k < n; ++k) {
            out.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)});
        }
    }
    return out;
}

InferenceTrace forward(const Model& model, const Tensor& input, std::size_t label, const InjectionPlan& plan,
                       bool keep_maps)
{
    if (input.shape() != model.input_shape()) {
        throw std::invalid_argument("input shape " + shape_string(input.shape()) + " does not match model input " +
                                    shape_string(model.input_shape()));
    }
    if (label >= model.class_count()) {
        throw std::out_of_range("label " + std::to_string(label) + " outside " +
                                std::to_string(model.class_count()) + " classes");
    }
    plan.validate(model);

    InferenceTrace trace;
    std::vector<float> patch;
    std::vector<float> cur(input.values().begin(), input.values().end());
    std::vector<float> next;
    auto flip = plan.flips().begin();
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const auto& shape = model.output_shape(i);
        next.assign(shape_product(shape), 0.0f);
        run_layer(model.layers()[i], shape, cur.data(), next.data(), patch);
        const std::size_t j = model.feature_index_of_layer(i);
        for (; j != Model::npos && flip != plan.flips().end() && flip->addr.layer == j; ++flip) {
            next[flip->addr.index] = flip_bit(next[flip->addr.index], flip->loc);
        }
        std::swap(cur, next);
        if (keep_maps) {
            trace.maps.emplace_back(shape, cur);
        }
        if (i == model.logits_layer()) {
            trace.logits = Tensor(shape, cur);
        }
    }
    trace.predicted_class = argmax(trace.logits.values());
    trace.loss_value = loss(trace.logits.values(), label);
    return trace;
}

FlipEvaluator::FlipEvaluator(const Model& model, const Tensor& input) : model_(model)
{
    base_ = forward(model, input, 0, {}, true).maps;
    std::size_t biggest = 0;
    for (const auto& m : base_) {
        work_.emplace_back(m.values().begin(), m.values().end());
        biggest = std::max(biggest, m.size());
    }
    mark_.assign(biggest, 0);
}

std::span<const float> FlipEvaluator::baseline_logits() const
{
    return base_[model_.logits_layer()].values();
}

void FlipEvaluator::flipped_logits(ElementAddr addr, BitLoc loc, std::span<float> out)
{
    if (addr.layer >= model_.feature_map_count() || addr.index >= model_.feature_map_size(addr.layer)) {
        throw std::out_of_range("flip address outside the model");
    }
    if (out.size() != model_.class_count()) {
        throw std::invalid_argument("logit buffer has wrong length");
    }
    const std::size_t last = model_.logits_layer();
    std::size_t L = model_.feature_layers()[addr.layer];

    // work_[i] equals base_[i] on entry; `changed` lists indices of layer L
    // that currently differ. Touched entries are restored before returning.
    std::vector<std::uint32_t> changed{addr.index};
    std::vector<std::pair<std::size_t, std::vector<std::uint32_t>>> touched;
    work_[L][addr.index] = flip_bit(base_[L][addr.index], loc);
    touched.push_back({L, changed});

    auto restore = [&] {
        for (const auto& [layer, idx] : touched) {
            const float* b = base_[layer].values().data();
            for (auto k : idx) {
                work_[layer][k] = b[k];
            }
        }
    };

    bool identical = false;
    while (L < last) {
        const std::size_t i = L + 1;
        const LayerSpec& l = model_.layers()[i];
        const auto& out_shape = model_.output_shape(i);
        const float* in = work_[L].data();
        float* dst = work_[i].data();
        std::vector<std::uint32_t> affected;

        switch (l.kind) {
        case LayerKind::ReLU:
            for (auto k : changed) {
                dst[k] = relu_output(in[k]);
            }
            affected = changed;
            break;
        case LayerKind::Flatten:
            for (auto k : changed) {
                dst[k] = in[k];
            }
            affected = changed;
            break;
        case LayerKind::Dense:
            for (std::size_t o = 0; o < out_shape[0]; ++o) {
                dst[o] = dense_output(l, in, o);
                affected.push_back(static_cast<std::uint32_t>(o));
            }
            break;
        case LayerKind::Softmax:
            // unreachable: the walk stops at the logits layer
            break;
        case LayerKind::Conv2D:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
            const std::size_t H = l.input_shape[1], W = l.input_shape[2];
            const std::size_t OH = out_shape[1], OW = out_shape[2];
            const bool conv = l.kind == LayerKind::Conv2D;
            if (++stamp_ == 0) {
                std::fill(mark_.begin(), mark_.end(), 0);
                stamp_ = 1;
            }
            const std::uint32_t stamp = stamp_;
            std::vector<std::uint32_t> positions; // (oy, ox) for conv, (c, oy, ox) for pools
            for (auto k : changed) {
                const std::size_t c = k / (H * W), y = (k / W) % H, x = k % W;
                const auto [ylo, yhi] = covering(y, l.kernel_h, l.stride_h, l.pad_h, OH);
                const auto [xlo, xhi] = covering(x, l.kernel_w, l.stride_w, l.pad_w, OW);
                for (std::size_t oy = ylo; oy <= yhi && ylo <= yhi; ++oy) {
                    for (std::size_t ox = xlo; ox <= xhi && xlo <= xhi; ++ox) {
                        const std::size_t key = conv ? oy * OW + ox : (c * OH + oy) * OW + ox;
                        if (mark_[key] != stamp) {
                            mark_[key] = stamp;
                            positions.push_back(static_cast<std::uint32_t>(key));
                        }
                    }
                }
            }
            std::sort(positions.begin(), positions.end());
            if (conv) {
                patch_.resize(l.ops_per_element());
                for (auto key : positions) {
                    const std::size_t oy = key / OW, ox = key % OW;
                    gather_patch(l, in, oy, ox, patch_.data());
                    for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
                        const std::size_t o = (oc * OH + oy) * OW + ox;
                        dst[o] = conv_output(l, oc, patch_.data());
                        affected.push_back(static_cast<std::uint32_t>(o));
                    }
                }
            } else {
                for (auto key : positions) {
                    const std::size_t c = key / (OH * OW), oy = (key / OW) % OH, ox = key % OW;
                    dst[key] = pool_output(l, in, c, oy, ox);
                    affected.push_back(key);
                }
            }
            break;
        }
        }

        touched.push_back({i, affected});
        changed.clear();
        const float* b = base_[i].values().data();
        for (auto k : affected) {
            if (word_of(dst[k]) != word_of(b[k])) {
                changed.push_back(k);
            }
        }
        L = i;
        if (changed.empty()) {
            identical = true;
            break;
        }
    }

    const float* src = identical ? base_[last].values().data() : work_[last].data();
    std::copy(src, src + out.size(), out.begin());
    restore();
}

} // namespace lightning
