#pragma once

#include "lightning/model.hpp"
#include "lightning/tensor.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lightning {

/// Element k of feature map j (j counts feature-map-producing layers only).
struct ElementAddr {
    std::uint32_t layer = 0;
    std::uint32_t index = 0;
    auto operator<=>(const ElementAddr&) const = default;
};

struct Injection {
    ElementAddr addr;
    BitLoc loc{0};
    auto operator<=>(const Injection&) const = default;
};

/// Set of single-bit flips applied to layer outputs. Kept sorted; a repeated
/// (addr, loc) pair would cancel itself and is rejected.
class InjectionPlan {
public:
    InjectionPlan() = default;
    explicit InjectionPlan(std::vector<Injection> flips);

    /// Throws std::invalid_argument on a duplicate.
    void add(ElementAddr addr, BitLoc loc);
    /// XOR semantics: adds the flip, or removes it when already present.
    void toggle(ElementAddr addr, BitLoc loc);

    const std::vector<Injection>& flips() const { return flips_; }
    bool empty() const { return flips_.empty(); }
    std::size_t size() const { return flips_.size(); }

    /// Throws std::out_of_range when an address lies outside the model.
    void validate(const Model& model) const;

private:
    std::vector<Injection> flips_;
};

inline constexpr double kLossSentinel = 1.0e6;

struct InferenceTrace {
    Tensor logits;
    std::size_t predicted_class = 0;
    double loss_value = 0.0;
    /// Output of every layer (not only feature maps) when requested.
    std::vector<Tensor> maps;
};

InferenceTrace forward(const Model& model, const Tensor& input, std::size_t label,
                       const InjectionPlan& plan = {}, bool keep_maps = false);

/// The set E in (j, k) order.
std::vector<ElementAddr> enumerate_elements(const Model& model);

/// Cross-entropy of softmax(logits) against label, evaluated in double.
/// Non-finite logits, or a loss beyond the sentinel, give kLossSentinel.
double loss(std::span<const float> logits, std::size_t label);

/// Lowest index among the maxima; NaN entries never win. All-NaN logits name
/// no class and give logits.size().
std::size_t argmax(std::span<const float> logits);

/// Logits under single-bit flips of one input, reusing the clean pass.
/// Only outputs whose receptive field reaches a changed value are
/// recomputed, and propagation stops as soon as a layer's output matches the
/// clean pass bit for bit. Results are bit-identical to forward() with a
/// one-entry plan.
class FlipEvaluator {
public:
    FlipEvaluator(const Model& model, const Tensor& input);

    std::span<const float> baseline_logits() const;
    const std::vector<Tensor>& baseline_maps() const { return base_; }

    /// Writes class_count logits into out.
    void flipped_logits(ElementAddr addr, BitLoc loc, std::span<float> out);

private:
    const Model& model_;
    std::vector<Tensor> base_;
    std::vector<std::vector<float>> work_;
    std::vector<std::uint32_t> mark_;
    std::uint32_t stamp_ = 0;
    std::vector<float> patch_;
};

} // namespace lightning
