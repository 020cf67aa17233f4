#pragma once

#include "lightning/engine.hpp"
#include "lightning/io.hpp"
#include "lightning/model.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace lightning {

struct CandidateTarget {
    ElementAddr addr;
    Granularity granularity = Granularity::Element;
    std::optional<BitLoc> anchor; // Bit granularity only

    std::vector<BitLoc> bits() const { return bits_of(granularity, anchor); }
    auto operator<=>(const CandidateTarget&) const = default;
};

/// Which candidate kinds a search ranks. Part ranks exponent and mantissa
/// parts of every element side by side.
enum class Scheme : std::uint8_t { Element, Exponent, Mantissa, Part, Bit };

std::string_view to_string(Scheme s);
/// Accepts the scheme names plus "part".
Scheme parse_scheme(std::string_view name);
std::vector<Granularity> granularities(Scheme s);

/// What a flip is scored against. Untargeted: loss increase for `label`.
/// Targeted: loss decrease toward `label` (the attacker's class).
struct Objective {
    std::size_t label = 0;
    bool targeted = false;

    static Objective untargeted(std::size_t true_label) { return {true_label, false}; }
    static Objective toward(std::size_t target_class) { return {target_class, true}; }
};

/// bit gradient for the objective from a clean and a flipped loss
double objective_gradient(const Objective& obj, double clean_loss, double flipped_loss);

struct SensitivityEntry {
    CandidateTarget target;
    double s = 0.0;
};

struct SensitivityTable {
    Scheme scheme = Scheme::Element;
    std::uint64_t model_fingerprint = 0;
    /// Element order, then exponent before mantissa, then anchor bit.
    std::vector<SensitivityEntry> entries;
};

struct TargetSet {
    std::size_t n_max = 0;
    /// Descending S, ties in table order.
    std::vector<SensitivityEntry> targets;

    std::size_t size() const { return targets.size(); }
    bool empty() const { return targets.empty(); }
};

/// Logits of one input under every single-bit flip of every feature-map
/// element, computed with FlipEvaluator. Any objective can be scored from it.
class FlipResponse {
public:
    FlipResponse(const Model& model, const Tensor& x);

    std::size_t element_count() const { return elements_; }
    std::size_t classes() const { return classes_; }
    std::span<const float> baseline_logits() const { return baseline_; }
    std::span<const float> logits(std::size_t element, unsigned bit) const
    {
        return {logits_.data() + (element * kWordBits + bit) * classes_, classes_};
    }
    /// Bit gradients indexed element * 32 + bit.
    std::vector<double> gradients(const Objective& obj) const;

private:
    std::size_t elements_ = 0;
    std::size_t classes_ = 0;
    std::vector<float> baseline_;
    std::vector<float> logits_;
};

/// loss(single flip) - loss(clean), via two full forward passes.
double bit_gradient(const Model& model, const Tensor& x, std::size_t label, ElementAddr addr, BitLoc loc);
double bit_gradient(const Model& model, const Tensor& x, const Objective& obj, ElementAddr addr, BitLoc loc);

/// Table from per-bit gradients (element * 32 + bit), S = sum / n in bit order.
SensitivityTable build_table(const Model& model, std::span<const double> gradients, Scheme scheme);

SensitivityTable evaluate_sensitivity(const Model& model, const Tensor& x, std::size_t label, Granularity g);
SensitivityTable evaluate_sensitivity(const Model& model, const Tensor& x, const Objective& obj, Scheme scheme);

/// Top n by S among S > 0. Throws std::invalid_argument for n == 0.
TargetSet get_top_set(const SensitivityTable& table, std::size_t n);

TargetSet input_dependent_search(const Model& model, const Tensor& x, std::size_t label, std::size_t n,
                                 Granularity g);
TargetSet input_dependent_search(const Model& model, const Tensor& x, const Objective& obj, std::size_t n,
                                 Scheme scheme);

/// Per-item objective for dataset-wide searches: untargeted against each
/// item's own label, or toward a fixed class.
struct DatasetObjective {
    bool targeted = false;
    std::size_t target_class = 0;

    Objective for_label(std::size_t label) const
    {
        return targeted ? Objective::toward(target_class) : Objective::untargeted(label);
    }
};

/// Sensitivities summed over the sample in order, then the top set.
TargetSet input_independent_search(const Model& model, const Dataset& sample, std::size_t n, Granularity g);
TargetSet input_independent_search(const Model& model, const Dataset& sample, const DatasetObjective& obj,
                                   std::size_t n, Scheme scheme, unsigned jobs = 1);

/// Table summed over the sample in order.
SensitivityTable accumulate_sensitivity(const Model& model, const Dataset& sample, const DatasetObjective& obj,
                                        Scheme scheme, unsigned jobs = 1);

/// Seeded subsample of at most `limit` items, kept in dataset order.
Dataset subsample(const Dataset& data, std::size_t limit, std::uint64_t seed);

} // namespace lightning
