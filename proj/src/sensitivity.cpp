#include "lightning/sensitivity.hpp"

#include "lightning/parallel.hpp"
#include "lightning/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lightning {

std::string_view to_string(Scheme s)
{
    switch (s) {
    case Scheme::Element: return "element";
    case Scheme::Exponent: return "exponent";
    case Scheme::Mantissa: return "mantissa";
    case Scheme::Part: return "part";
    case Scheme::Bit: return "bit";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name)
{
    for (auto s : {Scheme::Element, Scheme::Exponent, Scheme::Mantissa, Scheme::Part, Scheme::Bit}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw std::invalid_argument("unknown granularity '" + std::string(name) +
                                "' (element, exponent, mantissa, part, bit)");
}

std::vector<Granularity> granularities(Scheme s)
{
    switch (s) {
    case Scheme::Element: return {Granularity::Element};
    case Scheme::Exponent: return {Granularity::Exponent};
    case Scheme::Mantissa: return {Granularity::Mantissa};
    case Scheme::Part: return {Granularity::Exponent, Granularity::Mantissa};
    case Scheme::Bit: return {Granularity::Bit};
    }
    return {};
}

static Scheme scheme_of(Granularity g)
{
    switch (g) {
    case Granularity::Element: return Scheme::Element;
    case Granularity::Exponent: return Scheme::Exponent;
    case Granularity::Mantissa: return Scheme::Mantissa;
    case Granularity::Bit: return Scheme::Bit;
    }
    return Scheme::Element;
}

double objective_gradient(const Objective& obj, double clean_loss, double flipped_loss)
{
    return obj.targeted ? clean_loss - flipped_loss : flipped_loss - clean_loss;
}

FlipResponse::FlipResponse(const Model& model, const Tensor& x)
    : elements_(0), classes_(model.class_count())
{
    FlipEvaluator ev(model, x);
    const auto elems = enumerate_elements(model);
    elements_ = elems.size();
    baseline_.assign(ev.baseline_logits().begin(), ev.baseline_logits().end());
    logits_.resize(elements_ * kWordBits * classes_);
    for (std::size_t e = 0; e < elements_; ++e) {
        for (unsigned b = 0; b < kWordBits; ++b) {
            ev.flipped_logits(elems[e], BitLoc(b), {logits_.data() + (e * kWordBits + b) * classes_, classes_});
        }
    }
}

std::vector<double> FlipResponse::gradients(const Objective& obj) const
{
    if (obj.label >= classes_) {
        throw std::out_of_range("objective label outside the model's classes");
    }
    const double clean = loss(baseline_, obj.label);
    std::vector<double> g(elements_ * kWordBits);
    for (std::size_t e = 0; e < elements_; ++e) {
        for (unsigned b = 0; b < kWordBits; ++b) {
            g[e * kWordBits + b] = objective_gradient(obj, clean, loss(logits(e, b), obj.label));
        }
    }
    return g;
}

double bit_gradient(const Model& model, const Tensor& x, const Objective& obj, ElementAddr addr, BitLoc loc)
{
    const double clean = forward(model, x, obj.label).loss_value;
    const double flipped = forward(model, x, obj.label, InjectionPlan({{addr, loc}})).loss_value;
    return objective_gradient(obj, clean, flipped);
}

double bit_gradient(const Model& model, const Tensor& x, std::size_t label, ElementAddr addr, BitLoc loc)
{
    return bit_gradient(model, x, Objective::untargeted(label), addr, loc);
}

SensitivityTable build_table(const Model& model, std::span<const double> gradients, Scheme scheme)
{
    const auto elems = enumerate_elements(model);
    if (gradients.size() != elems.size() * kWordBits) {
        throw std::invalid_argument("gradient vector does not cover every bit of every element");
    }
    const auto kinds = granularities(scheme);
    SensitivityTable t;
    t.scheme = scheme;
    t.model_fingerprint = model.fingerprint();
    std::size_t per_element = 0;
    for (auto g : kinds) {
        per_element += g == Granularity::Bit ? kWordBits : 1;
    }
    t.entries.reserve(elems.size() * per_element);
    for (std::size_t e = 0; e < elems.size(); ++e) {
        const double* g = gradients.data() + e * kWordBits;
        for (auto kind : kinds) {
            if (kind == Granularity::Bit) {
                for (unsigned b = 0; b < kWordBits; ++b) {
                    t.entries.push_back({{elems[e], kind, BitLoc(b)}, g[b]});
                }
                continue;
            }
            double sum = 0.0;
            for (auto b : bits_of(kind)) {
                sum += g[b.index()];
            }
            t.entries.push_back({{elems[e], kind, std::nullopt}, sum / bit_count(kind)});
        }
    }
    return t;
}

SensitivityTable evaluate_sensitivity(const Model& model, const Tensor& x, const Objective& obj, Scheme scheme)
{
    FlipResponse r(model, x);
    return build_table(model, r.gradients(obj), scheme);
}

SensitivityTable evaluate_sensitivity(const Model& model, const Tensor& x, std::size_t label, Granularity g)
{
    return evaluate_sensitivity(model, x, Objective::untargeted(label), scheme_of(g));
}

TargetSet get_top_set(const SensitivityTable& table, std::size_t n)
{
    if (n == 0) {
        throw std::invalid_argument("top-set size N must be at least 1");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        if (table.entries[i].s > 0.0) {
            idx.push_back(i);
        }
    }
    const std::size_t keep = std::min(n, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(), [&](std::size_t a, std::size_t b) {
        const double sa = table.entries[a].s, sb = table.entries[b].s;
        return sa != sb ? sa > sb : a < b;
    });
    TargetSet out;
    out.n_max = n;
    for (std::size_t i = 0; i < keep; ++i) {
        out.targets.push_back(table.entries[idx[i]]);
    }
    return out;
}

TargetSet input_dependent_search(const Model& model, const Tensor& x, const Objective& obj, std::size_t n,
                                 Scheme scheme)
{
    if (n == 0) {
        throw std::invalid_argument("top-set size N must be at least 1");
    }
    return get_top_set(evaluate_sensitivity(model, x, obj, scheme), n);
}

TargetSet input_dependent_search(const Model& model, const Tensor& x, std::size_t label, std::size_t n,
                                 Granularity g)
{
    return input_dependent_search(model, x, Objective::untargeted(label), n, scheme_of(g));
}

SensitivityTable accumulate_sensitivity(const Model& model, const Dataset& sample, const DatasetObjective& obj,
                                        Scheme scheme, unsigned jobs)
{
    if (sample.empty()) {
        throw std::invalid_argument("input-independent search needs a non-empty sample");
    }
    SensitivityTable total;
    const std::size_t batch = std::max(1u, jobs);
    std::vector<SensitivityTable> tables(batch);
    for (std::size_t first = 0; first < sample.size(); first += batch) {
        const std::size_t count = std::min(batch, sample.size() - first);
        parallel_for(count, jobs, [&](std::size_t i) {
            const std::size_t k = first + i;
            tables[i] = evaluate_sensitivity(model, sample.inputs[k], obj.for_label(sample.labels[k]), scheme);
        });
        // summation stays in sample order regardless of how the batch ran
        for (std::size_t i = 0; i < count; ++i) {
            if (first == 0 && i == 0) {
                total = std::move(tables[0]);
                continue;
            }
            for (std::size_t e = 0; e < total.entries.size(); ++e) {
                total.entries[e].s += tables[i].entries[e].s;
            }
        }
    }
    return total;
}

TargetSet input_independent_search(const Model& model, const Dataset& sample, const DatasetObjective& obj,
                                   std::size_t n, Scheme scheme, unsigned jobs)
{
    if (n == 0) {
        throw std::invalid_argument("top-set size N must be at least 1");
    }
    return get_top_set(accumulate_sensitivity(model, sample, obj, scheme, jobs), n);
}

TargetSet input_independent_search(const Model& model, const Dataset& sample, std::size_t n, Granularity g)
{
    return input_independent_search(model, sample, DatasetObjective{}, n, scheme_of(g));
}

Dataset subsample(const Dataset& data, std::size_t limit, std::uint64_t seed)
{
    if (data.size() <= limit) {
        return data;
    }
    // partial Fisher-Yates over indices, then restore dataset order
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < limit; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    Dataset out;
    for (auto i : idx) {
        out.inputs.push_back(data.inputs[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

} // namespace lightning
