#pragma once

#include "lightning/engine.hpp"
#include "lightning/io.hpp"
#include "lightning/model.hpp"
#include "lightning/rng.hpp"

#include <string>

namespace testutil {

inline lightning::Tensor random_tensor(std::vector<std::size_t> shape, lightning::Rng& rng, double scale = 1.0)
{
    lightning::Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = static_cast<float>(rng.normal() * scale);
    }
    return t;
}

/// Small conv net: [1,6,6] -> conv 3x3 (2ch, pad 1) -> relu -> maxpool 2 ->
/// flatten -> dense 5 -> relu -> dense 3. 72+72+18+5+5+3 = 175 elements.
inline lightning::Model tiny_cnn(std::uint64_t seed)
{
    using namespace lightning;
    Rng rng(seed);
    std::vector<LayerSpec> layers;
    layers.push_back(conv2d({1, 6, 6}, 2, 3, 1, 1, random_tensor({2, 1, 3, 3}, rng, 0.5),
                            random_tensor({2}, rng, 0.1)));
    layers.push_back(relu({2, 6, 6}));
    layers.push_back(max_pool({2, 6, 6}, 2, 2));
    layers.push_back(flatten({2, 3, 3}));
    layers.push_back(dense(18, 5, random_tensor({5, 18}, rng, 0.4), random_tensor({5}, rng, 0.1)));
    layers.push_back(relu({5}));
    layers.push_back(dense(5, 3, random_tensor({3, 5}, rng, 0.6), random_tensor({3}, rng, 0.1)));
    return Model(std::move(layers));
}

inline std::string fixture(const std::string& name)
{
    return std::string(LIGHTNING_FIXTURE_DIR) + "/" + name;
}

inline const lightning::Model& toy_model()
{
    static const lightning::Model m = lightning::load_model(fixture("toy_lenet.lsnm"));
    return m;
}

inline const lightning::Dataset& toy_test_set()
{
    static const lightning::Dataset d = lightning::conform(
        lightning::load_idx(fixture("digits-test-images.idx"), fixture("digits-test-labels.idx")), toy_model());
    return d;
}

} // namespace testutil
