#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "moegate/ops.hpp"
#include "moegate/rng.hpp"

namespace moegate {

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Glorot-uniform weights, zero biases. Each parameter draws from its own
// (seed, name-hash) stream so adding or removing sibling layers never
// perturbs another layer's initialization.
template <typename T>
Tensor<T> glorot_init(std::vector<int> shape, int fan_in, int fan_out, std::uint64_t seed, const std::string& name) {
    Rng rng(seed, fnv1a(name));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
    t.set_requires_grad(true);
    return t;
}

template <typename T>
Tensor<T> zero_param(std::vector<int> shape) {
    Tensor<T> t(std::move(shape));
    t.set_requires_grad(true);
    return t;
}

template <typename T>
struct Linear {
    Tensor<T> weight;  // [out,in]
    Tensor<T> bias;    // [out]
    std::string name;

    Linear() = default;
    Linear(int in, int out, std::uint64_t seed, std::string layer_name)
        : weight(glorot_init<T>({out, in}, in, out, seed, layer_name + ".weight")),
          bias(zero_param<T>({out})),
          name(std::move(layer_name)) {}

    int in_features() const { return weight.dim(1); }
    int out_features() const { return weight.dim(0); }

    Tensor<T> forward(Tape<T>& tape, Tensor<T> x) const { return ops::linear(tape, std::move(x), weight, bias); }

    void collect(ParamList<T>& out) const {
        out.push_back({name + ".weight", weight});
        out.push_back({name + ".bias", bias});
    }
};

// linear -> ReLU -> linear
template <typename T>
struct Mlp {
    Linear<T> fc1, fc2;

    Mlp() = default;
    Mlp(int in, int hidden, int out, std::uint64_t seed, const std::string& name)
        : fc1(in, hidden, seed, name + ".fc1"), fc2(hidden, out, seed, name + ".fc2") {}

    Tensor<T> forward(Tape<T>& tape, Tensor<T> x) const {
        return fc2.forward(tape, ops::relu(tape, fc1.forward(tape, std::move(x))));
    }

    void collect(ParamList<T>& out) const {
        fc1.collect(out);
        fc2.collect(out);
    }
};

// 28x28 -> conv(5x5, 8ch) -> pool2 -> conv(5x5, 16ch) -> pool2 -> flatten(256)
// -> linear -> 128 features, ReLU after each conv and the projection. The
// 128-wide output is the router-input population everything downstream gates,
// routes, and analyzes.
template <typename T>
struct ConvBackbone {
    static constexpr int kFeatureDim = 128;
    static constexpr int kPool1Dim = 8 * 12 * 12;
    static constexpr int kPool2Dim = 16 * 4 * 4;

    Tensor<T> conv1_kernel, conv1_bias;
    Tensor<T> conv2_kernel, conv2_bias;
    Linear<T> projection;

    ConvBackbone() = default;
    explicit ConvBackbone(std::uint64_t seed)
        : conv1_kernel(glorot_init<T>({8, 1, 5, 5}, 1 * 5 * 5, 8 * 5 * 5, seed, "backbone.conv1.kernel")),
          conv1_bias(zero_param<T>({8})),
          conv2_kernel(glorot_init<T>({16, 8, 5, 5}, 8 * 5 * 5, 16 * 5 * 5, seed, "backbone.conv2.kernel")),
          conv2_bias(zero_param<T>({16})),
          projection(kPool2Dim, kFeatureDim, seed, "backbone.projection") {}

    struct Out {
        Tensor<T> features;    // [B,128]
        Tensor<T> pool1_flat;  // [B,1152]
        Tensor<T> pool2_flat;  // [B,256]
    };

    Out forward(Tape<T>& tape, Tensor<T> images) const {
        if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != 28 || images.dim(3) != 28)
            throw DimensionError("backbone: expected images[B,1,28,28], got " + shape_str(images.shape()));
        auto c1 = ops::relu(tape, ops::conv2d(tape, std::move(images), conv1_kernel, conv1_bias));
        auto p1 = ops::maxpool2d(tape, std::move(c1));
        auto p1_flat = ops::flatten(tape, p1);
        auto c2 = ops::relu(tape, ops::conv2d(tape, std::move(p1), conv2_kernel, conv2_bias));
        auto p2 = ops::maxpool2d(tape, std::move(c2));
        auto p2_flat = ops::flatten(tape, std::move(p2));
        auto features = ops::relu(tape, projection.forward(tape, p2_flat));
        return {std::move(features), std::move(p1_flat), std::move(p2_flat)};
    }

    void collect(ParamList<T>& out) const {
        out.push_back({"backbone.conv1.kernel", conv1_kernel});
        out.push_back({"backbone.conv1.bias", conv1_bias});
        out.push_back({"backbone.conv2.kernel", conv2_kernel});
        out.push_back({"backbone.conv2.bias", conv2_bias});
        projection.collect(out);
    }
};

}  // namespace moegate
