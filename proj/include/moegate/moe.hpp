#pragma once

#include <utility>
#include <vector>

#include "moegate/layers.hpp"
#include "moegate/ops.hpp"

namespace moegate {

template <typename T>
struct TopKGate {
    std::vector<int> indices;  // [B*K], per row ordered by descending logit
    Tensor<T> weights;         // [B,K], softmax over the selected logits only
};

// Selects the K largest logits per row and renormalizes them with a softmax
// over the selection; ties go to the lower expert index.
template <typename T>
TopKGate<T> topk_gate(Tape<T>& tape, Tensor<T> logits, int K) {
    auto indices = ops::topk_rows(logits, K);
    auto selected = ops::select_cols(tape, std::move(logits), indices, K);
    auto weights = ops::softmax(tape, std::move(selected), 1);
    return {std::move(indices), std::move(weights)};
}

// Sparsely-gated K-of-N mixture: router scores experts, the top-K execute,
// and their outputs combine weighted by the renormalized gate. No balancing
// loss and no router noise unless explicitly configured.
template <typename T>
struct MoELayer {
    Mlp<T> router;                 // 128 -> 128 -> N logits
    std::vector<Mlp<T>> experts;   // N x (128 -> 128 -> out)
    int top_k = 1;
    double noise_std = 0.0;        // optional Gaussian logit noise, training only

    MoELayer() = default;
    MoELayer(int in, int hidden, int out, int n_experts, int k, std::uint64_t seed)
        : router(in, hidden, n_experts, seed, "moe.router"), top_k(k) {
        if (k < 1 || k > n_experts)
            throw ConfigError("moe: K=" + std::to_string(k) + " must lie in [1," + std::to_string(n_experts) + "]");
        for (int j = 0; j < n_experts; ++j)
            experts.emplace_back(in, hidden, out, seed, "moe.expert" + std::to_string(j));
    }

    int expert_count() const { return static_cast<int>(experts.size()); }

    struct Out {
        Tensor<T> combined;        // [B,out]
        std::vector<int> indices;  // [B*K]
        Tensor<T> weights;         // [B,K]
    };

    Out forward(Tape<T>& tape, Tensor<T> features, bool training = false, Rng* rng = nullptr) const {
        const int B = features.dim(0);
        const int N = expert_count();
        auto logits = router.forward(tape, features);
        if (training && noise_std > 0.0 && rng) {
            Tensor<T> noise(logits.shape());
            for (auto& v : noise.values()) v = static_cast<T>(rng->normal() * noise_std);
            logits = ops::add(tape, std::move(logits), std::move(noise));
        }
        auto gate = topk_gate(tape, std::move(logits), top_k);

        const int out_dim = experts[0].fc2.out_features();
        Tensor<T> combined = ops::zeros<T>({B, out_dim});
        for (int j = 0; j < N; ++j) {
            std::vector<int> rows, slots;
            for (int b = 0; b < B; ++b)
                for (int s = 0; s < top_k; ++s)
                    if (gate.indices[static_cast<std::size_t>(b) * top_k + s] == j) {
                        rows.push_back(b);
                        slots.push_back(b * top_k + s);
                    }
            if (rows.empty()) continue;
            auto sub = ops::take_rows(tape, features, rows);
            auto expert_out = experts[j].forward(tape, std::move(sub));
            auto w = ops::take_elems(tape, gate.weights, slots);
            auto scaled = ops::scale_rows(tape, std::move(expert_out), std::move(w));
            auto placed = ops::scatter_rows(tape, std::move(scaled), rows, B);
            combined = ops::add(tape, std::move(combined), std::move(placed));
        }
        return {std::move(combined), std::move(gate.indices), std::move(gate.weights)};
    }

    void collect(ParamList<T>& out) const {
        router.collect(out);
        for (const auto& e : experts) e.collect(out);
    }
};

// Per-expert selection counts; the sum equals samples * K.
inline std::vector<long> utilization_histogram(const std::vector<int>& indices, int n_experts) {
    std::vector<long> counts(static_cast<std::size_t>(n_experts), 0);
    for (int j : indices) ++counts[static_cast<std::size_t>(j)];
    return counts;
}

}  // namespace moegate
