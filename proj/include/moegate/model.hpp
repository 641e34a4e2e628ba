#pragma once

#include <string>
#include <vector>

#include "moegate/inhibition.hpp"
#include "moegate/layers.hpp"
#include "moegate/moe.hpp"

namespace moegate {

inline constexpr int kNumClasses = 10;

// Tap sites exposed by the classifier. Pre-text taps come from earlier in the
// forward pass, post-text taps from the loss end of the network.
inline constexpr const char* kTapPool1 = "pool1";
inline constexpr const char* kTapPool2 = "pool2";
inline constexpr const char* kTapLogits = "logits";
inline constexpr const char* kTapLoss = "loss";

inline int tap_dim(const std::string& id) {
    if (id == kTapPool1) return 8 * 12 * 12;
    if (id == kTapPool2) return 16 * 4 * 4;
    if (id == kTapLogits) return kNumClasses;
    if (id == kTapLoss) return 1;
    throw ConfigError("unknown tap site '" + id + "'; valid: pool1,pool2,logits,loss");
}

inline bool is_pretext_site(const std::string& id) { return id == kTapPool1 || id == kTapPool2; }
inline bool is_posttext_site(const std::string& id) { return id == kTapLogits || id == kTapLoss; }

struct ModelConfig {
    bool moe = true;
    int experts = 5;
    int top_k = 3;
    InhibitionMode mode = InhibitionMode::none;
    double dropout_p = 0.5;
    double router_noise = 0.0;
    std::vector<std::string> pretext_sites{kTapPool1, kTapPool2};
    std::vector<std::string> posttext_sites{kTapLogits, kTapLoss};

    void validate() const {
        if (experts < 1) throw ConfigError("experts must be >= 1");
        if (top_k < 1 || top_k > experts)
            throw ConfigError("top_k=" + std::to_string(top_k) + " must lie in [1," + std::to_string(experts) + "]");
        if (mode == InhibitionMode::random && (dropout_p < 0.0 || dropout_p >= 1.0))
            throw ConfigError("dropout_p must lie in [0,1)");
        for (const auto& s : pretext_sites)
            if (!is_pretext_site(s))
                throw ConfigError("'" + s + "' is not an earlier-layer site usable as a pre-text tap");
        for (const auto& s : posttext_sites)
            if (!is_posttext_site(s))
                throw ConfigError("'" + s + "' is not a later-layer site usable as a post-text tap");
    }
};

// The mixed-numbers classifier: conv backbone -> inhibited 128-wide feature
// population -> MoE head (or a single MLP head when moe is off). The
// inhibited features feed both the router and the experts.
template <typename T>
struct Classifier {
    ModelConfig cfg;
    ConvBackbone<T> backbone;
    InhibitionUnit<T> inhibition;
    Mlp<T> single_head;  // used when !cfg.moe
    MoELayer<T> moe;     // used when cfg.moe

    Classifier() = default;

    Classifier(ModelConfig config, std::uint64_t seed) : cfg(std::move(config)), backbone(seed) {
        cfg.validate();
        std::vector<TapSpec> pre, post;
        for (const auto& s : cfg.pretext_sites) pre.push_back({s, tap_dim(s)});
        for (const auto& s : cfg.posttext_sites) post.push_back({s, tap_dim(s)});
        inhibition = InhibitionUnit<T>(cfg.mode, ConvBackbone<T>::kFeatureDim, cfg.dropout_p, std::move(pre),
                                       std::move(post), seed);
        if (cfg.moe) {
            moe = MoELayer<T>(ConvBackbone<T>::kFeatureDim, 128, kNumClasses, cfg.experts, cfg.top_k, seed);
            moe.noise_std = cfg.router_noise;
        } else {
            single_head = Mlp<T>(ConvBackbone<T>::kFeatureDim, 128, kNumClasses, seed, "head");
        }
    }

    struct Forward {
        Tensor<T> logits;          // [B,10]
        Tensor<T> features_raw;    // [B,128] pre-gate population
        Tensor<T> features;        // [B,128] post-inhibition
        Tensor<T> gate_values;     // [B,128]; undefined for none/random
        Tensor<T> nll;             // [B]; defined when labels are given
        std::vector<int> expert_indices;
        Tensor<T> expert_weights;
    };

    Forward forward(Tape<T>& tape, Tensor<T> images, const std::vector<int>* labels, bool training,
                    Rng& rng) const {
        auto bb = backbone.forward(tape, std::move(images));
        std::vector<Tensor<T>> pre_taps;
        if (mode_uses_pretext(cfg.mode))
            for (const auto& s : cfg.pretext_sites)
                pre_taps.push_back(s == kTapPool1 ? bb.pool1_flat : bb.pool2_flat);
        auto inh = inhibition.apply(tape, bb.features, bb.features, pre_taps, training, rng);

        Forward result;
        result.features_raw = bb.features;
        result.features = inh.out;
        result.gate_values = inh.gate_values;
        if (cfg.moe) {
            auto head = moe.forward(tape, inh.out, training, &rng);
            result.logits = std::move(head.combined);
            result.expert_indices = std::move(head.indices);
            result.expert_weights = std::move(head.weights);
        } else {
            result.logits = single_head.forward(tape, inh.out);
        }
        if (labels)
            result.nll = ops::cross_entropy_nll(tape, result.logits, *labels);
        return result;
    }

    // Caches this iteration's late activations for the next step's post-text
    // gate. Call once per training step, after the loss exists.
    void update_cache(const Forward& fwd) {
        if (!mode_uses_posttext(cfg.mode)) return;
        std::vector<Tensor<T>> acts;
        for (const auto& s : cfg.posttext_sites) {
            if (s == kTapLogits) {
                acts.push_back(fwd.logits);
            } else {
                if (!fwd.nll.defined())
                    throw ContractError("post-text 'loss' tap requires labels in the forward pass");
                acts.push_back(Tensor<T>({fwd.nll.dim(0), 1}, fwd.nll.values()));
            }
        }
        inhibition.store_post_taps(acts);
    }

    // Gate activations per sample per neuron, eval mode. The sigmoid values
    // themselves, not the gated features.
    Tensor<T> record_inhibition_activations(const Tensor<T>& images) const {
        if (!mode_has_gate(cfg.mode))
            throw ContractError(std::string("inhibition mode '") + to_string(cfg.mode) +
                                "' has no gate to record");
        Tape<T> tape(false);
        Rng rng(0);
        auto fwd = forward(tape, images, nullptr, false, rng);
        return fwd.gate_values;
    }

    void collect_params(ParamList<T>& out) const {
        backbone.collect(out);
        inhibition.collect(out);
        if (cfg.moe)
            moe.collect(out);
        else
            single_head.collect(out);
    }

    ParamList<T> params() const {
        ParamList<T> out;
        collect_params(out);
        return out;
    }

    void zero_grad() {
        for (auto& p : params()) p.tensor.zero_grad();
    }
};

}  // namespace moegate
