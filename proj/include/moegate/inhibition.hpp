#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "moegate/layers.hpp"
#include "moegate/ops.hpp"

namespace moegate {

enum class InhibitionMode { none, random, one_layer, pretext, posttext, global_all };

inline const char* to_string(InhibitionMode m) {
    switch (m) {
        case InhibitionMode::none: return "none";
        case InhibitionMode::random: return "dropout";
        case InhibitionMode::one_layer: return "glu";
        case InhibitionMode::pretext: return "pretext";
        case InhibitionMode::posttext: return "posttext";
        case InhibitionMode::global_all: return "global";
    }
    return "?";
}

inline InhibitionMode inhibition_mode_from_string(const std::string& s) {
    if (s == "none") return InhibitionMode::none;
    if (s == "dropout") return InhibitionMode::random;
    if (s == "glu") return InhibitionMode::one_layer;
    if (s == "pretext") return InhibitionMode::pretext;
    if (s == "posttext") return InhibitionMode::posttext;
    if (s == "global") return InhibitionMode::global_all;
    throw ConfigError("unknown inhibition mode '" + s + "'; valid modes: none,dropout,glu,pretext,posttext,global");
}

inline bool mode_has_gate(InhibitionMode m) {
    return m == InhibitionMode::one_layer || m == InhibitionMode::pretext || m == InhibitionMode::posttext ||
           m == InhibitionMode::global_all;
}

inline bool mode_uses_pretext(InhibitionMode m) {
    return m == InhibitionMode::pretext || m == InhibitionMode::global_all;
}

inline bool mode_uses_posttext(InhibitionMode m) {
    return m == InhibitionMode::posttext || m == InhibitionMode::global_all;
}

struct TapSpec {
    std::string id;
    int dim = 0;
};

// Holds one detached activation per tap from the previous training
// iteration. Entries never carry gradient state; iteration 0 means nothing
// has been stored yet.
template <typename T>
struct ActivationCache {
    std::unordered_map<std::string, Tensor<T>> entries;
    long iteration = 0;

    bool warm() const { return iteration > 0; }

    void store(const std::string& tap_id, const Tensor<T>& activation) { entries[tap_id] = activation.detach(); }

    void advance() { ++iteration; }

    const Tensor<T>* find(const std::string& tap_id) const {
        auto it = entries.find(tap_id);
        return it == entries.end() ? nullptr : &it->second;
    }

    void clear() {
        entries.clear();
        iteration = 0;
    }
};

// Inhibition over a fixed-width neuron population: z* = z (.) sigma(arg)
// where arg collects the direct gate G(x), pre-text projections of earlier
// activations, and batch-maxpooled post-text projections of the previous
// iteration's cached late activations.
template <typename T>
struct InhibitionUnit {
    InhibitionMode mode = InhibitionMode::none;
    int width = 0;
    double dropout_p = 0.5;
    Linear<T> gate;                        // G of the gate argument
    std::vector<TapSpec> pretext_taps;
    std::vector<Linear<T>> pretext_nets;   // Pr_i, one per earlier tap
    std::vector<TapSpec> posttext_taps;
    std::vector<Linear<T>> posttext_nets;  // Po_j, one per later tap
    ActivationCache<T> cache;

    InhibitionUnit() = default;

    InhibitionUnit(InhibitionMode m, int population_width, double p, std::vector<TapSpec> pre,
                   std::vector<TapSpec> post, std::uint64_t seed)
        : mode(m), width(population_width), dropout_p(p) {
        if (mode == InhibitionMode::random && (dropout_p < 0.0 || dropout_p >= 1.0))
            throw ConfigError("random inhibition rate must lie in [0,1), got " + std::to_string(dropout_p));
        if (mode_has_gate(mode))
            gate = Linear<T>(width, width, seed, "inhibition.gate");
        if (mode_uses_pretext(mode)) {
            pretext_taps = std::move(pre);
            for (const auto& tap : pretext_taps)
                pretext_nets.emplace_back(tap.dim, width, seed, "inhibition.pretext." + tap.id);
        }
        if (mode_uses_posttext(mode)) {
            posttext_taps = std::move(post);
            for (const auto& tap : posttext_taps)
                posttext_nets.emplace_back(tap.dim, width, seed, "inhibition.posttext." + tap.id);
        }
    }

    struct Result {
        Tensor<T> out;          // z*
        Tensor<T> gate_values;  // sigma(arg); undefined for none/random
    };

    // Random Inhibition: plain inverted dropout over the population.
    Tensor<T> random_inhibit(Tape<T>& tape, Tensor<T> z, bool training, Rng& rng) const {
        return ops::dropout(tape, std::move(z), dropout_p, training, rng);
    }

    // Single cross-layer inhibition: z* = z (.) sigma(G(x)).
    Result one_layer_inhibit(Tape<T>& tape, Tensor<T> z, Tensor<T> x) const {
        return finish(tape, std::move(z), gate.forward(tape, std::move(x)));
    }

    // Pre-text: gate argument G(x) + sum_i Pr_i(x_i).
    Result pretext_inhibit(Tape<T>& tape, Tensor<T> z, Tensor<T> x, const std::vector<Tensor<T>>& taps) const {
        auto arg = gate_arg_with_pretext(tape, std::move(x), taps);
        return finish(tape, std::move(z), std::move(arg));
    }

    // Post-text: gate argument G(x) + sum_j maxpool_batch(Po_j(cached x_j)).
    Result posttext_inhibit(Tape<T>& tape, Tensor<T> z, Tensor<T> x) const {
        auto arg = gate.forward(tape, std::move(x));
        arg = add_posttext_terms(tape, std::move(arg));
        return finish(tape, std::move(z), std::move(arg));
    }

    // Global: all three contributions inside one sigmoid.
    Result global_inhibit(Tape<T>& tape, Tensor<T> z, Tensor<T> x, const std::vector<Tensor<T>>& taps) const {
        auto arg = gate_arg_with_pretext(tape, std::move(x), taps);
        arg = add_posttext_terms(tape, std::move(arg));
        return finish(tape, std::move(z), std::move(arg));
    }

    // The pooled post-text contribution [1,width] for the current iteration,
    // or an undefined tensor during cold start. Depends only on the cache,
    // never on the current batch.
    Tensor<T> posttext_term(Tape<T>& tape) const {
        if (!cache.warm()) return Tensor<T>();
        Tensor<T> term;
        for (std::size_t j = 0; j < posttext_nets.size(); ++j) {
            const Tensor<T>* cached = cache.find(posttext_taps[j].id);
            if (!cached)
                throw StateError("post-text tap '" + posttext_taps[j].id +
                                 "' registered but never cached after iteration 1");
            auto pooled = ops::max_over_rows(tape, posttext_nets[j].forward(tape, *cached));
            term = term.defined() ? ops::add(tape, std::move(term), std::move(pooled)) : std::move(pooled);
        }
        return term;
    }

    Result apply(Tape<T>& tape, Tensor<T> z, Tensor<T> x, const std::vector<Tensor<T>>& pre_tap_values,
                 bool training, Rng& rng) const {
        switch (mode) {
            case InhibitionMode::none:
                return {std::move(z), Tensor<T>()};
            case InhibitionMode::random:
                return {random_inhibit(tape, std::move(z), training, rng), Tensor<T>()};
            case InhibitionMode::one_layer:
                return one_layer_inhibit(tape, std::move(z), std::move(x));
            case InhibitionMode::pretext:
                return pretext_inhibit(tape, std::move(z), std::move(x), pre_tap_values);
            case InhibitionMode::posttext:
                return posttext_inhibit(tape, std::move(z), std::move(x));
            case InhibitionMode::global_all:
                return global_inhibit(tape, std::move(z), std::move(x), pre_tap_values);
        }
        throw ContractError("unreachable inhibition mode");
    }

    // Stores detached copies of this iteration's late activations, keyed by
    // tap id, then bumps the iteration counter. Training-time only.
    void store_post_taps(const std::vector<Tensor<T>>& activations) {
        if (!mode_uses_posttext(mode)) return;
        if (activations.size() != posttext_taps.size())
            throw ContractError("post-text store: expected " + std::to_string(posttext_taps.size()) +
                                " activations, got " + std::to_string(activations.size()));
        for (std::size_t j = 0; j < activations.size(); ++j)
            cache.store(posttext_taps[j].id, activations[j]);
        cache.advance();
    }

    void collect(ParamList<T>& out) const {
        if (mode_has_gate(mode)) gate.collect(out);
        for (const auto& net : pretext_nets) net.collect(out);
        for (const auto& net : posttext_nets) net.collect(out);
    }

private:
    Tensor<T> gate_arg_with_pretext(Tape<T>& tape, Tensor<T> x, const std::vector<Tensor<T>>& taps) const {
        if (taps.size() != pretext_nets.size())
            throw DimensionError("pre-text: expected " + std::to_string(pretext_nets.size()) + " taps, got " +
                                 std::to_string(taps.size()));
        auto arg = gate.forward(tape, std::move(x));
        for (std::size_t i = 0; i < taps.size(); ++i)
            arg = ops::add(tape, std::move(arg), pretext_nets[i].forward(tape, taps[i]));
        return arg;
    }

    Tensor<T> add_posttext_terms(Tape<T>& tape, Tensor<T> arg) const {
        auto term = posttext_term(tape);
        if (term.defined()) arg = ops::add_rowvec(tape, std::move(arg), std::move(term));
        return arg;
    }

    Result finish(Tape<T>& tape, Tensor<T> z, Tensor<T> arg) const {
        auto gate_values = ops::sigmoid(tape, std::move(arg));
        auto out = ops::mul(tape, std::move(z), gate_values);
        return {std::move(out), std::move(gate_values)};
    }
};

}  // namespace moegate
