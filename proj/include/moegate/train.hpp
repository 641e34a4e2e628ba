#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "moegate/data.hpp"
#include "moegate/model.hpp"

namespace moegate {

struct TrainConfig {
    double lr = 5e-5;
    int batch_size = 128;
    int epochs = 35;
    int eval_batch = 5120;
    int seeds = 5;
    std::uint64_t base_seed = 1;
    int subset = 0;  // 0 = full dataset; else first N samples of the shuffled order

    void validate() const {
        if (lr <= 0 || batch_size <= 0 || epochs <= 0 || eval_batch <= 0 || seeds <= 0)
            throw ConfigError("hyperparameters must be positive");
        if (subset < 0) throw ConfigError("subset must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamState {
    struct Slot {
        std::vector<T> m, v;
    };
    std::vector<Slot> slots;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(const ParamList<T>& params) {
        for (const auto& p : params)
            slots.push_back({std::vector<T>(p.tensor.size(), T(0)), std::vector<T>(p.tensor.size(), T(0))});
    }
};

// Standard bias-corrected update, applied in place.
template <typename T>
void adam_step(const ParamList<T>& params, AdamState<T>& state, double lr) {
    if (params.size() != state.slots.size())
        throw ContractError("adam: parameter list does not match optimizer state");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<T>& t = params[i].tensor;
        if (!t.has_grad())
            throw ContractError("adam: parameter '" + params[i].name + "' has no gradient; run backward first");
        auto& m = state.slots[i].m;
        auto& v = state.slots[i].v;
        const auto& g = t.grad();
        auto& w = const_cast<Tensor<T>&>(t).values();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = static_cast<double>(g[k]);
            const double mk = state.beta1 * static_cast<double>(m[k]) + (1.0 - state.beta1) * gk;
            const double vk = state.beta2 * static_cast<double>(v[k]) + (1.0 - state.beta2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * (mk / c1) / (std::sqrt(vk / c2) + state.eps));
        }
    }
}

// ---------------------------------------------------------------------------
// evaluation

struct EvalResult {
    double accuracy = 0.0;
    double mean_nll = 0.0;
};

template <typename T>
EvalResult evaluate(const Classifier<T>& model, const Dataset& data, const std::vector<int>& indices,
                    int eval_batch) {
    if (indices.empty())
        throw ContractError("evaluate: empty split");
    Rng rng(0);
    long correct = 0;
    double nll_sum = 0.0;
    for (int begin = 0; begin < static_cast<int>(indices.size()); begin += eval_batch) {
        const int end = std::min<int>(begin + eval_batch, static_cast<int>(indices.size()));
        auto batch = make_batch<T>(data, indices, begin, end);
        Tape<T> tape(false);
        auto fwd = model.forward(tape, batch.images, &batch.labels, false, rng);
        const int B = end - begin;
        for (int b = 0; b < B; ++b) {
            const T* row = fwd.logits.data() + static_cast<std::size_t>(b) * kNumClasses;
            int best = 0;
            for (int c = 1; c < kNumClasses; ++c)
                if (row[c] > row[best]) best = c;
            if (best == batch.labels[static_cast<std::size_t>(b)]) ++correct;
            nll_sum += static_cast<double>(fwd.nll.data()[b]);
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    r.mean_nll = nll_sum / static_cast<double>(indices.size());
    return r;
}

// Expert selection counts over a whole split; bins sum to samples * K.
template <typename T>
std::vector<long> expert_utilization(const Classifier<T>& model, const Dataset& data,
                                     const std::vector<int>& indices, int eval_batch) {
    if (!model.cfg.moe)
        throw ContractError("expert_utilization: model has no MoE head");
    Rng rng(0);
    std::vector<long> counts(static_cast<std::size_t>(model.cfg.experts), 0);
    for (int begin = 0; begin < static_cast<int>(indices.size()); begin += eval_batch) {
        const int end = std::min<int>(begin + eval_batch, static_cast<int>(indices.size()));
        auto batch = make_batch<T>(data, indices, begin, end);
        Tape<T> tape(false);
        auto fwd = model.forward(tape, batch.images, nullptr, false, rng);
        for (int j : fwd.expert_indices) ++counts[static_cast<std::size_t>(j)];
    }
    return counts;
}

// ---------------------------------------------------------------------------
// MCKP checkpoints: {magic "MCKP", version u32, count u32}, then named blobs
// {name_len u32, name bytes, rank u32, dims u32[rank], f32 data}. The
// post-text cache rides along under the reserved "cache/" prefix so a loaded
// model evaluates bitwise-identically.

namespace mckp {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr const char* kCachePrefix = "cache/";
inline constexpr const char* kCacheIteration = "cache/_iteration";

inline void write_u32_le(std::ofstream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                           static_cast<char>(v >> 24)};
    os.write(bytes, 4);
}

}  // namespace mckp

template <typename T>
void save_checkpoint(const std::string& path, const Classifier<T>& model) {
    struct Blob {
        std::string name;
        std::vector<int> shape;
        const std::vector<T>* values;
        std::vector<T> owned;
    };
    std::vector<Blob> blobs;
    for (const auto& p : model.params())
        blobs.push_back({p.name, p.tensor.shape(), &p.tensor.values(), {}});
    if (mode_uses_posttext(model.cfg.mode)) {
        for (const auto& s : model.cfg.posttext_sites) {
            const Tensor<T>* cached = model.inhibition.cache.find(s);
            if (cached)
                blobs.push_back({std::string(mckp::kCachePrefix) + s, cached->shape(), &cached->values(), {}});
        }
        Blob it{mckp::kCacheIteration, {1}, nullptr, {static_cast<T>(model.inhibition.cache.iteration)}};
        it.values = &it.owned;
        blobs.push_back(std::move(it));
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path);
    os.write("MCKP", 4);
    mckp::write_u32_le(os, mckp::kVersion);
    mckp::write_u32_le(os, static_cast<std::uint32_t>(blobs.size()));
    for (const auto& b : blobs) {
        mckp::write_u32_le(os, static_cast<std::uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        mckp::write_u32_le(os, static_cast<std::uint32_t>(b.shape.size()));
        for (int d : b.shape) mckp::write_u32_le(os, static_cast<std::uint32_t>(d));
        for (T v : *b.values) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            mckp::write_u32_le(os, bits);
        }
    }
    if (!os) throw FormatError("write failed for " + path);
}

template <typename T>
void load_checkpoint(const std::string& path, Classifier<T>& model) {
    const auto buf = idx::read_file(path);
    if (buf.size() < 12 || buf[0] != 'M' || buf[1] != 'C' || buf[2] != 'K' || buf[3] != 'P')
        throw FormatError(path + ": bad magic at offset 0 (expected \"MCKP\")");
    const std::uint32_t version = mixn::read_u32_le(buf, 4, path);
    if (version != mckp::kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t count = mixn::read_u32_le(buf, 8, path);

    std::unordered_map<std::string, Tensor<T>> by_name;
    for (const auto& p : model.params()) by_name.emplace(p.name, p.tensor);

    std::size_t at = 12;
    std::size_t matched = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = mixn::read_u32_le(buf, at, path);
        at += 4;
        if (at + name_len > buf.size()) throw FormatError(path + ": truncated at offset " + std::to_string(at));
        std::string name(reinterpret_cast<const char*>(buf.data() + at), name_len);
        at += name_len;
        const std::uint32_t rank = mixn::read_u32_le(buf, at, path);
        at += 4;
        std::vector<int> shape;
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const std::uint32_t d = mixn::read_u32_le(buf, at, path);
            at += 4;
            shape.push_back(static_cast<int>(d));
            n *= d;
        }
        std::vector<T> values(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::uint32_t bits = mixn::read_u32_le(buf, at, path);
            at += 4;
            float f;
            std::memcpy(&f, &bits, 4);
            values[k] = static_cast<T>(f);
        }
        if (name == mckp::kCacheIteration) {
            model.inhibition.cache.iteration = static_cast<long>(values.at(0));
        } else if (name.rfind(mckp::kCachePrefix, 0) == 0) {
            model.inhibition.cache.entries[name.substr(std::string(mckp::kCachePrefix).size())] =
                Tensor<T>(shape, std::move(values));
        } else {
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw FormatError(path + ": parameter '" + name + "' does not exist in this model");
            if (it->second.shape() != shape)
                throw FormatError(path + ": parameter '" + name + "' has shape " + shape_str(shape) +
                                  " but model expects " + shape_str(it->second.shape()));
            it->second.values() = std::move(values);
            ++matched;
        }
    }
    if (matched != by_name.size())
        throw FormatError(path + ": checkpoint holds " + std::to_string(matched) + " of " +
                          std::to_string(by_name.size()) + " model parameters");
}

// ---------------------------------------------------------------------------
// training loop

struct EpochRow {
    int epoch;
    std::string split;  // train | val | test
    double loss;
    double accuracy;
    std::uint64_t seed;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<EpochRow> rows;
    double test_accuracy = 0.0;
    double test_nll = 0.0;
};

struct RunReport {
    std::vector<SeedRun> runs;

    double mean_accuracy() const {
        double s = 0.0;
        for (const auto& r : runs) s += r.test_accuracy;
        return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
    }
    double std_accuracy() const {
        if (runs.size() < 2) return 0.0;
        const double mu = mean_accuracy();
        double s = 0.0;
        for (const auto& r : runs) s += (r.test_accuracy - mu) * (r.test_accuracy - mu);
        return std::sqrt(s / static_cast<double>(runs.size()));
    }
};

namespace train_detail {

inline std::uint64_t batch_hash(const std::vector<int>& order, int begin, int end) {
    return fnv1a(order.data() + begin, static_cast<std::size_t>(end - begin) * sizeof(int));
}

}  // namespace train_detail

// Trains one seeded model. The step order is fixed: forward, cache store,
// backward, Adam. Optionally hands the trained model back for analysis.
template <typename T>
SeedRun train_single(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& data,
                     const DatasetSplit& split, std::uint64_t seed, Classifier<T>* keep_model = nullptr) {
    cfg.validate();
    Classifier<T> model(model_cfg, seed);
    AdamState<T> adam(model.params());
    Rng shuffle_rng(seed, fnv1a(std::string("shuffle")));
    Rng train_rng(seed, fnv1a(std::string("train")));

    SeedRun run;
    run.seed = seed;
    std::vector<int> order = split.train;
    const auto params = model.params();
    long iteration = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        long correct = 0;
        for (int begin = 0; begin < static_cast<int>(order.size()); begin += cfg.batch_size) {
            const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(order.size()));
            auto batch = make_batch<T>(data, order, begin, end);
            Tape<T> tape;
            model.zero_grad();
            try {
                auto fwd = model.forward(tape, batch.images, &batch.labels, true, train_rng);
                auto loss = ops::mean(tape, fwd.nll);
                model.update_cache(fwd);
                tape.backward(loss);
                adam_step(params, adam, cfg.lr);

                const int B = end - begin;
                loss_sum += static_cast<double>(loss.item()) * B;
                for (int b = 0; b < B; ++b) {
                    const T* row = fwd.logits.data() + static_cast<std::size_t>(b) * kNumClasses;
                    int bestc = 0;
                    for (int c = 1; c < kNumClasses; ++c)
                        if (row[c] > row[bestc]) bestc = c;
                    if (bestc == batch.labels[static_cast<std::size_t>(b)]) ++correct;
                }
            } catch (const NumericError& e) {
                char hash[32];
                std::snprintf(hash, sizeof hash, "0x%016llx",
                              static_cast<unsigned long long>(train_detail::batch_hash(order, begin, end)));
                throw NumericError(std::string(e.what()) + " (iteration " + std::to_string(iteration) +
                                   ", batch hash " + hash + ")");
            }
            ++iteration;
        }
        run.rows.push_back({epoch, "train", loss_sum / static_cast<double>(order.size()),
                            static_cast<double>(correct) / static_cast<double>(order.size()), seed});
        const auto val = evaluate(model, data, split.val, cfg.eval_batch);
        run.rows.push_back({epoch, "val", val.mean_nll, val.accuracy, seed});
    }
    const auto test = evaluate(model, data, split.test, cfg.eval_batch);
    run.rows.push_back({cfg.epochs - 1, "test", test.mean_nll, test.accuracy, seed});
    run.test_accuracy = test.accuracy;
    run.test_nll = test.mean_nll;
    if (keep_model) *keep_model = std::move(model);
    return run;
}

// Runs seeds base_seed .. base_seed+seeds-1 and aggregates.
template <typename T>
RunReport train_multi(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& data,
                      const DatasetSplit& split) {
    RunReport report;
    for (int s = 0; s < cfg.seeds; ++s)
        report.runs.push_back(train_single<T>(model_cfg, cfg, data, split, cfg.base_seed + static_cast<std::uint64_t>(s)));
    return report;
}

inline void write_report_csv(const std::string& path, const RunReport& report) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    os << "epoch,split,loss,accuracy,seed\n";
    char buf[64];
    for (const auto& run : report.runs) {
        for (const auto& row : run.rows) {
            os << row.epoch << ',' << row.split << ',';
            std::snprintf(buf, sizeof buf, "%.9g", row.loss);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.9g", row.accuracy);
            os << buf << ',' << row.seed << '\n';
        }
    }
    if (!os) throw FormatError("write failed for " + path);
}

// Restricts a dataset to its first `subset` samples (the shuffled order makes
// this a random subsample) and re-splits 80/10/10.
inline DatasetSplit subset_split(int total, int subset, std::uint64_t seed) {
    if (subset <= 0 || subset >= total) return make_split(total, seed);
    return make_split(subset, seed);
}

}  // namespace moegate
