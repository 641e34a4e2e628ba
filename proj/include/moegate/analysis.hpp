#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "moegate/data.hpp"
#include "moegate/model.hpp"

namespace moegate {

// Pearson correlation; a zero-variance series yields 0 with a warning rather
// than dividing by zero (a dead neuron carries no type information).
inline double pearson(const std::vector<double>& f, const std::vector<double>& t) {
    if (f.size() != t.size() || f.size() < 2)
        throw ContractError("pearson: needs two equally sized series of length >= 2");
    const double n = static_cast<double>(f.size());
    double fm = 0.0, tm = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        fm += f[i];
        tm += t[i];
    }
    fm /= n;
    tm /= n;
    double cov = 0.0, fv = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double df = f[i] - fm, dt = t[i] - tm;
        cov += df * dt;
        fv += df * df;
        tv += dt * dt;
    }
    if (fv == 0.0 || tv == 0.0) {
        std::fprintf(stderr, "warning: pearson over a zero-variance series, reporting 0\n");
        return 0.0;
    }
    return cov / std::sqrt(fv * tv);
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& x) {
        std::vector<int> order(x.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int i, int j) { return x[i] < x[j]; });
        std::vector<double> r(x.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    return pearson(ranks(a), ranks(b));
}

struct NeuronStats {
    int neuron = 0;                 // 0..127
    double mean_activation = 0.0;   // mean sigmoid gate value over the split
    double abs_pearson = 0.0;       // |corr(raw feature, type meta-label)|
    bool discriminative = false;    // abs_pearson above the population mean
};

// Per-neuron correlation with the type meta-label plus mean gate activation
// over a split. Raw (pre-gate) features feed the correlation; the gate's
// sigmoid values feed the activation axis.
template <typename T>
std::vector<NeuronStats> neuron_report(const Classifier<T>& model, const Dataset& data,
                                       const std::vector<int>& indices, int eval_batch) {
    if (!mode_has_gate(model.cfg.mode))
        throw ContractError(std::string("analysis requires a gate-bearing inhibition mode; '") +
                            to_string(model.cfg.mode) + "' has none");
    const int width = ConvBackbone<T>::kFeatureDim;
    const int S = static_cast<int>(indices.size());
    std::vector<double> features(static_cast<std::size_t>(S) * width);
    std::vector<double> activation_sum(static_cast<std::size_t>(width), 0.0);
    std::vector<double> type_label(static_cast<std::size_t>(S));

    Rng rng(0);
    for (int begin = 0; begin < S; begin += eval_batch) {
        const int end = std::min(begin + eval_batch, S);
        auto batch = make_batch<T>(data, indices, begin, end);
        Tape<T> tape(false);
        auto fwd = model.forward(tape, batch.images, nullptr, false, rng);
        for (int b = 0; b < end - begin; ++b) {
            const int row = begin + b;
            type_label[static_cast<std::size_t>(row)] =
                static_cast<double>(data.types[static_cast<std::size_t>(indices[static_cast<std::size_t>(row)])]);
            for (int j = 0; j < width; ++j) {
                features[static_cast<std::size_t>(row) * width + j] =
                    static_cast<double>(fwd.features_raw.data()[static_cast<std::size_t>(b) * width + j]);
                activation_sum[static_cast<std::size_t>(j)] +=
                    static_cast<double>(fwd.gate_values.data()[static_cast<std::size_t>(b) * width + j]);
            }
        }
    }

    std::vector<NeuronStats> stats(static_cast<std::size_t>(width));
    std::vector<double> series(static_cast<std::size_t>(S));
    double mean_abs = 0.0;
    for (int j = 0; j < width; ++j) {
        for (int s = 0; s < S; ++s) series[static_cast<std::size_t>(s)] = features[static_cast<std::size_t>(s) * width + j];
        auto& st = stats[static_cast<std::size_t>(j)];
        st.neuron = j;
        st.abs_pearson = std::fabs(pearson(series, type_label));
        st.mean_activation = activation_sum[static_cast<std::size_t>(j)] / static_cast<double>(S);
        mean_abs += st.abs_pearson;
    }
    mean_abs /= static_cast<double>(width);
    for (auto& st : stats) st.discriminative = st.abs_pearson > mean_abs;
    return stats;
}

inline std::vector<double> default_thresholds(int count = 100) {
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = (i + 0.5) / static_cast<double>(count);
    return t;
}

struct SuppressionCount {
    double threshold = 0.0;
    int n_common = 0;
    int n_discriminative = 0;
};

// For each threshold, how many neurons of each class sit below it (and are
// therefore considered suppressed).
inline std::vector<SuppressionCount> threshold_sweep(const std::vector<NeuronStats>& stats,
                                                     const std::vector<double>& thresholds) {
    std::vector<SuppressionCount> out;
    out.reserve(thresholds.size());
    for (double th : thresholds) {
        SuppressionCount c;
        c.threshold = th;
        for (const auto& st : stats) {
            if (st.mean_activation < th) {
                if (st.discriminative)
                    ++c.n_discriminative;
                else
                    ++c.n_common;
            }
        }
        out.push_back(c);
    }
    return out;
}

inline void write_figure2_csv(const std::string& path, const std::vector<NeuronStats>& stats) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    os << "neuron,abs_pearson,mean_activation\n";
    char buf[64];
    for (const auto& st : stats) {
        os << st.neuron << ',';
        std::snprintf(buf, sizeof buf, "%.9g", st.abs_pearson);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.9g", st.mean_activation);
        os << buf << '\n';
    }
    if (!os) throw FormatError("write failed for " + path);
}

inline void write_figure3_csv(const std::string& path, const std::vector<SuppressionCount>& counts) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    os << "threshold,n_common,n_discriminative\n";
    char buf[64];
    for (const auto& c : counts) {
        std::snprintf(buf, sizeof buf, "%.9g", c.threshold);
        os << buf << ',' << c.n_common << ',' << c.n_discriminative << '\n';
    }
    if (!os) throw FormatError("write failed for " + path);
}

}  // namespace moegate
