#pragma once

#include <functional>
#include <string>
#include <vector>

#include "moegate/common.hpp"
#include "moegate/tensor.hpp"

namespace moegate {

// Records primitive applications in forward order and replays their backward
// rules once, in reverse. One tape serves one forward/backward cycle; reset()
// starts the next. A non-recording tape runs pure inference.
template <typename T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool v) { recording_ = v; }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    void record(const char* op, Tensor<T> out, std::vector<Tensor<T>> inputs, std::function<void()> backward) {
        if (!recording_) return;
        if (consumed_)
            throw StateError("tape already consumed by backward; reset() before recording new work");
        nodes_.push_back({op, std::move(out), std::move(inputs), std::move(backward)});
    }

    // Populates d(loss)/d(leaf) for every requires_grad leaf reachable from
    // `loss`. Gradients accumulate into existing buffers; callers zero them.
    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.size() != 1)
            throw ContractError("backward requires a scalar loss" +
                                (loss.defined() ? ", got shape " + shape_str(loss.shape()) : std::string()));
        if (consumed_)
            throw StateError("second backward on the same tape; re-run the forward pass first");
        std::ptrdiff_t start = -1;
        for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(nodes_.size()) - 1; i >= 0; --i) {
            if (nodes_[static_cast<std::size_t>(i)].out.same_data(loss)) {
                start = i;
                break;
            }
        }
        if (start < 0)
            throw ContractError("loss tensor is not on the active tape");
        consumed_ = true;
        {
            Tensor<T> seed = loss;
            seed.ensure_grad();
            seed.grad()[0] += T(1);
        }
        for (std::ptrdiff_t i = start; i >= 0; --i) {
            Node& node = nodes_[static_cast<std::size_t>(i)];
            if (!node.out.has_grad()) continue;  // no downstream contribution
            node.backward();
            for (auto& in : node.inputs) {
                if (in.requires_grad() && in.has_grad())
                    check_finite(in.grad(), node.op, "gradient");
            }
        }
    }

    void reset() {
        nodes_.clear();
        consumed_ = false;
    }

private:
    struct Node {
        const char* op;
        Tensor<T> out;
        std::vector<Tensor<T>> inputs;
        std::function<void()> backward;
    };

    std::vector<Node> nodes_;
    bool recording_ = true;
    bool consumed_ = false;
};

}  // namespace moegate
