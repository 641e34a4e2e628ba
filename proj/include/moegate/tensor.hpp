#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "moegate/common.hpp"

namespace moegate {

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0)
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

template <typename T>
struct TensorData {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until a backward pass needs it
    bool requires_grad = false;
};

// Shared handle to a dense row-major n-d array. Copies are cheap and alias
// the same storage; values are treated as immutable once a forward pass has
// consumed them.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : d_(std::make_shared<TensorData<T>>()) {
        d_->shape = std::move(shape);
        d_->values.assign(shape_size(d_->shape), T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> values) : d_(std::make_shared<TensorData<T>>()) {
        const std::size_t n = shape_size(shape);
        if (n != values.size())
            throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                                 shape_str(shape));
        d_->shape = std::move(shape);
        d_->values = std::move(values);
    }

    static Tensor full(std::vector<int> shape, T v) {
        Tensor t(std::move(shape));
        for (auto& x : t.values()) x = v;
        return t;
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<int>& shape() const { return d_->shape; }
    int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    std::size_t size() const { return d_->values.size(); }

    std::vector<T>& values() { return d_->values; }
    const std::vector<T>& values() const { return d_->values; }
    T* data() { return d_->values.data(); }
    const T* data() const { return d_->values.data(); }

    T item() const {
        if (size() != 1)
            throw ContractError("item() requires a one-element tensor, got " + shape_str(shape()));
        return d_->values[0];
    }

    T operator()(int i) const { return d_->values[static_cast<std::size_t>(i)]; }
    T operator()(int i, int j) const {
        return d_->values[static_cast<std::size_t>(i) * dim(1) + j];
    }
    T operator()(int b, int c, int y, int x) const {
        return d_->values[((static_cast<std::size_t>(b) * dim(1) + c) * dim(2) + y) * dim(3) + x];
    }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        d_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !d_->grad.empty(); }
    std::vector<T>& grad() {
        ensure_grad();
        return d_->grad;
    }
    const std::vector<T>& grad() const {
        if (d_->grad.empty())
            throw ContractError("gradient requested but never populated");
        return d_->grad;
    }
    void ensure_grad() {
        if (d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
    }
    void zero_grad() { d_->grad.assign(d_->values.size(), T(0)); }
    void clear_grad() { d_->grad.clear(); }

    // Value snapshot that does not participate in any gradient computation.
    Tensor detach() const {
        Tensor t;
        t.d_ = std::make_shared<TensorData<T>>();
        t.d_->shape = d_->shape;
        t.d_->values = d_->values;
        return t;
    }

    Tensor clone() const {
        Tensor t = detach();
        t.d_->requires_grad = d_->requires_grad;
        return t;
    }

    bool same_data(const Tensor& o) const { return d_ == o.d_; }
    const void* id() const { return d_.get(); }

private:
    std::shared_ptr<TensorData<T>> d_;
};

}  // namespace moegate
