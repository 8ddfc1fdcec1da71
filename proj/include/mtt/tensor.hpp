#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtt {

// Dense rank-1..3 tensor of doubles, row-major, with an optional gradient
// buffer. Tensor is a shared handle: copies alias the same storage, which is
// what lets tape nodes refer back to their operands. Use clone() for a deep
// copy.
struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty means "no gradient yet"
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool valid() const { return impl_ != nullptr; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    const std::vector<int>& shape() const { return impl_->shape; }
    int64_t size() const { return static_cast<int64_t>(impl_->values.size()); }

    // Rank-2 accessors.
    int rows() const { return impl_->shape[0]; }
    int cols() const { return impl_->shape[1]; }

    double operator()(int i) const { return impl_->values[i]; }
    double operator()(int i, int j) const {
        return impl_->values[static_cast<int64_t>(i) * cols() + j];
    }
    double item() const;  // value of a single-element tensor

    std::span<const double> values() const { return impl_->values; }
    std::span<double> values_mut() { return impl_->values; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool b) { impl_->requires_grad = b; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    void zero_grad();   // allocate (if needed) and clear the gradient buffer
    void clear_grad();  // drop the gradient buffer entirely

    Tensor clone() const;
    std::string shape_str() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
};

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace mtt
