#include "mtt/tensor.hpp"

#include <algorithm>

#include "mtt/errors.hpp"

namespace mtt {

std::string shape_to_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

int64_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw ShapeError("tensor rank must be 1..3, got " + shape_to_string(shape));
    }
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const int64_t n = checked_numel(shape);
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values.assign(static_cast<size_t>(n), 0.0);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
    const int64_t n = checked_numel(shape);
    if (n != static_cast<int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_values({1}, {v}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str());
    return impl_->values[0];
}

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->values.size(), 0.0);
}

void Tensor::clear_grad() {
    impl_->grad.clear();
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>(*impl_);
    return Tensor(std::move(impl));
}

std::string Tensor::shape_str() const {
    return shape_to_string(impl_->shape);
}

}  // namespace mtt
