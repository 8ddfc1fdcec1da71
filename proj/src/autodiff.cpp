#include "mtt/autodiff.hpp"

#include "mtt/errors.hpp"

namespace mtt {

void Tape::record(std::function<void()> backward_rule) {
    if (consumed_) throw TapeError("recording on a consumed tape");
    nodes_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw TapeError("backward on a consumed tape");
    if (!loss.valid() || loss.size() != 1) {
        throw TapeError("backward requires a scalar loss, got " +
                        (loss.valid() ? loss.shape_str() : std::string("<null>")));
    }
    consumed_ = true;
    loss.impl()->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();  // release captured operands
}

void accumulate_grad(const Tensor& t, std::span<const double> delta) {
    auto& g = t.impl()->grad;
    if (g.empty()) g.assign(t.impl()->values.size(), 0.0);
    for (size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

}  // namespace mtt
