#pragma once

#include <functional>
#include <vector>

#include "mtt/tensor.hpp"

namespace mtt {

// Records forward operations so gradients can be replayed in reverse.
//
// Nodes are appended in execution order, which is a topological order by
// construction: an op can only consume tensors that already exist. backward()
// walks the list once in reverse and is then consumed; a consumed tape
// refuses a second backward.
//
// A tape and the tensors recorded on it belong to one thread for the whole
// forward/backward round trip. Parallelism lives above this layer, one tape
// per worker.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Register the backward rule for an op that just produced `output`.
    // The rule reads output.grad and accumulates into the operands' grads;
    // it must tolerate an absent output grad (output unreachable from the
    // loss).
    void record(std::function<void()> backward_rule);

    // Seed d(loss)/d(loss) = 1 and run every backward rule in reverse order.
    void backward(const Tensor& loss);

    bool consumed() const { return consumed_; }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
    bool consumed_ = false;
};

// Gradient accumulation helper shared by the op backward rules: adds `delta`
// into t.grad, allocating a zero buffer on first touch.
void accumulate_grad(const Tensor& t, std::span<const double> delta);

}  // namespace mtt
