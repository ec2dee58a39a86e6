#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "glassbox/tensor.hpp"

namespace glassbox {

// Arg-max positions recorded by maxpool, reused by unpool.
// Indices are positions along the length axis of each channel row.
struct Switches {
    std::size_t channels = 0;
    std::size_t pooled_len = 0;
    std::size_t input_len = 0;
    std::size_t window = 0;
    std::vector<std::size_t> argmax;  // channels * pooled_len entries
};

using Var = std::size_t;

// Eager reverse-mode tape over Tensors. Single-owner, not shareable.
// Typical use: leaf() the inputs and parameters, compose ops, backward()
// from a scalar loss, read grad() of the leaves.
class GradTape {
public:
    Var leaf(Tensor value);

    const Tensor& value(Var v) const { return nodes_[v].value; }
    const Tensor& grad(Var v) const { return nodes_[v].grad; }

    // x: [C_in, L], w: [C_out, C_in, width], b: [C_out]. Cross-correlation,
    // no kernel flip. Output [C_out, floor((L + 2p - width)/stride) + 1].
    Var conv1d(Var x, Var w, Var b, std::size_t stride, std::size_t padding);

    // Adjoint of conv1d with the same (w, stride, padding); b broadcasts
    // over output channels. Maps [C_out, L_out] back to [C_in, L].
    Var transposed_conv1d(Var y, Var w, Var b, std::size_t stride,
                          std::size_t padding, std::size_t out_len);

    // Non-overlapping windows; short tails padded with a -inf sentinel that
    // is never selected. Ties break to the lowest index.
    std::pair<Var, Switches> maxpool(Var x, std::size_t window);
    Var unpool(Var pooled, const Switches& sw);

    // x flattened; w: [out, in], b: [out].
    Var dense(Var x, Var w, Var b);

    Var elu(Var x);
    Var sigmoid(Var x);
    Var softmax(Var x);  // max-subtracted, over the whole tensor

    Var add(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var reshape(Var a, std::vector<std::size_t> shape);
    Var sum(Var a);
    Var sum_squares(Var a);
    Var mean_squared_error(Var pred, const Tensor& target);
    // -ln(clamp(probs[label], 1e-12))
    Var negative_log_likelihood(Var probs, std::size_t label);

    void backward(Var output);                      // scalar output
    void backward(Var output, const Tensor& seed);  // arbitrary seed
    void zero_grads();                              // between repeated backward calls

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(GradTape&)> backprop;  // empty for leaves
    };

    Var push(Tensor value, std::function<void(GradTape&)> backprop);
    Tensor& grad_mut(Var v) { return nodes_[v].grad; }

    std::vector<Node> nodes_;
};

}  // namespace glassbox
