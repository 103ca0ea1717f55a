#pragma once

#include <functional>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge::ad {

// Minimal reverse-mode tape over Tensor. One Graph per forward pass;
// backward() propagates a scalar seed through the recorded ops.
// The op set is exactly what the attack objective needs: affine maps,
// matmul/softmax for the attention path, l2-normalize and dot for the
// cosine losses, and variance for the attention-disruption loss.

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Graph {
public:
    Var input(Tensor value);
    Var constant(Tensor value) { return input(std::move(value)); }

    const Tensor& value(Var x) const { return nodes_[x.id].val; }
    const Tensor& grad(Var x) const { return nodes_[x.id].grad; }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    // a + s * b
    Var add_scaled(Var a, Var b, double s);
    Var add_const(Var a, const Tensor& c);
    // elementwise multiply by a constant tensor of the same size
    Var cmul(Var a, const Tensor& c);
    // y = M x with constant matrix M of shape [m, n], x flattened to n
    Var matvec(const Tensor& m, Var x, std::vector<std::size_t> out_shape = {});
    // C = A B, shapes [r, k] x [k, c]
    Var matmul(Var a, Var b);
    // C = A B^T, shapes [r, k] x [s, k] -> [r, s]
    Var matmul_nt(Var a, Var b);
    // right-multiply by constant: Y = X W, [r, k] x [k, c]
    Var rmul_const(Var x, const Tensor& w, std::size_t c);
    Var reshape(Var a, std::vector<std::size_t> shape);
    // row-wise softmax over a [rows, cols] tensor
    Var softmax_rows(Var a);
    // elementwise mean of same-shaped tensors
    Var mean_of(const std::vector<Var>& xs);
    // scalar mean over all entries
    Var mean_all(Var a);
    // scalar population variance over all entries
    Var variance_all(Var a);
    // x / ||x||_2
    Var normalize_l2(Var a);
    // scalar dot product
    Var dot(Var a, Var b);
    // cosine of the angle between flattened tensors
    Var cosine(Var a, Var b);
    // clamp to [0, 1]; pass-through gradient inside the interval
    Var clamp01(Var a);

    void backward(Var scalar_out);

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Graph&, int)> back;  // accumulate into parents
    };

    int push(Tensor value, std::function<void(Graph&, int)> back);
    Tensor& g(int id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace patchforge::ad
