#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "wcgnn/nn/tensor.hpp"

namespace wcgnn::nn {

// Handle to a node recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

inline IndexList make_index(std::vector<std::size_t> idx) {
    return std::make_shared<const std::vector<std::size_t>>(std::move(idx));
}

/// Reverse-mode gradient tape over matrix-valued primitives.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction and every node is assigned exactly once. Values
/// are computed eagerly; backward() walks the tape in reverse and
/// accumulates gradients into every node that depends on a parameter.
/// A tape is a single-threaded builder; use one tape per worker.
class Tape {
public:
    Tape() = default;

    Var constant(Tensor value);
    Var parameter(Tensor value);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    // Gradient of the last backward() target; empty if the node was not reached.
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var add_row(Var a, Var row);  // a (n x c) + row (1 x c) broadcast over rows
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var log(Var a);
    Var square(Var a);
    Var concat_cols(std::span<const Var> parts);
    Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }
    Var gather_rows(Var a, IndexList rows);
    // out[s, c] = max over rows r with seg[r] == s of a[r, c]; zero when the
    // segment is empty. Gradient goes to the lowest-index maximizing row.
    Var segment_max(Var a, IndexList seg, std::size_t num_segments);
    Var segment_sum(Var a, IndexList seg, std::size_t num_segments);
    Var row_sum(Var a);
    Var sum(Var a);
    // Row-wise x / max(||x||_2, 1).
    Var ball_project(Var a);

    // Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1 x 1.
    void backward(Var loss);

private:
    enum class Op : std::uint8_t {
        leaf,
        matmul,
        add,
        sub,
        mul,
        div,
        add_row,
        scale,
        add_scalar,
        relu,
        sigmoid,
        log,
        square,
        concat_cols,
        gather_rows,
        segment_max,
        segment_sum,
        row_sum,
        sum,
        ball_project,
    };

    struct Node {
        Op op = Op::leaf;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor grad;
        IndexList index;
        std::vector<std::size_t> argmax;  // segment_max routing, SIZE_MAX for empty segments
        double scalar = 0.0;
    };

    Var push(Node n);
    bool any_requires_grad(std::initializer_list<Var> vs) const;
    Tensor& grad_buffer(std::size_t id);
    void backprop_node(std::size_t id);

    std::vector<Node> nodes_;
};

}  // namespace wcgnn::nn
