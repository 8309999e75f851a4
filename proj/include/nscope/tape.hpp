#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nscope/tensor.hpp"

namespace nscope {

// Eager reverse-mode tape over float32 tensors.
//
// Every operation executes immediately and appends a node to the tape; node
// creation order is therefore a topological order, and the backward pass is a
// single reverse sweep with gradients accumulated in fixed (node, input)
// order. Two recordings of the same computation on the same inputs produce
// bit-identical values.
//
// Sites: any node can be registered under a string id. grad_wrt returns the
// exact gradient of a scalar loss node for each requested site; a site with
// no path to the loss gets an all-zero gradient (that is a defined result,
// not an error).

using NodeId = int;

enum class Op {
    Leaf,
    Matmul,        // [m x k] * [k x n]
    Add,           // same shape, or rhs rank-1 row vector broadcast over rows
    Mul,           // elementwise; rhs may be a rank-1 row vector broadcast
    Scale,         // x * constant
    Silu,          // x * sigmoid(x)
    SoftmaxRows,   // softmax along the last axis of a rank-2 tensor
    LogSoftmaxRows,
    LayerNorm,     // inputs: x, gain, bias; normalizes each row
    Embedding,     // inputs: table [v x d]; attr ids (row lookups)
    Transpose2d,
    Reshape,
    SliceCols,     // columns [c0, c1) of a rank-2 tensor
    ConcatCols,    // horizontal concat of rank-2 tensors with equal row count
    SumAll,        // scalar sum of all elements
    PickNll,       // inputs: logprobs [t x v]; attrs ids, weights -> scalar
};                 //   -sum_i w_i * logprobs[i, ids[i]]

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> inputs;
    Tensor value;
    // op attributes (unused fields stay empty/zero)
    float scale = 1.0f;
    float eps = 0.0f;
    int c0 = 0, c1 = 0;
    std::vector<int> ids;
    std::vector<float> weights;
    std::vector<int> reshape_from;
};

class Tape {
public:
    NodeId leaf(Tensor v);
    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, float c);
    NodeId silu(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId log_softmax_rows(NodeId a);
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, float eps);
    NodeId embedding(NodeId table, const std::vector<int>& ids);
    NodeId transpose2d(NodeId a);
    NodeId reshape(NodeId a, std::vector<int> new_shape);
    NodeId slice_cols(NodeId a, int c0, int c1);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId sum_all(NodeId a);
    NodeId pick_nll(NodeId logprobs, const std::vector<int>& ids, const std::vector<float>& weights);

    const Tensor& value(NodeId n) const { return nodes_[check(n)].value; }
    const Node& node(NodeId n) const { return nodes_[check(n)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    void mark_site(const std::string& id, NodeId n);
    bool has_site(const std::string& id) const { return sites_.count(id) != 0; }
    NodeId site(const std::string& id) const;  // throws on unknown id
    const std::map<std::string, NodeId>& sites() const { return sites_; }

    // Gradients of the scalar loss w.r.t. every node, returned as a dense
    // per-node vector (empty tensor = untouched = zero). One reverse sweep.
    std::vector<Tensor> backward(NodeId loss) const;

    // Spec surface: gradient per requested site; unknown ids throw,
    // unreached sites come back as zero tensors of the site's shape.
    std::map<std::string, Tensor> grad_wrt(NodeId loss, const std::vector<std::string>& site_ids) const;

private:
    NodeId push(Node n);
    int check(NodeId n) const;

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> sites_;
};

// record_forward: run a computation description against fresh leaves and keep
// the tape. `capture` names must all be marked by the builder.
struct ForwardRecord {
    std::vector<Tensor> outputs;
    Tape tape;
    std::vector<NodeId> output_nodes;
};

using ComputationFn = std::function<std::vector<NodeId>(Tape&, const std::vector<NodeId>&)>;

ForwardRecord record_forward(const ComputationFn& program, const std::vector<Tensor>& inputs,
                             const std::vector<std::string>& capture);

}  // namespace nscope
