#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "stpn/tensor.hpp"

namespace stpn {

using NodeId = std::size_t;

enum class Op : std::uint8_t {
    Input,
    Param,
    Add,
    AddN,
    MeanN,
    Scale,
    Matmul,
    Transpose,
    AddRowVec,
    LayerNorm,
    Softmax,
    Gelu,
    MeanAxis,
    ConcatRows,
    SliceRows,
    ConcatCols,
    SliceCols,
    Reshape,
    Conv2d,
    CrossEntropy,
};

struct GraphNode {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;  // cached forward value
    double attr_f = 0.0;
    std::int64_t attr_i0 = 0;
    std::int64_t attr_i1 = 0;
    std::vector<std::size_t> attr_shape;  // Reshape target
};

/// Append-only tape of primitive ops with cached forward values. Inputs of a
/// node always precede it, so the node order is a topological order. Values
/// are computed eagerly on construction; `replay_matches` re-runs every
/// forward rule and checks the cache bit-exactly.
class Graph {
public:
    NodeId input(Tensor v);
    NodeId param(Tensor v);

    NodeId add(NodeId a, NodeId b);
    NodeId add_n(std::vector<NodeId> xs);
    /// Elementwise mean of the inputs; order-independent accumulation.
    NodeId mean_n(std::vector<NodeId> xs);
    NodeId scale(NodeId x, double factor);
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId x);
    /// rows of x (m x n) plus the vector v (n).
    NodeId add_rowvec(NodeId x, NodeId v);
    /// Rows of length d normalized to zero mean / unit population variance
    /// (+eps inside the square root), scaled by gamma, shifted by beta.
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps);
    NodeId softmax(NodeId x);  // last axis, max-subtracted
    NodeId gelu(NodeId x);     // exact erf form
    NodeId mean_axis(NodeId x, std::size_t axis);
    NodeId concat_rows(std::vector<NodeId> xs);
    NodeId slice_rows(NodeId x, std::size_t r0, std::size_t r1);
    NodeId concat_cols(std::vector<NodeId> xs);
    NodeId slice_cols(NodeId x, std::size_t c0, std::size_t c1);
    NodeId reshape(NodeId x, std::vector<std::size_t> shape);
    /// input (Ci x H x W), kernel (Co x Ci x kh x kw), bias (Co); zero padding.
    NodeId conv2d(NodeId in, NodeId kernel, NodeId bias, std::size_t stride, std::size_t pad);
    /// Scalar -log softmax(logits)[label]; logits is rank 1.
    NodeId cross_entropy(NodeId logits, std::size_t label);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& params() const { return params_; }
    const GraphNode& node(NodeId id) const { return nodes_[id]; }

    /// Reverse-mode gradients of the scalar `loss` for every parameter node.
    /// Disconnected parameters get zero tensors. All accumulation loops run
    /// in fixed ascending index order, so results are reproducible bit for bit.
    std::unordered_map<NodeId, Tensor> backward(NodeId loss) const;

    /// Re-executes every forward rule against the cached input values and
    /// compares with the cache. True iff everything matches bit-exactly.
    bool replay_matches() const;

private:
    NodeId push(GraphNode n);
    Tensor eval(const GraphNode& n) const;

    std::vector<GraphNode> nodes_;
    std::vector<NodeId> params_;
};

/// c (m x n) += a (m x k) . b (k x n); the k-summation ascends, matching the
/// naive triple loop bit for bit.
void matmul_accumulate(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);

}  // namespace stpn
