#pragma once

#include <cstddef>
#include <vector>

#include "g2dm/tensor.hpp"

namespace g2dm {

// Reverse-mode tape over dense tensors. Forward evaluation is eager: every
// recorded op computes its value immediately and validates finiteness.
// A tape is built per batch and discarded; nodes form a topological order by
// construction.
class Tape {
  public:
    using VarId = std::size_t;

    // Leaf tensor. Gradients are accumulated only when requires_grad is set;
    // frozen parameters enter with requires_grad=false and never receive one.
    VarId leaf(const Tensor& t, bool requires_grad);

    // (n,a) x (a,b) -> (n,b)
    VarId matmul(VarId a, VarId b);
    // (n,b) + row-broadcast (b)
    VarId add_row(VarId x, VarId bias);
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId scale(VarId x, double c);
    VarId add_const(VarId x, double c);
    VarId relu(VarId x);
    VarId square(VarId x);
    VarId log_(VarId x);  // arguments clamped at 1e-12
    VarId mean_all(VarId x);
    VarId max_all(VarId x);

    // Mean over rows of -sum_c q_ic * log softmax(logits)_ic, with q a fixed
    // per-row target distribution (n,C). Softmax uses max-subtraction.
    VarId softmax_cross_entropy(VarId logits, const Tensor& targets);
    // Mean sigmoid binary cross-entropy from logits (n,1) against fixed 0/1
    // labels (n), computed in the standard stable form.
    VarId bce_logits(VarId logits, const Tensor& labels);

    const Tensor& value(VarId id) const { return nodes_[id].value; }
    const Tensor& grad(VarId id) const { return nodes_[id].grad; }

    // Seeds d(out)=1 and propagates in reverse topological order. out must be
    // scalar. Gradients accumulate; call once per tape.
    void backward(VarId out);

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op {
        kLeaf,
        kMatMul,
        kAddRow,
        kAdd,
        kSub,
        kScale,
        kAddConst,
        kRelu,
        kSquare,
        kLog,
        kMeanAll,
        kMaxAll,
        kSoftmaxXent,
        kBceLogits,
    };

    struct Node {
        Op op;
        VarId in0 = 0;
        VarId in1 = 0;
        double c = 0.0;   // constant for kScale/kAddConst
        Tensor value;
        Tensor grad;
        Tensor aux;       // targets / labels / cached probabilities
        bool requires_grad = false;
    };

    VarId push(Node n);
    void check_finite(const Tensor& t, VarId id) const;

    std::vector<Node> nodes_;
};

}  // namespace g2dm
