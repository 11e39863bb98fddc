#pragma once

#include <map>
#include <string>
#include <vector>

#include "mxfr/tensor.hpp"

namespace mxfr {

// Named parameter tensors plus parallel gradient accumulators (the model's
// full set of trained weights). std::map keeps iteration order deterministic.
struct ParamStore {
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> grads;

  void add(const std::string& name, Tensor t);
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  void zero_grads();
};

using NodeId = int;

// Reverse-mode gradient tape. Each primitive records its operands; backward()
// walks the tape in reverse and accumulates d(loss)/d(node). All reductions
// run in a fixed left-to-right order, so results are bit-reproducible.
class Tape {
 public:
  // Leaf referencing a parameter by name; gradients flow back into the store
  // via accumulate_grads(). Repeated binds of the same name on one tape
  // return the same node.
  NodeId param(ParamStore& store, const std::string& name);
  NodeId constant(Tensor t);

  NodeId row(NodeId matrix, int r);            // row of a rank-2 node
  NodeId matvec(NodeId W, NodeId x);           // (m,n)x(n) -> (m)
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);              // elementwise
  NodeId tanh_(NodeId a);
  NodeId sigmoid_(NodeId a);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId dot(NodeId a, NodeId b);              // (n)x(n) -> scalar
  NodeId stack(const std::vector<NodeId>& scalars);
  NodeId masked_softmax(NodeId v, const std::vector<bool>& mask);
  // log-softmax restricted to `support`; positions outside it get -inf.
  NodeId log_softmax_support(NodeId logits, const std::vector<bool>& support);
  NodeId pick(NodeId v, int index);            // v[index] -> scalar

  // sum_i alpha[i] * rows[i]
  NodeId weighted_sum(NodeId alpha, const std::vector<NodeId>& rows);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

  // Seeds d(loss)/d(loss) = seed and runs the reverse sweep. Throws
  // NumericalError if `loss` is not scalar.
  void backward(NodeId loss, double seed = 1.0);

  // Adds leaf gradients (scaled) into store.grads. Call after backward().
  void accumulate_grads(ParamStore& store, double scale = 1.0) const;

  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf,
    Const,
    Row,
    MatVec,
    Add,
    Sub,
    Mul,
    Tanh,
    Sigmoid,
    Concat,
    Dot,
    Stack,
    MaskedSoftmax,
    LogSoftmaxSupport,
    Pick,
    WeightedSum,
  };

  struct Node {
    Op op;
    Tensor value;
    Tensor grad;
    std::vector<NodeId> parents;
    std::vector<int> aux;  // row/pick index, or 0/1 mask flags
  };

  NodeId push(Node n);
  void step_backward(int id);

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> param_leaves_;
  std::map<std::string, NodeId> param_lookup_;
};

}  // namespace mxfr
