#include "mxfr/tape.hpp"

#include <cmath>
#include <limits>

#include "mxfr/errors.hpp"

namespace mxfr {

void ParamStore::add(const std::string& name, Tensor t) {
  if (params.count(name))
    throw NumericalError("duplicate parameter name: " + name);
  grads.emplace(name, Tensor(t.shape));
  params.emplace(name, std::move(t));
}

Tensor& ParamStore::param(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw NumericalError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw NumericalError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads) g.fill(0.0);
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw NumericalError(std::string("shape mismatch in ") + op + ": " +
                       a.shape_str() + " vs " + b.shape_str());
}

void require_vector(const char* op, const Tensor& t) {
  if (t.shape.size() != 1)
    throw NumericalError(std::string(op) + " expects a vector, got " +
                         t.shape_str());
}

}  // namespace

NodeId Tape::param(ParamStore& store, const std::string& name) {
  auto it = param_lookup_.find(name);
  if (it != param_lookup_.end()) return it->second;
  Node n;
  n.op = Op::Leaf;
  n.value = store.param(name);
  NodeId id = push(std::move(n));
  param_leaves_.emplace_back(name, id);
  param_lookup_.emplace(name, id);
  return id;
}

NodeId Tape::constant(Tensor t) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(t);
  return push(std::move(n));
}

NodeId Tape::row(NodeId matrix, int r) {
  const Tensor& m = nodes_[matrix].value;
  if (m.shape.size() != 2 || r < 0 || r >= m.rows())
    throw NumericalError("row index " + std::to_string(r) +
                         " out of range for " + m.shape_str());
  Node n;
  n.op = Op::Row;
  n.parents = {matrix};
  n.aux = {r};
  n.value = Tensor({m.cols()});
  for (int j = 0; j < m.cols(); ++j) n.value.at(j) = m.at(r, j);
  return push(std::move(n));
}

NodeId Tape::matvec(NodeId W, NodeId x) {
  const Tensor& w = nodes_[W].value;
  const Tensor& v = nodes_[x].value;
  if (w.shape.size() != 2 || v.shape.size() != 1 || w.cols() != v.shape[0])
    shape_error("matvec", w, v);
  Node n;
  n.op = Op::MatVec;
  n.parents = {W, x};
  n.value = Tensor({w.rows()});
  for (int i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < w.cols(); ++j) s += w.at(i, j) * v.at(j);
    n.value.at(i) = s;
  }
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (!ta.same_shape(tb)) shape_error("add", ta, tb);
  Node n;
  n.op = Op::Add;
  n.parents = {a, b};
  n.value = Tensor(ta.shape);
  for (int64_t i = 0; i < ta.size(); ++i)
    n.value.data[i] = ta.data[i] + tb.data[i];
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = Op::Sub;
  n.parents = {a, b};
  n.value = Tensor(ta.shape);
  for (int64_t i = 0; i < ta.size(); ++i)
    n.value.data[i] = ta.data[i] - tb.data[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
  Node n;
  n.op = Op::Mul;
  n.parents = {a, b};
  n.value = Tensor(ta.shape);
  for (int64_t i = 0; i < ta.size(); ++i)
    n.value.data[i] = ta.data[i] * tb.data[i];
  return push(std::move(n));
}

NodeId Tape::tanh_(NodeId a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::Tanh;
  n.parents = {a};
  n.value = Tensor(ta.shape);
  for (int64_t i = 0; i < ta.size(); ++i) n.value.data[i] = std::tanh(ta.data[i]);
  return push(std::move(n));
}

NodeId Tape::sigmoid_(NodeId a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::Sigmoid;
  n.parents = {a};
  n.value = Tensor(ta.shape);
  for (int64_t i = 0; i < ta.size(); ++i)
    n.value.data[i] = 1.0 / (1.0 + std::exp(-ta.data[i]));
  return push(std::move(n));
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw NumericalError("concat of zero parts");
  int total = 0;
  for (NodeId p : parts) {
    require_vector("concat", nodes_[p].value);
    total += nodes_[p].value.shape[0];
  }
  Node n;
  n.op = Op::Concat;
  n.parents = parts;
  n.value = Tensor({total});
  int off = 0;
  for (NodeId p : parts) {
    const Tensor& t = nodes_[p].value;
    for (int i = 0; i < t.shape[0]; ++i) n.value.at(off + i) = t.at(i);
    off += t.shape[0];
  }
  return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  require_vector("dot", ta);
  if (!ta.same_shape(tb)) shape_error("dot", ta, tb);
  Node n;
  n.op = Op::Dot;
  n.parents = {a, b};
  n.value = Tensor({1});
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += ta.data[i] * tb.data[i];
  n.value.at(0) = s;
  return push(std::move(n));
}

NodeId Tape::stack(const std::vector<NodeId>& scalars) {
  if (scalars.empty()) throw NumericalError("stack of zero scalars");
  Node n;
  n.op = Op::Stack;
  n.parents = scalars;
  n.value = Tensor({static_cast<int>(scalars.size())});
  for (size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& t = nodes_[scalars[i]].value;
    if (t.size() != 1) throw NumericalError("stack expects scalars");
    n.value.at(static_cast<int>(i)) = t.at(0);
  }
  return push(std::move(n));
}

NodeId Tape::masked_softmax(NodeId v, const std::vector<bool>& mask) {
  const Tensor& tv = nodes_[v].value;
  require_vector("masked_softmax", tv);
  if (static_cast<int>(mask.size()) != tv.shape[0])
    throw NumericalError("masked_softmax: mask length " +
                         std::to_string(mask.size()) + " vs vector " +
                         tv.shape_str());
  bool any = false;
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < tv.shape[0]; ++i)
    if (mask[i]) {
      any = true;
      if (tv.at(i) > mx) mx = tv.at(i);
    }
  if (!any) throw NumericalError("masked_softmax: all positions masked");
  Node n;
  n.op = Op::MaskedSoftmax;
  n.parents = {v};
  n.value = Tensor({tv.shape[0]});
  n.aux.resize(mask.size());
  double z = 0.0;
  for (int i = 0; i < tv.shape[0]; ++i) {
    n.aux[i] = mask[i] ? 1 : 0;
    if (mask[i]) {
      n.value.at(i) = std::exp(tv.at(i) - mx);
      z += n.value.at(i);
    }
  }
  for (int i = 0; i < tv.shape[0]; ++i)
    if (mask[i]) n.value.at(i) /= z;
  return push(std::move(n));
}

NodeId Tape::log_softmax_support(NodeId logits, const std::vector<bool>& support) {
  const Tensor& tv = nodes_[logits].value;
  require_vector("log_softmax_support", tv);
  if (static_cast<int>(support.size()) != tv.shape[0])
    throw NumericalError("log_softmax_support: support length mismatch");
  bool any = false;
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < tv.shape[0]; ++i)
    if (support[i]) {
      any = true;
      if (tv.at(i) > mx) mx = tv.at(i);
    }
  if (!any) throw NumericalError("log_softmax_support: empty support");
  double z = 0.0;
  for (int i = 0; i < tv.shape[0]; ++i)
    if (support[i]) z += std::exp(tv.at(i) - mx);
  double logz = mx + std::log(z);
  Node n;
  n.op = Op::LogSoftmaxSupport;
  n.parents = {logits};
  n.value = Tensor({tv.shape[0]});
  n.aux.resize(support.size());
  for (int i = 0; i < tv.shape[0]; ++i) {
    n.aux[i] = support[i] ? 1 : 0;
    n.value.at(i) = support[i] ? tv.at(i) - logz
                               : -std::numeric_limits<double>::infinity();
  }
  return push(std::move(n));
}

NodeId Tape::pick(NodeId v, int index) {
  const Tensor& tv = nodes_[v].value;
  require_vector("pick", tv);
  if (index < 0 || index >= tv.shape[0])
    throw NumericalError("pick index " + std::to_string(index) +
                         " out of range for " + tv.shape_str());
  Node n;
  n.op = Op::Pick;
  n.parents = {v};
  n.aux = {index};
  n.value = Tensor({1});
  n.value.at(0) = tv.at(index);
  return push(std::move(n));
}

NodeId Tape::weighted_sum(NodeId alpha, const std::vector<NodeId>& rows) {
  const Tensor& ta = nodes_[alpha].value;
  require_vector("weighted_sum", ta);
  if (ta.shape[0] != static_cast<int>(rows.size()))
    throw NumericalError("weighted_sum: weight count " +
                         std::to_string(ta.shape[0]) + " vs rows " +
                         std::to_string(rows.size()));
  int dim = nodes_[rows[0]].value.shape[0];
  Node n;
  n.op = Op::WeightedSum;
  n.parents.reserve(rows.size() + 1);
  n.parents.push_back(alpha);
  for (NodeId r : rows) {
    require_vector("weighted_sum", nodes_[r].value);
    if (nodes_[r].value.shape[0] != dim)
      shape_error("weighted_sum", nodes_[rows[0]].value, nodes_[r].value);
    n.parents.push_back(r);
  }
  n.value = Tensor({dim});
  for (size_t i = 0; i < rows.size(); ++i) {
    double a = ta.at(static_cast<int>(i));
    const Tensor& r = nodes_[rows[i]].value;
    for (int j = 0; j < dim; ++j) n.value.at(j) += a * r.at(j);
  }
  return push(std::move(n));
}

void Tape::backward(NodeId loss, double seed) {
  if (nodes_[loss].value.size() != 1)
    throw NumericalError("backward requires a scalar loss, got " +
                         nodes_[loss].value.shape_str());
  for (auto& n : nodes_) {
    n.grad = Tensor(n.value.shape);
  }
  nodes_[loss].grad.at(0) = seed;
  for (int id = loss; id >= 0; --id) step_backward(id);
}

void Tape::step_backward(int id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
    case Op::Const:
      break;
    case Op::Row: {
      Tensor& pg = nodes_[n.parents[0]].grad;
      int r = n.aux[0];
      for (int j = 0; j < g.shape[0]; ++j) pg.at(r, j) += g.at(j);
      break;
    }
    case Op::MatVec: {
      const Tensor& w = nodes_[n.parents[0]].value;
      const Tensor& x = nodes_[n.parents[1]].value;
      Tensor& gw = nodes_[n.parents[0]].grad;
      Tensor& gx = nodes_[n.parents[1]].grad;
      for (int i = 0; i < w.rows(); ++i) {
        double gi = g.at(i);
        if (gi == 0.0) continue;
        for (int j = 0; j < w.cols(); ++j) {
          gw.at(i, j) += gi * x.at(j);
          gx.at(j) += gi * w.at(i, j);
        }
      }
      break;
    }
    case Op::Add: {
      for (int p = 0; p < 2; ++p) {
        Tensor& pg = nodes_[n.parents[p]].grad;
        for (int64_t i = 0; i < g.size(); ++i) pg.data[i] += g.data[i];
      }
      break;
    }
    case Op::Sub: {
      Tensor& ga = nodes_[n.parents[0]].grad;
      Tensor& gb = nodes_[n.parents[1]].grad;
      for (int64_t i = 0; i < g.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] -= g.data[i];
      }
      break;
    }
    case Op::Mul: {
      const Tensor& a = nodes_[n.parents[0]].value;
      const Tensor& b = nodes_[n.parents[1]].value;
      Tensor& ga = nodes_[n.parents[0]].grad;
      Tensor& gb = nodes_[n.parents[1]].grad;
      for (int64_t i = 0; i < g.size(); ++i) {
        ga.data[i] += g.data[i] * b.data[i];
        gb.data[i] += g.data[i] * a.data[i];
      }
      break;
    }
    case Op::Tanh: {
      Tensor& pg = nodes_[n.parents[0]].grad;
      for (int64_t i = 0; i < g.size(); ++i)
        pg.data[i] += g.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
      break;
    }
    case Op::Sigmoid: {
      Tensor& pg = nodes_[n.parents[0]].grad;
      for (int64_t i = 0; i < g.size(); ++i)
        pg.data[i] += g.data[i] * n.value.data[i] * (1.0 - n.value.data[i]);
      break;
    }
    case Op::Concat: {
      int off = 0;
      for (NodeId p : n.parents) {
        Tensor& pg = nodes_[p].grad;
        for (int i = 0; i < pg.shape[0]; ++i) pg.at(i) += g.at(off + i);
        off += pg.shape[0];
      }
      break;
    }
    case Op::Dot: {
      const Tensor& a = nodes_[n.parents[0]].value;
      const Tensor& b = nodes_[n.parents[1]].value;
      Tensor& ga = nodes_[n.parents[0]].grad;
      Tensor& gb = nodes_[n.parents[1]].grad;
      double gs = g.at(0);
      for (int64_t i = 0; i < a.size(); ++i) {
        ga.data[i] += gs * b.data[i];
        gb.data[i] += gs * a.data[i];
      }
      break;
    }
    case Op::Stack: {
      for (size_t i = 0; i < n.parents.size(); ++i)
        nodes_[n.parents[i]].grad.at(0) += g.at(static_cast<int>(i));
      break;
    }
    case Op::MaskedSoftmax: {
      Tensor& pg = nodes_[n.parents[0]].grad;
      double inner = 0.0;
      for (int i = 0; i < g.shape[0]; ++i)
        if (n.aux[i]) inner += n.value.at(i) * g.at(i);
      for (int i = 0; i < g.shape[0]; ++i)
        if (n.aux[i]) pg.at(i) += n.value.at(i) * (g.at(i) - inner);
      break;
    }
    case Op::LogSoftmaxSupport: {
      Tensor& pg = nodes_[n.parents[0]].grad;
      double gsum = 0.0;
      for (int i = 0; i < g.shape[0]; ++i)
        if (n.aux[i]) gsum += g.at(i);
      for (int i = 0; i < g.shape[0]; ++i)
        if (n.aux[i]) pg.at(i) += g.at(i) - std::exp(n.value.at(i)) * gsum;
      break;
    }
    case Op::Pick: {
      nodes_[n.parents[0]].grad.at(n.aux[0]) += g.at(0);
      break;
    }
    case Op::WeightedSum: {
      const Tensor& alpha = nodes_[n.parents[0]].value;
      Tensor& galpha = nodes_[n.parents[0]].grad;
      for (size_t i = 1; i < n.parents.size(); ++i) {
        const Tensor& r = nodes_[n.parents[i]].value;
        Tensor& gr = nodes_[n.parents[i]].grad;
        double a = alpha.at(static_cast<int>(i - 1));
        double d = 0.0;
        for (int j = 0; j < g.shape[0]; ++j) {
          d += r.at(j) * g.at(j);
          gr.at(j) += a * g.at(j);
        }
        galpha.at(static_cast<int>(i - 1)) += d;
      }
      break;
    }
  }
}

void Tape::accumulate_grads(ParamStore& store, double scale) const {
  for (const auto& [name, id] : param_leaves_) {
    const Tensor& g = nodes_[id].grad;
    if (g.size() == 0) continue;  // backward not run
    Tensor& dst = store.grads.at(name);
    for (int64_t i = 0; i < g.size(); ++i) dst.data[i] += scale * g.data[i];
  }
}

}  // namespace mxfr
