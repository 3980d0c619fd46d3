#pragma once
// Reverse-mode automatic differentiation on an explicit tape.
//
// Every recorded node stores its operation, input node ids and forward value.
// backward() seeds a scalar node with adjoint 1 and sweeps the tape once in
// reverse; replay() recomputes every forward value from the stored graph and
// must reproduce the originals bit for bit.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "poislearn/tensor.hpp"

namespace poislearn {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  MatVec,
  MatVecT,
  MatMul,
  Dot,
  Cross3,
  Softplus,
  Sigmoid,
  Exp,
  Log,
  Square,
  Sum,
  L2Norm,
  Neg,
  Row,
  Col,
  SkewFromUpper,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::MatVec: return "matvec";
    case Op::MatVecT: return "matvec_t";
    case Op::MatMul: return "matmul";
    case Op::Dot: return "dot";
    case Op::Cross3: return "cross3";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::L2Norm: return "l2norm";
    case Op::Neg: return "neg";
    case Op::Row: return "row";
    case Op::Col: return "col";
    case Op::SkewFromUpper: return "skew_from_upper";
  }
  return "?";
}

class Tape;

// Adjoints produced by one backward sweep. Ids of nodes the seed does not
// depend on map to a zero tensor of the node's shape.
struct Gradients {
  std::vector<Tensor> adj;
  const Tape* tape = nullptr;

  Tensor get(std::int32_t id) const;
};

class Tape {
 public:
  using Id = std::int32_t;

  Id leaf(Tensor v) {
    nodes_.push_back(Node{Op::Leaf, -1, -1, 0, std::move(v)});
    return last();
  }

  Id constant(double v) { return leaf(Tensor::scalar(v)); }

  Id add(Id a, Id b) { return record(Op::Add, a, b); }
  Id sub(Id a, Id b) { return record(Op::Sub, a, b); }
  Id mul(Id a, Id b) { return record(Op::Mul, a, b); }
  Id div(Id a, Id b) { return record(Op::Div, a, b); }
  Id matvec(Id a, Id b) { return record(Op::MatVec, a, b); }
  Id matvec_t(Id a, Id b) { return record(Op::MatVecT, a, b); }
  Id matmul(Id a, Id b) { return record(Op::MatMul, a, b); }
  Id dot(Id a, Id b) { return record(Op::Dot, a, b); }
  Id cross3(Id a, Id b) { return record(Op::Cross3, a, b); }
  Id softplus(Id a) { return record(Op::Softplus, a, -1); }
  Id sigmoid(Id a) { return record(Op::Sigmoid, a, -1); }
  Id exp(Id a) { return record(Op::Exp, a, -1); }
  Id log(Id a) { return record(Op::Log, a, -1); }
  Id square(Id a) { return record(Op::Square, a, -1); }
  Id sum(Id a) { return record(Op::Sum, a, -1); }
  Id l2norm(Id a) { return record(Op::L2Norm, a, -1); }
  Id neg(Id a) { return record(Op::Neg, a, -1); }
  Id row(Id a, int i) { return record(Op::Row, a, -1, i); }
  Id col(Id a, int j) { return record(Op::Col, a, -1, j); }
  Id skew_from_upper(Id a) { return record(Op::SkewFromUpper, a, -1); }

  const Tensor& value(Id id) const { return at(id).val; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  Gradients backward(Id seed) const {
    const Node& s = at(seed);
    if (!s.val.is_scalar()) {
      throw std::invalid_argument(std::string("backward: seed node is ") + s.val.shape_str() +
                                  ", expected 1x1");
    }
    Gradients g;
    g.tape = this;
    g.adj.resize(nodes_.size());
    g.adj[seed] = Tensor::scalar(1.0);
    for (Id i = seed; i >= 0; --i) {
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.op == Op::Leaf || g.adj[static_cast<std::size_t>(i)].empty()) continue;
      pull_back(nd, g.adj[static_cast<std::size_t>(i)], g.adj);
    }
    return g;
  }

  // Recompute all forward values from the recorded graph.
  std::vector<Tensor> replay() const {
    std::vector<Tensor> vals;
    vals.reserve(nodes_.size());
    for (const Node& nd : nodes_) {
      if (nd.op == Op::Leaf) {
        vals.push_back(nd.val);
      } else {
        const Tensor& a = vals[static_cast<std::size_t>(nd.a)];
        const Tensor* b = nd.b >= 0 ? &vals[static_cast<std::size_t>(nd.b)] : nullptr;
        vals.push_back(forward(nd.op, a, b, nd.imm));
      }
    }
    return vals;
  }

 private:
  struct Node {
    Op op;
    Id a;
    Id b;
    int imm;
    Tensor val;
  };

  std::vector<Node> nodes_;

  Id last() const { return static_cast<Id>(nodes_.size()) - 1; }

  const Node& at(Id id) const {
    if (id < 0 || id >= static_cast<Id>(nodes_.size())) {
      throw std::out_of_range("tape: bad node id " + std::to_string(id));
    }
    return nodes_[static_cast<std::size_t>(id)];
  }

  Id record(Op op, Id a, Id b, int imm = 0) {
    const Tensor& av = at(a).val;
    const Tensor* bv = b >= 0 ? &at(b).val : nullptr;
    Tensor v = forward(op, av, bv, imm);
    nodes_.push_back(Node{op, a, b, imm, std::move(v)});
    return last();
  }

  static Tensor forward(Op op, const Tensor& a, const Tensor* b, int imm) {
    switch (op) {
      case Op::Add: return poislearn::add(a, *b);
      case Op::Sub: return poislearn::sub(a, *b);
      case Op::Mul: return poislearn::mul(a, *b);
      case Op::Div: return poislearn::div(a, *b);
      case Op::MatVec: return poislearn::matvec(a, *b);
      case Op::MatVecT: return poislearn::matvec_t(a, *b);
      case Op::MatMul: return poislearn::matmul(a, *b);
      case Op::Dot: return poislearn::dot(a, *b);
      case Op::Cross3: return poislearn::cross3(a, *b);
      case Op::Softplus: return poislearn::softplus(a);
      case Op::Sigmoid: return poislearn::sigmoid(a);
      case Op::Exp: return poislearn::exp(a);
      case Op::Log: return poislearn::log(a);
      case Op::Square: return poislearn::square(a);
      case Op::Sum: return poislearn::sum(a);
      case Op::L2Norm: return poislearn::l2norm(a);
      case Op::Neg: return poislearn::neg(a);
      case Op::Row: return poislearn::row(a, imm);
      case Op::Col: return poislearn::col(a, imm);
      case Op::SkewFromUpper: return poislearn::skew_from_upper(a);
      case Op::Leaf: break;
    }
    throw std::logic_error("tape: unexpected op");
  }

  // Add "t" into adj[id], materializing the slot on first touch.
  static void acc(std::vector<Tensor>& adj, Id id, Tensor t) {
    Tensor& slot = adj[static_cast<std::size_t>(id)];
    if (slot.empty()) {
      slot = std::move(t);
      return;
    }
    for (std::size_t i = 0; i < slot.size(); ++i) slot.d[i] += t.d[i];
  }

  static void acc_scaled(std::vector<Tensor>& adj, Id id, const Tensor& t, double c) {
    Tensor& slot = adj[static_cast<std::size_t>(id)];
    if (slot.empty()) slot = Tensor(t.rows, t.cols);
    for (std::size_t i = 0; i < slot.size(); ++i) slot.d[i] += c * t.d[i];
  }

  void pull_back(const Node& nd, const Tensor& g, std::vector<Tensor>& adj) const {
    const Tensor& av = at(nd.a).val;
    switch (nd.op) {
      case Op::Add: {
        acc(adj, nd.a, g);
        acc(adj, nd.b, g);
        return;
      }
      case Op::Sub: {
        acc(adj, nd.a, g);
        acc_scaled(adj, nd.b, g, -1.0);
        return;
      }
      case Op::Mul: {
        const Tensor& bv = at(nd.b).val;
        if (av.is_scalar() && !bv.is_scalar()) {
          acc(adj, nd.a, poislearn::dot(g, bv));
          acc_scaled(adj, nd.b, g, av.s());
        } else if (bv.is_scalar() && !av.is_scalar()) {
          acc_scaled(adj, nd.a, g, bv.s());
          acc(adj, nd.b, poislearn::dot(g, av));
        } else {
          acc(adj, nd.a, poislearn::mul(g, bv));
          acc(adj, nd.b, poislearn::mul(g, av));
        }
        return;
      }
      case Op::Div: {
        const Tensor& bv = at(nd.b).val;
        if (bv.is_scalar() && !av.is_scalar()) {
          acc_scaled(adj, nd.a, g, 1.0 / bv.s());
          acc_scaled(adj, nd.b, poislearn::dot(g, av), -1.0 / (bv.s() * bv.s()));
        } else {
          acc(adj, nd.a, poislearn::div(g, bv));
          Tensor gb = poislearn::mul(g, av);
          for (std::size_t i = 0; i < gb.size(); ++i) gb.d[i] = -gb.d[i] / (bv.d[i] * bv.d[i]);
          acc(adj, nd.b, std::move(gb));
        }
        return;
      }
      case Op::MatVec: {
        // y = A b : dA = g b^T, db = A^T g.
        const Tensor& bv = at(nd.b).val;
        Tensor da(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i)
          for (int j = 0; j < av.cols; ++j) da(i, j) = g.d[static_cast<std::size_t>(i)] * bv.d[static_cast<std::size_t>(j)];
        acc(adj, nd.a, std::move(da));
        acc(adj, nd.b, poislearn::matvec_t(av, g));
        return;
      }
      case Op::MatVecT: {
        // y = A^T b : dA = b g^T, db = A g.
        const Tensor& bv = at(nd.b).val;
        Tensor da(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i)
          for (int j = 0; j < av.cols; ++j) da(i, j) = bv.d[static_cast<std::size_t>(i)] * g.d[static_cast<std::size_t>(j)];
        acc(adj, nd.a, std::move(da));
        acc(adj, nd.b, poislearn::matvec(av, g));
        return;
      }
      case Op::MatMul: {
        // Y = A B : dA = g B^T, dB = A^T g.
        const Tensor& bv = at(nd.b).val;
        Tensor da(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i)
          for (int j = 0; j < av.cols; ++j) {
            double acc_v = 0.0;
            for (int k = 0; k < bv.cols; ++k) acc_v += g(i, k) * bv(j, k);
            da(i, j) = acc_v;
          }
        Tensor db(bv.rows, bv.cols);
        for (int i = 0; i < bv.rows; ++i)
          for (int j = 0; j < bv.cols; ++j) {
            double acc_v = 0.0;
            for (int k = 0; k < av.rows; ++k) acc_v += av(k, i) * g(k, j);
            db(i, j) = acc_v;
          }
        acc(adj, nd.a, std::move(da));
        acc(adj, nd.b, std::move(db));
        return;
      }
      case Op::Dot: {
        const Tensor& bv = at(nd.b).val;
        acc_scaled(adj, nd.a, bv, g.s());
        acc_scaled(adj, nd.b, av, g.s());
        return;
      }
      case Op::Cross3: {
        const Tensor& bv = at(nd.b).val;
        acc(adj, nd.a, poislearn::cross3(bv, g));
        acc(adj, nd.b, poislearn::cross3(g, av));
        return;
      }
      case Op::Softplus: {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da.d[i] *= poislearn::sigmoid(av.d[i]);
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::Sigmoid: {
        const Tensor& v = nd.val;
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da.d[i] *= v.d[i] * (1.0 - v.d[i]);
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::Exp: {
        acc(adj, nd.a, poislearn::mul(g, nd.val));
        return;
      }
      case Op::Log: {
        acc(adj, nd.a, poislearn::div(g, av));
        return;
      }
      case Op::Square: {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da.d[i] *= 2.0 * av.d[i];
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::Sum: {
        Tensor da(av.rows, av.cols);
        for (std::size_t i = 0; i < da.size(); ++i) da.d[i] = g.s();
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::L2Norm: {
        double nv = nd.val.s();
        if (nv != 0.0) acc_scaled(adj, nd.a, av, g.s() / nv);
        return;
      }
      case Op::Neg: {
        acc_scaled(adj, nd.a, g, -1.0);
        return;
      }
      case Op::Row: {
        Tensor da(av.rows, av.cols);
        for (int j = 0; j < av.cols; ++j) da(nd.imm, j) = g.d[static_cast<std::size_t>(j)];
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::Col: {
        Tensor da(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i) da(i, nd.imm) = g.d[static_cast<std::size_t>(i)];
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::SkewFromUpper: {
        // val(i,j) = v_k, val(j,i) = -v_k for the k-th pair (i,j).
        int n = nd.val.rows;
        Tensor da(av.rows, 1);
        int k = 0;
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j, ++k) da.d[static_cast<std::size_t>(k)] = g(i, j) - g(j, i);
        acc(adj, nd.a, std::move(da));
        return;
      }
      case Op::Leaf: return;
    }
  }
};

inline Tensor Gradients::get(std::int32_t id) const {
  const Tensor& slot = adj[static_cast<std::size_t>(id)];
  if (!slot.empty()) return slot;
  const Tensor& v = tape->value(id);
  return Tensor(v.rows, v.cols);
}

}  // namespace poislearn
