#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmn/errors.hpp"

namespace dmn {

// ---------------------------------------------------------------------------
// Tensor: dense row-major array of Real. Rank 0 is a scalar (numel 1),
// rank 1 a vector, rank 2 a matrix. Higher ranks are unused here.
// ---------------------------------------------------------------------------
template <class Real>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> data;

  Tensor() : data(1, Real(0)) {}  // scalar zero

  Tensor(std::vector<std::size_t> s, std::vector<Real> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_to_string(shape));
    }
  }

  static std::size_t shape_numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<Real>(n, Real(0)));
  }

  static Tensor scalar(Real v) { return Tensor({}, {v}); }

  static Tensor vector(std::vector<Real> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<Real> v) {
    return Tensor({r, c}, std::move(v));
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const { return rank() == 2 ? shape[0] : numel(); }
  std::size_t cols() const { return rank() == 2 ? shape[1] : 1; }

  Real& operator[](std::size_t i) { return data[i]; }
  Real operator[](std::size_t i) const { return data[i]; }

  Real& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  Real at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  Real item() const {
    if (numel() != 1) {
      throw ContractError("item() on tensor of shape " + shape_string());
    }
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (Real v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::string shape_string() const { return shape_to_string(shape); }

  static std::string shape_to_string(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) os << "x";
      os << s[i];
    }
    os << ")";
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Parameter: a trainable (or frozen) tensor with a persistent gradient
// buffer. Owned by the model, bound into one Graph per example.
// ---------------------------------------------------------------------------
template <class Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool trainable = true;
  bool decay = true;  // participates in L2 regularization

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v, bool train = true, bool dec = true)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor<Real>::zeros(value.shape)),
        trainable(train),
        decay(dec) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), Real(0)); }
};

template <class Real>
class Graph;

// Handle to a node inside a Graph. Cheap to copy; valid for the graph's
// lifetime.
template <class Real>
struct Val {
  Graph<Real>* graph = nullptr;
  int id = -1;
};

// ---------------------------------------------------------------------------
// Graph: an append-only tape of operations. Insertion order is a topological
// order, so backward() is a single reverse sweep. One graph per example;
// construction and backward are confined to one thread.
// ---------------------------------------------------------------------------
template <class Real>
class Graph {
 public:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;                 // valid only when grad_live
    bool grad_live = false;
    std::function<void()> backprop;    // empty for leaves
    Parameter<Real>* param = nullptr;  // set for bound parameter leaves
  };

  // Non-trainable leaf (input data, constants).
  Val<Real> input(Tensor<Real> v) { return push(std::move(v), "input"); }

  // Trainable leaf; binding the same Parameter twice yields the same node,
  // so gradients from every use accumulate in one place.
  Val<Real> param(Parameter<Real>& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return {this, it->second};
    Val<Real> v = push(p.value, p.name.empty() ? "param" : p.name.c_str());
    nodes_[v.id].param = &p;
    bound_.emplace(&p, v.id);
    return v;
  }

  Val<Real> push(Tensor<Real> value, const char* op) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value in ") + op);
    }
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(value), Tensor<Real>(), false, {}, nullptr});
    return {this, id};
  }

  void set_backprop(int id, std::function<void()> f) {
    nodes_[id].backprop = std::move(f);
  }

  const Tensor<Real>& value(Val<Real> v) const { return nodes_[v.id].value; }

  // Gradient buffer of a node, allocated to zeros on first access.
  Tensor<Real>& grad_ref(int id) {
    Node& n = nodes_[id];
    if (!n.grad_live) {
      n.grad = Tensor<Real>::zeros(n.value.shape);
      n.grad_live = true;
    }
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[id].grad_live; }

  // Gradient of a node after backward(); zeros if it was never reached.
  const Tensor<Real>& grad(Val<Real> v) {
    return grad_ref(v.id);
  }

  // Reverse-mode sweep from a scalar root. Trainable-leaf gradients are
  // accumulated into their Parameter::grad.
  void backward(Val<Real> root) {
    if (root.graph != this) {
      throw ContractError("backward: root belongs to a different graph");
    }
    const Tensor<Real>& rv = nodes_[root.id].value;
    if (rv.numel() != 1) {
      throw ContractError("backward: root must be scalar, got shape " +
                          rv.shape_string());
    }
    Tensor<Real>& rg = grad_ref(root.id);
    std::fill(rg.data.begin(), rg.data.end(), Real(1));
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.grad_live) continue;  // nothing downstream consumed this node
      if (n.backprop) {
        n.backprop();
      } else if (n.param && n.param->trainable) {
        Tensor<Real>& pg = n.param->grad;
        for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Real>*, int> bound_;
};

// ---------------------------------------------------------------------------
// Operations. Each appends one tape node whose closure adds this node's
// gradient contribution to its parents. Gradients accumulate additively,
// which is what weight sharing across time steps relies on.
// ---------------------------------------------------------------------------

// Matrix product: (m x k)·(k x n) -> (m x n), or (m x k)·(k) -> (m).
// The vector path is by far the hottest kernel in training, so it gets its
// own contiguous loops.
template <class Real>
Val<Real> matmul(Val<Real> a, Val<Real> b) {
  Graph<Real>& g = *a.graph;
  const Tensor<Real>& A = g.value(a);
  const Tensor<Real>& B = g.value(b);
  if (A.rank() != 2 || B.rank() < 1 || B.rank() > 2 || A.shape[1] != B.rows()) {
    throw ShapeError("matmul: incompatible shapes " + A.shape_string() +
                     " and " + B.shape_string());
  }
  const std::size_t m = A.shape[0], k = A.shape[1], n = B.cols();

  if (B.rank() == 1) {
    Tensor<Real> out = Tensor<Real>::zeros({m});
    const Real* bv = B.data.data();
    for (std::size_t i = 0; i < m; ++i) {
      const Real* arow = A.data.data() + i * k;
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * bv[p];
      out.data[i] = acc;
    }
    Val<Real> o = g.push(std::move(out), "matmul");
    g.set_backprop(o.id, [&g, ai = a.id, bi = b.id, oi = o.id, m, k]() {
      const Tensor<Real>& G = g.grad_ref(oi);
      const Tensor<Real>& A2 = g.value({&g, ai});
      const Tensor<Real>& B2 = g.value({&g, bi});
      Tensor<Real>& dA = g.grad_ref(ai);
      Tensor<Real>& dB = g.grad_ref(bi);
      const Real* bv2 = B2.data.data();
      Real* dbv = dB.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        const Real gi = G.data[i];
        const Real* arow = A2.data.data() + i * k;
        Real* darow = dA.data.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          darow[p] += gi * bv2[p];
          dbv[p] += gi * arow[p];
        }
      }
    });
    return o;
  }

  Tensor<Real> out = Tensor<Real>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = A.data.data() + i * k;
    Real* orow = out.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = B.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Val<Real> o = g.push(std::move(out), "matmul");
  g.set_backprop(o.id, [&g, ai = a.id, bi = b.id, oi = o.id, m, k, n]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    const Tensor<Real>& A2 = g.value({&g, ai});
    const Tensor<Real>& B2 = g.value({&g, bi});
    Tensor<Real>& dA = g.grad_ref(ai);
    Tensor<Real>& dB = g.grad_ref(bi);
    for (std::size_t i = 0; i < m; ++i) {
      const Real* grow = G.data.data() + i * n;
      Real* darow = dA.data.data() + i * k;
      const Real* a2row = A2.data.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        // dA[i,p] += G[i,:]·B[p,:]
        const Real* brow = B2.data.data() + p * n;
        Real acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        darow[p] += acc;
        // dB[p,:] += A[i,p]·G[i,:]
        const Real av = a2row[p];
        Real* dbrow = dB.data.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
      }
    }
  });
  return o;
}

namespace detail {

enum class EwKind { Add, Sub, Mul, AbsDiff };

// Elementwise op over equal shapes; for Add/Sub/Mul one operand may be a
// single-element tensor, which broadcasts.
template <class Real>
Val<Real> elementwise(EwKind kind, Val<Real> a, Val<Real> b, const char* name) {
  Graph<Real>& g = *a.graph;
  const Tensor<Real>& A = g.value(a);
  const Tensor<Real>& B = g.value(b);
  const bool a_scalar = A.numel() == 1 && !A.same_shape(B);
  const bool b_scalar = B.numel() == 1 && !B.same_shape(A);
  if (!A.same_shape(B) && !a_scalar && !b_scalar) {
    throw ShapeError(std::string(name) + ": shape mismatch " +
                     A.shape_string() + " vs " + B.shape_string());
  }
  if (kind == EwKind::AbsDiff && (a_scalar || b_scalar)) {
    throw ShapeError(std::string("absdiff: shape mismatch ") +
                     A.shape_string() + " vs " + B.shape_string());
  }
  const Tensor<Real>& big = a_scalar ? B : A;
  Tensor<Real> out = Tensor<Real>::zeros(big.shape);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const Real x = A.data[a_scalar ? 0 : i];
    const Real y = B.data[b_scalar ? 0 : i];
    switch (kind) {
      case EwKind::Add: out.data[i] = x + y; break;
      case EwKind::Sub: out.data[i] = x - y; break;
      case EwKind::Mul: out.data[i] = x * y; break;
      case EwKind::AbsDiff: out.data[i] = std::abs(x - y); break;
    }
  }
  Val<Real> o = g.push(std::move(out), name);
  g.set_backprop(o.id, [&g, kind, ai = a.id, bi = b.id, oi = o.id, a_scalar,
                        b_scalar, n]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    const Tensor<Real>& A2 = g.value({&g, ai});
    const Tensor<Real>& B2 = g.value({&g, bi});
    Tensor<Real>& dA = g.grad_ref(ai);
    Tensor<Real>& dB = g.grad_ref(bi);
    for (std::size_t i = 0; i < n; ++i) {
      const Real gi = G.data[i];
      const std::size_t ia = a_scalar ? 0 : i;
      const std::size_t ib = b_scalar ? 0 : i;
      switch (kind) {
        case EwKind::Add:
          dA.data[ia] += gi;
          dB.data[ib] += gi;
          break;
        case EwKind::Sub:
          dA.data[ia] += gi;
          dB.data[ib] -= gi;
          break;
        case EwKind::Mul:
          dA.data[ia] += gi * B2.data[ib];
          dB.data[ib] += gi * A2.data[ia];
          break;
        case EwKind::AbsDiff: {
          const Real d = A2.data[ia] - B2.data[ib];
          const Real s = d > Real(0) ? Real(1) : (d < Real(0) ? Real(-1) : Real(0));
          dA.data[ia] += gi * s;
          dB.data[ib] -= gi * s;
          break;
        }
      }
    }
  });
  return o;
}

}  // namespace detail

template <class Real>
Val<Real> operator+(Val<Real> a, Val<Real> b) {
  return detail::elementwise(detail::EwKind::Add, a, b, "add");
}

template <class Real>
Val<Real> operator-(Val<Real> a, Val<Real> b) {
  return detail::elementwise(detail::EwKind::Sub, a, b, "sub");
}

// Hadamard product; broadcasts when one side is a single element.
template <class Real>
Val<Real> operator*(Val<Real> a, Val<Real> b) {
  return detail::elementwise(detail::EwKind::Mul, a, b, "hadamard");
}

template <class Real>
Val<Real> absdiff(Val<Real> a, Val<Real> b) {
  return detail::elementwise(detail::EwKind::AbsDiff, a, b, "absdiff");
}

// scale*x + shift, with compile-time constants (no parent for them).
template <class Real>
Val<Real> affine(Val<Real> x, Real scale, Real shift) {
  Graph<Real>& g = *x.graph;
  const Tensor<Real>& X = g.value(x);
  Tensor<Real> out = X;
  for (auto& v : out.data) v = scale * v + shift;
  Val<Real> o = g.push(std::move(out), "affine");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id, scale]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    Tensor<Real>& dX = g.grad_ref(xi);
    for (std::size_t i = 0; i < G.numel(); ++i) dX.data[i] += scale * G.data[i];
  });
  return o;
}

template <class Real>
Val<Real> operator*(Real c, Val<Real> x) { return affine(x, c, Real(0)); }

template <class Real>
Val<Real> operator-(Real c, Val<Real> x) { return affine(x, Real(-1), c); }

template <class Real>
Val<Real> sigmoid(Val<Real> x) {
  Graph<Real>& g = *x.graph;
  Tensor<Real> out = g.value(x);
  for (auto& v : out.data) {
    v = v >= Real(0) ? Real(1) / (Real(1) + std::exp(-v))
                     : std::exp(v) / (Real(1) + std::exp(v));
  }
  Val<Real> o = g.push(std::move(out), "sigmoid");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    const Tensor<Real>& Y = g.value({&g, oi});
    Tensor<Real>& dX = g.grad_ref(xi);
    for (std::size_t i = 0; i < G.numel(); ++i) {
      dX.data[i] += G.data[i] * Y.data[i] * (Real(1) - Y.data[i]);
    }
  });
  return o;
}

template <class Real>
Val<Real> tanh_(Val<Real> x) {
  Graph<Real>& g = *x.graph;
  Tensor<Real> out = g.value(x);
  for (auto& v : out.data) v = std::tanh(v);
  Val<Real> o = g.push(std::move(out), "tanh");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    const Tensor<Real>& Y = g.value({&g, oi});
    Tensor<Real>& dX = g.grad_ref(xi);
    for (std::size_t i = 0; i < G.numel(); ++i) {
      dX.data[i] += G.data[i] * (Real(1) - Y.data[i] * Y.data[i]);
    }
  });
  return o;
}

// Softmax over the last axis, computed with max subtraction. A rank-0 or
// rank-1 tensor is one row; a matrix is normalized per row.
template <class Real>
Val<Real> softmax(Val<Real> x) {
  Graph<Real>& g = *x.graph;
  const Tensor<Real>& X = g.value(x);
  const std::size_t last = X.rank() == 0 ? 1 : X.shape.back();
  const std::size_t rows = X.numel() / last;
  Tensor<Real> out = X;
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = out.data.data() + r * last;
    Real mx = row[0];
    for (std::size_t j = 1; j < last; ++j) mx = std::max(mx, row[j]);
    Real sum = 0;
    for (std::size_t j = 0; j < last; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < last; ++j) row[j] /= sum;
  }
  Val<Real> o = g.push(std::move(out), "softmax");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id, rows, last]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    const Tensor<Real>& Y = g.value({&g, oi});
    Tensor<Real>& dX = g.grad_ref(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* grow = G.data.data() + r * last;
      const Real* yrow = Y.data.data() + r * last;
      Real* drow = dX.data.data() + r * last;
      Real gy = 0;
      for (std::size_t j = 0; j < last; ++j) gy += grow[j] * yrow[j];
      for (std::size_t j = 0; j < last; ++j) {
        drow[j] += yrow[j] * (grow[j] - gy);
      }
    }
  });
  return o;
}

// Concatenation of flattened inputs into one vector.
template <class Real>
Val<Real> concat(std::span<const Val<Real>> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Graph<Real>& g = *parts[0].graph;
  std::size_t total = 0;
  for (auto p : parts) total += g.value(p).numel();
  Tensor<Real> out = Tensor<Real>::zeros({total});
  std::size_t off = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  ids.reserve(parts.size());
  for (auto p : parts) {
    const Tensor<Real>& P = g.value(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + off);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += P.numel();
  }
  Val<Real> o = g.push(std::move(out), "concat");
  g.set_backprop(o.id, [&g, ids = std::move(ids), offsets = std::move(offsets),
                        oi = o.id]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor<Real>& dP = g.grad_ref(ids[k]);
      const std::size_t n = dP.numel();
      for (std::size_t i = 0; i < n; ++i) dP.data[i] += G.data[offsets[k] + i];
    }
  });
  return o;
}

template <class Real>
Val<Real> concat(std::initializer_list<Val<Real>> parts) {
  std::vector<Val<Real>> v(parts);
  return concat(std::span<const Val<Real>>(v));
}

// Flat slice [start, start+len) as a vector.
template <class Real>
Val<Real> slice(Val<Real> x, std::size_t start, std::size_t len) {
  Graph<Real>& g = *x.graph;
  const Tensor<Real>& X = g.value(x);
  if (start + len > X.numel()) {
    throw IndexError("slice: [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds numel " +
                     std::to_string(X.numel()));
  }
  Tensor<Real> out = Tensor<Real>::zeros({len});
  std::copy(X.data.begin() + start, X.data.begin() + start + len,
            out.data.begin());
  Val<Real> o = g.push(std::move(out), "slice");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id, start, len]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    Tensor<Real>& dX = g.grad_ref(xi);
    for (std::size_t i = 0; i < len; ++i) dX.data[start + i] += G.data[i];
  });
  return o;
}

// Column j of a matrix, as a vector. Used by embedding lookups.
template <class Real>
Val<Real> column(Val<Real> m, std::size_t j) {
  Graph<Real>& g = *m.graph;
  const Tensor<Real>& M = g.value(m);
  if (M.rank() != 2) {
    throw ShapeError("column: expected a matrix, got " + M.shape_string());
  }
  if (j >= M.shape[1]) {
    throw IndexError("column: index " + std::to_string(j) +
                     " out of range for " + M.shape_string());
  }
  const std::size_t r = M.shape[0], c = M.shape[1];
  Tensor<Real> out = Tensor<Real>::zeros({r});
  for (std::size_t i = 0; i < r; ++i) out.data[i] = M.data[i * c + j];
  Val<Real> o = g.push(std::move(out), "column");
  g.set_backprop(o.id, [&g, mi = m.id, oi = o.id, j, r, c]() {
    const Tensor<Real>& G = g.grad_ref(oi);
    Tensor<Real>& dM = g.grad_ref(mi);
    for (std::size_t i = 0; i < r; ++i) dM.data[i * c + j] += G.data[i];
  });
  return o;
}

// Inner product of two equally sized tensors -> scalar.
template <class Real>
Val<Real> dot(Val<Real> a, Val<Real> b) {
  Graph<Real>& g = *a.graph;
  const Tensor<Real>& A = g.value(a);
  const Tensor<Real>& B = g.value(b);
  if (A.numel() != B.numel()) {
    throw ShapeError("dot: size mismatch " + A.shape_string() + " vs " +
                     B.shape_string());
  }
  Real acc = 0;
  for (std::size_t i = 0; i < A.numel(); ++i) acc += A.data[i] * B.data[i];
  Val<Real> o = g.push(Tensor<Real>::scalar(acc), "dot");
  g.set_backprop(o.id, [&g, ai = a.id, bi = b.id, oi = o.id]() {
    const Real gv = g.grad_ref(oi).data[0];
    const Tensor<Real>& A2 = g.value({&g, ai});
    const Tensor<Real>& B2 = g.value({&g, bi});
    Tensor<Real>& dA = g.grad_ref(ai);
    Tensor<Real>& dB = g.grad_ref(bi);
    for (std::size_t i = 0; i < A2.numel(); ++i) {
      dA.data[i] += gv * B2.data[i];
      dB.data[i] += gv * A2.data[i];
    }
  });
  return o;
}

// Sum of all entries -> scalar.
template <class Real>
Val<Real> sum(Val<Real> x) {
  Graph<Real>& g = *x.graph;
  const Tensor<Real>& X = g.value(x);
  Real acc = 0;
  for (Real v : X.data) acc += v;
  Val<Real> o = g.push(Tensor<Real>::scalar(acc), "sum");
  g.set_backprop(o.id, [&g, xi = x.id, oi = o.id]() {
    const Real gv = g.grad_ref(oi).data[0];
    Tensor<Real>& dX = g.grad_ref(xi);
    for (auto& v : dX.data) v += gv;
  });
  return o;
}

// -log softmax(logits)[target], computed via a stable log-sum-exp.
template <class Real>
Val<Real> cross_entropy(Val<Real> logits, std::size_t target) {
  Graph<Real>& g = *logits.graph;
  const Tensor<Real>& L = g.value(logits);
  const std::size_t k = L.numel();
  if (target >= k) {
    throw IndexError("cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(k) + " classes");
  }
  Real mx = L.data[0];
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, L.data[i]);
  Real sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += std::exp(L.data[i] - mx);
  const Real loss = mx + std::log(sum) - L.data[target];
  Val<Real> o = g.push(Tensor<Real>::scalar(loss), "cross_entropy");
  g.set_backprop(o.id, [&g, li = logits.id, oi = o.id, target, k]() {
    const Real gv = g.grad_ref(oi).data[0];
    const Tensor<Real>& L2 = g.value({&g, li});
    Tensor<Real>& dL = g.grad_ref(li);
    Real mx2 = L2.data[0];
    for (std::size_t i = 1; i < k; ++i) mx2 = std::max(mx2, L2.data[i]);
    Real z = 0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(L2.data[i] - mx2);
    for (std::size_t i = 0; i < k; ++i) {
      const Real p = std::exp(L2.data[i] - mx2) / z;
      dL.data[i] += gv * (p - (i == target ? Real(1) : Real(0)));
    }
  });
  return o;
}

}  // namespace dmn
